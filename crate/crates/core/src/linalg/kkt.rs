use super::{axpy, dot, norm_inf, Cholesky, DenseMatrix, DenseVector, LinalgError};

/// Relative pivot threshold for the `J Jᵀ` rank test.
const RANK_TOL: f64 = 1e-12;

/// Primal step and multipliers of the saddle-point system
///
/// ```text
/// [ H  Jᵀ ] [ d ]     [ g ]
/// [ J  0  ] [ y ] = - [ c ]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub d: DenseVector,
    pub y: DenseVector,
}

impl KktSolution {
    /// Returns `(‖H d + Jᵀ y + g‖∞, ‖J d + c‖∞)`.
    pub fn residuals(
        &self,
        h: &DenseMatrix,
        j: &DenseMatrix,
        g: &DenseVector,
        c: &DenseVector,
    ) -> (f64, f64) {
        let mut dual = h.mul_vec(&self.d);
        dual.axpy(1.0, &j.tr_mul_vec(&self.y));
        dual.axpy(1.0, g);
        let mut primal = j.mul_vec(&self.d);
        primal.axpy(1.0, c);
        (dual.norm_inf(), primal.norm_inf())
    }
}

/// Checks that `J` has numerically full row rank by factoring `J Jᵀ`.
fn gram_factor(j: &DenseMatrix) -> Result<Cholesky, LinalgError> {
    let gram = j.gram_rows();
    let max_diag = (0..gram.rows()).fold(0.0_f64, |m, i| m.max(gram[(i, i)]));
    Cholesky::factor(&gram, RANK_TOL * max_diag).map_err(|e| match e {
        LinalgError::NotPositiveDefinite { row, pivot } => {
            LinalgError::RankDeficientJacobian { row, pivot }
        }
        other => other,
    })
}

/// Solves the KKT system by dense LU with partial pivoting on the assembled
/// `(n+m) x (n+m)` matrix, followed by one round of iterative refinement.
pub fn solve_kkt(
    h: &DenseMatrix,
    j: &DenseMatrix,
    g: &DenseVector,
    c: &DenseVector,
) -> Result<KktSolution, LinalgError> {
    let n = h.rows();
    let m = j.rows();
    if h.cols() != n || j.cols() != n || g.len() != n || c.len() != m {
        return Err(LinalgError::DimensionMismatch(format!(
            "H {}x{}, J {}x{}, g {}, c {}",
            h.rows(),
            h.cols(),
            j.rows(),
            j.cols(),
            g.len(),
            c.len()
        )));
    }
    if m >= n {
        return Err(LinalgError::DimensionMismatch(format!(
            "need fewer constraints than variables, got m={m} n={n}"
        )));
    }
    gram_factor(j)?;

    let size = n + m;
    let mut k = vec![0.0; size * size];
    for r in 0..n {
        k[r * size..r * size + n].copy_from_slice(h.row(r));
    }
    for r in 0..m {
        for col in 0..n {
            let v = j[(r, col)];
            k[(n + r) * size + col] = v;
            k[col * size + n + r] = v;
        }
    }
    let mut rhs: Vec<f64> = g.iter().chain(c.iter()).map(|v| -v).collect();

    let lu = Lu::factor(k.clone(), size)?;
    let mut sol = lu.solve(&rhs);

    // one refinement step: r = rhs - K sol, sol += K⁻¹ r
    for (row, r) in rhs.iter_mut().enumerate() {
        *r -= dot(&k[row * size..(row + 1) * size], &sol);
    }
    let corr = lu.solve(&rhs);
    axpy(1.0, &corr, &mut sol);

    let y = DenseVector::from(sol.split_off(n));
    let out = KktSolution {
        d: DenseVector::from(sol),
        y,
    };
    if !out.d.is_finite() || !out.y.is_finite() {
        return Err(LinalgError::NonFinite("KKT solution"));
    }
    #[cfg(debug_assertions)]
    {
        let (dual, primal) = out.residuals(h, j, g, c);
        let bound = 1e-8 * (1.0 + g.norm_inf() + c.norm_inf());
        debug_assert!(
            dual <= bound && primal <= bound,
            "KKT residuals {dual:e}/{primal:e} exceed {bound:e}"
        );
    }
    Ok(out)
}

/// Least-squares multipliers `argmin_y ‖g + Jᵀ y‖₂`, i.e. the solution of
/// `J Jᵀ y = -J g`.
pub fn least_squares_multipliers(
    j: &DenseMatrix,
    g: &DenseVector,
) -> Result<DenseVector, LinalgError> {
    if j.cols() != g.len() {
        return Err(LinalgError::DimensionMismatch(format!(
            "J has {} columns, g has {} entries",
            j.cols(),
            g.len()
        )));
    }
    let chol = gram_factor(j)?;
    let rhs = j.mul_vec(g).scaled(-1.0);
    Ok(chol.solve(&rhs))
}

/// Row-major LU factors with the row permutation applied in place.
struct Lu {
    size: usize,
    a: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(mut a: Vec<f64>, size: usize) -> Result<Self, LinalgError> {
        let scale = norm_inf(&a).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..size).collect();
        for col in 0..size {
            let (piv_row, piv_abs) = (col..size)
                .map(|r| (r, a[r * size + col].abs()))
                .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
            if piv_abs <= 1e-14 * scale {
                return Err(LinalgError::SingularKkt {
                    col,
                    pivot: piv_abs,
                });
            }
            if piv_row != col {
                for c in 0..size {
                    a.swap(col * size + c, piv_row * size + c);
                }
                perm.swap(col, piv_row);
            }
            let pivot = a[col * size + col];
            for r in (col + 1)..size {
                let factor = a[r * size + col] / pivot;
                if factor == 0.0 {
                    continue;
                }
                a[r * size + col] = factor;
                let (upper, lower) = a.split_at_mut(r * size);
                let src = &upper[col * size + col + 1..col * size + size];
                let dst = &mut lower[col + 1..size];
                axpy(-factor, src, dst);
            }
        }
        Ok(Self { size, a, perm })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.size;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| rhs[p]).collect();
        for i in 0..n {
            let s = dot(&self.a[i * n..i * n + i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.a[i * n + i + 1..(i + 1) * n], &x[i + 1..]);
            x[i] = (x[i] - s) / self.a[i * n + i];
        }
        x
    }
}
