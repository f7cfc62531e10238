use super::{DenseMatrix, DenseVector, LinalgError};

/// Lower-triangular factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    // row-major lower triangle, upper part left at zero
    l: Vec<f64>,
}

/// Factors a symmetric positive definite matrix.
///
/// A pivot at or below `1e-14 * trace(M) / k` is reported as
/// [`LinalgError::NotPositiveDefinite`].
pub fn cholesky_spd(m: &DenseMatrix) -> Result<Cholesky, LinalgError> {
    let k = m.rows().max(1);
    Cholesky::factor(m, 1e-14 * m.trace() / k as f64)
}

impl Cholesky {
    /// Factors `m`, failing when any pivot `L_ii²` is `<= min_pivot`.
    pub fn factor(m: &DenseMatrix, min_pivot: f64) -> Result<Self, LinalgError> {
        if m.rows() != m.cols() {
            return Err(LinalgError::DimensionMismatch(format!(
                "cholesky needs a square matrix, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let n = m.rows();
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let mut diag = m[(j, j)];
            for p in 0..j {
                diag -= l[j * n + p] * l[j * n + p];
            }
            if !(diag > min_pivot) || !diag.is_finite() {
                return Err(LinalgError::NotPositiveDefinite { row: j, pivot: diag });
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut v = m[(i, j)];
                for p in 0..j {
                    v -= l[i * n + p] * l[j * n + p];
                }
                l[i * n + j] = v / ljj;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `M x = rhs` by forward then backward substitution.
    pub fn solve(&self, rhs: &DenseVector) -> DenseVector {
        assert_eq!(rhs.len(), self.n, "rhs length does not match factor");
        let n = self.n;
        let mut z = rhs.clone().into_vec();
        for i in 0..n {
            let mut v = z[i];
            for p in 0..i {
                v -= self.l[i * n + p] * z[p];
            }
            z[i] = v / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut v = z[i];
            for p in (i + 1)..n {
                v -= self.l[p * n + i] * z[p];
            }
            z[i] = v / self.l[i * n + i];
        }
        DenseVector::from(z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_solve() {
        let c = cholesky_spd(&DenseMatrix::identity(3)).unwrap();
        let x = c.solve(&DenseVector::from(vec![1.0, 2.0, 3.0]));
        assert_eq!(x.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn two_by_two() {
        let m = DenseMatrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let rhs = DenseVector::from(vec![8.0, 7.0]);
        let x = cholesky_spd(&m).unwrap().solve(&rhs);
        assert!((x[0] - 1.25).abs() < 1e-14);
        assert!((x[1] - 1.5).abs() < 1e-14);
        let back = m.mul_vec(&x);
        assert!(back.sub(&rhs).norm_inf() < 1e-14);
    }

    #[test]
    fn indefinite_rejected() {
        let m = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(
            cholesky_spd(&m),
            Err(LinalgError::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn non_square_rejected() {
        let m = DenseMatrix::zeros(2, 3);
        assert!(matches!(cholesky_spd(&m), Err(LinalgError::DimensionMismatch(_))));
    }
}
