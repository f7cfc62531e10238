use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{DenseMatrix, DenseVector, LinalgError};

/// Attempts at drawing a full-rank `A` before giving up.
const MAX_DRAWS: usize = 4;

/// Equality constraints `c(x) = 0` of the benchmark problems.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintSpec {
    /// `A x - a1 = 0`
    Linear { a: DenseMatrix, a1: DenseVector },
    /// `‖x‖₂² - a2 = 0`
    L2Ball { a2: f64 },
}

impl ConstraintSpec {
    pub fn l2_ball(a2: f64) -> Result<Self, LinalgError> {
        if a2 > 0.0 && a2.is_finite() {
            Ok(Self::L2Ball { a2 })
        } else {
            Err(LinalgError::InvalidArgument(format!("ball radius² must be positive, got {a2}")))
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Linear { a, .. } => a.rows(),
            Self::L2Ball { .. } => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn eval(&self, x: &DenseVector) -> DenseVector {
        match self {
            Self::Linear { a, a1 } => a.mul_vec(x).sub(a1),
            Self::L2Ball { a2 } => DenseVector::from(vec![x.norm_l2_squared() - a2]),
        }
    }

    pub fn jacobian(&self, x: &DenseVector) -> DenseMatrix {
        match self {
            Self::Linear { a, .. } => a.clone(),
            Self::L2Ball { .. } => {
                DenseMatrix::from_rows(&[x.iter().map(|v| 2.0 * v).collect::<Vec<_>>()])
            }
        }
    }

    /// Sum of the Lipschitz constants of the constraint gradients.
    pub fn gamma(&self) -> f64 {
        match self {
            Self::Linear { .. } => 0.0,
            Self::L2Ball { .. } => 2.0,
        }
    }
}

/// `c(x) = ‖x‖₂² − a2` and `J(x) = 2xᵀ`.
pub fn l2ball_constraint(a2: f64, x: &DenseVector) -> (DenseVector, DenseMatrix) {
    let spec = ConstraintSpec::L2Ball { a2 };
    (spec.eval(x), spec.jacobian(x))
}

/// Draws `A` (m x n) and `a1` (m) with i.i.d. standard normal entries.
///
/// `A` is redrawn when it fails the full-row-rank test, at most three times.
pub fn make_linear_constraints<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    rng: &mut R,
) -> Result<ConstraintSpec, LinalgError> {
    if m == 0 || m >= n {
        return Err(LinalgError::DimensionMismatch(format!(
            "need 0 < m < n, got m={m} n={n}"
        )));
    }
    let mut last_err = None;
    for _ in 0..MAX_DRAWS {
        let data: Vec<f64> = (0..m * n).map(|_| rng.sample(StandardNormal)).collect();
        let a1: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let a = DenseMatrix::from_row_major(m, n, data)?;
        match crate::linalg::least_squares_multipliers(&a, &DenseVector::zeros(n)) {
            Ok(_) => {
                return Ok(ConstraintSpec::Linear {
                    a,
                    a1: DenseVector::from(a1),
                })
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one draw"))
}
