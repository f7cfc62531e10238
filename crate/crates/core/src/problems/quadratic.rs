use super::{ConstraintSpec, Problem};
use crate::linalg::{axpy, DenseMatrix, DenseVector};

/// Finite sum of quadratics `f_i(x) = ½ xᵀ Q_i x + q_iᵀ x`.
///
/// Useful wherever gradient Lipschitz constants must be known exactly.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    hessians: Vec<DenseMatrix>,
    linear: Vec<DenseVector>,
    constraint: ConstraintSpec,
}

impl QuadraticProblem {
    /// Panics when the pieces disagree in size or a `Q_i` is not symmetric.
    pub fn new(hessians: Vec<DenseMatrix>, linear: Vec<DenseVector>, constraint: ConstraintSpec) -> Self {
        assert!(!hessians.is_empty(), "need at least one component");
        assert_eq!(hessians.len(), linear.len());
        let n = linear[0].len();
        for (q, l) in hessians.iter().zip(&linear) {
            assert_eq!((q.rows(), q.cols(), l.len()), (n, n, n));
            assert!(q.is_symmetric(1e-12), "component Hessians must be symmetric");
        }
        if let ConstraintSpec::Linear { a, .. } = &constraint {
            assert_eq!(a.cols(), n);
        }
        Self {
            hessians,
            linear,
            constraint,
        }
    }

    pub fn component_hessian(&self, i: usize) -> &DenseMatrix {
        &self.hessians[i]
    }

    /// `(1/N) Σ Q_i`
    pub fn mean_hessian(&self) -> DenseMatrix {
        let n = self.dim();
        let mut data = vec![0.0; n * n];
        for q in &self.hessians {
            axpy(1.0 / self.hessians.len() as f64, q.as_slice(), &mut data);
        }
        DenseMatrix::from_row_major(n, n, data).expect("finite")
    }
}

impl Problem for QuadraticProblem {
    fn dim(&self) -> usize {
        self.linear[0].len()
    }

    fn num_components(&self) -> usize {
        self.hessians.len()
    }

    fn num_constraints(&self) -> usize {
        self.constraint.len()
    }

    fn component_objective(&self, i: usize, x: &DenseVector) -> f64 {
        0.5 * self.hessians[i].quad_form(x) + self.linear[i].dot(x)
    }

    fn add_component_gradient(&self, i: usize, x: &DenseVector, weight: f64, out: &mut [f64]) {
        let qx = self.hessians[i].mul_vec(x);
        axpy(weight, qx.as_slice(), out);
        axpy(weight, self.linear[i].as_slice(), out);
    }

    fn constraints(&self, x: &DenseVector) -> DenseVector {
        self.constraint.eval(x)
    }

    fn jacobian(&self, x: &DenseVector) -> DenseMatrix {
        self.constraint.jacobian(x)
    }

    fn constraint_lipschitz(&self) -> f64 {
        self.constraint.gamma()
    }
}
