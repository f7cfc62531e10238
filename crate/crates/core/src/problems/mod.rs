//! Finite-sum problems with equality constraints:
//!
//! ```text
//! min f(x) = (1/N) Σ f_i(x)   s.t.   c(x) = 0
//! ```

mod constraints;
mod dataset;
mod lipschitz;
mod logistic;
mod quadratic;

pub use constraints::{l2ball_constraint, make_linear_constraints, ConstraintSpec};
pub use dataset::{parse_libsvm, DataError, Dataset};
pub use lipschitz::{estimate_lipschitz, LIPSCHITZ_PROBES, LIPSCHITZ_PROBE_RADIUS};
pub use logistic::{
    logistic_component_gradient, logistic_component_objective, logistic_objective, LogisticProblem,
};
pub use quadratic::QuadraticProblem;

use crate::linalg::{DenseMatrix, DenseVector};

/// Oracle bundle for an equality-constrained finite-sum problem.
///
/// Implementations are read-only after construction. Evaluation accounting is
/// the caller's job (see [`crate::gradients::EvalCounter`]).
pub trait Problem: Send + Sync {
    /// Variable dimension `n`.
    fn dim(&self) -> usize;

    /// Number of components `N`.
    fn num_components(&self) -> usize;

    /// Number of constraints `m`.
    fn num_constraints(&self) -> usize;

    fn component_objective(&self, i: usize, x: &DenseVector) -> f64;

    /// `out += weight * ∇f_i(x)`
    fn add_component_gradient(&self, i: usize, x: &DenseVector, weight: f64, out: &mut [f64]);

    fn constraints(&self, x: &DenseVector) -> DenseVector;

    fn jacobian(&self, x: &DenseVector) -> DenseMatrix;

    /// `Γ`, the summed Lipschitz constants of the constraint gradients.
    fn constraint_lipschitz(&self) -> f64;

    fn component_gradient(&self, i: usize, x: &DenseVector) -> DenseVector {
        let mut out = vec![0.0; self.dim()];
        self.add_component_gradient(i, x, 1.0, &mut out);
        DenseVector::from(out)
    }

    fn objective(&self, x: &DenseVector) -> f64 {
        let n = self.num_components();
        (0..n).map(|i| self.component_objective(i, x)).sum::<f64>() / n as f64
    }

    fn full_gradient(&self, x: &DenseVector) -> DenseVector {
        let n = self.num_components();
        let mut out = vec![0.0; self.dim()];
        for i in 0..n {
            self.add_component_gradient(i, x, 1.0, &mut out);
        }
        let mut g = DenseVector::from(out);
        g.scale(1.0 / n as f64);
        g
    }
}
