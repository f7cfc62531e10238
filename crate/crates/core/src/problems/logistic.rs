use std::sync::Arc;

use super::{ConstraintSpec, Dataset, Problem};
use crate::linalg::{DenseMatrix, DenseVector};

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// `1 / (1 + e^{-z})`
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `f_i(x) = log(1 + exp(-y_i X_iᵀ x))`
pub fn logistic_component_objective(data: &Dataset, i: usize, x: &[f64]) -> f64 {
    softplus(-data.label(i) * data.row_dot(i, x))
}

/// `∇f_i(x) = -y_i σ(-y_i X_iᵀ x) X_i`
pub fn logistic_component_gradient(data: &Dataset, i: usize, x: &[f64]) -> DenseVector {
    let mut out = vec![0.0; data.n_features()];
    add_gradient(data, i, x, 1.0, &mut out);
    DenseVector::from(out)
}

/// `f(x) = (1/N) Σ f_i(x)`
pub fn logistic_objective(data: &Dataset, x: &[f64]) -> f64 {
    (0..data.len())
        .map(|i| logistic_component_objective(data, i, x))
        .sum::<f64>()
        / data.len() as f64
}

fn add_gradient(data: &Dataset, i: usize, x: &[f64], weight: f64, out: &mut [f64]) {
    let y = data.label(i);
    let t = y * data.row_dot(i, x);
    data.add_row(i, -weight * y * sigmoid(-t), out);
}

/// Binary logistic regression subject to equality constraints.
#[derive(Debug, Clone)]
pub struct LogisticProblem {
    data: Arc<Dataset>,
    constraint: ConstraintSpec,
}

impl LogisticProblem {
    pub fn new(data: Arc<Dataset>, constraint: ConstraintSpec) -> Self {
        if let ConstraintSpec::Linear { a, .. } = &constraint {
            assert_eq!(a.cols(), data.n_features(), "constraint width must match n");
        }
        Self { data, constraint }
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }
}

impl Problem for LogisticProblem {
    fn dim(&self) -> usize {
        self.data.n_features()
    }

    fn num_components(&self) -> usize {
        self.data.len()
    }

    fn num_constraints(&self) -> usize {
        self.constraint.len()
    }

    fn component_objective(&self, i: usize, x: &DenseVector) -> f64 {
        logistic_component_objective(&self.data, i, x.as_slice())
    }

    fn add_component_gradient(&self, i: usize, x: &DenseVector, weight: f64, out: &mut [f64]) {
        add_gradient(&self.data, i, x.as_slice(), weight, out);
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

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> Dataset {
        Dataset::from_dense(
            &[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 0.5], vec![0.3, 0.3, 0.3]],
            &[1.0, -1.0, 1.0],
        )
    }

    #[test]
    fn origin_values() {
        let d = toy();
        let x = [0.0; 3];
        for i in 0..d.len() {
            assert_eq!(logistic_component_objective(&d, i, &x), std::f64::consts::LN_2);
            let g = logistic_component_gradient(&d, i, &x);
            let want: Vec<f64> = d.dense_row(i).iter().map(|v| -d.label(i) * v / 2.0).collect();
            assert_eq!(g.as_slice(), want.as_slice());
        }
    }

    #[test]
    fn saturated_margin_does_not_overflow() {
        let d = Dataset::from_dense(&[vec![1.0, 0.0]], &[1.0]);
        let x = [50.0, 0.0];
        let f = logistic_component_objective(&d, 0, &x);
        assert!((f / (-50.0f64).exp() - 1.0).abs() < 1e-12);
        let g = logistic_component_gradient(&d, 0, &x);
        assert!((g.norm_l2() / (-50.0f64).exp() - 1.0).abs() < 1e-12);

        // the opposite sign must stay finite as well
        let f = logistic_component_objective(&d, 0, &[-800.0, 0.0]);
        assert_eq!(f, 800.0);
    }

    #[test]
    fn softplus_and_sigmoid_branches() {
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-16);
        assert_eq!(softplus(1000.0), 1000.0);
        assert_eq!(softplus(-1000.0), 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
        assert!((sigmoid(3.0) + sigmoid(-3.0) - 1.0).abs() <= f64::EPSILON);
    }
}
