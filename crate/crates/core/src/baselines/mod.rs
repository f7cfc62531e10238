//! Comparison solvers.
//!
//! `run_minibatch_sqp` is the SQP iteration driven by plain mini-batch
//! gradients, without reference points. It is a reduced stand-in for full
//! stochastic SQP methods with their extra safeguards.
//!
//! `run_sto_subgrad_vr` applies SVRG to the merit function with a fixed
//! merit parameter, adding a subgradient of the `ℓ₁` penalty.

use crate::gradients::{minibatch_gradient, BatchSampler, EvalCounter, SamplingMode, SeedStream};
use crate::linalg::DenseVector;
use crate::problems::Problem;
use crate::sqp::{record, Observer, Reference, RunLog, SolverError, SqpConfig, Stepper, StopReason};

/// Mini-batch SQP for `⌊epochs · ⌊N/b⌋⌋` iterations.
///
/// Iteration `t` is reported as outer `t / ⌊N/b⌋`, inner `t mod ⌊N/b⌋`.
/// `inner_iterations` and `cache_reference` are ignored.
pub fn run_minibatch_sqp<P: Problem + ?Sized>(
    problem: &P,
    config: &SqpConfig,
    mut observer: Option<Observer<'_>>,
) -> Result<RunLog, SolverError> {
    config.validate(problem)?;
    let big_n = problem.num_components();
    let per_pass = big_n / config.batch_size;
    let total = (config.epochs * per_pass as f64).floor() as usize;
    let sampler = BatchSampler::new(big_n, config.batch_size, config.sampling, SeedStream::new(config.seed));
    let mut stepper = Stepper::new(problem, config);
    let mut counter = EvalCounter::default();
    let mut records = Vec::with_capacity(total);
    let mut x = config.x_init.clone();
    let mut stop = StopReason::Budget;

    for t in 0..total {
        let (k, s) = (t / per_pass, t % per_pass);
        let batch = sampler.draw(k, s);
        let g_bar = minibatch_gradient(problem, &x, &batch, &mut counter);
        let Some(trace) = stepper.step(&x, g_bar, k, s)? else {
            stop = StopReason::Diverged { outer: k, inner: s };
            break;
        };
        if let Some(obs) = observer.as_mut() {
            obs(&trace);
        }
        x = trace.x_next;
        records.push(record(problem, &counter, &x, stepper.merit.tau, trace.step, k, s));
    }

    Ok(RunLog {
        metric_evals: records.len() as u64,
        records,
        counter,
        kkt_solves: stepper.kkt_solves,
        x_final: x,
        tau_final: stepper.merit.tau,
        stop,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradConfig {
    pub x_init: DenseVector,
    pub alpha: f64,
    /// fixed merit parameter
    pub tau: f64,
    pub lipschitz: f64,
    pub batch_size: usize,
    pub inner_iterations: usize,
    pub epochs: f64,
    pub sampling: SamplingMode,
    pub cache_reference: bool,
    pub seed: u64,
}

impl SubgradConfig {
    /// `α / (τL + Γ)`
    pub fn step_length(&self, gamma: f64) -> f64 {
        self.alpha / (self.tau * self.lipschitz + gamma)
    }

    pub fn validate<P: Problem + ?Sized>(&self, problem: &P) -> Result<(), SolverError> {
        let err = |field, reason: &str| {
            Err(SolverError::Config {
                field,
                reason: reason.to_string(),
            })
        };
        if self.x_init.len() != problem.dim() || !self.x_init.is_finite() {
            return err("x_init", "must be a finite vector of the problem dimension");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return err("alpha", "must be positive and finite");
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return err("tau", "must be positive and finite");
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return err("lipschitz", "must be positive and finite");
        }
        if !(1..=problem.num_components()).contains(&self.batch_size) {
            return err("b", "must be in [1, N]");
        }
        if self.inner_iterations == 0 {
            return err("inner", "must be at least 1");
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return err("epochs", "must be positive and finite");
        }
        Ok(())
    }
}

/// Componentwise sign with `sign(0) = 0`.
pub fn sign_vector(c: &DenseVector) -> DenseVector {
    c.iter()
        .map(|&v| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        })
        .collect::<Vec<_>>()
        .into()
}

/// `x − ᾱ (τ ḡ + J(x)ᵀ sign(c(x)))`
pub fn subgradient_step<P: Problem + ?Sized>(problem: &P, x: &DenseVector, g_bar: &DenseVector, tau: f64, alpha_bar: f64) -> DenseVector {
    let c = problem.constraints(x);
    let j = problem.jacobian(x);
    let mut dir = j.tr_mul_vec(&sign_vector(&c));
    dir.axpy(tau, g_bar);
    let mut next = x.clone();
    next.axpy(-alpha_bar, &dir);
    next
}

/// SVRG on `τ f + ‖c‖₁` with the same outer/inner structure and budget rule
/// as SVR-SQP. Never solves a KKT system.
pub fn run_sto_subgrad_vr<P: Problem + ?Sized>(problem: &P, config: &SubgradConfig) -> Result<RunLog, SolverError> {
    config.validate(problem)?;
    let big_n = problem.num_components();
    let alpha_bar = config.step_length(problem.constraint_lipschitz());
    let sampler = BatchSampler::new(big_n, config.batch_size, config.sampling, SeedStream::new(config.seed));
    let mut counter = EvalCounter::default();
    let mut records = Vec::new();
    let mut x = config.x_init.clone();
    let mut stop = StopReason::Budget;

    'outer: for k in 0.. {
        let reference = Reference::new(problem, &x, config.cache_reference, &mut counter);
        for s in 0..config.inner_iterations {
            let batch = sampler.draw(k, s);
            let g_bar = reference.estimate(problem, &x, &batch, &mut counter);
            let next = subgradient_step(problem, &x, &g_bar, config.tau, alpha_bar);
            if !next.is_finite() {
                stop = StopReason::Diverged { outer: k, inner: s };
                break 'outer;
            }
            x = next;
            records.push(record(problem, &counter, &x, config.tau, alpha_bar, k, s));
            if counter.epochs(big_n) >= config.epochs {
                break 'outer;
            }
        }
    }

    Ok(RunLog {
        metric_evals: records.len() as u64,
        records,
        counter,
        kkt_solves: 0,
        x_final: x,
        tau_final: config.tau,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::problems::{ConstraintSpec, QuadraticProblem};

    #[test]
    fn sign_convention() {
        let s = sign_vector(&DenseVector::from(vec![-2.0, 0.0, 3.0]));
        assert_eq!(s.as_slice(), &[-1.0, 0.0, 1.0]);
    }

    #[test]
    fn step_length_example() {
        let cfg = SubgradConfig {
            x_init: DenseVector::zeros(1),
            alpha: 1.0,
            tau: 1.0,
            lipschitz: 2.0,
            batch_size: 1,
            inner_iterations: 1,
            epochs: 1.0,
            sampling: SamplingMode::WithReplacement,
            cache_reference: false,
            seed: 0,
        };
        assert_eq!(cfg.step_length(0.0), 0.5);
    }

    #[test]
    fn zero_subgradient_leaves_x() {
        let p = QuadraticProblem::new(
            vec![DenseMatrix::identity(2)],
            vec![DenseVector::zeros(2)],
            ConstraintSpec::Linear {
                a: DenseMatrix::from_rows(&[vec![1.0, 1.0]]),
                a1: DenseVector::from(vec![1.0]),
            },
        );
        let x = DenseVector::from(vec![0.25, 0.75]);
        let next = subgradient_step(&p, &x, &DenseVector::zeros(2), 1.0, 0.3);
        assert_eq!(next, x);
    }
}
