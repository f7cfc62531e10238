//! Stochastic variance-reduced SQP for equality-constrained finite sums.
//!
//! Minimizes `f(x) = (1/N) Σ f_i(x)` subject to `c(x) = 0`. The crate holds
//! dense linear algebra, benchmark problems, gradient estimators, the solver,
//! two baselines, evaluation metrics and an experiment harness with a CLI.

pub mod baselines;
pub mod gradients;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod problems;
pub mod sqp;
