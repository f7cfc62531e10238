//! Stochastic gradient estimators: plain mini-batch averages and the SVRG
//! correction around a reference point, plus batch sampling and evaluation
//! accounting.

mod rng;

pub use rng::{Purpose, SeedStream};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::DenseVector;
use crate::problems::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// `b` independent uniform draws from `[N]`.
    #[default]
    WithReplacement,
    /// A uniformly random `b`-subset of `[N]`, returned in increasing order.
    WithoutReplacement,
}

/// Draws mini-batches from per-iteration substreams.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    population: usize,
    batch_size: usize,
    mode: SamplingMode,
    seeds: SeedStream,
}

impl BatchSampler {
    /// Panics unless `1 <= batch_size <= population`.
    pub fn new(population: usize, batch_size: usize, mode: SamplingMode, seeds: SeedStream) -> Self {
        assert!(
            (1..=population).contains(&batch_size),
            "batch size {batch_size} outside [1, {population}]"
        );
        Self {
            population,
            batch_size,
            mode,
            seeds,
        }
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn mode(&self) -> SamplingMode {
        self.mode
    }

    /// Batch for inner iteration `inner` of outer iteration `outer`.
    pub fn draw(&self, outer: usize, inner: usize) -> Vec<usize> {
        let mut rng = self.seeds.batch(outer, inner);
        match self.mode {
            SamplingMode::WithReplacement => (0..self.batch_size)
                .map(|_| rng.random_range(0..self.population))
                .collect(),
            SamplingMode::WithoutReplacement => {
                let mut idx = index::sample(&mut rng, self.population, self.batch_size).into_vec();
                idx.sort_unstable();
                idx
            }
        }
    }
}

/// Gradient evaluation bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct EvalCounter {
    pub component_grad_evals: u64,
    pub full_grad_evals: u64,
}

impl EvalCounter {
    /// Effective passes over the data.
    pub fn epochs(&self, population: usize) -> f64 {
        let n = population as f64;
        (self.component_grad_evals as f64 + n * self.full_grad_evals as f64) / n
    }
}

/// `(1/b) Σ_{i ∈ batch} ∇f_i(x)`; charges `b` component evaluations.
pub fn minibatch_gradient<P: Problem + ?Sized>(
    problem: &P,
    x: &DenseVector,
    batch: &[usize],
    counter: &mut EvalCounter,
) -> DenseVector {
    assert!(!batch.is_empty(), "empty mini-batch");
    let mut out = vec![0.0; problem.dim()];
    for &i in batch {
        problem.add_component_gradient(i, x, 1.0, &mut out);
    }
    counter.component_grad_evals += batch.len() as u64;
    let mut g = DenseVector::from(out);
    g.scale(1.0 / batch.len() as f64);
    g
}

/// Full gradient at the reference point, charged as one full evaluation.
pub fn reference_gradient<P: Problem + ?Sized>(
    problem: &P,
    x_ref: &DenseVector,
    counter: &mut EvalCounter,
) -> DenseVector {
    counter.full_grad_evals += 1;
    problem.full_gradient(x_ref)
}

/// `(1/b) Σ_{i ∈ batch} (∇f_i(x) − ∇f_i(x_ref)) + g_ref`.
///
/// Both batch terms use the same indices. Charges `2b` component
/// evaluations.
pub fn svrg_gradient<P: Problem + ?Sized>(
    problem: &P,
    x: &DenseVector,
    x_ref: &DenseVector,
    g_ref: &DenseVector,
    batch: &[usize],
    counter: &mut EvalCounter,
) -> DenseVector {
    assert!(!batch.is_empty(), "empty mini-batch");
    let mut diff = vec![0.0; problem.dim()];
    for &i in batch {
        problem.add_component_gradient(i, x, 1.0, &mut diff);
        problem.add_component_gradient(i, x_ref, -1.0, &mut diff);
    }
    counter.component_grad_evals += 2 * batch.len() as u64;
    combine(diff, batch.len(), g_ref)
}

fn combine(mut diff: Vec<f64>, b: usize, g_ref: &DenseVector) -> DenseVector {
    let inv = 1.0 / b as f64;
    for (d, r) in diff.iter_mut().zip(g_ref.iter()) {
        *d = *d * inv + r;
    }
    DenseVector::from(diff)
}

/// SVRG with the reference component gradients stored, so each inner step
/// costs `b` evaluations instead of `2b` at `O(N n)` memory.
#[derive(Debug, Clone)]
pub struct ReferenceCache {
    x_ref: DenseVector,
    g_ref: DenseVector,
    components: Vec<DenseVector>,
}

impl ReferenceCache {
    /// Evaluates and stores every `∇f_i(x_ref)`; charges one full evaluation.
    pub fn build<P: Problem + ?Sized>(problem: &P, x_ref: &DenseVector, counter: &mut EvalCounter) -> Self {
        let n = problem.num_components();
        let components: Vec<DenseVector> =
            (0..n).map(|i| problem.component_gradient(i, x_ref)).collect();
        let mut sum = vec![0.0; problem.dim()];
        for g in &components {
            crate::linalg::axpy(1.0, g.as_slice(), &mut sum);
        }
        let mut g_ref = DenseVector::from(sum);
        g_ref.scale(1.0 / n as f64);
        counter.full_grad_evals += 1;
        Self {
            x_ref: x_ref.clone(),
            g_ref,
            components,
        }
    }

    pub fn reference_point(&self) -> &DenseVector {
        &self.x_ref
    }

    pub fn reference_gradient(&self) -> &DenseVector {
        &self.g_ref
    }

    /// Same estimate as [`svrg_gradient`], charging `b` evaluations.
    pub fn svrg_gradient<P: Problem + ?Sized>(
        &self,
        problem: &P,
        x: &DenseVector,
        batch: &[usize],
        counter: &mut EvalCounter,
    ) -> DenseVector {
        assert!(!batch.is_empty(), "empty mini-batch");
        let mut diff = vec![0.0; problem.dim()];
        for &i in batch {
            problem.add_component_gradient(i, x, 1.0, &mut diff);
            crate::linalg::axpy(-1.0, self.components[i].as_slice(), &mut diff);
        }
        counter.component_grad_evals += batch.len() as u64;
        combine(diff, batch.len(), &self.g_ref)
    }
}
