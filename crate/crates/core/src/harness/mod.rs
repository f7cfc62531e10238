//! Experiment orchestration: configuration, per-seed problem setup, parallel
//! solver runs and CSV/JSON output.

mod cli;
mod config;
mod output;

pub use cli::{cli_main, run_cli, OUT_DIR_ENV};
pub use config::{
    load_config, parse_config, ConfigError, ConstraintConfig, ConstraintKind, DataConfig, ExperimentConfig,
    InnerSpec, MinibatchStep, SolverKind, SolverSpec,
};
pub use output::{format_f64, write_outputs, AGGREGATE_HEADER, SUMMARY_HEADER, TRAJECTORY_HEADER};

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::baselines::{run_minibatch_sqp, run_sto_subgrad_vr, SubgradConfig};
use crate::gradients::{Purpose, SeedStream};
use crate::linalg::{least_squares_multipliers, DenseVector, LinalgError};
use crate::metrics::{aggregate, select_best, Aggregate, BestIterate};
use crate::problems::{estimate_lipschitz, make_linear_constraints, ConstraintSpec, DataError, Dataset, LogisticProblem, Problem};
use crate::sqp::{run_svr_sqp, AdaptiveParams, HessianPolicy, RunLog, SolverError, SqpConfig, StepRule};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("constraint generation failed: {0}")]
    Constraint(LinalgError),
    #[error("solver `{label}`, seed {seed}: {source}")]
    Solver {
        label: String,
        seed: u64,
        #[source]
        source: SolverError,
    },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl HarnessError {
    /// 1 for bad input, 2 for failures while running or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Data(_) => 1,
            _ => 2,
        }
    }
}

/// `x₀`: a standard normal vector rescaled to norm `scale`.
pub fn initial_point(n: usize, seed: u64, scale: f64) -> DenseVector {
    let mut rng = SeedStream::new(seed).substream(Purpose::InitialPoint, 0);
    let mut x: DenseVector = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect::<Vec<_>>()
        .into();
    let norm = x.norm_l2();
    x.scale(scale / norm);
    x
}

/// Constraint data drawn from the `Constraints` substream of `seed`.
pub fn build_constraint(kind: ConstraintKind, n: usize, seed: u64) -> Result<ConstraintSpec, LinalgError> {
    match kind {
        ConstraintKind::Linear { m } => {
            let mut rng = SeedStream::new(seed).substream(Purpose::Constraints, 0);
            make_linear_constraints(n, m, &mut rng)
        }
        ConstraintKind::L2Ball { a2 } => ConstraintSpec::l2_ball(a2),
    }
}

/// Everything a solver needs for one seed.
#[derive(Debug, Clone)]
pub struct SeedSetup {
    pub seed: u64,
    pub problem: LogisticProblem,
    pub x0: DenseVector,
    pub lipschitz: f64,
    /// least-squares multipliers at `x₀`, `None` if the Jacobian is rank deficient there
    pub y0: Option<DenseVector>,
}

impl SeedSetup {
    pub fn new(data: Arc<Dataset>, constraint: ConstraintSpec, seed: u64, init_scale: f64) -> Self {
        let problem = LogisticProblem::new(data, constraint);
        let x0 = initial_point(problem.dim(), seed, init_scale);
        let mut rng = SeedStream::new(seed).substream(Purpose::Lipschitz, 0);
        let lipschitz = estimate_lipschitz(&problem, &x0, &mut rng);
        let y0 = least_squares_multipliers(&problem.jacobian(&x0), &problem.full_gradient(&x0)).ok();
        Self {
            seed,
            problem,
            x0,
            lipschitz,
            y0,
        }
    }
}

/// Dataset plus per-seed setups for a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: Arc<Dataset>,
    pub inner: usize,
    pub setups: Vec<SeedSetup>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    let data = Arc::new(Dataset::open(&cfg.data.path, cfg.data.n)?);
    prepare_with(cfg, data)
}

/// Like [`prepare`] with an already loaded dataset.
pub fn prepare_with(cfg: &ExperimentConfig, data: Arc<Dataset>) -> Result<Prepared, HarnessError> {
    let inner = cfg.check_against(data.len())?;
    if let ConstraintKind::Linear { m } = cfg.constraint.kind {
        if m >= data.n_features() {
            return Err(ConfigError::new("constraint.m", format!("must be below n = {}", data.n_features())).into());
        }
    }
    let n = data.n_features();
    let shared = if cfg.constraint.resample_per_seed {
        None
    } else {
        Some(build_constraint(cfg.constraint.kind, n, cfg.constraint.seed).map_err(HarnessError::Constraint)?)
    };
    let setups = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let constraint = match &shared {
                Some(c) => c.clone(),
                None => build_constraint(cfg.constraint.kind, n, seed).map_err(HarnessError::Constraint)?,
            };
            Ok(SeedSetup::new(data.clone(), constraint, seed, cfg.init_scale))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    Ok(Prepared { data, inner, setups })
}

fn sqp_config(cfg: &ExperimentConfig, setup: &SeedSetup, inner: usize, step: StepRule) -> SqpConfig {
    SqpConfig {
        x_init: setup.x0.clone(),
        tau_init: cfg.tau_init,
        sigma: cfg.sigma,
        eps_tau: cfg.eps_tau,
        batch_size: cfg.batch_size,
        inner_iterations: inner,
        step,
        hessian: HessianPolicy::Identity,
        epochs: cfg.epochs,
        sampling: cfg.sampling,
        cache_reference: cfg.cache_reference,
        seed: setup.seed,
    }
}

/// Runs one solver on one seed.
pub fn run_solver(cfg: &ExperimentConfig, setup: &SeedSetup, inner: usize, kind: &SolverKind) -> Result<RunLog, SolverError> {
    let gamma = setup.problem.constraint_lipschitz();
    let adaptive = |beta, alpha_u| {
        StepRule::Adaptive(AdaptiveParams {
            beta,
            alpha_u,
            lipschitz: setup.lipschitz,
            gamma,
        })
    };
    match *kind {
        SolverKind::SvrSqpA { beta, alpha_u } => {
            run_svr_sqp(&setup.problem, &sqp_config(cfg, setup, inner, adaptive(beta, alpha_u)), None)
        }
        SolverKind::SvrSqpC { alpha } => {
            run_svr_sqp(&setup.problem, &sqp_config(cfg, setup, inner, StepRule::Constant { alpha }), None)
        }
        SolverKind::MinibatchSqp(step) => {
            let rule = match step {
                MinibatchStep::Constant { alpha } => StepRule::Constant { alpha },
                MinibatchStep::Adaptive { beta, alpha_u } => adaptive(beta, alpha_u),
            };
            run_minibatch_sqp(&setup.problem, &sqp_config(cfg, setup, inner, rule), None)
        }
        SolverKind::StoSubgradVr { alpha, tau } => run_sto_subgrad_vr(
            &setup.problem,
            &SubgradConfig {
                x_init: setup.x0.clone(),
                alpha,
                tau,
                lipschitz: setup.lipschitz,
                batch_size: cfg.batch_size,
                inner_iterations: inner,
                epochs: cfg.epochs,
                sampling: cfg.sampling,
                cache_reference: cfg.cache_reference,
                seed: setup.seed,
            },
        ),
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: String,
    pub seed: u64,
    pub log: RunLog,
    pub best: Option<BestIterate>,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub prepared: Prepared,
    /// in (solver, seed) order
    pub runs: Vec<RunResult>,
}

impl ExperimentOutput {
    pub fn runs_for<'a>(&'a self, label: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.label == label)
    }

    /// Aggregate of best iterates per solver; `None` with fewer than two runs.
    pub fn aggregates(&self, cfg: &ExperimentConfig) -> Vec<(String, Option<Aggregate>)> {
        cfg.solvers
            .iter()
            .map(|s| {
                let best: Vec<BestIterate> = self.runs_for(&s.label).filter_map(|r| r.best).collect();
                (s.label.clone(), aggregate(&best).ok())
            })
            .collect()
    }
}

/// Runs every (solver, seed) pair on a worker pool; results come back in a
/// fixed order regardless of scheduling.
pub fn execute(cfg: &ExperimentConfig, prepared: Prepared) -> Result<ExperimentOutput, HarnessError> {
    let jobs: Vec<(&SolverSpec, &SeedSetup)> = cfg
        .solvers
        .iter()
        .flat_map(|s| prepared.setups.iter().map(move |setup| (s, setup)))
        .collect();
    let work = |&(spec, setup): &(&SolverSpec, &SeedSetup)| {
        let start = Instant::now();
        let log = run_solver(cfg, setup, prepared.inner, &spec.kind).map_err(|source| HarnessError::Solver {
            label: spec.label.clone(),
            seed: setup.seed,
            source,
        })?;
        Ok(RunResult {
            label: spec.label.clone(),
            seed: setup.seed,
            best: select_best(&log.records),
            log,
            wall_seconds: start.elapsed().as_secs_f64(),
        })
    };
    let runs: Vec<Result<RunResult, HarnessError>> = match cfg.threads {
        Some(1) => jobs.iter().map(work).collect(),
        threads => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads.unwrap_or(0))
                .build()
                .map_err(|e| HarnessError::Pool(e.to_string()))?;
            pool.install(|| jobs.par_iter().map(work).collect())
        }
    };
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(ExperimentOutput { prepared, runs })
}

/// Loads data, runs everything and writes the output tree under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput, HarnessError> {
    let started = std::time::SystemTime::now();
    let prepared = prepare(cfg)?;
    let out = execute(cfg, prepared)?;
    write_outputs(cfg, &out, out_dir, started)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_point_has_requested_norm() {
        let x = initial_point(14, 3, 0.1);
        assert!((x.norm_l2() - 0.1).abs() < 1e-15);
        assert_eq!(x, initial_point(14, 3, 0.1));
        assert_ne!(x, initial_point(14, 4, 0.1));
    }

    #[test]
    fn shared_constraints_are_seed_independent() {
        let a = build_constraint(ConstraintKind::Linear { m: 3 }, 6, 11).unwrap();
        let b = build_constraint(ConstraintKind::Linear { m: 3 }, 6, 11).unwrap();
        assert_eq!(a, b);
        assert_eq!(build_constraint(ConstraintKind::L2Ball { a2: 1.0 }, 6, 0).unwrap().gamma(), 2.0);
    }
}
