//! Stochastic variance-reduced SQP.
//!
//! Each outer iteration computes the full gradient at a reference point.
//! Each inner iteration forms an SVRG estimate on a fresh mini-batch, solves
//! the KKT system for a search direction, updates the merit parameter and
//! moves along the direction with a constant or adaptive step.

mod merit;
mod step;

pub use merit::{
    merit_value, model_reduction, update_merit_parameter, DegenerateDirection, MeritState, MeritUpdate,
    TauTrial,
};
pub use step::{adaptive_step, trial_steps, AdaptiveParams, StepCase, StepRule, TrialSteps};

use thiserror::Error;

use crate::gradients::{
    reference_gradient, svrg_gradient, BatchSampler, EvalCounter, ReferenceCache, SamplingMode, SeedStream,
};
use crate::linalg::{solve_kkt, DenseMatrix, DenseVector, LinalgError};
use crate::metrics::{measure, IterateRecord};
use crate::problems::Problem;

/// Directions with `‖d̄‖∞ ≤ ZERO_DIRECTION·(1 + ‖ḡ‖∞ + ‖c‖∞)` count as zero.
pub const ZERO_DIRECTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("invalid solver setting `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("at outer {outer}, inner {inner}: {source}")]
    Linalg {
        outer: usize,
        inner: usize,
        #[source]
        source: LinalgError,
    },
    #[error("at outer {outer}, inner {inner}: positive q = {q:e} at a feasible point")]
    DegenerateDirection { outer: usize, inner: usize, q: f64 },
}

fn config_err(field: &'static str, reason: impl Into<String>) -> SolverError {
    SolverError::Config {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum HessianPolicy {
    #[default]
    Identity,
    /// A fixed symmetric matrix used at every iteration.
    Fixed(DenseMatrix),
}

impl HessianPolicy {
    fn matrix(&self, n: usize) -> DenseMatrix {
        match self {
            HessianPolicy::Identity => DenseMatrix::identity(n),
            HessianPolicy::Fixed(h) => h.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpConfig {
    pub x_init: DenseVector,
    pub tau_init: f64,
    pub sigma: f64,
    pub eps_tau: f64,
    pub batch_size: usize,
    /// `S`; ignored by the flat mini-batch baseline
    pub inner_iterations: usize,
    pub step: StepRule,
    pub hessian: HessianPolicy,
    /// budget in effective passes over the data
    pub epochs: f64,
    pub sampling: SamplingMode,
    /// store reference component gradients instead of recomputing them
    pub cache_reference: bool,
    pub seed: u64,
}

impl SqpConfig {
    /// Standard settings for everything except the problem-dependent pieces.
    pub fn new(x_init: DenseVector, batch_size: usize, inner_iterations: usize, step: StepRule) -> Self {
        Self {
            x_init,
            tau_init: 0.1,
            sigma: 0.5,
            eps_tau: 1e-6,
            batch_size,
            inner_iterations,
            step,
            hessian: HessianPolicy::Identity,
            epochs: 30.0,
            sampling: SamplingMode::WithReplacement,
            cache_reference: false,
            seed: 0,
        }
    }

    pub fn validate<P: Problem + ?Sized>(&self, problem: &P) -> Result<(), SolverError> {
        let n = problem.dim();
        let big_n = problem.num_components();
        if self.x_init.len() != n || !self.x_init.is_finite() {
            return Err(config_err("x_init", format!("must be a finite vector of length {n}")));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return Err(config_err("tau_init", "must be positive and finite"));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(config_err("sigma", "must be in (0, 1)"));
        }
        if !(self.eps_tau > 0.0 && self.eps_tau < 1.0) {
            return Err(config_err("eps_tau", "must be in (0, 1)"));
        }
        if !(1..=big_n).contains(&self.batch_size) {
            return Err(config_err("b", format!("must be in [1, {big_n}]")));
        }
        if self.inner_iterations == 0 {
            return Err(config_err("inner", "must be at least 1"));
        }
        if !(self.epochs > 0.0 && self.epochs.is_finite()) {
            return Err(config_err("epochs", "must be positive and finite"));
        }
        match self.step {
            StepRule::Constant { alpha } => {
                if !(alpha > 0.0 && alpha.is_finite()) {
                    return Err(config_err("alpha", "must be positive and finite"));
                }
            }
            StepRule::Adaptive(p) => {
                if !(p.beta > 0.0 && p.beta <= 1.0) {
                    return Err(config_err("beta", "must be in (0, 1]"));
                }
                if !(p.alpha_u > 0.0 && p.alpha_u.is_finite()) {
                    return Err(config_err("alpha_u", "must be positive and finite"));
                }
                if !(p.lipschitz > 0.0 && p.lipschitz.is_finite()) {
                    return Err(config_err("lipschitz", "must be positive and finite"));
                }
                if !(p.gamma >= 0.0 && p.gamma.is_finite()) {
                    return Err(config_err("gamma", "must be nonnegative and finite"));
                }
            }
        }
        if let HessianPolicy::Fixed(h) = &self.hessian {
            if h.rows() != n || h.cols() != n || !h.is_symmetric(1e-12) {
                return Err(config_err("hessian", format!("must be a symmetric {n}x{n} matrix")));
            }
        }
        Ok(())
    }
}

/// Everything about one iteration, for observers.
#[derive(Debug, Clone)]
pub struct StepTrace {
    pub outer: usize,
    pub inner: usize,
    pub x: DenseVector,
    pub x_next: DenseVector,
    pub g_bar: DenseVector,
    pub d: DenseVector,
    pub y: DenseVector,
    pub c: DenseVector,
    pub tau_before: f64,
    pub tau: f64,
    pub tau_trial: TauTrial,
    pub gtd: f64,
    pub dhd: f64,
    /// `Δl(x, τ̄, ḡ, d̄)` at the updated `τ̄`
    pub delta_l: f64,
    pub step: f64,
    pub case: StepCase,
}

/// Why a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    /// the next iterate or direction would have been non-finite
    Diverged { outer: usize, inner: usize },
}

/// Output of a solver run.
#[derive(Debug, Clone)]
pub struct RunLog {
    /// one record per inner iteration, measured at the new iterate
    pub records: Vec<IterateRecord>,
    pub counter: EvalCounter,
    pub kkt_solves: u64,
    /// full-gradient evaluations spent on metrics, outside the budget
    pub metric_evals: u64,
    pub x_final: DenseVector,
    pub tau_final: f64,
    pub stop: StopReason,
}

pub type Observer<'a> = &'a mut dyn FnMut(&StepTrace);

/// One SQP iteration given a gradient estimate; shared by SVR-SQP and the
/// mini-batch baseline.
pub(crate) struct Stepper<'a, P: ?Sized> {
    problem: &'a P,
    rule: StepRule,
    h: DenseMatrix,
    pub(crate) merit: MeritState,
    pub(crate) kkt_solves: u64,
}

impl<'a, P: Problem + ?Sized> Stepper<'a, P> {
    pub(crate) fn new(problem: &'a P, config: &SqpConfig) -> Self {
        Self {
            problem,
            rule: config.step,
            h: config.hessian.matrix(problem.dim()),
            merit: MeritState::new(config.tau_init, config.sigma, config.eps_tau),
            kkt_solves: 0,
        }
    }

    /// `Ok(None)` when the iteration has left the finite range.
    pub(crate) fn step(
        &mut self,
        x: &DenseVector,
        g_bar: DenseVector,
        outer: usize,
        inner: usize,
    ) -> Result<Option<StepTrace>, SolverError> {
        if !g_bar.is_finite() {
            return Ok(None);
        }
        let x = x.clone();
        let c = self.problem.constraints(&x);
        let j = self.problem.jacobian(&x);
        let sol = match solve_kkt(&self.h, &j, &g_bar, &c) {
            Ok(sol) => sol,
            Err(LinalgError::NonFinite(_)) => return Ok(None),
            Err(source) => return Err(SolverError::Linalg { outer, inner, source }),
        };
        self.kkt_solves += 1;
        let (d, y) = (sol.d, sol.y);
        let tau_before = self.merit.tau;
        let c_l1 = c.norm_l1();

        let zero_tol = ZERO_DIRECTION * (1.0 + g_bar.norm_inf() + c.norm_inf());
        if d.norm_inf() <= zero_tol {
            return Ok(Some(StepTrace {
                outer,
                inner,
                x_next: x.clone(),
                x,
                g_bar,
                d,
                y,
                c,
                tau_before,
                tau: tau_before,
                tau_trial: TauTrial::Infinite,
                gtd: 0.0,
                dhd: 0.0,
                delta_l: c_l1,
                step: 0.0,
                case: StepCase::Skipped,
            }));
        }

        let gtd = g_bar.dot(&d);
        let dhd = self.h.quad_form(&d);
        if !(gtd.is_finite() && dhd.is_finite()) {
            return Ok(None);
        }
        let update = self
            .merit
            .update(gtd, dhd, c_l1)
            .map_err(|e| SolverError::DegenerateDirection { outer, inner, q: e.q })?;
        self.merit = update.state;
        let tau = update.state.tau;
        let delta_l = merit::reduction(tau, gtd, c_l1);
        debug_assert!(
            delta_l >= tau * dhd.max(0.0) + self.merit.sigma * c_l1 - 1e-10 * (1.0 + (tau * gtd).abs() + c_l1),
            "model reduction condition violated at ({outer}, {inner})"
        );

        let (alpha, case) = self.rule.step(tau, delta_l, d.norm_l2_squared(), c_l1);
        let mut x_next = x.clone();
        x_next.axpy(alpha, &d);
        if !x_next.is_finite() {
            return Ok(None);
        }
        Ok(Some(StepTrace {
            outer,
            inner,
            x,
            x_next,
            g_bar,
            d,
            y,
            c,
            tau_before,
            tau,
            tau_trial: update.tau_trial,
            gtd,
            dhd,
            delta_l,
            step: alpha,
            case,
        }))
    }
}

pub(crate) fn record<P: Problem + ?Sized>(
    problem: &P,
    counter: &EvalCounter,
    x: &DenseVector,
    tau: f64,
    step: f64,
    outer: usize,
    inner: usize,
) -> IterateRecord {
    let m = measure(problem, x, tau);
    IterateRecord {
        epoch: counter.epochs(problem.num_components()),
        outer_k: outer,
        inner_s: inner,
        feasibility_inf: m.feasibility_inf,
        stationarity_inf: m.stationarity_inf,
        merit: m.merit,
        tau,
        step,
    }
}

/// Reference point handling for SVRG-type loops.
pub(crate) enum Reference {
    Recompute { x_ref: DenseVector, g_ref: DenseVector },
    Cached(ReferenceCache),
}

impl Reference {
    pub(crate) fn new<P: Problem + ?Sized>(problem: &P, x: &DenseVector, cache: bool, counter: &mut EvalCounter) -> Self {
        if cache {
            Reference::Cached(ReferenceCache::build(problem, x, counter))
        } else {
            Reference::Recompute {
                x_ref: x.clone(),
                g_ref: reference_gradient(problem, x, counter),
            }
        }
    }

    pub(crate) fn estimate<P: Problem + ?Sized>(
        &self,
        problem: &P,
        x: &DenseVector,
        batch: &[usize],
        counter: &mut EvalCounter,
    ) -> DenseVector {
        match self {
            Reference::Recompute { x_ref, g_ref } => svrg_gradient(problem, x, x_ref, g_ref, batch, counter),
            Reference::Cached(c) => c.svrg_gradient(problem, x, batch, counter),
        }
    }
}

/// Runs SVR-SQP until the epoch budget is spent.
///
/// The budget is checked after every inner iteration, so a run overshoots
/// it by at most one reference gradient plus one mini-batch.
pub fn run_svr_sqp<P: Problem + ?Sized>(
    problem: &P,
    config: &SqpConfig,
    mut observer: Option<Observer<'_>>,
) -> Result<RunLog, SolverError> {
    config.validate(problem)?;
    let big_n = problem.num_components();
    let sampler = BatchSampler::new(big_n, config.batch_size, config.sampling, SeedStream::new(config.seed));
    let mut stepper = Stepper::new(problem, config);
    let mut counter = EvalCounter::default();
    let mut records = Vec::new();
    let mut x = config.x_init.clone();
    let mut stop = StopReason::Budget;

    'outer: for k in 0.. {
        let reference = Reference::new(problem, &x, config.cache_reference, &mut counter);
        for s in 0..config.inner_iterations {
            let batch = sampler.draw(k, s);
            let g_bar = reference.estimate(problem, &x, &batch, &mut counter);
            let Some(trace) = stepper.step(&x, g_bar, k, s)? else {
                stop = StopReason::Diverged { outer: k, inner: s };
                break 'outer;
            };
            if let Some(obs) = observer.as_mut() {
                obs(&trace);
            }
            x = trace.x_next;
            records.push(record(problem, &counter, &x, stepper.merit.tau, trace.step, k, s));
            if counter.epochs(big_n) >= config.epochs {
                break 'outer;
            }
        }
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{ConstraintSpec, QuadraticProblem};

    /// min ½‖x‖² + q'x over the unit sphere in 2D, two identical components
    fn sphere(q: [f64; 2]) -> QuadraticProblem {
        let h = DenseMatrix::identity(2);
        let l = DenseVector::from(q.to_vec());
        QuadraticProblem::new(vec![h.clone(), h], vec![l.clone(), l], ConstraintSpec::l2_ball(1.0).unwrap())
    }

    #[test]
    fn kkt_point_is_a_fixed_point() {
        // at x = e₁ the gradient x + q = (1 + q₁, 0) lies in span(J) = span(e₁)
        let p = sphere([-3.0, 0.0]);
        let mut cfg = SqpConfig::new(DenseVector::from(vec![1.0, 0.0]), 1, 3, StepRule::Constant { alpha: 1.0 });
        cfg.epochs = 4.0;
        let mut cases = Vec::new();
        let mut obs = |t: &StepTrace| cases.push(t.case);
        let log = run_svr_sqp(&p, &cfg, Some(&mut obs)).unwrap();
        assert!(cases.iter().all(|c| *c == StepCase::Skipped));
        assert_eq!(log.x_final.as_slice(), &[1.0, 0.0]);
        assert_eq!(log.tau_final, 0.1);
        assert!(log.records.iter().all(|r| r.step == 0.0 && r.tau == 0.1));
    }

    #[test]
    fn budget_is_checked_after_each_inner_iteration() {
        let p = sphere([0.3, -0.2]);
        let mut cfg = SqpConfig::new(DenseVector::from(vec![0.5, 0.5]), 1, 100, StepRule::Constant { alpha: 0.5 });
        cfg.epochs = 3.0;
        let log = run_svr_sqp(&p, &cfg, None).unwrap();
        // one full gradient (1 epoch) then 2 evals per step (1 epoch each)
        assert_eq!(log.records.len(), 2);
        assert_eq!(log.counter.epochs(2), 3.0);
        assert_eq!(log.kkt_solves, 2);
        assert!(log.records.windows(2).all(|w| w[0].epoch <= w[1].epoch));
    }

    #[test]
    fn rejects_bad_settings() {
        let p = sphere([0.0, 0.0]);
        let mut cfg = SqpConfig::new(DenseVector::from(vec![0.5, 0.5]), 0, 1, StepRule::Constant { alpha: 0.5 });
        assert!(matches!(run_svr_sqp(&p, &cfg, None), Err(SolverError::Config { field: "b", .. })));
        cfg.batch_size = 1;
        cfg.sigma = 1.0;
        assert!(matches!(cfg.validate(&p), Err(SolverError::Config { field: "sigma", .. })));
    }

    #[test]
    fn origin_on_sphere_reports_coordinates() {
        let p = sphere([1.0, 1.0]);
        let cfg = SqpConfig::new(DenseVector::zeros(2), 1, 1, StepRule::Constant { alpha: 0.5 });
        match run_svr_sqp(&p, &cfg, None) {
            Err(SolverError::Linalg { outer: 0, inner: 0, source }) => {
                assert!(matches!(source, LinalgError::RankDeficientJacobian { .. }))
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
