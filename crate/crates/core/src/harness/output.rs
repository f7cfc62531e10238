use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use super::{ConstraintKind, ExperimentConfig, ExperimentOutput, HarnessError, SolverKind};
use crate::gradients::SamplingMode;
use crate::metrics::IterateRecord;
use crate::problems::Problem;

pub const TRAJECTORY_HEADER: &str = "epoch,outer_k,inner_s,feasibility_inf,stationarity_inf,merit,tau,step";
pub const SUMMARY_HEADER: &str = "solver,seed,best_feasibility,best_stationarity,wall_seconds";
pub const AGGREGATE_HEADER: &str =
    "solver,runs,best_feasibility_mean,best_feasibility_halfwidth,best_stationarity_mean,best_stationarity_halfwidth";

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn trajectory_csv(records: &[IterateRecord]) -> String {
    let mut s = String::with_capacity(64 * (records.len() + 1));
    s.push_str(TRAJECTORY_HEADER);
    s.push('\n');
    for r in records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            format_f64(r.epoch),
            r.outer_k,
            r.inner_s,
            format_f64(r.feasibility_inf),
            format_f64(r.stationarity_inf),
            format_f64(r.merit),
            format_f64(r.tau),
            format_f64(r.step)
        );
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<(), HarnessError> {
    fs::write(path, contents).map_err(|source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn solver_json(kind: &SolverKind) -> serde_json::Value {
    match kind {
        SolverKind::SvrSqpA { beta, alpha_u } => json!({"kind": "svr_sqp_a", "beta": beta, "alpha_u": alpha_u}),
        SolverKind::SvrSqpC { alpha } => json!({"kind": "svr_sqp_c", "alpha": alpha}),
        SolverKind::MinibatchSqp(step) => match step {
            super::MinibatchStep::Constant { alpha } => {
                json!({"kind": "minibatch_sqp", "step": "constant", "alpha": alpha,
                       "note": "mini-batch SQP without variance reduction"})
            }
            super::MinibatchStep::Adaptive { beta, alpha_u } => {
                json!({"kind": "minibatch_sqp", "step": "adaptive", "beta": beta, "alpha_u": alpha_u,
                       "note": "mini-batch SQP without variance reduction"})
            }
        },
        SolverKind::StoSubgradVr { alpha, tau } => json!({"kind": "sto_subgrad_vr", "alpha": alpha, "tau": tau}),
    }
}

/// Writes trajectories, `summary.csv`, `aggregate.csv` and `metadata.json`.
///
/// Only `metadata.json` and the `wall_seconds` column depend on the clock.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    out: &ExperimentOutput,
    dir: &Path,
    started: SystemTime,
) -> Result<(), HarnessError> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| HarnessError::Io { path: p, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for run in &out.runs {
        let sub = dir.join(&run.label);
        fs::create_dir_all(&sub).map_err(io(&sub))?;
        write(&sub.join(format!("seed_{}.csv", run.seed)), &trajectory_csv(&run.log.records))?;
        let (f, s) = run
            .best
            .map(|b| (format_f64(b.feasibility_inf), format_f64(b.stationarity_inf)))
            .unwrap_or_default();
        let _ = writeln!(summary, "{},{},{},{},{}", run.label, run.seed, f, s, format_f64(run.wall_seconds));
    }
    write(&dir.join("summary.csv"), &summary)?;

    let mut agg = String::from(AGGREGATE_HEADER);
    agg.push('\n');
    for (label, a) in out.aggregates(cfg) {
        if let Some(a) = a {
            let _ = writeln!(
                agg,
                "{},{},{},{},{},{}",
                label,
                a.runs,
                format_f64(a.feasibility.mean),
                format_f64(a.feasibility.halfwidth),
                format_f64(a.stationarity.mean),
                format_f64(a.stationarity.halfwidth)
            );
        }
    }
    write(&dir.join("aggregate.csv"), &agg)?;

    let prepared = &out.prepared;
    let first = prepared.setups.first();
    let (m, gamma) = first
        .map(|s| (s.problem.num_constraints(), s.problem.constraint_lipschitz()))
        .unwrap_or((0, 0.0));
    let constraint = match cfg.constraint.kind {
        ConstraintKind::Linear { m } => json!({"kind": "linear", "m": m}),
        ConstraintKind::L2Ball { a2 } => json!({"kind": "l2ball", "a2": a2}),
    };
    let seeds: Vec<_> = prepared
        .setups
        .iter()
        .map(|s| {
            json!({
                "seed": s.seed,
                "lipschitz": s.lipschitz,
                "x0": s.x0.as_slice(),
                "y0": s.y0.as_ref().map(|y| y.as_slice().to_vec()),
            })
        })
        .collect();
    let solvers: Vec<_> = cfg
        .solvers
        .iter()
        .map(|s| {
            let mut v = solver_json(&s.kind);
            v["label"] = json!(s.label);
            v
        })
        .collect();
    let runs: Vec<_> = out
        .runs
        .iter()
        .map(|r| {
            json!({
                "solver": r.label,
                "seed": r.seed,
                "iterations": r.log.records.len(),
                "component_grad_evals": r.log.counter.component_grad_evals,
                "full_grad_evals": r.log.counter.full_grad_evals,
                "epochs": r.log.counter.epochs(prepared.data.len()),
                "kkt_solves": r.log.kkt_solves,
                "metric_full_grad_evals": r.log.metric_evals,
                "best_index": r.best.map(|b| b.index),
                "stop": r.log.stop,
            })
        })
        .collect();
    let meta = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "dataset": cfg.data.path.display().to_string(),
        "N": prepared.data.len(),
        "n": prepared.data.n_features(),
        "m": m,
        "gamma": gamma,
        "constraint": constraint,
        "constraint_seed": if cfg.constraint.resample_per_seed { None } else { Some(cfg.constraint.seed) },
        "b": cfg.batch_size,
        "inner": prepared.inner,
        "inner_spec": cfg.inner.to_string(),
        "epochs": cfg.epochs,
        "sigma": cfg.sigma,
        "eps_tau": cfg.eps_tau,
        "tau_init": cfg.tau_init,
        "init_scale": cfg.init_scale,
        "sampling": match cfg.sampling {
            SamplingMode::WithReplacement => "with_replacement",
            SamplingMode::WithoutReplacement => "without_replacement",
        },
        "accounting": if cfg.cache_reference { "cached_reference_b_per_step" } else { "recomputed_reference_2b_per_step" },
        "solvers": solvers,
        "seeds": seeds,
        "runs": runs,
        "started_unix": unix_seconds(started),
        "finished_unix": unix_seconds(SystemTime::now()),
    });
    let text = serde_json::to_string_pretty(&meta).expect("metadata is serializable");
    write(&dir.join("metadata.json"), &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formatting_round_trips() {
        for v in [0.1, 1e-7, 3.0, 1.0 / 3.0, 6.02e23, f64::INFINITY] {
            let s = format_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(format_f64(0.5), "0.5");
    }

    #[test]
    fn trajectory_rows() {
        let r = IterateRecord {
            epoch: 1.5,
            outer_k: 0,
            inner_s: 2,
            feasibility_inf: 1e-9,
            stationarity_inf: 0.25,
            merit: 0.7,
            tau: 0.1,
            step: 1.0,
        };
        assert_eq!(trajectory_csv(&[r]), format!("{TRAJECTORY_HEADER}\n1.5,0,2,1e-9,0.25,0.7,0.1,1.0\n"));
    }
}
