use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ControllerKind, ScenarioConfig};
use super::metrics::{summarize, summarize_paired, RunSummary};
use super::sim::{run_scenario, TimeSeries};
use super::HarnessError;

/// Seed of repeat `r` derived from the scenario's base seed.
pub fn repeat_seed(base: u64, r: usize) -> u64 {
    base.wrapping_add(r as u64)
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, count) = xs.fold((0.0, 0usize), |(s, c), x| (s + x, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Summaries of `repeats` runs of `cfg` with seeds derived from its own
/// seed, computed in parallel and returned in repeat order.
pub fn run_repeats(cfg: &ScenarioConfig, repeats: usize) -> Result<Vec<RunSummary>, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::ConfigInvalid("repeats must be at least 1".into()));
    }
    (0..repeats)
        .into_par_iter()
        .map(|r| {
            let run = cfg.clone().with_seed(repeat_seed(cfg.rng_seed, r));
            run_scenario(&run).map(|s| summarize(&s, &run.metrics))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub bound: f64,
    pub repeats: usize,
    /// Repeats whose error fell below the threshold after onset.
    pub converged: usize,
    /// Mean convergence time over the converged repeats (s).
    pub mean_convergence_time: Option<f64>,
    pub mean_steady_state_error: Option<f64>,
}

/// Averages over `repeats` seeds for each delay bound; every bound sees the
/// same seeds.
pub fn run_delay_sweep(base: &ScenarioConfig, bounds: &[f64], repeats: usize) -> Result<Vec<SweepRow>, HarnessError> {
    bounds
        .iter()
        .map(|&bound| {
            if !(bound.is_finite() && bound >= 0.0) {
                return Err(HarnessError::ConfigInvalid(format!("delay bound {bound} must be finite and >= 0")));
            }
            let runs = run_repeats(&base.clone().with_delay_bound(bound), repeats)?;
            Ok(SweepRow {
                bound,
                repeats,
                converged: runs.iter().filter(|s| s.convergence_time.is_some()).count(),
                mean_convergence_time: mean(runs.iter().filter_map(|s| s.convergence_time)),
                mean_steady_state_error: mean(runs.iter().filter_map(|s| s.steady_state_error)),
            })
        })
        .collect()
}

/// Proposed controller against the leader-follower baseline on one seed.
/// Both summaries carry error reductions relative to an uncorrected run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineComparison {
    pub seed: u64,
    pub proposed: RunSummary,
    pub leader_follower: RunSummary,
}

pub struct ComparisonRuns {
    pub proposed: TimeSeries,
    pub leader_follower: TimeSeries,
    pub uncorrected: TimeSeries,
}

/// Runs the three controllers with delays disabled and identical seeds.
pub fn run_comparison_series(base: &ScenarioConfig) -> Result<ComparisonRuns, HarnessError> {
    let cfg = base.clone().with_delay_bound(0.0);
    Ok(ComparisonRuns {
        proposed: run_scenario(&cfg.clone().with_controller(ControllerKind::Proposed))?,
        leader_follower: run_scenario(&cfg.clone().with_controller(ControllerKind::LeaderFollower))?,
        uncorrected: run_scenario(&cfg.with_controller(ControllerKind::None))?,
    })
}

pub fn run_baseline_comparison(base: &ScenarioConfig) -> Result<BaselineComparison, HarnessError> {
    let runs = run_comparison_series(base)?;
    Ok(BaselineComparison {
        seed: base.rng_seed,
        proposed: summarize_paired(&runs.proposed, &runs.uncorrected, &base.metrics),
        leader_follower: summarize_paired(&runs.leader_follower, &runs.uncorrected, &base.metrics),
    })
}

pub fn run_baseline_repeats(base: &ScenarioConfig, repeats: usize) -> Result<Vec<BaselineComparison>, HarnessError> {
    if repeats == 0 {
        return Err(HarnessError::ConfigInvalid("repeats must be at least 1".into()));
    }
    (0..repeats)
        .into_par_iter()
        .map(|r| run_baseline_comparison(&base.clone().with_seed(repeat_seed(base.rng_seed, r))))
        .collect()
}
