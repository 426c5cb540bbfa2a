//! Infectivity calibration against a target basic reproduction number.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{agent_bubbles, run_replicate, Agents, ContactSchedule, SimConfig, SimError};
use crate::model::VisitGraph;

/// Relative tolerance on the achieved R0.
const R0_TOL: f64 = 0.05;
/// Infectivity at which every contact of the seed transmits.
const SATURATING_RHO: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R0Estimate {
    pub rho: f64,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub target: f64,
    pub rho: f64,
    pub estimate: R0Estimate,
    /// Every (rho, R0) evaluated, in evaluation order.
    pub evaluations: Vec<(f64, f64)>,
    /// Whether the evaluated R0 values were non-decreasing in rho.
    pub monotone: bool,
}

/// Mean number of agents infected directly by the seed while every other
/// infected agent stays non-transmitting, over `cfg.replicates` replicates.
pub fn estimate_r0(g: &VisitGraph, rho: f64, cfg: &SimConfig) -> Result<R0Estimate, SimError> {
    let mut cfg = cfg.clone();
    cfg.disease.rho = rho;
    cfg.validate()?;
    let agents = Agents::new(g, cfg.seed_group.as_deref())?;
    let sched = ContactSchedule::build(g);
    let bubbles = agent_bubbles(g, None);
    let horizon = cfg.disease.infectious_days() as u64 + 1;
    let counts: Vec<f64> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(&sched, &agents, &bubbles, 1.0, &cfg, horizon, r, true).secondary_infections as f64)
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = if counts.len() > 1 {
        counts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let half = 1.96 * (var / n).sqrt();
    Ok(R0Estimate {
        rho,
        mean,
        ci_low: mean - half,
        ci_high: mean + half,
        replicates: counts.len(),
    })
}

/// Bisects on rho until the estimated R0 is within 5% of `target`.
pub fn calibrate_rho(g: &VisitGraph, target: f64, cfg: &SimConfig) -> Result<Calibration, SimError> {
    if !(target >= 0.0 && target.is_finite()) {
        return Err(SimError::Config("target R0 must be finite and non-negative".into()));
    }
    let mut evals = Vec::new();
    let mut eval = |rho: f64| -> Result<R0Estimate, SimError> {
        let e = estimate_r0(g, rho, cfg)?;
        evals.push((rho, e.mean));
        Ok(e)
    };
    let close = |r: f64| (r - target).abs() <= R0_TOL * target;
    let zero = eval(0.0)?;
    if target == 0.0 || close(zero.mean) {
        return Ok(finish(target, zero, evals));
    }
    let max = eval(SATURATING_RHO)?;
    if max.mean < target * (1.0 - R0_TOL) {
        return Err(SimError::NotBracketed {
            target,
            reached: max.mean,
            rho: SATURATING_RHO,
        });
    }
    let mut lo = 0.0;
    let mut hi = 1e-4;
    let mut hi_est = eval(hi)?;
    while hi_est.mean < target && !close(hi_est.mean) {
        lo = hi;
        hi *= 2.0;
        hi_est = eval(hi)?;
    }
    if close(hi_est.mean) {
        return Ok(finish(target, hi_est, evals));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let est = eval(mid)?;
        if close(est.mean) {
            return Ok(finish(target, est, evals));
        }
        if est.mean < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // The estimate jumps past the tolerance band between adjacent rho values.
    Err(SimError::NotBracketed {
        target,
        reached: hi_est.mean,
        rho: hi,
    })
}

fn finish(target: f64, estimate: R0Estimate, evaluations: Vec<(f64, f64)>) -> Calibration {
    let mut sorted = evaluations.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = sorted.windows(2).all(|w| w[1].1 >= w[0].1);
    Calibration {
        target,
        rho: estimate.rho,
        estimate,
        evaluations,
        monotone,
    }
}
