//! Side-by-side statistics of simulated arms with bootstrap intervals.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SimSummary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmStats {
    pub name: String,
    pub replicates: usize,
    pub mean_infections: f64,
    pub median_infections: f64,
    pub leave_pct: f64,
    pub reach_pct: f64,
}

/// `other` minus `reference` in mean infections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDifference {
    pub reference: String,
    pub other: String,
    pub mean_difference: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Replicates were resampled jointly (common random numbers).
    pub paired: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub arms: Vec<ArmStats>,
    pub differences: Vec<PairedDifference>,
}

impl ComparisonReport {
    pub fn difference(&self, reference: &str, other: &str) -> Option<&PairedDifference> {
        self.differences.iter().find(|d| d.reference == reference && d.other == other)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len().max(1) as f64
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// 95% percentile-bootstrap interval of `mean(b) - mean(a)`.
fn bootstrap(a: &[f64], b: &[f64], paired: bool, resamples: usize, rng: &mut ChaCha8Rng) -> (f64, f64) {
    if a.is_empty() || b.is_empty() || resamples == 0 {
        let d = mean(b) - mean(a);
        return (d, d);
    }
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let d = if paired {
            (0..a.len())
                .map(|_| {
                    let i = rng.random_range(0..a.len());
                    b[i] - a[i]
                })
                .sum::<f64>()
                / a.len() as f64
        } else {
            let ma = (0..a.len()).map(|_| a[rng.random_range(0..a.len())]).sum::<f64>() / a.len() as f64;
            let mb = (0..b.len()).map(|_| b[rng.random_range(0..b.len())]).sum::<f64>() / b.len() as f64;
            mb - ma
        };
        stats.push(d);
    }
    stats.sort_by(f64::total_cmp);
    (percentile(&stats, 0.025), percentile(&stats, 0.975))
}

/// Aligned statistics for named arms plus bootstrap intervals for every
/// ordered pair (earlier arm as reference). Arms with equal replicate
/// counts are compared pairwise by replicate index.
pub fn compare_runs(arms: &[(&str, &SimSummary)], resamples: usize, seed: u64) -> ComparisonReport {
    let stats = arms
        .iter()
        .map(|(name, s)| ArmStats {
            name: name.to_string(),
            replicates: s.replicates.len(),
            mean_infections: s.aggregates.mean_infections,
            median_infections: s.aggregates.median_infections,
            leave_pct: s.aggregates.leave_pct,
            reach_pct: s.aggregates.reach_pct,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut differences = Vec::new();
    for i in 0..arms.len() {
        for j in i + 1..arms.len() {
            let a = arms[i].1.infections();
            let b = arms[j].1.infections();
            let paired = a.len() == b.len();
            let (ci_low, ci_high) = bootstrap(&a, &b, paired, resamples, &mut rng);
            differences.push(PairedDifference {
                reference: arms[i].0.to_string(),
                other: arms[j].0.to_string(),
                mean_difference: mean(&b) - mean(&a),
                ci_low,
                ci_high,
                paired,
            });
        }
    }
    ComparisonReport {
        arms: stats,
        differences,
    }
}
