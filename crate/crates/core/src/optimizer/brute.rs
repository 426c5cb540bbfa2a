//! Exhaustive reference solver for small instances. Shares no search code
//! with the branch-and-bound solver and reads the raw inputs directly.

use std::collections::BTreeMap;

use super::{BubbleClustering, ClusteringInputs, OptimizerError, SolveOutcome, FEAS_TOL};
use crate::model::{HcpId, LocationId};

pub const BRUTE_FORCE_MAX_LOCATIONS: usize = 10;

/// Calls `f` with every assignment of `n` items to exactly `k` labelled-by-
/// first-appearance blocks (restricted growth strings).
fn partitions(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(i: usize, used: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if i == n {
            if used == k {
                f(cur);
            }
            return;
        }
        if k - used > n - i {
            return;
        }
        for b in 0..(used + 1).min(k) {
            cur.push(b);
            rec(i + 1, used.max(b + 1), n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, 0, n, k, &mut Vec::with_capacity(n), f);
}

/// Smallest largest gap over all assignments of `loads` to `k` bubbles with
/// sizes in `1..=cap`, with the assignment achieving it.
fn best_group(loads: &[f64], dem: &[f64], cap: usize) -> Option<(f64, Vec<usize>)> {
    let k = dem.len();
    let m = loads.len();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut cur = vec![0usize; m];
    loop {
        let mut count = vec![0usize; k];
        let mut supply = vec![0.0; k];
        for (i, &b) in cur.iter().enumerate() {
            count[b] += 1;
            supply[b] += loads[i];
        }
        if count.iter().all(|&c| c >= 1 && c <= cap) {
            let gap = (0..k).map(|b| dem[b] - supply[b]).fold(f64::NEG_INFINITY, f64::max);
            if best.as_ref().is_none_or(|(g, _)| gap < *g) {
                best = Some((gap, cur.clone()));
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == m {
                return best;
            }
            cur[i] += 1;
            if cur[i] < k {
                break;
            }
            cur[i] = 0;
            i += 1;
        }
    }
}

/// Enumerates every feasible clustering and returns one with the least cut.
pub fn brute_force_solve(inp: &ClusteringInputs<'_>) -> Result<SolveOutcome, OptimizerError> {
    let locs: Vec<LocationId> = inp.locations.substitutable();
    let n = locs.len();
    let k = inp.k;
    if n > BRUTE_FORCE_MAX_LOCATIONS {
        return Err(OptimizerError::TooLarge {
            got: n,
            max: BRUTE_FORCE_MAX_LOCATIONS,
        });
    }
    if k == 0 || k > n {
        return Err(OptimizerError::InvalidK {
            k,
            reason: "K must lie in 1..=|L_s|".into(),
        });
    }
    let groups: Vec<Vec<HcpId>> = (0..inp.hcps.group_count()).map(|g| inp.hcps.group_members(g)).collect();
    if groups.iter().any(|m| m.len() < k) {
        return Err(OptimizerError::InvalidK {
            k,
            reason: "K exceeds a group size".into(),
        });
    }
    let cap = n.div_ceil(k);
    let mut best: Option<(f64, Vec<usize>, Vec<Vec<usize>>)> = None;
    partitions(n, k, &mut |assign| {
        let mut sizes = vec![0usize; k];
        for &b in assign {
            sizes[b] += 1;
        }
        if sizes.iter().any(|&s| s > cap) {
            return;
        }
        if let Some(ds) = inp.d_star.finite() {
            for i in 0..n {
                for j in i + 1..n {
                    if assign[i] == assign[j] && inp.dist.dist(&locs[i], &locs[j]) > ds + FEAS_TOL {
                        return;
                    }
                }
            }
        }
        let mut placements = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            let loads: Vec<f64> = members.iter().map(|p| inp.loads.load(p)).collect();
            let mut dem = vec![0.0; k];
            for (i, l) in locs.iter().enumerate() {
                dem[assign[i]] += inp.loads.group_demand(l, g);
            }
            let Some((gap, placement)) = best_group(&loads, &dem, members.len().div_ceil(k)) else {
                return;
            };
            if let Some(ys) = inp.y_star.finite() {
                if gap > ys + FEAS_TOL {
                    return;
                }
            }
            placements.push(placement);
        }
        let mut cut = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                if assign[i] != assign[j] {
                    cut += inp.weights.get(&locs[i], &locs[j]);
                }
            }
        }
        if best.as_ref().is_none_or(|(c, _, _)| cut < *c - 1e-12) {
            best = Some((cut, assign.to_vec(), placements));
        }
    });
    Ok(match best {
        None => SolveOutcome::Infeasible,
        Some((cut, assign, placements)) => {
            let mut hcp_bubble = BTreeMap::new();
            for (members, placement) in groups.iter().zip(placements) {
                for (p, b) in members.iter().zip(placement) {
                    hcp_bubble.insert(p.clone(), b);
                }
            }
            let mut c = BubbleClustering {
                k,
                location_bubble: locs.into_iter().zip(assign).collect(),
                hcp_bubble,
                objective_value: Some(cut),
            };
            c.canonicalize();
            SolveOutcome::Optimal(c)
        }
    })
}
