//! Applying a bubble clustering to a visit graph: greedy visit reassignment,
//! the random control clustering, and the cost of the disruption.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    compute_loads_demands_over, HcpId, HcpRoster, HcpType, LocationId, LocationRoster, Visit, VisitGraph,
};
use crate::optimizer::{BubbleClustering, OptimizerError};
use crate::spatial::DistanceMatrix;
use crate::weights::WeightMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum RewireError {
    #[error("clustering does not cover {0}")]
    ClusteringMismatch(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewireOptions {
    /// Keep the original HCP on a same-bubble visit when it is free, instead
    /// of drawing from the bubble's available HCPs.
    pub keep_same_bubble_hcp: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DroppedVisit {
    pub source_index: usize,
    pub visit: Visit,
    pub target_bubble: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewiredGraph {
    /// Same rosters as the source, rewired visits.
    pub graph: VisitGraph,
    /// Source visit index of each output visit.
    pub provenance: Vec<usize>,
    pub dropped: Vec<DroppedVisit>,
}

/// Sorted, disjoint busy intervals of one HCP.
#[derive(Debug, Default, Clone)]
struct Busy(Vec<(u64, u64)>);

impl Busy {
    fn is_free(&self, start: u64, end: u64) -> bool {
        let i = self.0.partition_point(|&(s, _)| s < end);
        // Only the interval starting just before `end` can intersect.
        i == 0 || self.0[i - 1].1 <= start
    }

    fn insert(&mut self, start: u64, end: u64) {
        let i = self.0.partition_point(|&(s, _)| s < start);
        self.0.insert(i, (start, end));
    }
}

fn check_coverage(g: &VisitGraph, c: &BubbleClustering) -> Result<(), RewireError> {
    for l in g.locations.substitutable() {
        if !c.location_bubble.contains_key(&l) {
            return Err(RewireError::ClusteringMismatch(format!("location {l}")));
        }
    }
    for p in g.hcps.substitutable() {
        if !c.hcp_bubble.contains_key(&p) {
            return Err(RewireError::ClusteringMismatch(format!("HCP {p}")));
        }
    }
    Ok(())
}

/// Rewires `g` so that substitutable HCPs only visit substitutable rooms of
/// their own bubble.
///
/// Visits by non-substitutable HCPs or to non-substitutable locations are
/// copied first. The remaining visits are processed in start order; each is
/// handed to an HCP of the same group from the room's bubble that is free
/// for the whole interval, chosen uniformly at random, or dropped if none is.
pub fn rewire(
    g: &VisitGraph,
    c: &BubbleClustering,
    seed: u64,
    opts: RewireOptions,
) -> Result<RewiredGraph, RewireError> {
    check_coverage(g, c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut busy: BTreeMap<&HcpId, Busy> = BTreeMap::new();
    let mut out: Vec<(Visit, usize)> = Vec::new();
    let mut pending = Vec::new();
    for (i, v) in g.visits().iter().enumerate() {
        let fixed = !matches!(g.hcps.get(&v.hcp), Some(HcpType::Group(_))) || !g.locations.is_substitutable(&v.location);
        if fixed {
            busy.entry(&v.hcp).or_default().insert(v.start, v.end);
            out.push((v.clone(), i));
        } else {
            pending.push(i);
        }
    }
    pending.sort_by_key(|&i| (g.visits()[i].start, i));

    // Members of each (group, bubble), sorted by id.
    let mut pools: BTreeMap<(usize, usize), Vec<&HcpId>> = BTreeMap::new();
    for (p, &b) in &c.hcp_bubble {
        if let Some(HcpType::Group(gi)) = g.hcps.get(p) {
            pools.entry((gi, b)).or_default().push(p);
        }
    }

    let mut dropped = Vec::new();
    let mut free = Vec::new();
    for i in pending {
        let v = &g.visits()[i];
        let Some(HcpType::Group(gi)) = g.hcps.get(&v.hcp) else {
            unreachable!("pending visits belong to substitutable HCPs")
        };
        let target = c.location_bubble[&v.location];
        let keep = opts.keep_same_bubble_hcp
            && c.hcp_bubble.get(&v.hcp) == Some(&target)
            && busy.get(&v.hcp).is_none_or(|b| b.is_free(v.start, v.end));
        let chosen = if keep {
            Some(&v.hcp)
        } else {
            free.clear();
            if let Some(pool) = pools.get(&(gi, target)) {
                free.extend(
                    pool.iter()
                        .copied()
                        .filter(|p| busy.get(p).is_none_or(|b| b.is_free(v.start, v.end))),
                );
            }
            if free.is_empty() {
                None
            } else {
                Some(free[rng.random_range(0..free.len())])
            }
        };
        match chosen {
            Some(p) => {
                let p = c.hcp_bubble.get_key_value(p).map(|(k, _)| k).expect("pool member");
                busy.entry(p).or_default().insert(v.start, v.end);
                out.push((
                    Visit {
                        hcp: p.clone(),
                        ..v.clone()
                    },
                    i,
                ));
            }
            None => dropped.push(DroppedVisit {
                source_index: i,
                visit: v.clone(),
                target_bubble: target,
            }),
        }
    }
    out.sort_by_key(|(v, i)| (v.start, *i));
    let provenance = out.iter().map(|(_, i)| *i).collect();
    let graph = g.with_visits(out.into_iter().map(|(v, _)| v).collect());
    Ok(RewiredGraph {
        graph,
        provenance,
        dropped,
    })
}

/// Uniformly random balanced clustering: each entity class is shuffled and
/// dealt round-robin into `k` bubbles.
pub fn random_clustering(
    hcps: &HcpRoster,
    locations: &LocationRoster,
    k: usize,
    seed: u64,
    weights: Option<&WeightMatrix>,
) -> Result<BubbleClustering, OptimizerError> {
    let mut locs = locations.substitutable();
    if k == 0 || k > locs.len() {
        return Err(OptimizerError::InvalidK {
            k,
            reason: format!("K must lie in 1..={}", locs.len()),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    locs.shuffle(&mut rng);
    let location_bubble = locs.into_iter().enumerate().map(|(i, l)| (l, i % k)).collect();
    let mut hcp_bubble = BTreeMap::new();
    for gi in 0..hcps.group_count() {
        let mut members = hcps.group_members(gi);
        if k > members.len() {
            return Err(OptimizerError::InvalidK {
                k,
                reason: format!("K exceeds group {} size {}", hcps.group_labels()[gi], members.len()),
            });
        }
        members.shuffle(&mut rng);
        hcp_bubble.extend(members.into_iter().enumerate().map(|(i, p)| (p, i % k)));
    }
    let mut c = BubbleClustering {
        k,
        location_bubble,
        hcp_bubble,
        objective_value: None,
    };
    c.objective_value = weights.map(|w| c.cut_weight(w));
    c.canonicalize();
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub days: u64,
    /// Hours/day, every HCP.
    pub excess_load: BTreeMap<HcpId, f64>,
    /// Hours/day, every substitutable location.
    pub unmet_demand: BTreeMap<LocationId, f64>,
    /// Meters/day walked in the rewired graph.
    pub footsteps: BTreeMap<HcpId, f64>,
    /// Meters/day walked in the source graph.
    pub baseline_footsteps: BTreeMap<HcpId, f64>,
    pub excess_footsteps: BTreeMap<HcpId, f64>,
    /// Meters, per bubble.
    pub bubble_diameters: BTreeMap<usize, f64>,
}

/// Meters per day walked by each HCP between consecutive visits. Transitions
/// involving a location absent from `dist` are skipped.
pub fn footsteps(g: &VisitGraph, dist: &DistanceMatrix, days: u64) -> BTreeMap<HcpId, f64> {
    let mut out: BTreeMap<HcpId, f64> = g.hcps.ids().map(|p| (p.clone(), 0.0)).collect();
    for (p, idx) in g.visits_by_hcp() {
        let mut total = 0.0;
        for w in idx.windows(2) {
            let (a, b) = (&g.visits()[w[0]].location, &g.visits()[w[1]].location);
            total += dist.get(a, b).unwrap_or(0.0);
        }
        out.insert(p.clone(), total / days as f64);
    }
    out
}

/// Costs of replacing `g` by `gr` under clustering `c`. Loads and demands
/// of both graphs are normalised by the day count of `g`.
pub fn compute_costs(g: &VisitGraph, gr: &VisitGraph, c: &BubbleClustering, dist: &DistanceMatrix) -> CostReport {
    let days = g.day_count();
    let base = compute_loads_demands_over(g, days);
    let new = compute_loads_demands_over(gr, days);
    let excess_load = g
        .hcps
        .ids()
        .map(|p| (p.clone(), (new.load(p) - base.load(p)).max(0.0)))
        .collect();
    let unmet_demand = g
        .locations
        .substitutable()
        .into_iter()
        .map(|l| {
            let u = (base.demand(&l) - new.demand(&l)).max(0.0);
            (l, u)
        })
        .collect();
    let baseline_footsteps = footsteps(g, dist, days);
    let rewired_footsteps = footsteps(gr, dist, days);
    let excess_footsteps = rewired_footsteps
        .iter()
        .map(|(p, f)| (p.clone(), (f - baseline_footsteps.get(p).copied().unwrap_or(0.0)).max(0.0)))
        .collect();
    let bubble_diameters = (0..c.k).map(|b| (b, dist.diameter(c.locations_in(b)))).collect();
    CostReport {
        days,
        excess_load,
        unmet_demand,
        footsteps: rewired_footsteps,
        baseline_footsteps,
        excess_footsteps,
        bubble_diameters,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub median: f64,
}

pub fn mean_median(values: &[f64]) -> Stat {
    if values.is_empty() {
        return Stat { mean: 0.0, median: 0.0 };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
    Stat {
        mean: v.iter().sum::<f64>() / n as f64,
        median,
    }
}

/// Mean and median of each metric over substitutable HCPs and locations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSummary {
    pub excess_load_h_per_day: Stat,
    pub unmet_demand_h_per_day: Stat,
    pub footsteps_m_per_day: Stat,
    pub excess_footsteps_m_per_day: Stat,
    pub max_bubble_diameter_m: f64,
    pub dropped_fraction: f64,
}

impl CostReport {
    pub fn summary(&self, hcps: &HcpRoster, dropped_fraction: f64) -> CostSummary {
        let subs = hcps.substitutable();
        let pick = |m: &BTreeMap<HcpId, f64>| subs.iter().map(|p| m.get(p).copied().unwrap_or(0.0)).collect::<Vec<_>>();
        CostSummary {
            excess_load_h_per_day: mean_median(&pick(&self.excess_load)),
            unmet_demand_h_per_day: mean_median(&self.unmet_demand.values().copied().collect::<Vec<_>>()),
            footsteps_m_per_day: mean_median(&pick(&self.footsteps)),
            excess_footsteps_m_per_day: mean_median(&pick(&self.excess_footsteps)),
            max_bubble_diameter_m: self.bubble_diameters.values().copied().fold(0.0, f64::max),
            dropped_fraction,
        }
    }

    /// One row per HCP: `hcp,excess_load_h_per_day,footsteps_m_per_day,baseline_footsteps_m_per_day,excess_footsteps_m_per_day`.
    pub fn write_hcp_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "hcp",
            "excess_load_h_per_day",
            "footsteps_m_per_day",
            "baseline_footsteps_m_per_day",
            "excess_footsteps_m_per_day",
        ])?;
        for (p, x) in &self.excess_load {
            let f = |m: &BTreeMap<HcpId, f64>| m.get(p).copied().unwrap_or(0.0).to_string();
            wtr.write_record([
                p.as_str(),
                &x.to_string(),
                &f(&self.footsteps),
                &f(&self.baseline_footsteps),
                &f(&self.excess_footsteps),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// One row per substitutable location: `location,unmet_demand_h_per_day`.
    pub fn write_location_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["location", "unmet_demand_h_per_day"])?;
        for (l, x) in &self.unmet_demand {
            wtr.write_record([l.as_str(), &x.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
