//! Instances and independent oracles shared by the integration tests and
//! the acceptance runner.

#![allow(dead_code)]

use corn::model::{HcpRoster, LocationId, LocationKind, LocationRoster, Visit, VisitGraph};
use corn::optimizer::{BubbleClustering, Limit};
use corn::spatial::DistanceMatrix;
use corn::weights::WeightMatrix;
use rand::Rng;

pub const HOUR: u64 = 3600;

/// The two-bubble worked example: five group HCPs, one outside HCP, four rooms.
pub fn two_bubble_example() -> (VisitGraph, BubbleClustering) {
    let mut hcps = HcpRoster::new();
    hcps.add_group("1");
    for p in ["p1", "p2", "p3", "p5", "p6"] {
        hcps.insert(p.into(), Some("1"));
    }
    hcps.insert("p4".into(), None);
    let mut locs = LocationRoster::new();
    for l in ["l1", "l2", "l3", "l4"] {
        locs.insert(l.into(), LocationKind::Substitutable);
    }
    let v = |p: &str, l: &str, s: u64, e: u64| Visit::new(p, l, s * HOUR, e * HOUR);
    let visits = vec![
        v("p1", "l1", 0, 2),
        v("p2", "l2", 0, 2),
        v("p5", "l3", 0, 2),
        v("p6", "l4", 0, 2),
        v("p3", "l4", 1, 3),
        v("p2", "l3", 3, 4),
        v("p3", "l4", 3, 4),
        v("p4", "l1", 2, 3),
        v("p4", "l3", 4, 5),
    ];
    let g = VisitGraph::new(hcps, locs, visits).expect("valid example");
    let c = BubbleClustering {
        k: 2,
        location_bubble: [("l1", 0), ("l2", 0), ("l3", 1), ("l4", 1)]
            .into_iter()
            .map(|(l, b)| (l.into(), b))
            .collect(),
        hcp_bubble: [("p1", 0), ("p2", 0), ("p3", 0), ("p5", 1), ("p6", 1)]
            .into_iter()
            .map(|(p, b)| (p.into(), b))
            .collect(),
        objective_value: None,
    };
    (g, c)
}

/// A small unit-chopped log for weight checks: up to four HCPs, each with at
/// most six one-unit visits among three rooms.
pub fn random_weight_log(rng: &mut impl Rng, unit: u64) -> VisitGraph {
    let mut hcps = HcpRoster::new();
    let mut locs = LocationRoster::new();
    for l in ["a", "b", "c"] {
        locs.insert(l.into(), LocationKind::Substitutable);
    }
    let mut visits = Vec::new();
    for p in 0..rng.random_range(1..=4) {
        let id = format!("p{p}");
        hcps.insert(id.as_str().into(), Some("g"));
        for slot in 0..6u64 {
            if rng.random_bool(0.8) {
                let l = ["a", "b", "c"][rng.random_range(0..3)];
                visits.push(Visit::new(id.as_str(), l, slot * unit, (slot + 1) * unit));
            }
        }
    }
    VisitGraph::new(hcps, locs, visits).expect("valid log")
}

/// Exact directed weight by enumerating every outcome of every per-visit
/// coin: the source room starts infected, a visit to it infects the HCP on
/// success, and a later visit by an infected HCP infects the target on success.
pub fn enumerate_directed_weight(g: &VisitGraph, from: &str, to: &str, z: f64) -> f64 {
    let mut events: Vec<(&str, u64, bool)> = g
        .visits()
        .iter()
        .filter(|v| v.location.as_str() == from || v.location.as_str() == to)
        .map(|v| (v.hcp.as_str(), v.start, v.location.as_str() == from))
        .collect();
    events.sort_by_key(|e| (e.0, e.1));
    let n = events.len();
    assert!(n <= 24, "enumeration too large");
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        let mut infected = Vec::new();
        let mut reached = false;
        for (i, &(p, _, is_from)) in events.iter().enumerate() {
            let success = mask >> i & 1 == 1;
            prob *= if success { z } else { 1.0 - z };
            if is_from {
                if success && !infected.contains(&p) {
                    infected.push(p);
                }
            } else if success && infected.contains(&p) {
                reached = true;
            }
        }
        if reached {
            total += prob;
        }
    }
    total
}

/// A random clustering instance over substitutable rooms only.
pub struct IlpInstance {
    pub graph: VisitGraph,
    pub weights: WeightMatrix,
    pub dist: DistanceMatrix,
    pub k: usize,
    pub d_star: Limit,
    pub y_star: Limit,
}

/// `|L_s|` in 4..=8, `K` in {2, 3}, sparse weights, planar distances, one or
/// two HCP groups with random visit logs, and bounds that are sometimes
/// too tight to satisfy.
pub fn random_ilp_instance(rng: &mut impl Rng) -> IlpInstance {
    let n = rng.random_range(4..=8);
    let k = rng.random_range(2..=3);
    let ids: Vec<LocationId> = (0..n).map(|i| LocationId::new(format!("r{i}"))).collect();
    let mut locs = LocationRoster::new();
    for l in &ids {
        locs.insert(l.clone(), LocationKind::Substitutable);
    }
    let mut hcps = HcpRoster::new();
    let groups = rng.random_range(1..=2);
    let mut visits = Vec::new();
    for g in 0..groups {
        let label = format!("g{g}");
        hcps.add_group(&label);
        for m in 0..rng.random_range(k..=k + 2) {
            let id = format!("{label}_{m}");
            hcps.insert(id.as_str().into(), Some(&label));
            let mut t = 0;
            for _ in 0..rng.random_range(0..=4) {
                let d = rng.random_range(1..=4) * 900;
                visits.push(Visit::new(id.as_str(), ids[rng.random_range(0..n)].as_str(), t, t + d));
                t += d + rng.random_range(0..=2) * 900;
            }
        }
    }
    hcps.insert("outside".into(), None);
    visits.push(Visit::new("outside", ids[0].as_str(), 0, 600));
    let graph = VisitGraph::new(hcps, locs, visits).expect("valid log");

    let mut weights = WeightMatrix::new(ids.clone(), 0.1);
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(0.4) {
                let w = (rng.random_range(1..=1000) as f64) / 1000.0;
                weights.set(&ids[a], &ids[b], w);
            }
        }
    }
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(0..=20) as f64, rng.random_range(0..=20) as f64))
        .collect();
    let pos = |l: &LocationId| pts[ids.iter().position(|x| x == l).unwrap()];
    let dist = DistanceMatrix::from_fn(ids.clone(), |a, b| {
        let (p, q) = (pos(a), pos(b));
        (p.0 - q.0).abs() + (p.1 - q.1).abs()
    })
    .expect("L1 distances are a metric");
    let d_star = if rng.random_bool(0.5) {
        Limit::Finite(rng.random_range(5..=30) as f64)
    } else {
        Limit::Unbounded
    };
    let y_star = if rng.random_bool(0.5) {
        Limit::Finite(rng.random_range(0..=8) as f64 * 0.25)
    } else {
        Limit::Unbounded
    };
    IlpInstance {
        graph,
        weights,
        dist,
        k,
        d_star,
        y_star,
    }
}

/// Variable and constraint counts derived from the raw inputs.
pub fn expected_counts(
    weights: &WeightMatrix,
    dist: &DistanceMatrix,
    hcps: &HcpRoster,
    k: usize,
    d_star: Limit,
    y_star: Limit,
) -> (usize, usize) {
    let ids = weights.ids();
    let n = ids.len();
    let mut pairs = 0;
    let mut far = 0;
    for a in 0..n {
        for b in a + 1..n {
            let too_far = d_star.finite().is_some_and(|d| dist.dist(&ids[a], &ids[b]) > d);
            far += too_far as usize;
            pairs += (weights.get(&ids[a], &ids[b]) > 0.0 || too_far) as usize;
        }
    }
    // Lower-bound rows on bubble sizes only when the caps leave room for an empty bubble.
    let lower_rows = |m: usize| if m.div_ceil(k) * (k - 1) >= m { k } else { 0 };
    let sizes: Vec<usize> = (0..hcps.group_count()).map(|g| hcps.group_members(g).len()).collect();
    let members: usize = sizes.iter().sum();
    let vars = pairs + n * k + members * k;
    let mut cons = 2 * k * pairs + n + k + lower_rows(n);
    if d_star.is_finite() {
        cons += pairs + far * k;
    }
    for &m in &sizes {
        cons += k + lower_rows(m);
    }
    cons += members;
    if y_star.is_finite() {
        cons += sizes.len() * k;
    }
    (vars, cons)
}
