//! Pairwise room-to-room transmission weights computed from interleaved HCP
//! visits, plus a Monte-Carlo estimator used as an independent check.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{chop_intervals, HcpId, HcpType, LocationId, VisitGraph, SECONDS_PER_DAY};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("visit #{visit} lasts {duration}s, not chopped to unit {unit}s")]
    NotChopped { visit: usize, duration: u64, unit: u64 },
    #[error("transmission probability {0} outside [0, 1]")]
    BadProbability(f64),
    #[error("weight pair must name two distinct locations")]
    SameLocation,
    #[error("weights csv: {0}")]
    Csv(String),
}

/// Which HCPs carry weight between rooms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HcpScope {
    #[default]
    All,
    NsOnly,
}

impl std::str::FromStr for HcpScope {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "ns_only" | "ns-only" => Ok(Self::NsOnly),
            _ => Err(format!("unknown hcp scope {s:?} (expected all or ns_only)")),
        }
    }
}

/// Symmetric weights over unordered pairs of substitutable locations. Zero
/// weights are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    ids: Vec<LocationId>,
    index: HashMap<LocationId, usize>,
    pairs: BTreeMap<(usize, usize), f64>,
    /// Per-interval transmission probability used to build the matrix.
    pub z: f64,
}

impl WeightMatrix {
    pub fn new(ids: Vec<LocationId>, z: f64) -> Self {
        let mut ids = ids;
        ids.sort();
        ids.dedup();
        let index = ids.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        Self {
            ids,
            index,
            pairs: BTreeMap::new(),
            z,
        }
    }

    /// Sets `w(a, b)`; panics if the ids are unknown or equal, or `w` is outside [0, 1].
    pub fn set(&mut self, a: &LocationId, b: &LocationId, w: f64) {
        assert!((0.0..=1.0).contains(&w), "weight {w} outside [0, 1]");
        let (i, j) = (self.index[a], self.index[b]);
        assert_ne!(i, j, "weight on the diagonal");
        let key = (i.min(j), i.max(j));
        if w > 0.0 {
            self.pairs.insert(key, w);
        } else {
            self.pairs.remove(&key);
        }
    }

    pub fn get(&self, a: &LocationId, b: &LocationId) -> f64 {
        match (self.index.get(a), self.index.get(b)) {
            (Some(&i), Some(&j)) if i != j => {
                self.pairs.get(&(i.min(j), i.max(j))).copied().unwrap_or(0.0)
            }
            _ => 0.0,
        }
    }

    pub fn ids(&self) -> &[LocationId] {
        &self.ids
    }

    /// Nonzero pairs `(a, b, w)` with `a < b` lexicographically.
    pub fn nonzero(&self) -> impl Iterator<Item = (&LocationId, &LocationId, f64)> {
        self.pairs
            .iter()
            .map(|(&(i, j), &w)| (&self.ids[i], &self.ids[j], w))
    }

    pub fn nonzero_count(&self) -> usize {
        self.pairs.len()
    }

    pub fn total(&self) -> f64 {
        self.pairs.values().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["loc_a", "loc_b", "weight"])?;
        for (a, b, x) in self.nonzero() {
            wtr.write_record([a.as_str(), b.as_str(), &x.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Reads `loc_a,loc_b,weight` rows over the given location set.
    pub fn read_csv<R: Read>(r: R, ids: Vec<LocationId>) -> Result<Self, WeightError> {
        #[derive(Deserialize)]
        struct Row {
            loc_a: String,
            loc_b: String,
            weight: f64,
        }
        let mut m = Self::new(ids, f64::NAN);
        let mut rdr = csv::Reader::from_reader(r);
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| WeightError::Csv(e.to_string()))?;
            let (a, b) = (LocationId::new(row.loc_a), LocationId::new(row.loc_b));
            if !m.index.contains_key(&a) || !m.index.contains_key(&b) {
                return Err(WeightError::Csv(format!("unknown location pair ({a},{b})")));
            }
            if a == b {
                return Err(WeightError::SameLocation);
            }
            if !(0.0..=1.0).contains(&row.weight) {
                return Err(WeightError::BadProbability(row.weight));
            }
            m.set(&a, &b, row.weight);
        }
        Ok(m)
    }
}

fn check_probability(z: f64) -> Result<(), WeightError> {
    if (0.0..=1.0).contains(&z) {
        Ok(())
    } else {
        Err(WeightError::BadProbability(z))
    }
}

/// Per HCP, the time-ordered flags of its visits to `from` (true) or `to` (false).
fn hcp_sequences(
    g: &VisitGraph,
    from: &LocationId,
    to: &LocationId,
    unit: u64,
) -> Result<Vec<(HcpId, Vec<bool>)>, WeightError> {
    let mut seqs: BTreeMap<&HcpId, Vec<(u64, bool)>> = BTreeMap::new();
    for (i, v) in g.visits().iter().enumerate() {
        let is_from = &v.location == from;
        if !is_from && &v.location != to {
            continue;
        }
        if 2 * v.duration() >= 3 * unit {
            return Err(WeightError::NotChopped {
                visit: i,
                duration: v.duration(),
                unit,
            });
        }
        seqs.entry(&v.hcp).or_default().push((v.start, is_from));
    }
    Ok(seqs
        .into_iter()
        .filter(|(_, s)| s.iter().any(|x| x.1) && s.iter().any(|x| !x.1))
        .map(|(p, mut s)| {
            s.sort_by_key(|x| x.0);
            (p.clone(), s.into_iter().map(|x| x.1).collect())
        })
        .collect())
}

/// Probability that one HCP carries infection from the `true` room to the
/// `false` room along `seq`: it is infected at some visit to the source (each
/// with probability `z`), then infects the target on at least one later visit.
pub fn carry_probability(seq: &[bool], z: f64) -> f64 {
    let total_to = seq.iter().filter(|&&b| !b).count() as i32;
    let miss = 1.0 - z;
    let mut pre = 0i32;
    let mut seen_to = 0i32;
    let mut p = 0.0;
    for &is_from in seq {
        if is_from {
            let suf = total_to - seen_to;
            p += miss.powi(pre) * z * (1.0 - miss.powi(suf));
            pre += 1;
        } else {
            seen_to += 1;
        }
    }
    p
}

/// Directed weight from `from` to `to` over a graph already chopped to
/// `unit`-second intervals.
pub fn directed_weight(
    g: &VisitGraph,
    from: &LocationId,
    to: &LocationId,
    z: f64,
    unit: u64,
) -> Result<f64, WeightError> {
    check_probability(z)?;
    if from == to {
        return Err(WeightError::SameLocation);
    }
    let mut survive = 1.0;
    for (_, seq) in hcp_sequences(g, from, to, unit)? {
        survive *= 1.0 - carry_probability(&seq, z);
    }
    Ok(1.0 - survive)
}

/// Monte-Carlo estimate of [`directed_weight`]: `from` is infected from the
/// start, each visit of a susceptible HCP to `from` infects it with
/// probability `z`, and each visit of an infected HCP to `to` infects `to`
/// with probability `z`.
pub fn mc_directed_weight(
    g: &VisitGraph,
    from: &LocationId,
    to: &LocationId,
    z: f64,
    unit: u64,
    samples: u64,
    seed: u64,
) -> Result<f64, WeightError> {
    check_probability(z)?;
    if from == to {
        return Err(WeightError::SameLocation);
    }
    assert!(samples >= 1);
    let seqs = hcp_sequences(g, from, to, unit)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut reached = false;
        for (_, seq) in &seqs {
            let mut carrier = false;
            for &is_from in seq {
                let coin = rng.random::<f64>() < z;
                if is_from {
                    carrier |= coin;
                } else if carrier && coin {
                    reached = true;
                }
            }
        }
        hits += reached as u64;
    }
    Ok(hits as f64 / samples as f64)
}

/// Symmetric transmission weights over `L_s`: each unordered pair gets the mean
/// of its two directed weights. Visits are chopped to `unit` seconds first.
pub fn weight_matrix(g: &VisitGraph, z: f64, unit: u64, scope: HcpScope) -> Result<WeightMatrix, WeightError> {
    check_probability(z)?;
    let chopped = chop_intervals(g, unit);
    let rooms = g.locations.substitutable();
    let room_index: HashMap<&LocationId, usize> = rooms.iter().enumerate().map(|(i, l)| (l, i)).collect();

    // For each in-scope HCP: visit positions per room in its time-ordered
    // sequence of substitutable-room visits.
    let by_hcp = chopped.visits_by_hcp();
    let mut hcps: Vec<&&HcpId> = by_hcp.keys().collect();
    hcps.sort();
    let mut positions: Vec<HashMap<usize, Vec<u32>>> = Vec::new();
    for p in hcps {
        let in_scope = match scope {
            HcpScope::All => true,
            HcpScope::NsOnly => chopped.hcps.get(p) == Some(HcpType::NonSubstitutable),
        };
        if !in_scope {
            continue;
        }
        let mut pos: HashMap<usize, Vec<u32>> = HashMap::new();
        let mut k = 0u32;
        for &vi in &by_hcp[*p] {
            if let Some(&r) = room_index.get(&chopped.visits()[vi].location) {
                pos.entry(r).or_default().push(k);
                k += 1;
            }
        }
        positions.push(pos);
    }

    let n = rooms.len();
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
    let weights: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let mut survive_ab = 1.0;
            let mut survive_ba = 1.0;
            let mut seq = Vec::new();
            for pos in &positions {
                let (Some(pa), Some(pb)) = (pos.get(&a), pos.get(&b)) else {
                    continue;
                };
                merge_flags(pa, pb, &mut seq);
                survive_ab *= 1.0 - carry_probability(&seq, z);
                seq.iter_mut().for_each(|f| *f = !*f);
                survive_ba *= 1.0 - carry_probability(&seq, z);
            }
            ((1.0 - survive_ab) + (1.0 - survive_ba)) / 2.0
        })
        .collect();

    let mut m = WeightMatrix::new(rooms.clone(), z);
    for (&(a, b), &w) in pairs.iter().zip(&weights) {
        if w > 0.0 {
            m.pairs.insert((a, b), w.clamp(0.0, 1.0));
        }
    }
    Ok(m)
}

/// Mean over days of the per-day weight matrices. Long logs drive
/// whole-log weights toward 1 for every pair sharing an HCP; the daily mean
/// keeps the relative ordering of pairs.
pub fn daily_weight_matrix(g: &VisitGraph, z: f64, unit: u64, scope: HcpScope) -> Result<WeightMatrix, WeightError> {
    check_probability(z)?;
    let days = g.day_count().max(1);
    let mut by_day = vec![Vec::new(); days as usize];
    for v in g.visits() {
        by_day[(v.start / SECONDS_PER_DAY) as usize].push(v.clone());
    }
    let rooms = g.locations.substitutable();
    let mut sum: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for visits in by_day {
        let day = weight_matrix(&g.with_visits(visits), z, unit, scope)?;
        for (&key, &w) in &day.pairs {
            *sum.entry(key).or_default() += w;
        }
    }
    let mut m = WeightMatrix::new(rooms, z);
    for (key, w) in sum {
        m.pairs.insert(key, (w / days as f64).clamp(0.0, 1.0));
    }
    Ok(m)
}

fn merge_flags(a: &[u32], b: &[u32], out: &mut Vec<bool>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i] < b[j]) {
            out.push(true);
            i += 1;
        } else {
            out.push(false);
            j += 1;
        }
    }
}

/// Default per-interval probability: base infectivity times interval length
/// in minutes at peak shedding.
pub fn default_z(rho_per_minute: f64, unit_s: u64) -> f64 {
    (rho_per_minute * unit_s as f64 / 60.0).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HcpRoster, LocationKind, LocationRoster, Visit};

    fn graph(visits: Vec<Visit>) -> VisitGraph {
        let mut h = HcpRoster::new();
        let mut l = LocationRoster::new();
        for v in &visits {
            h.insert(v.hcp.clone(), Some("g"));
            l.insert(v.location.clone(), LocationKind::Substitutable);
        }
        VisitGraph::new(h, l, visits).unwrap()
    }

    #[test]
    fn one_visit_each_way() {
        let g = graph(vec![Visit::new("p", "a", 0, 60), Visit::new("p", "b", 60, 120)]);
        let ab = directed_weight(&g, &"a".into(), &"b".into(), 0.5, 60).unwrap();
        let ba = directed_weight(&g, &"b".into(), &"a".into(), 0.5, 60).unwrap();
        assert!((ab - 0.25).abs() < 1e-15);
        assert_eq!(ba, 0.0);
        let w = weight_matrix(&g, 0.5, 60, HcpScope::All).unwrap();
        assert!((w.get(&"a".into(), &"b".into()) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn source_once_target_twice() {
        let g = graph(vec![
            Visit::new("p", "a", 0, 60),
            Visit::new("p", "b", 60, 120),
            Visit::new("p", "b", 120, 180),
        ]);
        let ab = directed_weight(&g, &"a".into(), &"b".into(), 0.5, 60).unwrap();
        assert!((ab - 0.375).abs() < 1e-15);
    }

    #[test]
    fn zero_z_gives_zero() {
        let g = graph(vec![Visit::new("p", "a", 0, 60), Visit::new("p", "b", 60, 120)]);
        assert_eq!(directed_weight(&g, &"a".into(), &"b".into(), 0.0, 60).unwrap(), 0.0);
        let w = weight_matrix(&g, 0.0, 60, HcpScope::All).unwrap();
        assert_eq!(w.nonzero_count(), 0);
    }

    #[test]
    fn two_hcps_combine_as_independent_routes() {
        let g = graph(vec![
            Visit::new("p", "a", 0, 60),
            Visit::new("p", "b", 60, 120),
            Visit::new("q", "a", 0, 60),
            Visit::new("q", "b", 60, 120),
        ]);
        let ab = directed_weight(&g, &"a".into(), &"b".into(), 0.5, 60).unwrap();
        assert!((ab - 0.4375).abs() < 1e-15);
    }

    #[test]
    fn unchopped_visit_is_rejected() {
        let g = graph(vec![Visit::new("p", "a", 0, 600), Visit::new("p", "b", 600, 660)]);
        assert!(matches!(
            directed_weight(&g, &"a".into(), &"b".into(), 0.5, 60),
            Err(WeightError::NotChopped { .. })
        ));
    }

    #[test]
    fn weight_matrix_chops_internally() {
        // 120 s at a then 60 s at b: two source intervals, one target interval.
        let g = graph(vec![Visit::new("p", "a", 0, 120), Visit::new("p", "b", 120, 180)]);
        let w = weight_matrix(&g, 0.5, 60, HcpScope::All).unwrap();
        let expect_ab = 0.5 * 0.5 + 0.5 * 0.5 * 0.5;
        assert!((w.get(&"a".into(), &"b".into()) - expect_ab / 2.0).abs() < 1e-15);
    }

    #[test]
    fn ns_scope_ignores_group_hcps() {
        let mut h = HcpRoster::new();
        h.insert("n".into(), Some("nurse"));
        h.insert("d".into(), None);
        let mut l = LocationRoster::new();
        l.insert("a".into(), LocationKind::Substitutable);
        l.insert("b".into(), LocationKind::Substitutable);
        l.insert("c".into(), LocationKind::Substitutable);
        let g = VisitGraph::new(
            h,
            l,
            vec![
                Visit::new("n", "a", 0, 60),
                Visit::new("n", "b", 60, 120),
                Visit::new("d", "b", 0, 60),
                Visit::new("d", "c", 60, 120),
            ],
        )
        .unwrap();
        let w = weight_matrix(&g, 0.5, 60, HcpScope::NsOnly).unwrap();
        assert_eq!(w.get(&"a".into(), &"b".into()), 0.0);
        assert!(w.get(&"b".into(), &"c".into()) > 0.0);
    }

    #[test]
    fn csv_round_trip_is_lexicographic() {
        let ids: Vec<LocationId> = ["c", "a", "b"].into_iter().map(LocationId::from).collect();
        let mut m = WeightMatrix::new(ids.clone(), 0.1);
        m.set(&"c".into(), &"a".into(), 0.5);
        m.set(&"b".into(), &"c".into(), 0.25);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "loc_a,loc_b,weight\na,c,0.5\nb,c,0.25\n");
        let back = WeightMatrix::read_csv(&buf[..], ids).unwrap();
        assert_eq!(back.get(&"a".into(), &"c".into()), 0.5);
    }

    proptest::proptest! {
        #[test]
        fn weights_grow_with_z(
            slots in proptest::collection::vec((0usize..2, 0usize..3), 1..12),
            z1 in 0.0f64..1.0,
            dz in 0.0f64..0.5,
        ) {
            // Each slot is (hcp, room) for consecutive 60 s intervals.
            let mut t = [0u64; 2];
            let visits = slots
                .iter()
                .map(|&(p, l)| {
                    t[p] += 60;
                    Visit::new(format!("p{p}"), format!("r{l}"), t[p] - 60, t[p])
                })
                .collect();
            let g = graph(visits);
            let z2 = (z1 + dz).min(1.0);
            let lo = weight_matrix(&g, z1, 60, HcpScope::All).unwrap();
            let hi = weight_matrix(&g, z2, 60, HcpScope::All).unwrap();
            for a in lo.ids() {
                for b in lo.ids() {
                    let (x, y) = (lo.get(a, b), hi.get(a, b));
                    proptest::prop_assert!((0.0..=1.0).contains(&x));
                    proptest::prop_assert!(y >= x - 1e-12);
                    proptest::prop_assert_eq!(x, lo.get(b, a));
                }
            }
        }

        #[test]
        fn carry_probability_matches_expansion(seq in proptest::collection::vec(proptest::bool::ANY, 0..10), z in 0.0f64..1.0) {
            // Sum over the first successful source visit, then any later target success.
            let mut expect = 0.0;
            for (i, _) in seq.iter().enumerate().filter(|(_, &f)| f) {
                let earlier = seq[..i].iter().filter(|&&f| f).count() as i32;
                let later = seq[i + 1..].iter().filter(|&&f| !f).count() as i32;
                expect += (1.0 - z).powi(earlier) * z * (1.0 - (1.0 - z).powi(later));
            }
            proptest::prop_assert!((carry_probability(&seq, z) - expect).abs() < 1e-12);
        }
    }
}
