//! Synthetic facilities and mobility logs shaped like a long-term care unit:
//! a straight corridor with rooms off it, HCP groups with home zones, and a
//! day shift of room visits repeated over many days.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HcpId, HcpRoster, LocationId, LocationKind, LocationRoster, Visit, VisitGraph};
use crate::spatial::SpatialGraph;

#[derive(Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("invalid facility spec: {0}")]
    Invalid(String),
}

/// Distance from a hallway node to a room doorway, meters.
const DOOR_M: f64 = 1.5;
const SECONDS_PER_DAY: u64 = 86_400;

fn default_zones() -> usize {
    1
}
fn default_shift_start() -> f64 {
    7.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitySpec {
    pub rooms: usize,
    pub hallway_nodes: usize,
    /// Substitutable groups as `(label, count)`.
    pub hcp_groups: Vec<(String, usize)>,
    pub non_substitutable: usize,
    pub corridor_length_m: f64,
    pub shift_length_h: f64,
    #[serde(default = "default_shift_start")]
    pub shift_start_h: f64,
    pub visits_per_hcp_per_day: f64,
    pub visit_duration_min: f64,
    /// Probability that a visit goes to the HCP's home zone.
    pub locality: f64,
    /// Rooms on both sides of the corridor, facing in pairs.
    #[serde(default)]
    pub double_loaded: bool,
    /// Contiguous runs of rooms along the corridor.
    #[serde(default = "default_zones")]
    pub zones: usize,
    /// Rooms draw a care-need weight uniformly from `[1 - s, 1 + s]`.
    #[serde(default)]
    pub acuity_spread: f64,
    /// HCPs draw a workload multiplier uniformly from `[1 - s, 1 + s]`.
    #[serde(default)]
    pub activity_spread: f64,
    pub days: usize,
    /// Draw every day afresh instead of repeating the first day.
    #[serde(default)]
    pub independent_days: bool,
    pub seed: u64,
}

impl FacilitySpec {
    /// A 30-room unit with 12 nurses and 6 non-substitutable HCPs.
    pub fn ltcf_30() -> Self {
        Self {
            rooms: 30,
            hallway_nodes: 15,
            hcp_groups: vec![("nurse".into(), 12)],
            non_substitutable: 6,
            corridor_length_m: 45.0,
            double_loaded: true,
            shift_length_h: 8.0,
            shift_start_h: 7.0,
            visits_per_hcp_per_day: 20.0,
            visit_duration_min: 10.0,
            locality: 0.3,
            zones: 6,
            acuity_spread: 0.5,
            activity_spread: 0.3,
            days: 30,
            independent_days: false,
            seed: 1,
        }
    }

    /// Intensive-care-shaped unit: 20 rooms, 25 nurses, 12 other HCPs.
    pub fn micu() -> Self {
        Self {
            rooms: 20,
            hallway_nodes: 10,
            hcp_groups: vec![("nurse".into(), 25)],
            non_substitutable: 12,
            corridor_length_m: 30.0,
            zones: 5,
            ..Self::ltcf_30()
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        let bad = |m: &str| Err(SpecError::Invalid(m.into()));
        if self.rooms == 0 {
            return bad("rooms must be at least 1");
        }
        if self.hallway_nodes == 0 {
            return bad("hallway_nodes must be at least 1");
        }
        if self.hcp_groups.is_empty() || self.hcp_groups.iter().any(|(_, c)| *c == 0) {
            return bad("every HCP group needs at least one member");
        }
        if self.zones == 0 || self.zones > self.rooms {
            return bad("zones must lie in 1..=rooms");
        }
        if !(0.0..=1.0).contains(&self.locality) {
            return bad("locality must lie in [0, 1]");
        }
        if !(0.0..1.0).contains(&self.acuity_spread) || !(0.0..1.0).contains(&self.activity_spread) {
            return bad("acuity_spread and activity_spread must lie in [0, 1)");
        }
        if !(self.corridor_length_m > 0.0) {
            return bad("corridor_length_m must be positive");
        }
        if !(self.shift_length_h > 0.0 && self.shift_length_h <= 24.0) {
            return bad("shift_length_h must lie in (0, 24]");
        }
        if !(0.0..24.0).contains(&self.shift_start_h) || self.shift_start_h + self.shift_length_h > 24.0 {
            return bad("shift must fit within one day");
        }
        if !(self.visits_per_hcp_per_day >= 0.0) || !(self.visit_duration_min > 0.0) {
            return bad("visit rate must be non-negative and duration positive");
        }
        if self.days == 0 {
            return bad("days must be at least 1");
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serialises")
    }

    pub fn from_json(s: &str) -> Result<Self, SpecError> {
        let spec: Self = serde_json::from_str(s).map_err(|e| SpecError::Invalid(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facility {
    pub spatial: SpatialGraph,
    pub hcps: HcpRoster,
    pub locations: LocationRoster,
    /// Zone of each room, rooms numbered along the corridor.
    pub room_zone: BTreeMap<LocationId, usize>,
    /// Home zone of each substitutable HCP.
    pub hcp_zone: BTreeMap<HcpId, usize>,
    /// Relative care need of each room.
    pub acuity: BTreeMap<LocationId, f64>,
    /// Workload multiplier of each HCP.
    pub activity: BTreeMap<HcpId, f64>,
}

fn width(n: usize) -> usize {
    n.max(1).to_string().len().max(2)
}

pub fn room_id(i: usize, rooms: usize) -> LocationId {
    LocationId::new(format!("r{:0w$}", i + 1, w = width(rooms)))
}

/// Zone of room `i` when `rooms` rooms are cut into `zones` contiguous runs
/// whose sizes differ by at most one.
pub fn zone_of(i: usize, rooms: usize, zones: usize) -> usize {
    let base = rooms / zones;
    let extra = rooms % zones;
    let big = extra * (base + 1);
    if i < big {
        i / (base + 1)
    } else {
        extra + (i - big) / base
    }
}

pub fn generate_facility(spec: &FacilitySpec) -> Result<Facility, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let h = spec.hallway_nodes;
    let len = spec.corridor_length_m;
    let hall_x = |j: usize| (j as f64 + 0.5) * len / h as f64;
    let hw = width(h);
    let hall_name = |j: usize| format!("h{:0w$}", j + 1, w = hw);
    let mut nodes: Vec<String> = (0..h).map(hall_name).collect();
    let mut edges: Vec<(String, String, f64)> = (1..h)
        .map(|j| (hall_name(j - 1), hall_name(j), hall_x(j) - hall_x(j - 1)))
        .collect();
    let mut location_map = BTreeMap::new();
    let mut locations = LocationRoster::new();
    let mut room_zone = BTreeMap::new();
    let mut acuity = BTreeMap::new();
    for i in 0..spec.rooms {
        let id = room_id(i, spec.rooms);
        let x = if spec.double_loaded {
            let slots = spec.rooms.div_ceil(2);
            ((i / 2) as f64 + 0.5) * len / slots as f64
        } else {
            (i as f64 + 0.5) * len / spec.rooms as f64
        };
        let j = (0..h)
            .min_by(|&a, &b| (hall_x(a) - x).abs().total_cmp(&(hall_x(b) - x).abs()))
            .expect("at least one hallway node");
        let node = format!("n_{id}");
        nodes.push(node.clone());
        edges.push((hall_name(j), node.clone(), DOOR_M + (hall_x(j) - x).abs()));
        location_map.insert(id.clone(), node);
        locations.insert(id.clone(), LocationKind::Substitutable);
        room_zone.insert(id.clone(), zone_of(i, spec.rooms, spec.zones));
        let s = spec.acuity_spread;
        let a = if s > 0.0 { rng.random_range(1.0 - s..=1.0 + s) } else { 1.0 };
        acuity.insert(id, a);
    }
    let mut hcps = HcpRoster::new();
    let mut hcp_zone = BTreeMap::new();
    let total: usize = spec.hcp_groups.iter().map(|(_, c)| c).sum::<usize>() + spec.non_substitutable;
    let pw = width(total);
    for (label, count) in &spec.hcp_groups {
        hcps.add_group(label);
        for m in 0..*count {
            let id = HcpId::new(format!("{label}{:0w$}", m + 1, w = pw));
            hcps.insert(id.clone(), Some(label));
            hcp_zone.insert(id, m % spec.zones);
        }
    }
    for m in 0..spec.non_substitutable {
        let id = HcpId::new(format!("ns{:0w$}", m + 1, w = pw));
        hcps.insert(id.clone(), None);
        hcp_zone.insert(id, m % spec.zones);
    }
    let s = spec.activity_spread;
    let activity = hcps
        .ids()
        .map(|p| {
            let a = if s > 0.0 { rng.random_range(1.0 - s..=1.0 + s) } else { 1.0 };
            (p.clone(), a)
        })
        .collect();
    Ok(Facility {
        spatial: SpatialGraph {
            nodes,
            edges,
            location_map,
        },
        hcps,
        locations,
        room_zone,
        hcp_zone,
        acuity,
        activity,
    })
}

/// Picks an index with probability proportional to `weights`.
fn pick_weighted(rng: &mut ChaCha8Rng, items: &[(LocationId, f64)]) -> LocationId {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut u = rng.random::<f64>() * total;
    for (id, w) in items {
        if u < *w {
            return id.clone();
        }
        u -= w;
    }
    items.last().expect("non-empty room list").0.clone()
}

/// Generates one day shift of visits and repeats it for `spec.days` days,
/// or draws every day afresh when `spec.independent_days` is set.
///
/// Each HCP makes a Poisson number of visits per day. Gaps and durations are
/// exponential and, if they overrun the shift, are scaled down together so
/// the visit count is kept. Substitutable HCPs pick their home zone with
/// probability `locality`; rooms are otherwise drawn facility-wide. Within
/// either pool rooms are weighted by acuity. An HCP's visit rate is the spec
/// mean times its workload multiplier.
pub fn generate_mobility(f: &Facility, spec: &FacilitySpec) -> Result<VisitGraph, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let all: Vec<(LocationId, f64)> = f.acuity.iter().map(|(l, a)| (l.clone(), *a)).collect();
    let mut by_zone: Vec<Vec<(LocationId, f64)>> = vec![Vec::new(); spec.zones];
    for (l, a) in &all {
        by_zone[f.room_zone[l]].push((l.clone(), *a));
    }
    let shift_s = (spec.shift_length_h * 3600.0).round() as u64;
    let start_s = (spec.shift_start_h * 3600.0).round() as u64;
    let dur_mean = spec.visit_duration_min * 60.0;
    let max_visits = (shift_s / 2) as usize;
    let dur_dist = Exp::new(1.0 / dur_mean).map_err(|e| SpecError::Invalid(e.to_string()))?;
    let mut visits = Vec::new();
    let hcp_ids: Vec<HcpId> = f.hcps.ids().cloned().collect();
    let drawn_days = if spec.independent_days { spec.days as u64 } else { 1 };
    for day in 0..drawn_days {
        let day0 = day * SECONDS_PER_DAY + start_s;
        for p in &hcp_ids {
            let rate = spec.visits_per_hcp_per_day * f.activity.get(p).copied().unwrap_or(1.0);
            let n = if rate > 0.0 {
                let d = Poisson::new(rate).map_err(|e| SpecError::Invalid(e.to_string()))?;
                (d.sample(&mut rng) as usize).min(max_visits)
            } else {
                0
            };
            if n == 0 {
                continue;
            }
            let gap_mean = (shift_s as f64 / n as f64 - dur_mean).max(60.0);
            let gap_dist = Exp::new(1.0 / gap_mean).map_err(|e| SpecError::Invalid(e.to_string()))?;
            let mut durs: Vec<f64> = (0..n).map(|_| dur_dist.sample(&mut rng).max(60.0)).collect();
            let mut gaps: Vec<f64> = (0..n).map(|_| gap_dist.sample(&mut rng)).collect();
            let used: f64 = durs.iter().sum::<f64>() + gaps.iter().sum::<f64>();
            if used > shift_s as f64 {
                let scale = shift_s as f64 / used;
                durs.iter_mut().for_each(|d| *d *= scale);
                gaps.iter_mut().for_each(|g| *g *= scale);
            }
            let zone = f.hcp_zone.get(p).copied();
            let mut t = 0.0;
            for (d, g) in durs.iter().zip(&gaps) {
                t += g;
                let s = (t.floor() as u64).min(shift_s - 1);
                t += d;
                let e = (t.floor() as u64).clamp(s + 1, shift_s);
                t = t.max(e as f64);
                let local = match zone {
                    Some(_) => rng.random::<f64>() < spec.locality,
                    None => false,
                };
                let room = if local {
                    pick_weighted(&mut rng, &by_zone[zone.expect("zone checked")])
                } else {
                    pick_weighted(&mut rng, &all)
                };
                if s >= shift_s {
                    break;
                }
                visits.push(Visit {
                    hcp: p.clone(),
                    location: room,
                    start: day0 + s,
                    end: day0 + e,
                });
                if e >= shift_s {
                    break;
                }
            }
        }
    }
    if !spec.independent_days {
        let first = std::mem::take(&mut visits);
        for day in 0..spec.days as u64 {
            visits.extend(first.iter().map(|v| Visit {
                start: v.start + day * SECONDS_PER_DAY,
                end: v.end + day * SECONDS_PER_DAY,
                ..v.clone()
            }));
        }
    }
    VisitGraph::new(f.hcps.clone(), f.locations.clone(), visits)
        .map_err(|e| SpecError::Invalid(format!("generated log failed validation: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::shortest_path_metric;

    #[test]
    fn four_rooms_two_hallway_nodes() {
        let spec = FacilitySpec {
            rooms: 4,
            hallway_nodes: 2,
            double_loaded: false,
            zones: 2,
            ..FacilitySpec::ltcf_30()
        };
        let f = generate_facility(&spec).unwrap();
        assert_eq!(f.spatial.nodes.len(), 6);
        f.spatial.check().unwrap();
    }

    #[test]
    fn micu_counts() {
        let f = generate_facility(&FacilitySpec::micu()).unwrap();
        assert_eq!(f.hcps.group_members(0).len(), 25);
        assert_eq!(f.hcps.non_substitutable().len(), 12);
        assert_eq!(f.locations.substitutable().len(), 20);
    }

    #[test]
    fn zones_are_contiguous_and_balanced() {
        let z: Vec<usize> = (0..30).map(|i| zone_of(i, 30, 4)).collect();
        assert!(z.windows(2).all(|w| w[1] == w[0] || w[1] == w[0] + 1));
        let sizes: Vec<usize> = (0..4).map(|k| z.iter().filter(|&&x| x == k).count()).collect();
        assert_eq!(sizes, vec![8, 8, 7, 7]);
    }

    #[test]
    fn deterministic_and_valid() {
        let spec = FacilitySpec {
            days: 3,
            ..FacilitySpec::ltcf_30()
        };
        let f = generate_facility(&spec).unwrap();
        let a = generate_mobility(&f, &spec).unwrap();
        let b = generate_mobility(&f, &spec).unwrap();
        assert_eq!(a.visits(), b.visits());
        assert!(a.validate().is_empty());
        let other = generate_mobility(&f, &FacilitySpec { seed: 2, ..spec.clone() }).unwrap();
        assert_ne!(a.visits(), other.visits());
    }

    #[test]
    fn corridor_distances_grow_with_room_separation() {
        let f = generate_facility(&FacilitySpec::ltcf_30()).unwrap();
        let d = shortest_path_metric(&f.spatial).unwrap();
        let r = |i| room_id(i, 30);
        // Facing rooms share a hallway node; neighbours are one slot apart.
        assert!((d.dist(&r(0), &r(1)) - 3.0).abs() < 1e-9);
        assert!((d.dist(&r(0), &r(2)) - 6.0).abs() < 1e-9);
        assert!(d.dist(&r(0), &r(5)) < d.dist(&r(0), &r(6)));
    }
}
