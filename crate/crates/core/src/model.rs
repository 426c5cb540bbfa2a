//! Visit graph domain types: typed rosters, visits, validation, loads and
//! demands, and interval chopping.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_DAY: u64 = 86_400;
pub const SECONDS_PER_HOUR: f64 = 3_600.0;

macro_rules! string_id {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(HcpId);
string_id!(LocationId);

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: u64,
        message: String,
    },
    #[error("invalid visit graph: {}", format_violations(.0))]
    Validation(Vec<Violation>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

/// Index of a substitutable HCP group, 0-based in first-appearance order.
pub type GroupIndex = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HcpType {
    NonSubstitutable,
    Group(GroupIndex),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocationKind {
    Substitutable,
    NonSubstitutable,
}

/// HCPs partitioned into a non-substitutable set and `H` substitutable groups.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HcpRoster {
    entries: BTreeMap<HcpId, HcpType>,
    group_labels: Vec<String>,
}

impl HcpRoster {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a group label and returns its index. Existing labels are reused.
    pub fn add_group(&mut self, label: &str) -> GroupIndex {
        if let Some(i) = self.group_labels.iter().position(|l| l == label) {
            return i;
        }
        self.group_labels.push(label.to_string());
        self.group_labels.len() - 1
    }

    /// Inserts an HCP. `label` of `None` marks the HCP non-substitutable.
    pub fn insert(&mut self, id: HcpId, label: Option<&str>) -> bool {
        let ty = match label {
            None => HcpType::NonSubstitutable,
            Some(l) => HcpType::Group(self.add_group(l)),
        };
        self.entries.insert(id, ty).is_none()
    }

    pub fn get(&self, id: &HcpId) -> Option<HcpType> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&HcpId, HcpType)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &HcpId> {
        self.entries.keys()
    }

    pub fn group_count(&self) -> usize {
        self.group_labels.len()
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn group_index(&self, label: &str) -> Option<GroupIndex> {
        self.group_labels.iter().position(|l| l == label)
    }

    /// Members of group `i`, sorted by id.
    pub fn group_members(&self, i: GroupIndex) -> Vec<HcpId> {
        self.entries
            .iter()
            .filter(|(_, t)| **t == HcpType::Group(i))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn non_substitutable(&self) -> Vec<HcpId> {
        self.entries
            .iter()
            .filter(|(_, t)| **t == HcpType::NonSubstitutable)
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// All HCPs outside `P_ns`, sorted by id.
    pub fn substitutable(&self) -> Vec<HcpId> {
        self.entries
            .iter()
            .filter(|(_, t)| matches!(t, HcpType::Group(_)))
            .map(|(k, _)| k.clone())
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LocationRoster {
    entries: BTreeMap<LocationId, LocationKind>,
}

impl LocationRoster {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: LocationId, kind: LocationKind) -> bool {
        self.entries.insert(id, kind).is_none()
    }

    pub fn get(&self, id: &LocationId) -> Option<LocationKind> {
        self.entries.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LocationId, LocationKind)> {
        self.entries.iter().map(|(k, v)| (k, *v))
    }

    pub fn ids(&self) -> impl Iterator<Item = &LocationId> {
        self.entries.keys()
    }

    /// `L_s`, sorted by id.
    pub fn substitutable(&self) -> Vec<LocationId> {
        self.entries
            .iter()
            .filter(|(_, k)| **k == LocationKind::Substitutable)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn is_substitutable(&self, id: &LocationId) -> bool {
        self.get(id) == Some(LocationKind::Substitutable)
    }
}

/// One HCP visit to a location over the half-open interval `[start, end)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Visit {
    pub hcp: HcpId,
    pub location: LocationId,
    pub start: u64,
    pub end: u64,
}

impl Visit {
    pub fn new(hcp: impl Into<String>, location: impl Into<String>, start: u64, end: u64) -> Self {
        Self {
            hcp: HcpId::new(hcp),
            location: LocationId::new(location),
            start,
            end,
        }
    }

    pub fn duration(&self) -> u64 {
        self.end.saturating_sub(self.start)
    }

    pub fn overlaps(&self, start: u64, end: u64) -> bool {
        self.start < end && start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "rule")]
pub enum Violation {
    Overlap {
        hcp: HcpId,
        first: usize,
        second: usize,
    },
    UnknownHcp {
        visit: usize,
        hcp: HcpId,
    },
    UnknownLocation {
        visit: usize,
        location: LocationId,
    },
    EmptyInterval {
        visit: usize,
        start: u64,
        end: u64,
    },
    NoSubstitutableLocation,
    NoHcpGroup,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { hcp, first, second } => {
                write!(f, "overlap: hcp {hcp} visits #{first} and #{second} intersect")
            }
            Violation::UnknownHcp { visit, hcp } => {
                write!(f, "unknown hcp {hcp} in visit #{visit}")
            }
            Violation::UnknownLocation { visit, location } => {
                write!(f, "unknown location {location} in visit #{visit}")
            }
            Violation::EmptyInterval { visit, start, end } => {
                write!(f, "visit #{visit} has start {start} >= end {end}")
            }
            Violation::NoSubstitutableLocation => f.write_str("no substitutable location"),
            Violation::NoHcpGroup => f.write_str("no substitutable hcp group"),
        }
    }
}

/// Temporal bipartite multigraph of HCP visits to locations.
#[derive(Debug, Clone, PartialEq)]
pub struct VisitGraph {
    pub hcps: HcpRoster,
    pub locations: LocationRoster,
    visits: Vec<Visit>,
}

impl VisitGraph {
    /// Builds a graph, sorting visits by start time (stable) and rejecting any
    /// invariant violation.
    pub fn new(
        hcps: HcpRoster,
        locations: LocationRoster,
        visits: Vec<Visit>,
    ) -> Result<Self, ModelError> {
        let g = Self::new_unchecked(hcps, locations, visits);
        let violations = g.validate();
        if violations.is_empty() {
            Ok(g)
        } else {
            Err(ModelError::Validation(violations))
        }
    }

    /// Builds a graph without validating; visits are still sorted by start.
    pub fn new_unchecked(hcps: HcpRoster, locations: LocationRoster, mut visits: Vec<Visit>) -> Self {
        visits.sort_by_key(|v| v.start);
        Self {
            hcps,
            locations,
            visits,
        }
    }

    pub fn visits(&self) -> &[Visit] {
        &self.visits
    }

    pub fn into_visits(self) -> Vec<Visit> {
        self.visits
    }

    /// Replaces the visit set, keeping the rosters.
    pub fn with_visits(&self, visits: Vec<Visit>) -> Self {
        Self::new_unchecked(self.hcps.clone(), self.locations.clone(), visits)
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_parts(&self.hcps, &self.locations, &self.visits)
    }

    /// `ceil(max end / 86400)`, at least 1.
    pub fn day_count(&self) -> u64 {
        let max_end = self.visits.iter().map(|v| v.end).max().unwrap_or(0);
        max_end.div_ceil(SECONDS_PER_DAY).max(1)
    }

    /// Visit indices per HCP, each list ordered by start time.
    pub fn visits_by_hcp(&self) -> HashMap<&HcpId, Vec<usize>> {
        let mut out: HashMap<&HcpId, Vec<usize>> = HashMap::new();
        for (i, v) in self.visits.iter().enumerate() {
            out.entry(&v.hcp).or_default().push(i);
        }
        out
    }
}

pub fn validate_parts(hcps: &HcpRoster, locations: &LocationRoster, visits: &[Visit]) -> Vec<Violation> {
    let mut out = Vec::new();
    if locations.substitutable().is_empty() {
        out.push(Violation::NoSubstitutableLocation);
    }
    if hcps.group_count() == 0 {
        out.push(Violation::NoHcpGroup);
    }
    let mut per_hcp: BTreeMap<&HcpId, Vec<usize>> = BTreeMap::new();
    for (i, v) in visits.iter().enumerate() {
        if hcps.get(&v.hcp).is_none() {
            out.push(Violation::UnknownHcp {
                visit: i,
                hcp: v.hcp.clone(),
            });
        }
        if locations.get(&v.location).is_none() {
            out.push(Violation::UnknownLocation {
                visit: i,
                location: v.location.clone(),
            });
        }
        if v.start >= v.end {
            out.push(Violation::EmptyInterval {
                visit: i,
                start: v.start,
                end: v.end,
            });
            continue;
        }
        per_hcp.entry(&v.hcp).or_default().push(i);
    }
    for (hcp, mut idx) in per_hcp {
        idx.sort_by_key(|&i| (visits[i].start, i));
        // `latest` is the visit with the furthest end seen so far.
        let mut latest = idx[0];
        for &i in &idx[1..] {
            if visits[i].start < visits[latest].end {
                out.push(Violation::Overlap {
                    hcp: hcp.clone(),
                    first: latest.min(i),
                    second: latest.max(i),
                });
            }
            if visits[i].end > visits[latest].end {
                latest = i;
            }
        }
    }
    out
}

/// Per-HCP load and per-location demand, held in seconds over the whole log
/// and reported in hours per day.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadDemandTable {
    pub days: u64,
    pub load_s: BTreeMap<HcpId, u64>,
    pub demand_s: BTreeMap<LocationId, u64>,
    /// Demand at each location split by the visiting HCP's substitutable group.
    pub group_demand_s: BTreeMap<LocationId, Vec<u64>>,
}

impl LoadDemandTable {
    fn per_day_hours(&self, secs: u64) -> f64 {
        secs as f64 / SECONDS_PER_HOUR / self.days as f64
    }

    pub fn load(&self, p: &HcpId) -> f64 {
        self.per_day_hours(self.load_s.get(p).copied().unwrap_or(0))
    }

    pub fn demand(&self, l: &LocationId) -> f64 {
        self.per_day_hours(self.demand_s.get(l).copied().unwrap_or(0))
    }

    /// Demand at `l` served by HCPs of group `g`, hours/day.
    pub fn group_demand(&self, l: &LocationId, g: GroupIndex) -> f64 {
        let secs = self
            .group_demand_s
            .get(l)
            .and_then(|v| v.get(g))
            .copied()
            .unwrap_or(0);
        self.per_day_hours(secs)
    }

    pub fn total_load_s(&self) -> u64 {
        self.load_s.values().sum()
    }

    pub fn total_demand_s(&self) -> u64 {
        self.demand_s.values().sum()
    }
}

pub fn compute_loads_demands(g: &VisitGraph) -> LoadDemandTable {
    compute_loads_demands_over(g, g.day_count())
}

/// Loads and demands normalised by an explicit day count. Used when comparing
/// a rewired graph against its source so both share one denominator.
pub fn compute_loads_demands_over(g: &VisitGraph, days: u64) -> LoadDemandTable {
    let groups = g.hcps.group_count();
    let mut load_s: BTreeMap<HcpId, u64> = g.hcps.ids().map(|p| (p.clone(), 0)).collect();
    let mut demand_s: BTreeMap<LocationId, u64> = g.locations.ids().map(|l| (l.clone(), 0)).collect();
    let mut group_demand_s: BTreeMap<LocationId, Vec<u64>> =
        g.locations.ids().map(|l| (l.clone(), vec![0; groups])).collect();
    for v in g.visits() {
        let d = v.duration();
        *load_s.entry(v.hcp.clone()).or_insert(0) += d;
        *demand_s.entry(v.location.clone()).or_insert(0) += d;
        if let Some(HcpType::Group(i)) = g.hcps.get(&v.hcp) {
            group_demand_s
                .entry(v.location.clone())
                .or_insert_with(|| vec![0; groups])[i] += d;
        }
    }
    LoadDemandTable {
        days: days.max(1),
        load_s,
        demand_s,
        group_demand_s,
    }
}

/// Splits every visit into fragments of length `unit` seconds. A trailing
/// fragment of at least `unit / 2` stands alone; a shorter one is merged into
/// the previous fragment. Visits no longer than `unit` are kept whole.
pub fn chop_intervals(g: &VisitGraph, unit: u64) -> VisitGraph {
    assert!(unit > 0, "chop unit must be positive");
    let mut out = Vec::with_capacity(g.visits().len());
    for v in g.visits() {
        for (s, e) in chop_interval(v.start, v.end, unit) {
            out.push(Visit {
                hcp: v.hcp.clone(),
                location: v.location.clone(),
                start: s,
                end: e,
            });
        }
    }
    g.with_visits(out)
}

pub fn chop_interval(start: u64, end: u64, unit: u64) -> Vec<(u64, u64)> {
    let len = end - start;
    if len <= unit {
        return vec![(start, end)];
    }
    let full = len / unit;
    let rem = len % unit;
    let mut pieces = Vec::with_capacity(full as usize + 1);
    let mut t = start;
    for _ in 0..full {
        pieces.push((t, t + unit));
        t += unit;
    }
    if rem > 0 {
        if 2 * rem >= unit {
            pieces.push((t, end));
        } else {
            pieces.last_mut().expect("full >= 1").1 = end;
        }
    }
    pieces
}

#[derive(Debug, Deserialize)]
struct VisitRow {
    hcp_id: String,
    location_id: String,
    start_s: u64,
    end_s: u64,
}

#[derive(Debug, Deserialize)]
struct HcpRow {
    hcp_id: String,
    #[serde(rename = "type")]
    ty: String,
}

#[derive(Debug, Deserialize)]
struct LocationRow {
    location_id: String,
    kind: String,
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, ModelError> {
    let file = std::fs::File::open(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn csv_rows<T: serde::de::DeserializeOwned>(
    path: &Path,
    expected_header: &[&str],
) -> Result<Vec<(u64, T)>, ModelError> {
    let file_name = path.display().to_string();
    let mut rdr = open_csv(path)?;
    let parse_err = |line: u64, message: String| ModelError::Parse {
        file: file_name.clone(),
        line,
        message,
    };
    let headers = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected_header {
        return Err(parse_err(
            1,
            format!("expected header {:?}, found {:?}", expected_header.join(","), got.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<T>() {
        match rec {
            Ok(r) => rows.push((rows.len() as u64 + 2, r)),
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(rows.len() as u64 + 2);
                return Err(parse_err(line, e.to_string()));
            }
        }
    }
    Ok(rows)
}

pub fn load_hcp_roster(path: &Path) -> Result<HcpRoster, ModelError> {
    let mut roster = HcpRoster::new();
    for (line, row) in csv_rows::<HcpRow>(path, &["hcp_id", "type"])? {
        let err = |message: String| ModelError::Parse {
            file: path.display().to_string(),
            line,
            message,
        };
        if row.hcp_id.is_empty() {
            return Err(err("empty hcp_id".into()));
        }
        if row.ty.is_empty() {
            return Err(err("empty type".into()));
        }
        let label = (row.ty != "ns").then_some(row.ty.as_str());
        if !roster.insert(HcpId::new(row.hcp_id.clone()), label) {
            return Err(err(format!("duplicate hcp_id {}", row.hcp_id)));
        }
    }
    Ok(roster)
}

pub fn load_location_roster(path: &Path) -> Result<LocationRoster, ModelError> {
    let mut roster = LocationRoster::new();
    for (line, row) in csv_rows::<LocationRow>(path, &["location_id", "kind"])? {
        let err = |message: String| ModelError::Parse {
            file: path.display().to_string(),
            line,
            message,
        };
        if row.location_id.is_empty() {
            return Err(err("empty location_id".into()));
        }
        let kind = match row.kind.as_str() {
            "s" => LocationKind::Substitutable,
            "ns" => LocationKind::NonSubstitutable,
            other => return Err(err(format!("location kind must be s or ns, got {other:?}"))),
        };
        if !roster.insert(LocationId::new(row.location_id.clone()), kind) {
            return Err(err(format!("duplicate location_id {}", row.location_id)));
        }
    }
    Ok(roster)
}

pub fn load_visits(path: &Path) -> Result<Vec<Visit>, ModelError> {
    Ok(csv_rows::<VisitRow>(path, &["hcp_id", "location_id", "start_s", "end_s"])?
        .into_iter()
        .map(|(_, r)| Visit {
            hcp: HcpId::new(r.hcp_id),
            location: LocationId::new(r.location_id),
            start: r.start_s,
            end: r.end_s,
        })
        .collect())
}

/// Reads and validates a mobility log with its two rosters.
pub fn load_mobility_log(
    visits_file: &Path,
    hcp_roster_file: &Path,
    location_roster_file: &Path,
) -> Result<VisitGraph, ModelError> {
    let hcps = load_hcp_roster(hcp_roster_file)?;
    let locations = load_location_roster(location_roster_file)?;
    let visits = load_visits(visits_file)?;
    VisitGraph::new(hcps, locations, visits)
}

/// Loads a mobility log without rejecting invariant violations, so callers can
/// report them.
pub fn load_mobility_log_unchecked(
    visits_file: &Path,
    hcp_roster_file: &Path,
    location_roster_file: &Path,
) -> Result<VisitGraph, ModelError> {
    let hcps = load_hcp_roster(hcp_roster_file)?;
    let locations = load_location_roster(location_roster_file)?;
    let visits = load_visits(visits_file)?;
    Ok(VisitGraph::new_unchecked(hcps, locations, visits))
}

pub fn write_visits<W: std::io::Write>(w: W, visits: &[Visit]) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["hcp_id", "location_id", "start_s", "end_s"])?;
    for v in visits {
        wtr.write_record([
            v.hcp.as_str(),
            v.location.as_str(),
            &v.start.to_string(),
            &v.end.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Writes the roster so that group labels are listed in index order.
pub fn write_hcp_roster<W: std::io::Write>(w: W, roster: &HcpRoster) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["hcp_id", "type"])?;
    let mut rows: Vec<(usize, &HcpId, &str)> = roster
        .iter()
        .map(|(id, t)| match t {
            HcpType::NonSubstitutable => (usize::MAX, id, "ns"),
            HcpType::Group(i) => (i, id, roster.group_labels()[i].as_str()),
        })
        .collect();
    rows.sort();
    for (_, id, label) in rows {
        wtr.write_record([id.as_str(), label])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_location_roster<W: std::io::Write>(w: W, roster: &LocationRoster) -> csv::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["location_id", "kind"])?;
    for (id, kind) in roster.iter() {
        let k = match kind {
            LocationKind::Substitutable => "s",
            LocationKind::NonSubstitutable => "ns",
        };
        wtr.write_record([id.as_str(), k])?;
    }
    wtr.flush()?;
    Ok(())
}
