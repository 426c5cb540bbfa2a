//! The bubble clustering integer program: model construction, an exact
//! branch-and-bound solver specialised to this model family, a brute-force
//! oracle, post-hoc verification, and LP/MPS export.

mod bnb;
mod brute;
mod export;
mod hcp;
mod heuristic;
mod verify;

use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HcpId, HcpRoster, LoadDemandTable, LocationId, LocationRoster};
use crate::simplex::{LinearProgram, Sense};
use crate::spatial::DistanceMatrix;
use crate::weights::WeightMatrix;

pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_LOCATIONS};
pub use export::{export_model, ExportFormat};
pub use verify::verify_clustering;

/// Absolute tolerance for diameter and load-gap comparisons.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum OptimizerError {
    #[error("invalid K={k}: {reason}")]
    InvalidK { k: usize, reason: String },
    #[error("brute force limited to {max} substitutable locations, got {got}")]
    TooLarge { got: usize, max: usize },
    #[error("{0}")]
    MissingData(String),
}

/// Upper bound parameter that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Limit {
    Finite(f64),
    #[serde(with = "unbounded_str")]
    Unbounded,
}

mod unbounded_str {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("inf")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "inf" {
            Ok(())
        } else {
            Err(serde::de::Error::custom("expected \"inf\""))
        }
    }
}

impl Limit {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Limit::Finite(v) => Some(*v),
            Limit::Unbounded => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Limit::Finite(_))
    }
}

impl std::str::FromStr for Limit {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "inf" | "infinity" | "unbounded" => Ok(Limit::Unbounded),
            other => other
                .parse::<f64>()
                .map_err(|e| format!("bad limit {other:?}: {e}"))
                .and_then(|v| {
                    if v.is_infinite() {
                        Ok(Limit::Unbounded)
                    } else if v.is_nan() || v < 0.0 {
                        Err(format!("limit must be non-negative, got {v}"))
                    } else {
                        Ok(Limit::Finite(v))
                    }
                }),
        }
    }
}

impl fmt::Display for Limit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Limit::Finite(v) => write!(f, "{v}"),
            Limit::Unbounded => f.write_str("inf"),
        }
    }
}

/// Everything the clustering problem needs, borrowed from the pipeline.
#[derive(Debug, Clone, Copy)]
pub struct ClusteringInputs<'a> {
    pub weights: &'a WeightMatrix,
    pub dist: &'a DistanceMatrix,
    pub loads: &'a LoadDemandTable,
    pub hcps: &'a HcpRoster,
    pub locations: &'a LocationRoster,
    pub k: usize,
    pub d_star: Limit,
    pub y_star: Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ConstraintTag {
    Connect1,
    Connect2,
    OneBubble,
    EqualSizes,
    Diameter,
    HcpEqual,
    HcpExactlyOne,
    BoundLoad,
}

impl ConstraintTag {
    pub const ALL: [ConstraintTag; 8] = [
        ConstraintTag::Connect1,
        ConstraintTag::Connect2,
        ConstraintTag::OneBubble,
        ConstraintTag::EqualSizes,
        ConstraintTag::Diameter,
        ConstraintTag::HcpEqual,
        ConstraintTag::HcpExactlyOne,
        ConstraintTag::BoundLoad,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConstraintTag::Connect1 => "connect1",
            ConstraintTag::Connect2 => "connect2",
            ConstraintTag::OneBubble => "oneBubble",
            ConstraintTag::EqualSizes => "equalSizes",
            ConstraintTag::Diameter => "diameter",
            ConstraintTag::HcpEqual => "hcpEqual",
            ConstraintTag::HcpExactlyOne => "hcpExactlyOne",
            ConstraintTag::BoundLoad => "boundLoad",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarKind {
    /// Separation indicator for locations `(a, b)`, `a < b` (indices into `L_s`).
    Separate(usize, usize),
    /// Location `l` in bubble `k`.
    Location(usize, usize),
    /// Member `m` of group `g` in bubble `k`.
    Hcp { group: usize, member: usize, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRow {
    pub name: String,
    pub tag: ConstraintTag,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct GroupData {
    pub label: String,
    pub members: Vec<HcpId>,
    /// Load per member, hours/day.
    pub load: Vec<f64>,
    /// Demand served by this group at each substitutable location, hours/day.
    pub demand: Vec<f64>,
    pub cap: usize,
}

/// Dense, index-based copy of the inputs that the solver works on.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ProblemData {
    pub locations: Vec<LocationId>,
    pub k: usize,
    pub w: Vec<f64>,
    pub dist: Vec<f64>,
    pub d_star: Limit,
    pub y_star: Limit,
    pub groups: Vec<GroupData>,
    pub cap: usize,
}

impl ProblemData {
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    #[inline]
    pub fn w(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.locations.len() + b]
    }

    #[inline]
    pub fn d(&self, a: usize, b: usize) -> f64 {
        self.dist[a * self.locations.len() + b]
    }

    #[inline]
    pub fn forbidden(&self, a: usize, b: usize) -> bool {
        match self.d_star {
            Limit::Finite(ds) => self.d(a, b) > ds + FEAS_TOL,
            Limit::Unbounded => false,
        }
    }

    fn from_inputs(inp: &ClusteringInputs<'_>) -> Result<Self, OptimizerError> {
        let locations = inp.locations.substitutable();
        let n = locations.len();
        let k = inp.k;
        if k == 0 {
            return Err(OptimizerError::InvalidK {
                k,
                reason: "K must be at least 1".into(),
            });
        }
        if k > n {
            return Err(OptimizerError::InvalidK {
                k,
                reason: format!("K exceeds |L_s| = {n}"),
            });
        }
        let mut w = vec![0.0; n * n];
        let mut dist = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                w[a * n + b] = inp.weights.get(&locations[a], &locations[b]);
                dist[a * n + b] = inp.dist.get(&locations[a], &locations[b]).ok_or_else(|| {
                    OptimizerError::MissingData(format!(
                        "no distance for ({}, {})",
                        locations[a], locations[b]
                    ))
                })?;
            }
        }
        let mut groups = Vec::new();
        for (g, label) in inp.hcps.group_labels().iter().enumerate() {
            let members = inp.hcps.group_members(g);
            if k > members.len() {
                return Err(OptimizerError::InvalidK {
                    k,
                    reason: format!("K exceeds |P_{label}| = {}", members.len()),
                });
            }
            groups.push(GroupData {
                label: label.clone(),
                load: members.iter().map(|p| inp.loads.load(p)).collect(),
                demand: locations.iter().map(|l| inp.loads.group_demand(l, g)).collect(),
                cap: members.len().div_ceil(k),
                members,
            });
        }
        Ok(Self {
            cap: n.div_ceil(k),
            locations,
            k,
            w,
            dist,
            d_star: inp.d_star,
            y_star: inp.y_star,
            groups,
        })
    }

    /// Cut weight of a location assignment.
    pub fn cut(&self, assign: &[usize]) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                if assign[a] != assign[b] {
                    s += self.w(a, b);
                }
            }
        }
        s
    }
}

/// `true` when `size <= cap` per bubble does not by itself force every
/// bubble to be non-empty, so explicit lower-bound rows are needed.
pub fn needs_nonempty_rows(items: usize, k: usize) -> bool {
    k > 1 && items.div_ceil(k) * (k - 1) >= items
}

/// The integer program plus the dense data the solver reads.
#[derive(Debug, Clone, PartialEq)]
pub struct IlpModel {
    pub(crate) data: ProblemData,
    pub variables: Vec<Variable>,
    pub objective: Vec<(usize, f64)>,
    pub rows: Vec<ModelRow>,
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

/// Builds the clustering program. Separation variables exist only for pairs
/// with positive weight or a distance above a finite `D*`.
pub fn build_model(inp: &ClusteringInputs<'_>) -> Result<IlpModel, OptimizerError> {
    let data = ProblemData::from_inputs(inp)?;
    let n = data.n();
    let k = data.k;
    let mut variables = Vec::new();
    let mut objective = Vec::new();
    let mut rows = Vec::new();
    let loc_names: Vec<String> = data.locations.iter().map(|l| sanitize(l.as_str())).collect();

    let mut e_index: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            let w = data.w(a, b);
            if w > 0.0 || data.forbidden(a, b) {
                e_index.insert((a, b), variables.len());
                if w > 0.0 {
                    objective.push((variables.len(), w));
                }
                variables.push(Variable {
                    name: format!("e_{}_{}", loc_names[a], loc_names[b]),
                    kind: VarKind::Separate(a, b),
                });
            }
        }
    }
    let x0 = variables.len();
    let x = |l: usize, kk: usize| x0 + l * k + kk;
    for (l, name) in loc_names.iter().enumerate() {
        for kk in 0..k {
            variables.push(Variable {
                name: format!("x_{}_{}", name, kk + 1),
                kind: VarKind::Location(l, kk),
            });
        }
    }
    let mut z_start = Vec::new();
    for (g, grp) in data.groups.iter().enumerate() {
        z_start.push(variables.len());
        for (m, p) in grp.members.iter().enumerate() {
            for kk in 0..k {
                variables.push(Variable {
                    name: format!("z_{}_{}", sanitize(p.as_str()), kk + 1),
                    kind: VarKind::Hcp { group: g, member: m, k: kk },
                });
            }
        }
    }
    let z = |g: usize, m: usize, kk: usize| z_start[g] + m * k + kk;

    for (&(a, b), &e) in &e_index {
        for kk in 0..k {
            rows.push(ModelRow {
                name: format!("connect1_{}_{}_{}", loc_names[a], loc_names[b], kk + 1),
                tag: ConstraintTag::Connect1,
                coeffs: vec![(e, 1.0), (x(a, kk), -1.0), (x(b, kk), 1.0)],
                sense: Sense::Ge,
                rhs: 0.0,
            });
            rows.push(ModelRow {
                name: format!("connect2_{}_{}_{}", loc_names[a], loc_names[b], kk + 1),
                tag: ConstraintTag::Connect2,
                coeffs: vec![(e, 1.0), (x(b, kk), -1.0), (x(a, kk), 1.0)],
                sense: Sense::Ge,
                rhs: 0.0,
            });
        }
    }
    for (l, name) in loc_names.iter().enumerate() {
        rows.push(ModelRow {
            name: format!("oneBubble_{name}"),
            tag: ConstraintTag::OneBubble,
            coeffs: (0..k).map(|kk| (x(l, kk), 1.0)).collect(),
            sense: Sense::Eq,
            rhs: 1.0,
        });
    }
    for kk in 0..k {
        rows.push(ModelRow {
            name: format!("equalSizes_{}", kk + 1),
            tag: ConstraintTag::EqualSizes,
            coeffs: (0..n).map(|l| (x(l, kk), 1.0)).collect(),
            sense: Sense::Le,
            rhs: data.cap as f64,
        });
    }
    if needs_nonempty_rows(n, k) {
        for kk in 0..k {
            rows.push(ModelRow {
                name: format!("equalSizes_min_{}", kk + 1),
                tag: ConstraintTag::EqualSizes,
                coeffs: (0..n).map(|l| (x(l, kk), 1.0)).collect(),
                sense: Sense::Ge,
                rhs: 1.0,
            });
        }
    }
    if let Limit::Finite(ds) = data.d_star {
        for (&(a, b), &e) in &e_index {
            let d = data.d(a, b);
            // D (1 - e) <= D*  <=>  D e >= D - D*
            rows.push(ModelRow {
                name: format!("diameter_{}_{}", loc_names[a], loc_names[b]),
                tag: ConstraintTag::Diameter,
                coeffs: vec![(e, d)],
                sense: Sense::Ge,
                rhs: d - ds,
            });
        }
        // A pair forced apart must not share a bubble: e + x_a,k + x_b,k <= 2.
        for (&(a, b), &e) in &e_index {
            if !data.forbidden(a, b) {
                continue;
            }
            for kk in 0..k {
                rows.push(ModelRow {
                    name: format!("diameter_link_{}_{}_{}", loc_names[a], loc_names[b], kk + 1),
                    tag: ConstraintTag::Diameter,
                    coeffs: vec![(e, 1.0), (x(a, kk), 1.0), (x(b, kk), 1.0)],
                    sense: Sense::Le,
                    rhs: 2.0,
                });
            }
        }
    }
    for (g, grp) in data.groups.iter().enumerate() {
        let gname = sanitize(&grp.label);
        for kk in 0..k {
            rows.push(ModelRow {
                name: format!("hcpEqual_{}_{}", gname, kk + 1),
                tag: ConstraintTag::HcpEqual,
                coeffs: (0..grp.members.len()).map(|m| (z(g, m, kk), 1.0)).collect(),
                sense: Sense::Le,
                rhs: grp.cap as f64,
            });
        }
        if needs_nonempty_rows(grp.members.len(), k) {
            for kk in 0..k {
                rows.push(ModelRow {
                    name: format!("hcpEqual_min_{}_{}", gname, kk + 1),
                    tag: ConstraintTag::HcpEqual,
                    coeffs: (0..grp.members.len()).map(|m| (z(g, m, kk), 1.0)).collect(),
                    sense: Sense::Ge,
                    rhs: 1.0,
                });
            }
        }
    }
    for (g, grp) in data.groups.iter().enumerate() {
        for (m, p) in grp.members.iter().enumerate() {
            rows.push(ModelRow {
                name: format!("hcpExactlyOne_{}", sanitize(p.as_str())),
                tag: ConstraintTag::HcpExactlyOne,
                coeffs: (0..k).map(|kk| (z(g, m, kk), 1.0)).collect(),
                sense: Sense::Eq,
                rhs: 1.0,
            });
        }
    }
    if let Limit::Finite(ys) = data.y_star {
        for (g, grp) in data.groups.iter().enumerate() {
            let gname = sanitize(&grp.label);
            for kk in 0..k {
                let mut coeffs: Vec<(usize, f64)> = (0..n)
                    .filter(|&l| grp.demand[l] != 0.0)
                    .map(|l| (x(l, kk), grp.demand[l]))
                    .collect();
                coeffs.extend(
                    (0..grp.members.len())
                        .filter(|&m| grp.load[m] != 0.0)
                        .map(|m| (z(g, m, kk), -grp.load[m])),
                );
                rows.push(ModelRow {
                    name: format!("boundLoad_{}_{}", gname, kk + 1),
                    tag: ConstraintTag::BoundLoad,
                    coeffs,
                    sense: Sense::Le,
                    rhs: ys,
                });
            }
        }
    }

    Ok(IlpModel {
        data,
        variables,
        objective,
        rows,
    })
}

/// Shape parameters that determine the model size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelShape {
    pub locations: usize,
    pub k: usize,
    /// Pairs with positive weight or distance above a finite `D*`.
    pub separation_pairs: usize,
    /// Pairs farther apart than a finite `D*`.
    pub forbidden_pairs: usize,
    pub group_sizes: Vec<usize>,
    pub d_star_finite: bool,
    pub y_star_finite: bool,
}

/// Closed-form variable and constraint counts for a model of the given shape.
pub fn closed_form_counts(s: &ModelShape) -> (usize, usize) {
    let hcps: usize = s.group_sizes.iter().sum();
    let h = s.group_sizes.len();
    let vars = s.separation_pairs + s.locations * s.k + hcps * s.k;
    let mut cons = 2 * s.separation_pairs * s.k + s.locations + s.k;
    if needs_nonempty_rows(s.locations, s.k) {
        cons += s.k;
    }
    if s.d_star_finite {
        cons += s.separation_pairs + s.forbidden_pairs * s.k;
    }
    cons += h * s.k;
    cons += s
        .group_sizes
        .iter()
        .filter(|&&m| needs_nonempty_rows(m, s.k))
        .count()
        * s.k;
    cons += hcps;
    if s.y_star_finite {
        cons += h * s.k;
    }
    (vars, cons)
}

impl IlpModel {
    pub fn k(&self) -> usize {
        self.data.k
    }

    pub fn locations(&self) -> &[LocationId] {
        &self.data.locations
    }

    pub fn d_star(&self) -> Limit {
        self.data.d_star
    }

    pub fn y_star(&self) -> Limit {
        self.data.y_star
    }

    pub fn shape(&self) -> ModelShape {
        let n = self.data.n();
        let mut separation_pairs = 0;
        let mut forbidden_pairs = 0;
        for a in 0..n {
            for b in a + 1..n {
                if self.data.forbidden(a, b) {
                    forbidden_pairs += 1;
                }
                if self.data.w(a, b) > 0.0 || self.data.forbidden(a, b) {
                    separation_pairs += 1;
                }
            }
        }
        ModelShape {
            locations: n,
            k: self.data.k,
            separation_pairs,
            forbidden_pairs,
            group_sizes: self.data.groups.iter().map(|g| g.members.len()).collect(),
            d_star_finite: self.data.d_star.is_finite(),
            y_star_finite: self.data.y_star.is_finite(),
        }
    }

    pub fn rows_with_tag(&self, tag: ConstraintTag) -> impl Iterator<Item = &ModelRow> {
        self.rows.iter().filter(move |r| r.tag == tag)
    }

    /// Variable values (0/1) encoding a clustering; `None` if the clustering
    /// does not cover the model's entities.
    pub fn encode(&self, c: &BubbleClustering) -> Option<Vec<f64>> {
        let loc_bubble: Vec<usize> = self
            .data
            .locations
            .iter()
            .map(|l| c.location_bubble.get(l).copied())
            .collect::<Option<_>>()?;
        let mut values = vec![0.0; self.variables.len()];
        for (i, v) in self.variables.iter().enumerate() {
            values[i] = match v.kind {
                VarKind::Separate(a, b) => (loc_bubble[a] != loc_bubble[b]) as u8 as f64,
                VarKind::Location(l, k) => (loc_bubble[l] == k) as u8 as f64,
                VarKind::Hcp { group, member, k } => {
                    let p = &self.data.groups[group].members[member];
                    (c.hcp_bubble.get(p).copied()? == k) as u8 as f64
                }
            };
        }
        Some(values)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Names of rows violated by `values` beyond `tol`.
    pub fn violated_rows(&self, values: &[f64], tol: f64) -> Vec<&str> {
        self.rows
            .iter()
            .filter(|r| {
                let lhs: f64 = r.coeffs.iter().map(|&(j, c)| c * values[j]).sum();
                match r.sense {
                    Sense::Le => lhs > r.rhs + tol,
                    Sense::Ge => lhs < r.rhs - tol,
                    Sense::Eq => (lhs - r.rhs).abs() > tol,
                }
            })
            .map(|r| r.name.as_str())
            .collect()
    }

    /// LP relaxation with every variable in `[0, 1]`.
    pub fn lp_relaxation(&self) -> LinearProgram {
        let mut lp = LinearProgram::new(self.variables.len());
        for &(j, c) in &self.objective {
            lp.objective[j] += c;
        }
        for r in &self.rows {
            lp.add(r.coeffs.clone(), r.sense, r.rhs);
        }
        for j in 0..self.variables.len() {
            lp.add(vec![(j, 1.0)], Sense::Le, 1.0);
        }
        lp
    }
}

pub fn count_vars_constraints(m: &IlpModel) -> (usize, usize) {
    (m.variables.len(), m.rows.len())
}

/// A partition of `L_s` and each HCP group into `k` bubbles (indices `0..k`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleClustering {
    pub k: usize,
    pub location_bubble: BTreeMap<LocationId, usize>,
    pub hcp_bubble: BTreeMap<HcpId, usize>,
    pub objective_value: Option<f64>,
}

impl BubbleClustering {
    pub fn locations_in(&self, bubble: usize) -> Vec<&LocationId> {
        self.location_bubble
            .iter()
            .filter(|(_, &b)| b == bubble)
            .map(|(l, _)| l)
            .collect()
    }

    pub fn hcps_in(&self, bubble: usize) -> Vec<&HcpId> {
        self.hcp_bubble
            .iter()
            .filter(|(_, &b)| b == bubble)
            .map(|(p, _)| p)
            .collect()
    }

    /// Sum of weights over location pairs in different bubbles.
    pub fn cut_weight(&self, w: &WeightMatrix) -> f64 {
        w.nonzero()
            .filter(|(a, b, _)| {
                matches!((self.location_bubble.get(*a), self.location_bubble.get(*b)),
                    (Some(x), Some(y)) if x != y)
            })
            .map(|(_, _, x)| x)
            .sum()
    }

    /// Relabels bubbles so that bubble indices follow the order of each
    /// bubble's smallest location id.
    pub fn canonicalize(&mut self) {
        let mut first: Vec<Option<&LocationId>> = vec![None; self.k];
        for (l, &b) in &self.location_bubble {
            if first[b].is_none() {
                first[b] = Some(l);
            }
        }
        let mut order: Vec<usize> = (0..self.k).collect();
        order.sort_by(|&a, &b| match (first[a], first[b]) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => a.cmp(&b),
        });
        let mut relabel = vec![0; self.k];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = new;
        }
        for b in self.location_bubble.values_mut() {
            *b = relabel[*b];
        }
        for b in self.hcp_bubble.values_mut() {
            *b = relabel[*b];
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("clustering serialises")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveOutcome {
    Optimal(BubbleClustering),
    Infeasible,
    TimedOut {
        best: Option<BubbleClustering>,
        bound: f64,
    },
}

impl SolveOutcome {
    pub fn clustering(&self) -> Option<&BubbleClustering> {
        match self {
            SolveOutcome::Optimal(c) => Some(c),
            SolveOutcome::TimedOut { best, .. } => best.as_ref(),
            SolveOutcome::Infeasible => None,
        }
    }

    pub fn objective(&self) -> Option<f64> {
        self.clustering().and_then(|c| c.objective_value)
    }

    pub fn status(&self) -> &'static str {
        match self {
            SolveOutcome::Optimal(_) => "optimal",
            SolveOutcome::Infeasible => "infeasible",
            SolveOutcome::TimedOut { .. } => "timed_out",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub time_limit: Option<Duration>,
    /// Deterministic alternative to the wall-clock limit.
    pub node_limit: Option<u64>,
    pub seed: u64,
    /// Random restarts of the local search that seeds the incumbent.
    pub heuristic_restarts: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            time_limit: None,
            node_limit: None,
            seed: 0,
            heuristic_restarts: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveStats {
    pub nodes: u64,
    pub lp_bounds: u64,
    pub root_bound: f64,
    pub heuristic_objective: Option<f64>,
}

pub fn solve(m: &IlpModel, opts: &SolveOptions) -> SolveOutcome {
    solve_with_stats(m, opts).0
}

pub fn solve_with_stats(m: &IlpModel, opts: &SolveOptions) -> (SolveOutcome, SolveStats) {
    bnb::solve(&m.data, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{compute_loads_demands, HcpRoster, LocationKind, VisitGraph};

    pub(crate) fn four_room_inputs() -> (WeightMatrix, DistanceMatrix, LoadDemandTable, HcpRoster, LocationRoster) {
        let ids: Vec<LocationId> = ["l1", "l2", "l3", "l4"].into_iter().map(LocationId::from).collect();
        let mut w = WeightMatrix::new(ids.clone(), 0.1);
        for (a, b) in [("l1", "l3"), ("l1", "l4"), ("l2", "l3"), ("l2", "l4")] {
            w.set(&a.into(), &b.into(), 0.01);
        }
        w.set(&"l1".into(), &"l2".into(), 0.9);
        w.set(&"l3".into(), &"l4".into(), 0.8);
        let dist = DistanceMatrix::from_fn(ids.clone(), |_, _| 10.0).unwrap();
        let mut locs = LocationRoster::new();
        for l in &ids {
            locs.insert(l.clone(), LocationKind::Substitutable);
        }
        let hcps = HcpRoster::new();
        let g = VisitGraph::new_unchecked(hcps.clone(), locs.clone(), vec![]);
        let ld = compute_loads_demands(&g);
        (w, dist, ld, hcps, locs)
    }

    #[test]
    fn four_room_counts() {
        let (w, d, ld, h, l) = four_room_inputs();
        let inp = ClusteringInputs {
            weights: &w,
            dist: &d,
            loads: &ld,
            hcps: &h,
            locations: &l,
            k: 2,
            d_star: Limit::Finite(15.0),
            y_star: Limit::Unbounded,
        };
        let m = build_model(&inp).unwrap();
        assert_eq!(m.variables.iter().filter(|v| matches!(v.kind, VarKind::Separate(..))).count(), 6);
        assert_eq!(m.rows_with_tag(ConstraintTag::Connect1).count() + m.rows_with_tag(ConstraintTag::Connect2).count(), 24);
        assert_eq!(m.rows_with_tag(ConstraintTag::OneBubble).count(), 4);
        assert_eq!(m.rows_with_tag(ConstraintTag::EqualSizes).count(), 2);
        assert_eq!(m.rows_with_tag(ConstraintTag::Diameter).count(), 6);
        assert_eq!(count_vars_constraints(&m), (14, 36));
        assert_eq!(closed_form_counts(&m.shape()), (14, 36));
    }

    #[test]
    fn unbounded_model_omits_bound_rows() {
        let (w, d, ld, h, l) = four_room_inputs();
        let inp = ClusteringInputs {
            weights: &w,
            dist: &d,
            loads: &ld,
            hcps: &h,
            locations: &l,
            k: 2,
            d_star: Limit::Unbounded,
            y_star: Limit::Unbounded,
        };
        let m = build_model(&inp).unwrap();
        assert_eq!(m.rows_with_tag(ConstraintTag::Diameter).count(), 0);
        assert_eq!(m.rows_with_tag(ConstraintTag::BoundLoad).count(), 0);
    }

    #[test]
    fn invalid_k() {
        let (w, d, ld, h, l) = four_room_inputs();
        for k in [0, 5] {
            let inp = ClusteringInputs {
                weights: &w,
                dist: &d,
                loads: &ld,
                hcps: &h,
                locations: &l,
                k,
                d_star: Limit::Unbounded,
                y_star: Limit::Unbounded,
            };
            assert!(matches!(build_model(&inp), Err(OptimizerError::InvalidK { .. })));
        }
    }

    #[test]
    fn empty_weights_unbounded_has_no_separation_vars() {
        let (_, d, ld, h, l) = four_room_inputs();
        let w = WeightMatrix::new(l.substitutable(), 0.1);
        let inp = ClusteringInputs {
            weights: &w,
            dist: &d,
            loads: &ld,
            hcps: &h,
            locations: &l,
            k: 2,
            d_star: Limit::Unbounded,
            y_star: Limit::Unbounded,
        };
        let m = build_model(&inp).unwrap();
        assert_eq!(m.variables.iter().filter(|v| matches!(v.kind, VarKind::Separate(..))).count(), 0);
    }

    #[test]
    fn limit_parsing() {
        assert_eq!("inf".parse::<Limit>().unwrap(), Limit::Unbounded);
        assert_eq!("15".parse::<Limit>().unwrap(), Limit::Finite(15.0));
        assert!("-1".parse::<Limit>().is_err());
        let json = serde_json::to_string(&Limit::Unbounded).unwrap();
        assert_eq!(json, "\"inf\"");
        assert_eq!(serde_json::from_str::<Limit>(&json).unwrap(), Limit::Unbounded);
        assert_eq!(serde_json::from_str::<Limit>("0.17").unwrap(), Limit::Finite(0.17));
    }

    #[test]
    fn nonempty_rows_only_when_not_implied() {
        assert!(!needs_nonempty_rows(4, 2));
        assert!(needs_nonempty_rows(4, 3));
        assert!(!needs_nonempty_rows(5, 3));
        assert!(!needs_nonempty_rows(7, 3));
        assert!(needs_nonempty_rows(6, 4));
        assert!(!needs_nonempty_rows(30, 5));
        assert!(!needs_nonempty_rows(3, 1));
    }
}
