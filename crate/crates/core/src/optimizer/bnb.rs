//! Exact branch-and-bound over location assignments.
//!
//! Locations are assigned in a fixed order, bubbles are opened in index
//! order (symmetry breaking), and each node is bounded by a per-location
//! relaxation that is tightened with a small transportation LP when the
//! cheapest choices overload a bubble's remaining capacity. HCP groups are
//! placed at the leaves, where bubble demands are known.

use std::time::Instant;

use super::hcp::{assign_group, Goal};
use super::{BubbleClustering, Limit, ProblemData, SolveOptions, SolveOutcome, SolveStats, FEAS_TOL};
use crate::simplex::{LinearProgram, LpOutcome, Sense};

const NONE: usize = usize::MAX;

struct Pre {
    n: usize,
    k: usize,
    cap: usize,
    forbid: Vec<bool>,
    forbid_list: Vec<Vec<usize>>,
    /// Neighbours with positive weight, heaviest first.
    nbrs: Vec<Vec<(f64, usize)>>,
    wtot: Vec<f64>,
    /// Largest total load a single bubble can hold, per group.
    max_supply: Vec<f64>,
    y_limit: Option<f64>,
}

impl Pre {
    fn new(d: &ProblemData) -> Self {
        let n = d.n();
        let k = d.k;
        let mut forbid = vec![false; n * n];
        let mut forbid_list = vec![Vec::new(); n];
        let mut nbrs = vec![Vec::new(); n];
        let mut wtot = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                if a == b {
                    continue;
                }
                if d.forbidden(a, b) {
                    forbid[a * n + b] = true;
                    forbid_list[a].push(b);
                }
                let w = d.w(a, b);
                if w > 0.0 {
                    nbrs[a].push((w, b));
                    wtot[a] += w;
                }
            }
            nbrs[a].sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        }
        let max_supply = d
            .groups
            .iter()
            .map(|g| {
                let mut l = g.load.clone();
                l.sort_by(|a, b| b.total_cmp(a));
                l.iter().take(g.cap).sum()
            })
            .collect();
        Self {
            n,
            k,
            cap: d.cap,
            forbid,
            forbid_list,
            nbrs,
            wtot,
            max_supply,
            y_limit: d.y_star.finite(),
        }
    }

    /// Static branching order: repeatedly take the location most strongly
    /// tied to those already ordered.
    fn order(&self) -> Vec<usize> {
        let n = self.n;
        let mut placed = vec![false; n];
        let mut tie = vec![0.0f64; n];
        let mut conflicts = vec![0usize; n];
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !placed[v])
                .max_by(|&a, &b| {
                    tie[a]
                        .total_cmp(&tie[b])
                        .then(conflicts[a].cmp(&conflicts[b]))
                        .then(self.wtot[a].total_cmp(&self.wtot[b]))
                        .then(b.cmp(&a))
                })
                .expect("unplaced location");
            placed[v] = true;
            out.push(v);
            for &(w, u) in &self.nbrs[v] {
                tie[u] += w;
            }
            for &u in &self.forbid_list[v] {
                conflicts[u] += 1;
            }
        }
        out
    }
}

/// Every HCP group can be placed with all gaps within `Y*`.
pub(super) fn hcp_feasible(d: &ProblemData, gdem: &[Vec<f64>], limit: Option<f64>) -> bool {
    let Some(y) = limit else {
        return true;
    };
    d.groups
        .iter()
        .zip(gdem)
        .all(|(g, dem)| assign_group(&g.load, dem, g.cap, Some(y), Goal::FirstFeasible).is_some())
}

pub(super) fn group_demands(d: &ProblemData, assign: &[usize]) -> Vec<Vec<f64>> {
    d.groups
        .iter()
        .map(|g| {
            let mut dem = vec![0.0; d.k];
            for (v, &b) in assign.iter().enumerate() {
                dem[b] += g.demand[v];
            }
            dem
        })
        .collect()
}

struct Search<'a> {
    d: &'a ProblemData,
    pre: &'a Pre,
    order: Vec<usize>,
    assign: Vec<usize>,
    size: Vec<usize>,
    open: usize,
    /// `a[v * k + b]`: weight from `v` to locations assigned to bubble `b`.
    a: Vec<f64>,
    /// Weight from `v` to all assigned locations.
    tot: Vec<f64>,
    conflict: Vec<u32>,
    gdem: Vec<Vec<f64>>,
    cut: f64,
    ub: f64,
    best: Option<Vec<usize>>,
    nodes: u64,
    lp_bounds: u64,
    stopped: bool,
    start: Instant,
    opts: &'a SolveOptions,
}

impl<'a> Search<'a> {
    fn new(d: &'a ProblemData, pre: &'a Pre, opts: &'a SolveOptions) -> Self {
        let (n, k) = (pre.n, pre.k);
        Self {
            d,
            pre,
            order: pre.order(),
            assign: vec![NONE; n],
            size: vec![0; k],
            open: 0,
            a: vec![0.0; n * k],
            tot: vec![0.0; n],
            conflict: vec![0; n * k],
            gdem: vec![vec![0.0; k]; d.groups.len()],
            cut: 0.0,
            ub: f64::INFINITY,
            best: None,
            nodes: 0,
            lp_bounds: 0,
            stopped: false,
            start: Instant::now(),
            opts,
        }
    }

    fn place(&mut self, v: usize, b: usize) {
        let k = self.pre.k;
        self.assign[v] = b;
        self.size[b] += 1;
        self.cut += self.tot[v] - self.a[v * k + b];
        for &(w, u) in &self.pre.nbrs[v] {
            self.a[u * k + b] += w;
            self.tot[u] += w;
        }
        for &u in &self.pre.forbid_list[v] {
            self.conflict[u * k + b] += 1;
        }
        for (g, grp) in self.d.groups.iter().enumerate() {
            self.gdem[g][b] += grp.demand[v];
        }
    }

    fn unplace(&mut self, v: usize, b: usize) {
        let k = self.pre.k;
        for (g, grp) in self.d.groups.iter().enumerate() {
            self.gdem[g][b] -= grp.demand[v];
        }
        for &u in &self.pre.forbid_list[v] {
            self.conflict[u * k + b] -= 1;
        }
        for &(w, u) in &self.pre.nbrs[v] {
            self.a[u * k + b] -= w;
            self.tot[u] -= w;
        }
        self.size[b] -= 1;
        self.cut -= self.tot[v] - self.a[v * k + b];
        self.assign[v] = NONE;
    }

    /// `v` may join bubble `b` without breaking capacity, diameter, or the
    /// per-bubble load-gap relaxation.
    fn admissible(&self, v: usize, b: usize, depth: usize) -> bool {
        let k = self.pre.k;
        if self.size[b] >= self.pre.cap || self.conflict[v * k + b] > 0 {
            return false;
        }
        let opened = self.open.max(b + 1);
        if k - opened > self.pre.n - depth - 1 {
            return false;
        }
        if let Some(y) = self.pre.y_limit {
            for (g, grp) in self.d.groups.iter().enumerate() {
                if grp.demand[v] > 0.0
                    && self.gdem[g][b] + grp.demand[v] - self.pre.max_supply[g] > y + FEAS_TOL
                {
                    return false;
                }
            }
        }
        true
    }

    /// Lower bound on the cut of any completion, or `None` if some free
    /// location has no admissible bubble.
    fn bound(&mut self, depth: usize) -> Option<f64> {
        let (n, k, cap) = (self.pre.n, self.pre.k, self.pre.cap);
        let free = &self.order[depth..];
        // Classes: open bubbles 0..open, then one pooled class for empty bubbles.
        let empty_bubbles = k - self.open;
        let classes = self.open + usize::from(empty_bubbles > 0);
        let room: Vec<usize> = (0..classes)
            .map(|c| if c < self.open { cap - self.size[c] } else { cap })
            .collect();
        let capacity: Vec<usize> = (0..classes)
            .map(|c| if c < self.open { room[c] } else { cap * empty_bubbles })
            .collect();
        let max_room = room.iter().copied().max().unwrap_or(0);
        let mut costs: Vec<Vec<Option<f64>>> = Vec::with_capacity(free.len());
        let mut total = self.cut;
        let mut load = vec![0usize; classes];
        let mut prefix = Vec::with_capacity(max_room);
        for &v in free {
            let wff = self.pre.wtot[v] - self.tot[v];
            prefix.clear();
            prefix.push(0.0);
            let mut acc = 0.0;
            for &(w, u) in &self.pre.nbrs[v] {
                if prefix.len() >= max_room {
                    break;
                }
                if self.assign[u] == NONE && !self.pre.forbid[v * n + u] {
                    acc += w;
                    prefix.push(acc);
                }
            }
            let mut row = Vec::with_capacity(classes);
            let mut best: Option<(f64, usize)> = None;
            for c in 0..classes {
                let ok = if c < self.open {
                    room[c] > 0 && self.conflict[v * k + c] == 0
                } else {
                    true
                };
                if !ok || room[c] == 0 {
                    row.push(None);
                    continue;
                }
                let to_assigned = if c < self.open { self.tot[v] - self.a[v * k + c] } else { self.tot[v] };
                let top = prefix[(room[c] - 1).min(prefix.len() - 1)];
                let cost = to_assigned + 0.5 * (wff - top);
                row.push(Some(cost));
                if best.is_none_or(|(bc, _)| cost < bc) {
                    best = Some((cost, c));
                }
            }
            let (bc, arg) = best?;
            total += bc;
            load[arg] += 1;
            costs.push(row);
        }
        let overloaded = (0..classes).any(|c| load[c] > capacity[c]);
        if !overloaded || total >= self.ub {
            return Some(total);
        }
        self.lp_bounds += 1;
        let mut vars = Vec::new();
        for (i, row) in costs.iter().enumerate() {
            for (c, cost) in row.iter().enumerate() {
                if let Some(cost) = cost {
                    vars.push((i, c, *cost));
                }
            }
        }
        let mut lp = LinearProgram::new(vars.len());
        for (j, &(_, _, cost)) in vars.iter().enumerate() {
            lp.objective[j] = cost;
        }
        for i in 0..costs.len() {
            let coeffs = vars
                .iter()
                .enumerate()
                .filter(|(_, &(vi, _, _))| vi == i)
                .map(|(j, _)| (j, 1.0))
                .collect();
            lp.add(coeffs, Sense::Eq, 1.0);
        }
        for c in 0..classes {
            let coeffs = vars
                .iter()
                .enumerate()
                .filter(|(_, &(_, vc, _))| vc == c)
                .map(|(j, _)| (j, 1.0))
                .collect();
            lp.add(coeffs, Sense::Le, capacity[c] as f64);
        }
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => Some(self.cut + value - 1e-9),
            _ => None,
        }
    }

    fn out_of_budget(&mut self) -> bool {
        if self.stopped {
            return true;
        }
        if let Some(limit) = self.opts.node_limit {
            if self.nodes >= limit {
                self.stopped = true;
            }
        }
        if self.nodes.is_multiple_of(256) {
            if let Some(t) = self.opts.time_limit {
                if self.start.elapsed() >= t {
                    self.stopped = true;
                }
            }
        }
        self.stopped
    }

    fn prune_level(&self) -> f64 {
        if self.ub.is_infinite() {
            return f64::INFINITY;
        }
        self.ub - 1e-12 * self.ub.abs().max(1.0)
    }

    fn dfs(&mut self, depth: usize) {
        self.nodes += 1;
        if self.out_of_budget() {
            return;
        }
        if depth == self.pre.n {
            if self.open < self.pre.k || !hcp_feasible(self.d, &self.gdem, self.pre.y_limit) {
                return;
            }
            let exact = self.d.cut(&self.assign);
            if exact < self.prune_level() {
                self.ub = exact;
                self.best = Some(self.assign.clone());
            }
            return;
        }
        // Bubble demands only grow, so a partial assignment that already
        // defeats every HCP placement cannot be completed.
        if depth > 0 && !hcp_feasible(self.d, &self.gdem, self.pre.y_limit) {
            return;
        }
        match self.bound(depth) {
            Some(lb) if lb < self.prune_level() => {}
            _ => return,
        }
        let v = self.order[depth];
        let k = self.pre.k;
        let limit = (self.open + 1).min(k);
        let mut cands: Vec<(f64, usize)> = (0..limit)
            .filter(|&b| self.admissible(v, b, depth))
            .map(|b| (self.tot[v] - self.a[v * k + b], b))
            .collect();
        cands.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        for (_, b) in cands {
            let was_open = self.open;
            if b == self.open {
                self.open += 1;
            }
            self.place(v, b);
            self.dfs(depth + 1);
            self.unplace(v, b);
            self.open = was_open;
            if self.stopped {
                return;
            }
        }
    }
}

/// Builds the clustering for a location partition, placing each HCP group
/// to minimise its largest load gap.
pub(super) fn to_clustering(d: &ProblemData, assign: &[usize]) -> Option<BubbleClustering> {
    let gdem = group_demands(d, assign);
    let mut hcp_bubble = std::collections::BTreeMap::new();
    for (g, grp) in d.groups.iter().enumerate() {
        let (placement, _) = assign_group(&grp.load, &gdem[g], grp.cap, d.y_star.finite(), Goal::MinMax)?;
        for (m, p) in grp.members.iter().enumerate() {
            hcp_bubble.insert(p.clone(), placement[m]);
        }
    }
    let mut c = BubbleClustering {
        k: d.k,
        location_bubble: d.locations.iter().cloned().zip(assign.iter().copied()).collect(),
        hcp_bubble,
        objective_value: Some(d.cut(assign)),
    };
    c.canonicalize();
    Some(c)
}

pub(super) fn solve(d: &ProblemData, opts: &SolveOptions) -> (SolveOutcome, SolveStats) {
    let pre = Pre::new(d);
    let mut stats = SolveStats::default();
    // A group whose total demand exceeds its total load by more than K * Y*
    // cannot meet the bound in every bubble.
    if let Limit::Finite(y) = d.y_star {
        for g in &d.groups {
            let excess = g.demand.iter().sum::<f64>() - g.load.iter().sum::<f64>();
            if excess / d.k as f64 > y + FEAS_TOL {
                return (SolveOutcome::Infeasible, stats);
            }
        }
    }
    let heuristic = super::heuristic::local_search(d, opts.seed, opts.heuristic_restarts);
    stats.heuristic_objective = heuristic.as_ref().map(|h| h.1);
    let mut s = Search::new(d, &pre, opts);
    if let Some((assign, cut)) = heuristic {
        s.ub = cut;
        s.best = Some(assign);
    }
    stats.root_bound = s.bound(0).unwrap_or(f64::INFINITY).max(0.0);
    s.dfs(0);
    stats.nodes = s.nodes;
    stats.lp_bounds = s.lp_bounds;
    let best = s.best.as_ref().and_then(|a| to_clustering(d, a));
    let outcome = if s.stopped {
        SolveOutcome::TimedOut {
            bound: stats.root_bound.min(s.ub),
            best,
        }
    } else {
        match best {
            Some(c) => SolveOutcome::Optimal(c),
            None => SolveOutcome::Infeasible,
        }
    };
    (outcome, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HcpRoster, LoadDemandTable, LocationRoster};
    use crate::optimizer::tests::four_room_inputs;
    use crate::optimizer::{build_model, ClusteringInputs, Limit};
    use crate::spatial::DistanceMatrix;
    use crate::weights::WeightMatrix;

    fn inputs<'a>(parts: &'a (WeightMatrix, DistanceMatrix, LoadDemandTable, HcpRoster, LocationRoster), d_star: Limit) -> ClusteringInputs<'a> {
        ClusteringInputs {
            weights: &parts.0,
            dist: &parts.1,
            loads: &parts.2,
            hcps: &parts.3,
            locations: &parts.4,
            k: 2,
            d_star,
            y_star: Limit::Unbounded,
        }
    }

    #[test]
    fn four_rooms_split_along_heavy_edges() {
        let parts = four_room_inputs();
        let m = build_model(&inputs(&parts, Limit::Unbounded)).unwrap();
        let (out, stats) = solve(&m.data, &SolveOptions::default());
        let c = out.clustering().unwrap();
        assert_eq!(c.location_bubble[&"l1".into()], c.location_bubble[&"l2".into()]);
        assert_eq!(c.location_bubble[&"l3".into()], c.location_bubble[&"l4".into()]);
        assert!((out.objective().unwrap() - 0.04).abs() < 1e-12);
        assert!(stats.root_bound <= 0.04 + 1e-12);
    }

    #[test]
    fn diameter_below_every_distance_is_infeasible() {
        let parts = four_room_inputs();
        let m = build_model(&inputs(&parts, Limit::Finite(5.0))).unwrap();
        let (out, _) = solve(&m.data, &SolveOptions::default());
        assert_eq!(out.status(), "infeasible");
    }
}
