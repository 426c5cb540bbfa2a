//! Local search that seeds the branch-and-bound incumbent. Locations and
//! HCPs move jointly; diameter conflicts and load-gap excess are penalised
//! so that descent drifts toward feasible partitions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::bnb::{group_demands, hcp_feasible};
use super::{ProblemData, FEAS_TOL};

const IMPROVE: f64 = -1e-12;

struct State<'a> {
    d: &'a ProblemData,
    k: usize,
    y: Option<f64>,
    /// Cost of one unit of constraint violation.
    big: f64,
    nbrs: Vec<Vec<(f64, usize)>>,
    forbid: Vec<Vec<usize>>,
    assign: Vec<usize>,
    size: Vec<usize>,
    a: Vec<f64>,
    f: Vec<i64>,
    hassign: Vec<Vec<usize>>,
    hsize: Vec<Vec<usize>>,
    gdem: Vec<Vec<f64>>,
    supply: Vec<Vec<f64>>,
}

impl<'a> State<'a> {
    fn new(d: &'a ProblemData, rng: &mut ChaCha8Rng) -> Self {
        let n = d.n();
        let k = d.k;
        let mut nbrs = vec![Vec::new(); n];
        let mut forbid = vec![Vec::new(); n];
        let mut total = 0.0;
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    continue;
                }
                if d.w(u, v) > 0.0 {
                    nbrs[u].push((d.w(u, v), v));
                    total += d.w(u, v);
                }
                if d.forbidden(u, v) {
                    forbid[u].push(v);
                }
            }
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let mut assign = vec![0; n];
        for (i, &v) in perm.iter().enumerate() {
            assign[v] = i % k;
        }
        let mut hassign = Vec::new();
        for g in &d.groups {
            let mut perm: Vec<usize> = (0..g.members.len()).collect();
            perm.shuffle(rng);
            let mut h = vec![0; perm.len()];
            for (i, &m) in perm.iter().enumerate() {
                h[m] = i % k;
            }
            hassign.push(h);
        }
        let mut s = Self {
            d,
            k,
            y: d.y_star.finite(),
            big: 1.0 + total,
            nbrs,
            forbid,
            assign,
            size: vec![0; k],
            a: vec![0.0; n * k],
            f: vec![0; n * k],
            hsize: vec![vec![0; k]; d.groups.len()],
            gdem: vec![vec![0.0; k]; d.groups.len()],
            supply: vec![vec![0.0; k]; d.groups.len()],
            hassign,
        };
        for v in 0..n {
            let b = s.assign[v];
            s.size[b] += 1;
            s.shift_loc(v, b, 1.0);
        }
        for (g, grp) in d.groups.iter().enumerate() {
            for (m, &b) in s.hassign[g].iter().enumerate() {
                s.hsize[g][b] += 1;
                s.supply[g][b] += grp.load[m];
            }
        }
        s
    }

    /// Adds (`sign = 1`) or removes (`-1`) location `v` from bubble `b` in
    /// the neighbour sums and group demands.
    fn shift_loc(&mut self, v: usize, b: usize, sign: f64) {
        let k = self.k;
        for &(w, u) in &self.nbrs[v] {
            self.a[u * k + b] += sign * w;
        }
        for &u in &self.forbid[v] {
            self.f[u * k + b] += sign as i64;
        }
        for (g, grp) in self.d.groups.iter().enumerate() {
            self.gdem[g][b] += sign * grp.demand[v];
        }
    }

    fn excess(&self, dem: f64, supply: f64) -> f64 {
        match self.y {
            // Scaled so that any load-gap excess outweighs cut savings.
            Some(y) => 1e3 * (dem - supply - y).max(0.0),
            None => 0.0,
        }
    }

    /// Change in load-gap excess when bubbles `p` and `q` change demand by
    /// `dp`, `dq` (per group) and supply of group `g0` by `sp`, `sq`.
    fn excess_delta(&self, p: usize, q: usize, dp: &[f64], dq: &[f64], supply_change: Option<(usize, f64, f64)>) -> f64 {
        if self.y.is_none() {
            return 0.0;
        }
        let mut delta = 0.0;
        for g in 0..self.d.groups.len() {
            let (sp, sq) = match supply_change {
                Some((g0, sp, sq)) if g0 == g => (sp, sq),
                _ => (0.0, 0.0),
            };
            let (dem_p, dem_q) = (self.gdem[g][p], self.gdem[g][q]);
            let (sup_p, sup_q) = (self.supply[g][p], self.supply[g][q]);
            delta += self.excess(dem_p + dp[g], sup_p + sp) + self.excess(dem_q + dq[g], sup_q + sq)
                - self.excess(dem_p, sup_p)
                - self.excess(dem_q, sup_q);
        }
        delta
    }

    fn demand_of(&self, v: usize) -> Vec<f64> {
        self.d.groups.iter().map(|g| g.demand[v]).collect()
    }

    fn move_loc(&mut self, v: usize, to: usize) {
        let from = self.assign[v];
        self.shift_loc(v, from, -1.0);
        self.shift_loc(v, to, 1.0);
        self.assign[v] = to;
        self.size[from] -= 1;
        self.size[to] += 1;
    }

    fn move_hcp(&mut self, g: usize, m: usize, to: usize) {
        let from = self.hassign[g][m];
        let l = self.d.groups[g].load[m];
        self.supply[g][from] -= l;
        self.supply[g][to] += l;
        self.hsize[g][from] -= 1;
        self.hsize[g][to] += 1;
        self.hassign[g][m] = to;
    }

    fn try_location_moves(&mut self) -> bool {
        let (n, k, cap) = (self.d.n(), self.k, self.d.cap);
        let mut improved = false;
        for v in 0..n {
            let from = self.assign[v];
            if self.size[from] <= 1 {
                continue;
            }
            let dv = self.demand_of(v);
            let neg: Vec<f64> = dv.iter().map(|x| -x).collect();
            for to in 0..k {
                if to == from || self.size[to] >= cap {
                    continue;
                }
                let delta = self.a[v * k + from] - self.a[v * k + to]
                    + self.big
                        * ((self.f[v * k + to] - self.f[v * k + from]) as f64
                            + self.excess_delta(from, to, &neg, &dv, None));
                if delta < IMPROVE {
                    self.move_loc(v, to);
                    improved = true;
                    break;
                }
            }
        }
        improved
    }

    fn try_location_swaps(&mut self) -> bool {
        let (n, k) = (self.d.n(), self.k);
        let mut improved = false;
        for u in 0..n {
            for v in u + 1..n {
                let (bu, bv) = (self.assign[u], self.assign[v]);
                if bu == bv {
                    continue;
                }
                let fuv = i64::from(self.d.forbidden(u, v));
                let du = self.demand_of(u);
                let dv = self.demand_of(v);
                let to_u: Vec<f64> = du.iter().zip(&dv).map(|(x, y)| y - x).collect();
                let to_v: Vec<f64> = to_u.iter().map(|x| -x).collect();
                let conflicts = self.f[u * k + bv] - self.f[u * k + bu] + self.f[v * k + bu] - self.f[v * k + bv] - 2 * fuv;
                let delta = self.a[u * k + bu] - self.a[u * k + bv] + self.a[v * k + bv] - self.a[v * k + bu]
                    + 2.0 * self.d.w(u, v)
                    + self.big * (conflicts as f64 + self.excess_delta(bu, bv, &to_u, &to_v, None));
                if delta < IMPROVE {
                    self.move_loc(u, bv);
                    self.move_loc(v, bu);
                    improved = true;
                }
            }
        }
        improved
    }

    fn try_hcp_moves(&mut self) -> bool {
        if self.y.is_none() {
            return false;
        }
        let k = self.k;
        let zero = vec![0.0; self.d.groups.len()];
        let mut improved = false;
        for g in 0..self.d.groups.len() {
            let cap = self.d.groups[g].cap;
            let m_count = self.d.groups[g].members.len();
            for m in 0..m_count {
                let from = self.hassign[g][m];
                let l = self.d.groups[g].load[m];
                if self.hsize[g][from] > 1 {
                    for to in 0..k {
                        if to == from || self.hsize[g][to] >= cap {
                            continue;
                        }
                        if self.excess_delta(from, to, &zero, &zero, Some((g, -l, l))) < IMPROVE {
                            self.move_hcp(g, m, to);
                            improved = true;
                            break;
                        }
                    }
                }
                for m2 in m + 1..m_count {
                    let (b1, b2) = (self.hassign[g][m], self.hassign[g][m2]);
                    if b1 == b2 {
                        continue;
                    }
                    let diff = self.d.groups[g].load[m2] - self.d.groups[g].load[m];
                    if self.excess_delta(b1, b2, &zero, &zero, Some((g, diff, -diff))) < IMPROVE {
                        self.move_hcp(g, m, b2);
                        self.move_hcp(g, m2, b1);
                        improved = true;
                    }
                }
            }
        }
        improved
    }

    fn violations(&self) -> f64 {
        let n = self.d.n();
        let conflicts: i64 = (0..n).map(|v| self.f[v * self.k + self.assign[v]]).sum();
        let mut excess = 0.0;
        for g in 0..self.d.groups.len() {
            for b in 0..self.k {
                excess += self.excess(self.gdem[g][b], self.supply[g][b]);
            }
        }
        conflicts as f64 + excess
    }
}

/// Best feasible location partition over `restarts` random starts, with its cut.
pub(super) fn local_search(d: &ProblemData, seed: u64, restarts: usize) -> Option<(Vec<usize>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    for _ in 0..restarts.max(1) {
        let mut s = State::new(d, &mut rng);
        loop {
            let mut improved = s.try_location_moves();
            improved |= s.try_location_swaps();
            improved |= s.try_hcp_moves();
            if !improved {
                break;
            }
        }
        if s.violations() > FEAS_TOL {
            continue;
        }
        if !hcp_feasible(d, &group_demands(d, &s.assign), d.y_star.finite()) {
            continue;
        }
        let cut = d.cut(&s.assign);
        if best.as_ref().is_none_or(|(_, c)| cut < *c - 1e-12) {
            best = Some((s.assign, cut));
        }
    }
    best
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
    fn local_search_finds_the_obvious_split() {
        let parts = four_room_inputs();
        let m = build_model(&inputs(&parts, Limit::Unbounded)).unwrap();
        let (assign, cost) = local_search(&m.data, 1, 4).unwrap();
        assert_eq!(assign[0], assign[1]);
        assert_eq!(assign[2], assign[3]);
        assert_ne!(assign[0], assign[2]);
        assert!((cost - 0.04).abs() < 1e-12);
    }
}
