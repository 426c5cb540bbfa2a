//! Assigning one substitutable HCP group to bubbles once the location
//! partition (and hence each bubble's demand) is fixed.

use super::FEAS_TOL;

/// Node budget for one group search. Generous for realistic group sizes.
const NODE_BUDGET: u64 = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Goal {
    /// Stop at the first assignment whose largest gap is within the limit.
    FirstFeasible,
    /// Minimise the largest gap, subject to the limit.
    MinMax,
}

/// Returns a bubble per member and the largest `demand - supply` gap, or
/// `None` if no assignment keeps every gap within `limit`.
///
/// Each bubble receives between one and `cap` members.
pub(crate) fn assign_group(
    load: &[f64],
    dem: &[f64],
    cap: usize,
    limit: Option<f64>,
    goal: Goal,
) -> Option<(Vec<usize>, f64)> {
    let k = dem.len();
    let m = load.len();
    if m < k || cap * k < m {
        return None;
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| load[b].total_cmp(&load[a]).then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&i| load[i]).collect();
    let mut s = Search {
        sorted: &sorted,
        dem,
        cap,
        k,
        goal,
        target: limit.map_or(f64::INFINITY, |y| y + FEAS_TOL),
        best: None,
        best_gap: f64::INFINITY,
        count: vec![0; k],
        supply: vec![0.0; k],
        cur: vec![0; m],
        nodes: 0,
    };
    if let Some((assign, gap)) = greedy(&sorted, dem, cap) {
        if gap <= s.target {
            s.best_gap = gap;
            s.best = Some(assign);
        }
    }
    if !(goal == Goal::FirstFeasible && s.best.is_some()) {
        s.dfs(0);
    }
    let best = s.best?;
    let mut out = vec![0; m];
    for (pos, &member) in order.iter().enumerate() {
        out[member] = best[pos];
    }
    Some((out, s.best_gap))
}

fn max_gap(dem: &[f64], supply: &[f64]) -> f64 {
    dem.iter()
        .zip(supply)
        .map(|(d, s)| d - s)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Largest-first greedy: each member goes to the bubble with the largest
/// current gap that still has room, keeping enough members for empty bubbles.
fn greedy(sorted: &[f64], dem: &[f64], cap: usize) -> Option<(Vec<usize>, f64)> {
    let k = dem.len();
    let mut count = vec![0usize; k];
    let mut supply = vec![0.0; k];
    let mut assign = Vec::with_capacity(sorted.len());
    for (j, &l) in sorted.iter().enumerate() {
        let remaining = sorted.len() - j;
        let empties = count.iter().filter(|&&c| c == 0).count();
        let must_fill = remaining <= empties;
        let b = (0..k)
            .filter(|&b| count[b] < cap && (!must_fill || count[b] == 0))
            .max_by(|&a, &b| (dem[a] - supply[a]).total_cmp(&(dem[b] - supply[b])).then(b.cmp(&a)))?;
        count[b] += 1;
        supply[b] += l;
        assign.push(b);
    }
    Some((assign, max_gap(dem, &supply)))
}

struct Search<'a> {
    sorted: &'a [f64],
    dem: &'a [f64],
    cap: usize,
    k: usize,
    goal: Goal,
    target: f64,
    best: Option<Vec<usize>>,
    best_gap: f64,
    count: Vec<usize>,
    supply: Vec<f64>,
    cur: Vec<usize>,
    nodes: u64,
}

impl Search<'_> {
    fn done(&self) -> bool {
        (self.goal == Goal::FirstFeasible && self.best.is_some()) || self.nodes >= NODE_BUDGET
    }

    /// Lower bound on the final largest gap given members `j..` are unplaced.
    fn bound(&self, j: usize) -> f64 {
        let rest = &self.sorted[j..];
        let mut lb = f64::NEG_INFINITY;
        for b in 0..self.k {
            let room = (self.cap - self.count[b]).min(rest.len());
            let extra: f64 = rest[..room].iter().sum();
            lb = lb.max(self.dem[b] - self.supply[b] - extra);
        }
        lb
    }

    fn dfs(&mut self, j: usize) {
        self.nodes += 1;
        if j == self.sorted.len() {
            let gap = max_gap(self.dem, &self.supply);
            if gap <= self.target && gap < self.best_gap - 1e-12 {
                self.best_gap = gap;
                self.best = Some(self.cur.clone());
            }
            return;
        }
        let cutoff = self.target.min(self.best_gap - 1e-12);
        if self.bound(j) > cutoff {
            return;
        }
        let remaining = self.sorted.len() - j;
        let empties = self.count.iter().filter(|&&c| c == 0).count();
        let must_fill = remaining <= empties;
        let mut cands: Vec<usize> = (0..self.k)
            .filter(|&b| self.count[b] < self.cap && (!must_fill || self.count[b] == 0))
            .filter(|&b| {
                // Identical bubbles are interchangeable; try only the first.
                !(0..b).any(|a| {
                    self.count[a] == self.count[b]
                        && self.supply[a] == self.supply[b]
                        && self.dem[a] == self.dem[b]
                        && self.count[a] < self.cap
                })
            })
            .collect();
        cands.sort_by(|&a, &b| {
            (self.dem[b] - self.supply[b])
                .total_cmp(&(self.dem[a] - self.supply[a]))
                .then(a.cmp(&b))
        });
        let l = self.sorted[j];
        for b in cands {
            self.count[b] += 1;
            self.supply[b] += l;
            self.cur[j] = b;
            self.dfs(j + 1);
            self.count[b] -= 1;
            self.supply[b] -= l;
            if self.done() {
                return;
            }
        }
    }
}
