//! Dense two-phase primal simplex for small linear programs in the form
//! `min c·x  s.t.  A x {<=, >=, =} b,  x >= 0`.

const EPS: f64 = 1e-9;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_SWITCH: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub constraints: Vec<LinearConstraint>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LpOutcome::Optimal { value, .. } => Some(*value),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![0.0; num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.num_vars));
        self.constraints.push(LinearConstraint { coeffs, sense, rhs });
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    rows: usize,
    cols: usize, // structural + slack + artificial columns (rhs excluded)
    a: Vec<f64>, // rows x (cols + 1), last column is rhs
    basis: Vec<usize>,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let slack_count = lp.constraints.iter().filter(|c| c.sense != Sense::Eq).count();
        let art_count = lp
            .constraints
            .iter()
            .filter(|c| {
                let flip = c.rhs < 0.0;
                !matches!((c.sense, flip), (Sense::Le, false) | (Sense::Ge, true))
            })
            .count();
        let cols = n + slack_count + art_count;
        let width = cols + 1;
        let mut a = vec![0.0; m * width];
        let mut basis = vec![0; m];
        let mut slack = n;
        let mut art = n + slack_count;
        for (i, c) in lp.constraints.iter().enumerate() {
            let sign = if c.rhs < 0.0 { -1.0 } else { 1.0 };
            let row = &mut a[i * width..(i + 1) * width];
            for &(j, v) in &c.coeffs {
                row[j] += sign * v;
            }
            row[cols] = sign * c.rhs;
            let sense = match (c.sense, sign < 0.0) {
                (Sense::Le, true) => Sense::Ge,
                (Sense::Ge, true) => Sense::Le,
                (s, _) => s,
            };
            match sense {
                Sense::Le => {
                    row[slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Sense::Ge => {
                    row[slack] = -1.0;
                    slack += 1;
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Sense::Eq => {
                    row[art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self {
            rows: m,
            cols,
            a,
            basis,
            artificial_start: n + slack_count,
        }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.cols)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.cols + 1;
        let p = self.a[r * width + c];
        for j in 0..width {
            self.a[r * width + j] /= p;
        }
        let (before, rest) = self.a.split_at_mut(r * width);
        let (prow, after) = rest.split_at_mut(width);
        for row in before.chunks_mut(width).chain(after.chunks_mut(width)) {
            let f = row[c];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(prow.iter()) {
                    *x -= f * y;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Minimises `cost` over the current basis; `allowed(j)` filters entering columns.
    fn optimise(&mut self, cost: &[f64], allowed: impl Fn(usize) -> bool) -> Result<(), ()> {
        let mut degenerate = 0usize;
        loop {
            // Reduced costs d_j = c_j - c_B B^-1 A_j.
            let mut entering = None;
            let mut best = -EPS;
            let bland = degenerate >= DEGENERATE_SWITCH;
            for j in 0..self.cols {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j];
                for i in 0..self.rows {
                    let v = self.at(i, j);
                    if v != 0.0 {
                        d -= cost[self.basis[i]] * v;
                    }
                }
                if d < best {
                    entering = Some(j);
                    if bland {
                        break;
                    }
                    best = d;
                }
            }
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave = None;
            let mut ratio = f64::INFINITY;
            for i in 0..self.rows {
                let v = self.at(i, c);
                if v > EPS {
                    let t = self.rhs(i) / v;
                    let better = t < ratio - EPS
                        || (t <= ratio + EPS && leave.is_some_and(|l: usize| self.basis[i] < self.basis[l]));
                    if better {
                        ratio = t;
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                return Err(());
            };
            if ratio.abs() <= EPS {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            self.pivot(r, c);
        }
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let n = lp.num_vars;
        if self.artificial_start < self.cols {
            let mut phase1 = vec![0.0; self.cols];
            for c in phase1.iter_mut().skip(self.artificial_start) {
                *c = 1.0;
            }
            if self.optimise(&phase1, |_| true).is_err() {
                return LpOutcome::Infeasible;
            }
            let infeas: f64 = (0..self.rows)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.rhs(i))
                .sum();
            if infeas > 1e-7 {
                return LpOutcome::Infeasible;
            }
            // Drive remaining artificials out of the basis where possible.
            for i in 0..self.rows {
                if self.basis[i] >= self.artificial_start {
                    if let Some(j) = (0..self.artificial_start).find(|&j| self.at(i, j).abs() > EPS && !self.basis.contains(&j)) {
                        self.pivot(i, j);
                    }
                }
            }
        }
        let mut cost = vec![0.0; self.cols];
        cost[..n].copy_from_slice(&lp.objective);
        let art = self.artificial_start;
        if self.optimise(&cost, |j| j < art).is_err() {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; n];
        for i in 0..self.rows {
            if self.basis[i] < n {
                x[self.basis[i]] = self.rhs(i);
            }
        }
        let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        LpOutcome::Optimal { x, value }
    }
}
