//! Agent-based epidemic simulation over visit graphs.
//!
//! Agents are the HCPs plus one resident per substitutable room. Each day
//! the simulator replays that day's contacts: HCP-resident room visits,
//! HCP-HCP co-presence in a location, and randomly generated casual
//! contacts between on-shift HCPs. Agents infected on a day transmit from
//! the next day on, with an infectiousness that ramps up to symptom onset
//! and then decays.
//!
//! Every replicate draws from independent random streams derived from the
//! master seed: one picks the seed agent, one generates casual contacts,
//! one supplies a uniform for every contact, and one drives per-replicate
//! control clusterings. Streams are shared across arms and infectivity
//! values, so comparisons use common random numbers.

mod calibrate;
mod compare;

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{HcpType, VisitGraph, SECONDS_PER_DAY};
use crate::optimizer::BubbleClustering;
use crate::rewiring::{random_clustering, rewire, RewireOptions};

pub use calibrate::{calibrate_rho, estimate_r0, Calibration, R0Estimate};
pub use compare::{compare_runs, ArmStats, ComparisonReport, PairedDifference};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("target R0 {target} not reachable: estimate {reached} at rho {rho}")]
    NotBracketed { target: f64, reached: f64, rho: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiseaseParams {
    /// Infection probability per minute of contact at peak shedding.
    pub rho: f64,
    pub incubation_days: u32,
    pub recovery_days: u32,
    pub ramp_up_rate: f64,
    pub ramp_down_rate: f64,
    /// Retention probability of a casual contact between HCPs of different bubbles.
    pub cross_bubble_scale: f64,
}

impl DiseaseParams {
    /// Ramp rates chosen so shedding is 5% of peak one day after infection
    /// and on the last infectious day.
    pub fn with_periods(rho: f64, incubation_days: u32, recovery_days: u32) -> Self {
        let ln20 = 20f64.ln();
        Self {
            rho,
            incubation_days,
            recovery_days,
            ramp_up_rate: if incubation_days > 1 { ln20 / (incubation_days - 1) as f64 } else { ln20 },
            ramp_down_rate: ln20 / recovery_days as f64,
            cross_bubble_scale: 0.75,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Config(m.into()));
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return bad("rho must be finite and non-negative");
        }
        if self.incubation_days < 1 || self.recovery_days < 1 {
            return bad("incubation and recovery periods must be at least one day");
        }
        if !(self.ramp_up_rate > 0.0 && self.ramp_down_rate > 0.0) {
            return bad("ramp rates must be positive");
        }
        if !(0.0..=1.0).contains(&self.cross_bubble_scale) {
            return bad("cross_bubble_scale must lie in [0, 1]");
        }
        Ok(())
    }

    /// Last day after infection with positive shedding.
    pub fn infectious_days(&self) -> u32 {
        self.incubation_days + self.recovery_days
    }
}

impl Default for DiseaseParams {
    fn default() -> Self {
        Self::with_periods(1e-3, 6, 10)
    }
}

/// Relative infectiousness `day` days after infection, peaking at 1 on the
/// day symptoms start and zero once recovered.
pub fn shedding(day: u32, p: &DiseaseParams) -> f64 {
    let w = p.incubation_days;
    if day <= w {
        (-p.ramp_up_rate * (w - day) as f64).exp()
    } else if day <= w + p.recovery_days {
        (-p.ramp_down_rate * (day - w) as f64).exp()
    } else {
        0.0
    }
}

/// Probability that a contact of `minutes` with an agent shedding at `beta`
/// infects a susceptible agent.
pub fn contact_infection_prob(minutes: f64, beta: f64, rho: f64) -> f64 {
    (rho * minutes * beta).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasualContactModel {
    /// Poisson mean of casual contacts initiated per on-shift HCP per day.
    pub contacts_per_hcp_per_day: f64,
    pub duration_min: f64,
}

impl Default for CasualContactModel {
    fn default() -> Self {
        Self {
            contacts_per_hcp_per_day: 2.0,
            duration_min: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub disease: DiseaseParams,
    pub replicates: usize,
    pub seed: u64,
    /// Days simulated; defaults to the log length. Longer horizons cycle the log.
    pub horizon_days: Option<u64>,
    pub casual: CasualContactModel,
    /// Group whose members may be the seed; defaults to the first group.
    pub seed_group: Option<String>,
    pub record_transmissions: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            disease: DiseaseParams::default(),
            replicates: 100,
            seed: 0,
            horizon_days: None,
            casual: CasualContactModel::default(),
            seed_group: None,
            record_transmissions: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.disease.validate()?;
        if self.replicates == 0 {
            return Err(SimError::Config("replicates must be at least 1".into()));
        }
        if !(self.casual.contacts_per_hcp_per_day >= 0.0 && self.casual.duration_min >= 0.0) {
            return Err(SimError::Config("casual contact parameters must be non-negative".into()));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, SimError> {
        let c: Self = serde_json::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }
}

/// What is simulated.
#[derive(Debug, Clone, Copy)]
pub enum Arm<'a> {
    /// The log as recorded; no bubbles.
    Baseline(&'a VisitGraph),
    /// A graph already rewired to `clustering`.
    Rewired {
        graph: &'a VisitGraph,
        clustering: &'a BubbleClustering,
    },
    /// A fresh random `k`-clustering and rewiring of `base` per replicate.
    RandomControl {
        base: &'a VisitGraph,
        k: usize,
        rewire: RewireOptions,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub source: String,
    pub target: String,
    pub location: Option<String>,
    pub day: u64,
    /// Seconds since midnight.
    pub time_s: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub seed_agent: String,
    /// Infected agents including the seed.
    pub infections: usize,
    /// Infected agents excluding the seed.
    pub secondary_infections: usize,
    pub leave: bool,
    pub reach: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub transmissions: Vec<Transmission>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAggregates {
    pub mean_infections: f64,
    pub median_infections: f64,
    pub q05_infections: f64,
    pub q95_infections: f64,
    pub mean_secondary_infections: f64,
    pub leave_pct: f64,
    pub reach_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub agents: usize,
    pub replicates: Vec<ReplicateResult>,
    pub aggregates: SimAggregates,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl SimSummary {
    pub fn from_replicates(agents: usize, replicates: Vec<ReplicateResult>) -> Self {
        let mut inf: Vec<f64> = replicates.iter().map(|r| r.infections as f64).collect();
        inf.sort_by(f64::total_cmp);
        let n = replicates.len().max(1) as f64;
        let aggregates = SimAggregates {
            mean_infections: inf.iter().sum::<f64>() / n,
            median_infections: quantile(&inf, 0.5),
            q05_infections: quantile(&inf, 0.05),
            q95_infections: quantile(&inf, 0.95),
            mean_secondary_infections: replicates.iter().map(|r| r.secondary_infections as f64).sum::<f64>() / n,
            leave_pct: 100.0 * replicates.iter().filter(|r| r.leave).count() as f64 / n,
            reach_pct: 100.0 * replicates.iter().filter(|r| r.reach).count() as f64 / n,
        };
        Self {
            agents,
            replicates,
            aggregates,
        }
    }

    pub fn infections(&self) -> Vec<f64> {
        self.replicates.iter().map(|r| r.infections as f64).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serialises")
    }

    /// `replicate,infections,leave,reach` rows.
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["replicate", "infections", "leave", "reach"])?;
        for r in &self.replicates {
            wtr.write_record([
                r.replicate.to_string(),
                r.infections.to_string(),
                r.leave.to_string(),
                r.reach.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Indexed agents: HCPs (sorted by id) then one resident per substitutable room.
#[derive(Debug, Clone)]
pub(crate) struct Agents {
    pub names: Vec<String>,
    /// Seed candidates.
    pub seedable: Vec<usize>,
}

impl Agents {
    fn new(g: &VisitGraph, seed_group: Option<&str>) -> Result<Self, SimError> {
        let hcps: Vec<_> = g.hcps.ids().cloned().collect();
        let rooms = g.locations.substitutable();
        let group = match seed_group {
            Some(label) => g
                .hcps
                .group_index(label)
                .ok_or_else(|| SimError::Config(format!("unknown seed group {label:?}")))?,
            None => 0,
        };
        let seedable: Vec<usize> = hcps
            .iter()
            .enumerate()
            .filter(|(_, p)| g.hcps.get(p) == Some(HcpType::Group(group)))
            .map(|(i, _)| i)
            .collect();
        if seedable.is_empty() {
            return Err(SimError::Config("no HCP can be the seed".into()));
        }
        let mut names: Vec<String> = hcps.iter().map(|p| p.to_string()).collect();
        names.extend(rooms.iter().map(|l| format!("resident@{l}")));
        Ok(Self { names, seedable })
    }

    fn len(&self) -> usize {
        self.names.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Contact {
    pub a: u32,
    pub b: u32,
    pub minutes: f64,
    /// Index into the location list, or `u32::MAX` for casual contacts.
    pub location: u32,
    pub time_s: u64,
}

/// Deterministic contacts of a graph, grouped by day of the log.
#[derive(Debug, Clone)]
pub(crate) struct ContactSchedule {
    pub days: Vec<Vec<Contact>>,
    /// HCPs with at least one visit, per day.
    pub on_shift: Vec<Vec<u32>>,
    pub locations: Vec<String>,
}

impl ContactSchedule {
    pub fn build(g: &VisitGraph) -> Self {
        let hcp_index: BTreeMap<_, u32> = g.hcps.ids().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let hcp_count = hcp_index.len() as u32;
        let resident: BTreeMap<_, u32> = g
            .locations
            .substitutable()
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l, hcp_count + i as u32))
            .collect();
        let locations: Vec<String> = g.locations.ids().map(|l| l.to_string()).collect();
        let loc_index: BTreeMap<&str, u32> = locations.iter().enumerate().map(|(i, l)| (l.as_str(), i as u32)).collect();
        let n_days = g.day_count() as usize;
        let mut days = vec![Vec::new(); n_days];
        let mut on_shift = vec![Vec::new(); n_days];
        let mut by_loc_day: BTreeMap<(u32, usize), Vec<(u64, u64, u32)>> = BTreeMap::new();
        for v in g.visits() {
            let day = (v.start / SECONDS_PER_DAY) as usize;
            let p = hcp_index[&v.hcp];
            let l = loc_index[v.location.as_str()];
            on_shift[day].push(p);
            if let Some(&r) = resident.get(&v.location) {
                days[day].push(Contact {
                    a: p,
                    b: r,
                    minutes: v.duration() as f64 / 60.0,
                    location: l,
                    time_s: v.start % SECONDS_PER_DAY,
                });
            }
            by_loc_day.entry((l, day)).or_default().push((v.start, v.end, p));
        }
        for ((l, day), mut vs) in by_loc_day {
            vs.sort();
            for i in 0..vs.len() {
                for j in i + 1..vs.len() {
                    if vs[j].0 >= vs[i].1 {
                        break;
                    }
                    if vs[i].2 == vs[j].2 {
                        continue;
                    }
                    let overlap = vs[i].1.min(vs[j].1) - vs[j].0;
                    days[day].push(Contact {
                        a: vs[i].2,
                        b: vs[j].2,
                        minutes: overlap as f64 / 60.0,
                        location: l,
                        time_s: vs[j].0 % SECONDS_PER_DAY,
                    });
                }
            }
        }
        for (d, list) in days.iter_mut().enumerate() {
            list.sort_by(|x, y| x.time_s.cmp(&y.time_s).then(x.a.cmp(&y.a)).then(x.b.cmp(&y.b)));
            on_shift[d].sort_unstable();
            on_shift[d].dedup();
        }
        Self {
            days,
            on_shift,
            locations,
        }
    }
}

/// Bubble of each agent, if any.
fn agent_bubbles(g: &VisitGraph, c: Option<&BubbleClustering>) -> Vec<Option<usize>> {
    let Some(c) = c else {
        return vec![None; g.hcps.len() + g.locations.substitutable().len()];
    };
    g.hcps
        .ids()
        .map(|p| c.hcp_bubble.get(p).copied())
        .chain(g.locations.substitutable().iter().map(|l| c.location_bubble.get(l).copied()))
        .collect()
}

/// A rewired graph must keep substitutable HCPs inside their bubble.
fn check_confined(g: &VisitGraph, c: &BubbleClustering) -> Result<(), SimError> {
    for v in g.visits() {
        if let (Some(bp), Some(bl)) = (c.hcp_bubble.get(&v.hcp), c.location_bubble.get(&v.location)) {
            if bp != bl {
                return Err(SimError::Config(format!(
                    "graph is not rewired to the clustering: {} (bubble {bp}) visits {} (bubble {bl})",
                    v.hcp, v.location
                )));
            }
        }
    }
    Ok(())
}

/// Per-replicate random stream `stream` derived from the master seed.
pub(crate) fn stream(seed: u64, replicate: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64 * 4 + stream);
    rng
}

const SEED_STREAM: u64 = 0;
const CONTACT_STREAM: u64 = 1;
const TRANSMIT_STREAM: u64 = 2;
const CONTROL_STREAM: u64 = 3;

/// Casual contacts of one day: each on-shift HCP initiates a Poisson number
/// of contacts with uniformly chosen other on-shift HCPs. Contacts between
/// HCPs of different bubbles survive with probability `cross_scale`.
pub(crate) fn casual_contacts(
    on_shift: &[u32],
    model: &CasualContactModel,
    bubbles: &[Option<usize>],
    cross_scale: f64,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<Contact>,
) {
    if on_shift.len() < 2 || model.contacts_per_hcp_per_day <= 0.0 {
        return;
    }
    let pois = Poisson::new(model.contacts_per_hcp_per_day).expect("positive rate");
    for &a in on_shift {
        let n = pois.sample(rng) as usize;
        for _ in 0..n {
            let mut j = rng.random_range(0..on_shift.len() - 1);
            if on_shift[j] == a {
                j = on_shift.len() - 1;
            }
            let b = on_shift[j];
            let keep_draw: f64 = rng.random();
            let cross = matches!((bubbles[a as usize], bubbles[b as usize]), (Some(x), Some(y)) if x != y);
            if cross && keep_draw >= cross_scale {
                continue;
            }
            out.push(Contact {
                a,
                b,
                minutes: model.duration_min,
                location: u32::MAX,
                time_s: 0,
            });
        }
    }
}

/// Disease state of one agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AgentState {
    Susceptible,
    /// Infected on the given day.
    Infected(u64),
    Recovered,
}

/// Counts of (susceptible, infected, recovered) agents.
pub fn state_counts(states: &[AgentState]) -> (usize, usize, usize) {
    states.iter().fold((0, 0, 0), |(s, i, r), st| match st {
        AgentState::Susceptible => (s + 1, i, r),
        AgentState::Infected(_) => (s, i + 1, r),
        AgentState::Recovered => (s, i, r + 1),
    })
}

/// Runs one replicate. When `only_seed_transmits`, other infected agents
/// never transmit (used to estimate R0).
#[allow(clippy::too_many_arguments)]
pub(crate) fn run_replicate(
    sched: &ContactSchedule,
    agents: &Agents,
    bubbles: &[Option<usize>],
    cross_scale: f64,
    cfg: &SimConfig,
    horizon: u64,
    replicate: usize,
    only_seed_transmits: bool,
) -> ReplicateResult {
    let mut seed_rng = stream(cfg.seed, replicate, SEED_STREAM);
    let mut contact_rng = stream(cfg.seed, replicate, CONTACT_STREAM);
    let mut transmit_rng = stream(cfg.seed, replicate, TRANSMIT_STREAM);
    let seed_agent = agents.seedable[seed_rng.random_range(0..agents.seedable.len())];
    let mut state = vec![AgentState::Susceptible; agents.len()];
    state[seed_agent] = AgentState::Infected(0);
    let seed_bubble = bubbles[seed_agent];
    let mut leave = false;
    let mut reach = false;
    let mut infections = 1usize;
    let mut log = Vec::new();
    let mut today = Vec::new();
    let p = &cfg.disease;
    let last = p.infectious_days() as u64;
    let log_days = sched.days.len() as u64;
    for day in 0..horizon {
        for st in state.iter_mut() {
            if matches!(*st, AgentState::Infected(t) if day - t > last) {
                *st = AgentState::Recovered;
            }
        }
        debug_assert_eq!(
            {
                let (s, i, r) = state_counts(&state);
                s + i + r
            },
            agents.len()
        );
        let d = (day % log_days) as usize;
        today.clear();
        today.extend_from_slice(&sched.days[d]);
        casual_contacts(&sched.on_shift[d], &cfg.casual, bubbles, cross_scale, &mut contact_rng, &mut today);
        for c in &today {
            let u: f64 = transmit_rng.random();
            let (a, b) = (c.a as usize, c.b as usize);
            let (src, dst, t) = match (state[a], state[b]) {
                (AgentState::Infected(t), AgentState::Susceptible) => (a, b, t),
                (AgentState::Susceptible, AgentState::Infected(t)) => (b, a, t),
                _ => continue,
            };
            if day <= t || (only_seed_transmits && src != seed_agent) {
                continue;
            }
            let beta = shedding((day - t) as u32, p);
            if u < contact_infection_prob(c.minutes, beta, p.rho) {
                state[dst] = AgentState::Infected(day);
                infections += 1;
                leave |= seed_bubble.is_some() && bubbles[dst] != seed_bubble;
                if let (Some(sb), Some(db)) = (seed_bubble, bubbles[dst]) {
                    reach |= sb != db;
                }
                if cfg.record_transmissions {
                    log.push(Transmission {
                        source: agents.names[src].clone(),
                        target: agents.names[dst].clone(),
                        location: (c.location != u32::MAX).then(|| sched.locations[c.location as usize].clone()),
                        day,
                        time_s: c.time_s,
                    });
                }
            }
        }
    }
    ReplicateResult {
        replicate,
        seed_agent: agents.names[seed_agent].clone(),
        infections,
        secondary_infections: infections - 1,
        leave,
        reach,
        transmissions: log,
    }
}

/// Simulates `cfg.replicates` independent epidemics on the given arm.
pub fn simulate(arm: Arm<'_>, cfg: &SimConfig) -> Result<SimSummary, SimError> {
    cfg.validate()?;
    let scale = cfg.disease.cross_bubble_scale;
    match arm {
        Arm::Baseline(g) => {
            let agents = Agents::new(g, cfg.seed_group.as_deref())?;
            let sched = ContactSchedule::build(g);
            let bubbles = agent_bubbles(g, None);
            let horizon = cfg.horizon_days.unwrap_or(g.day_count());
            let reps = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| run_replicate(&sched, &agents, &bubbles, 1.0, cfg, horizon, r, false))
                .collect();
            Ok(SimSummary::from_replicates(agents.len(), reps))
        }
        Arm::Rewired { graph, clustering } => {
            check_confined(graph, clustering)?;
            let agents = Agents::new(graph, cfg.seed_group.as_deref())?;
            let sched = ContactSchedule::build(graph);
            let bubbles = agent_bubbles(graph, Some(clustering));
            let horizon = cfg.horizon_days.unwrap_or(graph.day_count());
            let reps = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| run_replicate(&sched, &agents, &bubbles, scale, cfg, horizon, r, false))
                .collect();
            Ok(SimSummary::from_replicates(agents.len(), reps))
        }
        Arm::RandomControl { base, k, rewire: opts } => {
            let agents = Agents::new(base, cfg.seed_group.as_deref())?;
            let horizon = cfg.horizon_days.unwrap_or(base.day_count());
            let reps: Result<Vec<_>, SimError> = (0..cfg.replicates)
                .into_par_iter()
                .map(|r| {
                    let mut rng = stream(cfg.seed, r, CONTROL_STREAM);
                    let c = random_clustering(&base.hcps, &base.locations, k, rng.random(), None)
                        .map_err(|e| SimError::Config(e.to_string()))?;
                    let rewired = rewire(base, &c, rng.random(), opts).map_err(|e| SimError::Config(e.to_string()))?;
                    let sched = ContactSchedule::build(&rewired.graph);
                    let bubbles = agent_bubbles(&rewired.graph, Some(&c));
                    Ok(run_replicate(&sched, &agents, &bubbles, scale, cfg, horizon, r, false))
                })
                .collect();
            Ok(SimSummary::from_replicates(agents.len(), reps?))
        }
    }
}
