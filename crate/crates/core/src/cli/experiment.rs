//! End-to-end experiment: baseline, CoRN and RANDOM arms across bubble
//! counts, with optional cost-bounded CoRN runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::episim::{
    calibrate_rho, compare_runs, simulate, Arm, Calibration, ComparisonReport, SimAggregates, SimConfig, SimSummary,
};
use crate::model::{compute_loads_demands, VisitGraph};
use crate::optimizer::{
    build_model, solve_with_stats, verify_clustering, BubbleClustering, ClusteringInputs, Limit, SolveOptions,
};
use crate::rewiring::{compute_costs, random_clustering, rewire, CostSummary, RewireOptions};
use crate::spatial::{shortest_path_metric, DistanceMatrix};
use crate::synth::{generate_facility, generate_mobility, FacilitySpec};
use crate::weights::{daily_weight_matrix, default_z, weight_matrix, HcpScope, WeightMatrix};

use super::{load_inputs, write_file, InputFiles};

/// Where the visit graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(FacilitySpec),
    Files(InputFiles),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Infectivity {
    Rho(f64),
    TargetR0(f64),
}

/// Log span the transmission weights are computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightWindow {
    Whole,
    #[default]
    Daily,
}

impl std::str::FromStr for WeightWindow {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whole" => Ok(Self::Whole),
            "daily" => Ok(Self::Daily),
            _ => Err(format!("unknown weight window {s:?} (expected whole or daily)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub k_list: Vec<usize>,
    pub infectivity: Infectivity,
    /// Replicates, master seed, disease and casual-contact parameters.
    pub sim: SimConfig,
    pub unit_s: u64,
    pub weight_scope: HcpScope,
    pub weight_window: WeightWindow,
    /// A cost-bounded CoRN arm runs when either bound is finite.
    pub d_star_m: Limit,
    pub y_star_h: Limit,
    pub node_limit: u64,
    pub bootstrap_resamples: usize,
    pub rewire: RewireOptions,
}

impl ExperimentConfig {
    /// The synthetic long-term-care setting used for trend checks.
    pub fn ltcf_default() -> Self {
        Self {
            source: DataSource::Synthetic(FacilitySpec::ltcf_30()),
            k_list: vec![1, 3, 5],
            infectivity: Infectivity::TargetR0(2.86),
            sim: SimConfig {
                replicates: 500,
                seed: 7,
                ..SimConfig::default()
            },
            unit_s: 60,
            weight_scope: HcpScope::NsOnly,
            weight_window: WeightWindow::Daily,
            d_star_m: Limit::Unbounded,
            y_star_h: Limit::Unbounded,
            node_limit: 200_000,
            bootstrap_resamples: 2000,
            rewire: RewireOptions::default(),
        }
    }

    pub fn bounded(&self) -> bool {
        self.d_star_m.is_finite() || self.y_star_h.is_finite()
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            bail!("k list must be non-empty and positive");
        }
        if self.unit_s == 0 {
            bail!("unit must be positive");
        }
        match self.infectivity {
            Infectivity::Rho(r) if !(r >= 0.0 && r.is_finite()) => bail!("rho must be finite and non-negative"),
            Infectivity::TargetR0(r) if !(r >= 0.0 && r.is_finite()) => bail!("target R0 must be finite and non-negative"),
            _ => {}
        }
        self.sim.validate()?;
        Ok(())
    }
}

/// Outcome of one clustering method at one K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: String,
    pub k: usize,
    pub status: String,
    pub objective: Option<f64>,
    pub solver_nodes: Option<u64>,
    pub verification: Vec<String>,
    pub costs: Option<CostSummary>,
    pub infections: Option<SimAggregates>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rho: f64,
    pub z: f64,
    pub calibration: Option<Calibration>,
    pub baseline: SimAggregates,
    pub methods: Vec<MethodResult>,
    pub comparisons: BTreeMap<usize, ComparisonReport>,
}

impl ExperimentReport {
    pub fn method(&self, method: &str, k: usize) -> Option<&MethodResult> {
        self.methods.iter().find(|m| m.method == method && m.k == k)
    }
}

pub(crate) struct Inputs {
    pub graph: VisitGraph,
    pub dist: DistanceMatrix,
}

pub(crate) fn load_source(src: &DataSource) -> Result<Inputs> {
    match src {
        DataSource::Synthetic(spec) => {
            let f = generate_facility(spec)?;
            let graph = generate_mobility(&f, spec)?;
            let dist = shortest_path_metric(&f.spatial)?;
            Ok(Inputs { graph, dist })
        }
        DataSource::Files(files) => {
            let (graph, spatial) = load_inputs(files)?;
            let spatial = spatial.context("experiment needs a spatial graph")?;
            Ok(Inputs {
                graph,
                dist: shortest_path_metric(&spatial)?,
            })
        }
    }
}

pub(crate) fn compute_weights(
    g: &VisitGraph,
    z: f64,
    unit: u64,
    scope: HcpScope,
    window: WeightWindow,
) -> Result<WeightMatrix> {
    Ok(match window {
        WeightWindow::Whole => weight_matrix(g, z, unit, scope)?,
        WeightWindow::Daily => daily_weight_matrix(g, z, unit, scope)?,
    })
}

fn csv_string(f: impl FnOnce(&mut Vec<u8>) -> csv::Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

struct Arms {
    summaries: Vec<(String, SimSummary)>,
}

/// Runs the experiment and writes its report files into `out`. Returns the
/// report and the relative paths written.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<(ExperimentReport, Vec<PathBuf>)> {
    cfg.validate()?;
    let Inputs { graph: g, dist } = load_source(&cfg.source)?;
    let mut written = Vec::new();
    let mut put = |rel: &str, bytes: &[u8]| -> Result<()> {
        write_file(&out.join(rel), bytes)?;
        written.push(PathBuf::from(rel));
        Ok(())
    };

    let mut sim = cfg.sim.clone();
    let calibration = match cfg.infectivity {
        Infectivity::Rho(r) => {
            sim.disease.rho = r;
            None
        }
        Infectivity::TargetR0(t) => {
            let c = calibrate_rho(&g, t, &sim)?;
            sim.disease.rho = c.rho;
            put("calibration.json", serde_json::to_string_pretty(&c)?.as_bytes())?;
            Some(c)
        }
    };
    let rho = sim.disease.rho;
    let z = default_z(rho, cfg.unit_s);
    let weights = compute_weights(&g, z, cfg.unit_s, cfg.weight_scope, cfg.weight_window)?;
    put("weights.csv", &csv_string(|b| weights.write_csv(b))?)?;
    let loads = compute_loads_demands(&g);

    let baseline = simulate(Arm::Baseline(&g), &sim)?;
    let mut arms_by_k: BTreeMap<usize, Arms> = BTreeMap::new();
    let mut methods = Vec::new();

    for &k in &cfg.k_list {
        let mut arms = Arms {
            summaries: vec![("baseline".into(), baseline.clone())],
        };
        let mut variants = vec![("corn", Limit::Unbounded, Limit::Unbounded)];
        if cfg.bounded() {
            variants.push(("corn_bounded", cfg.d_star_m, cfg.y_star_h));
        }
        for (name, d_star, y_star) in variants {
            let inputs = ClusteringInputs {
                weights: &weights,
                dist: &dist,
                loads: &loads,
                hcps: &g.hcps,
                locations: &g.locations,
                k,
                d_star,
                y_star,
            };
            let model = build_model(&inputs)?;
            let opts = SolveOptions {
                time_limit: None,
                node_limit: Some(cfg.node_limit),
                seed: cfg.sim.seed,
                ..SolveOptions::default()
            };
            let (outcome, stats) = solve_with_stats(&model, &opts);
            let mut result = MethodResult {
                method: name.into(),
                k,
                status: outcome.status().into(),
                objective: outcome.objective(),
                solver_nodes: Some(stats.nodes),
                verification: Vec::new(),
                costs: None,
                infections: None,
            };
            if let Some(c) = outcome.clustering() {
                result.verification = verify_clustering(c, &inputs);
                put(&format!("clusterings/{name}_k{k}.json"), c.to_json().as_bytes())?;
                let (costs, summary) = evaluate(&g, &dist, c, cfg, &sim, k)?;
                result.costs = Some(costs);
                result.infections = Some(summary.aggregates.clone());
                arms.summaries.push((name.into(), summary));
            }
            methods.push(result);
        }

        let rc = random_clustering(&g.hcps, &g.locations, k, cfg.sim.seed.wrapping_add(k as u64), Some(&weights))?;
        let rr = rewire(&g, &rc, cfg.sim.seed.wrapping_add(k as u64), cfg.rewire)?;
        let costs = compute_costs(&g, &rr.graph, &rc, &dist)
            .summary(&g.hcps, rr.dropped.len() as f64 / g.visits().len().max(1) as f64);
        let random = simulate(
            Arm::RandomControl {
                base: &g,
                k,
                rewire: cfg.rewire,
            },
            &sim,
        )?;
        methods.push(MethodResult {
            method: "random".into(),
            k,
            status: "random".into(),
            objective: rc.objective_value,
            solver_nodes: None,
            verification: Vec::new(),
            costs: Some(costs),
            infections: Some(random.aggregates.clone()),
        });
        arms.summaries.push(("random".into(), random));
        arms_by_k.insert(k, arms);
    }

    let mut comparisons = BTreeMap::new();
    let mut long = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut long);
        w.write_record(["arm", "k", "replicate", "infections", "leave", "reach"])?;
        for (r, rep) in baseline.replicates.iter().enumerate() {
            w.write_record(["baseline", "0", &r.to_string(), &rep.infections.to_string(), &rep.leave.to_string(), &rep.reach.to_string()])?;
        }
        for (k, arms) in &arms_by_k {
            for (name, s) in arms.summaries.iter().skip(1) {
                for rep in &s.replicates {
                    w.write_record([
                        name.as_str(),
                        &k.to_string(),
                        &rep.replicate.to_string(),
                        &rep.infections.to_string(),
                        &rep.leave.to_string(),
                        &rep.reach.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;
    }
    put("long.csv", &long)?;

    for (k, arms) in &arms_by_k {
        let refs: Vec<(&str, &SimSummary)> = arms.summaries.iter().map(|(n, s)| (n.as_str(), s)).collect();
        comparisons.insert(*k, compare_runs(&refs, cfg.bootstrap_resamples, cfg.sim.seed.wrapping_add(*k as u64)));
        if cfg.sim.record_transmissions {
            for (name, s) in arms.summaries.iter().skip(1) {
                put(&format!("transmissions/{name}_k{k}.json"), s.to_json().as_bytes())?;
            }
        }
    }
    if cfg.sim.record_transmissions {
        put("transmissions/baseline.json", baseline.to_json().as_bytes())?;
    }

    let report = ExperimentReport {
        rho,
        z,
        calibration,
        baseline: baseline.aggregates.clone(),
        methods,
        comparisons,
    };
    write_tables(&report, &mut put)?;
    put("comparison.json", serde_json::to_string_pretty(&report.comparisons)?.as_bytes())?;
    put("report.json", serde_json::to_string_pretty(&report)?.as_bytes())?;
    Ok((report, written))
}

/// Rewires to `c`, prices it, and simulates the rewired graph.
fn evaluate(
    g: &VisitGraph,
    dist: &DistanceMatrix,
    c: &BubbleClustering,
    cfg: &ExperimentConfig,
    sim: &SimConfig,
    k: usize,
) -> Result<(CostSummary, SimSummary)> {
    let r = rewire(g, c, cfg.sim.seed.wrapping_add(k as u64), cfg.rewire)?;
    let costs = compute_costs(g, &r.graph, c, dist)
        .summary(&g.hcps, r.dropped.len() as f64 / g.visits().len().max(1) as f64);
    let summary = simulate(
        Arm::Rewired {
            graph: &r.graph,
            clustering: c,
        },
        sim,
    )?;
    Ok((costs, summary))
}

fn write_tables(report: &ExperimentReport, put: &mut impl FnMut(&str, &[u8]) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["arm", "k", "mean", "median", "q05", "q95", "leave_pct", "reach_pct"])?;
        let b = &report.baseline;
        let row = |arm: &str, k: usize, a: &SimAggregates| {
            [
                arm.to_string(),
                k.to_string(),
                a.mean_infections.to_string(),
                a.median_infections.to_string(),
                a.q05_infections.to_string(),
                a.q95_infections.to_string(),
                a.leave_pct.to_string(),
                a.reach_pct.to_string(),
            ]
        };
        w.write_record(row("baseline", 0, b))?;
        for m in &report.methods {
            if let Some(a) = &m.infections {
                w.write_record(row(&m.method, m.k, a))?;
            }
        }
        w.flush()?;
    }
    put("summary_infections.csv", &buf)?;

    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(["method", "k", "mean_h_per_day", "median_h_per_day", "dropped_fraction"])?;
        for m in &report.methods {
            if let Some(c) = &m.costs {
                w.write_record([
                    m.method.clone(),
                    m.k.to_string(),
                    c.unmet_demand_h_per_day.mean.to_string(),
                    c.unmet_demand_h_per_day.median.to_string(),
                    c.dropped_fraction.to_string(),
                ])?;
            }
        }
        w.flush()?;
    }
    put("unmet_demand.csv", &buf)?;

    for (file, method) in [("excess_cost_unbounded.csv", "corn"), ("excess_cost_bounded.csv", "corn_bounded")] {
        let rows: Vec<&MethodResult> = report.methods.iter().filter(|m| m.method == method).collect();
        if rows.is_empty() {
            continue;
        }
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record([
                "k",
                "status",
                "objective",
                "excess_load_mean_h",
                "excess_load_median_h",
                "excess_footsteps_mean_m",
                "excess_footsteps_median_m",
                "max_bubble_diameter_m",
            ])?;
            for m in rows {
                let c = m.costs.as_ref();
                w.write_record([
                    m.k.to_string(),
                    m.status.clone(),
                    fmt_opt(m.objective),
                    fmt_opt(c.map(|c| c.excess_load_h_per_day.mean)),
                    fmt_opt(c.map(|c| c.excess_load_h_per_day.median)),
                    fmt_opt(c.map(|c| c.excess_footsteps_m_per_day.mean)),
                    fmt_opt(c.map(|c| c.excess_footsteps_m_per_day.median)),
                    fmt_opt(c.map(|c| c.max_bubble_diameter_m)),
                ])?;
            }
            w.flush()?;
        }
        put(file, &buf)?;
    }
    Ok(())
}

/// Reads every regular file under `dir` as `(relative path, bytes)`, sorted.
pub fn read_tree(dir: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) -> Result<()> {
        for entry in fs::read_dir(dir)? {
            let p = entry?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                out.insert(p.strip_prefix(root)?.to_path_buf(), fs::read(&p)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::ltcf_default();
        if let DataSource::Synthetic(spec) = &mut cfg.source {
            spec.days = 5;
        }
        cfg.k_list = vec![1, 2];
        cfg.infectivity = Infectivity::Rho(2e-3);
        cfg.sim.replicates = 6;
        cfg.d_star_m = Limit::Finite(40.0);
        cfg.bootstrap_resamples = 50;
        cfg
    }

    #[test]
    fn rejects_empty_or_zero_k() {
        let mut cfg = small();
        cfg.k_list = vec![];
        assert!(cfg.validate().is_err());
        cfg.k_list = vec![0, 2];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn small_run_writes_every_table_and_repeats() {
        let cfg = small();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let (report, files) = run_experiment(&cfg, a.path()).unwrap();
        run_experiment(&cfg, b.path()).unwrap();
        assert_eq!(read_tree(a.path()).unwrap(), read_tree(b.path()).unwrap());
        for name in ["weights.csv", "long.csv", "comparison.json", "report.json", "clusterings/corn_bounded_k2.json"] {
            assert!(files.contains(&PathBuf::from(name)), "missing {name}");
        }
        assert!(!files.contains(&PathBuf::from("calibration.json")));
        for k in [1, 2] {
            for m in ["corn", "corn_bounded", "random"] {
                let r = report.method(m, k).unwrap();
                assert!(r.verification.is_empty(), "{m} K={k}: {:?}", r.verification);
                assert_eq!(r.infections.is_some(), r.status != "infeasible");
            }
        }
        let long = std::fs::read_to_string(a.path().join("long.csv")).unwrap();
        let simulated = report.methods.iter().filter(|m| m.infections.is_some()).count();
        assert_eq!(report.method("corn_bounded", 1).unwrap().status, "infeasible");
        assert_eq!(long.lines().count(), 1 + 6 * (1 + simulated));
    }
}
