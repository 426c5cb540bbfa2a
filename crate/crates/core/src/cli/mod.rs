//! Command-line front end. Every artifact-producing command writes its
//! outputs plus a `manifest.json` into an output directory; `rerun` repeats
//! a command from its manifest and checks the outputs hash identically.

pub mod experiment;
pub mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::model::{
    compute_loads_demands, load_mobility_log, load_mobility_log_unchecked, write_hcp_roster, write_location_roster,
    write_visits, VisitGraph,
};
use crate::optimizer::{
    build_model, export_model, solve_with_stats, verify_clustering, ClusteringInputs, ExportFormat, Limit,
    SolveOptions, SolveOutcome,
};
use crate::rewiring::RewireOptions;
use crate::spatial::{load_spatial_graph, shortest_path_metric, SpatialGraph};
use crate::synth::{generate_facility, generate_mobility, FacilitySpec};
use crate::weights::{default_z, HcpScope};

pub use experiment::{
    read_tree, run_experiment, DataSource, ExperimentConfig, ExperimentReport, Infectivity, MethodResult,
    WeightWindow,
};
pub use manifest::{RunManifest, MANIFEST_FILE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_TIMED_OUT: i32 = 4;

/// Default infectivity per minute when neither `--z` nor `--rho` is given.
const DEFAULT_RHO: f64 = 1e-3;

/// Marks errors caused by bad arguments or unreadable inputs.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(String);

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    UsageError(e.to_string()).into()
}

#[derive(Debug, Parser)]
#[command(name = "corn", version, about = "Cost-aware bubble clustering of patient care")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a mobility log and rosters for invariant violations.
    Validate(InputArgs),
    /// Compute weights and solve the bubble clustering program.
    Cluster(ClusterArgs),
    /// Write the clustering program in LP or MPS format.
    Export(ExportArgs),
    /// Generate a synthetic facility and mobility log.
    Synth(SynthArgs),
    /// Run baseline, CoRN and RANDOM simulations across bubble counts.
    Experiment(ExperimentArgs),
    /// Repeat a run from its manifest and compare outputs.
    Rerun(RerunArgs),
}

/// Paths of a mobility log and its rosters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFiles {
    pub visits: PathBuf,
    pub hcps: PathBuf,
    pub locations: PathBuf,
    pub spatial: Option<PathBuf>,
}

impl InputFiles {
    pub fn paths(&self) -> Vec<PathBuf> {
        let mut v = vec![self.visits.clone(), self.hcps.clone(), self.locations.clone()];
        v.extend(self.spatial.clone());
        v
    }

    /// Conventional file names inside a data directory, as written by `synth`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            visits: dir.join("visits.csv"),
            hcps: dir.join("hcps.csv"),
            locations: dir.join("locations.csv"),
            spatial: Some(dir.join("spatial.json")).filter(|p| p.exists()),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Directory holding visits.csv, hcps.csv, locations.csv and spatial.json.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub visits: Option<PathBuf>,
    #[arg(long)]
    pub hcps: Option<PathBuf>,
    #[arg(long)]
    pub locations: Option<PathBuf>,
    #[arg(long)]
    pub spatial: Option<PathBuf>,
}

impl InputArgs {
    fn resolve(&self) -> Result<InputFiles> {
        let base = self.data.as_deref().map(InputFiles::in_dir);
        let pick = |explicit: &Option<PathBuf>, fallback: Option<PathBuf>, name: &str| {
            explicit
                .clone()
                .or(fallback)
                .ok_or_else(|| usage(format!("missing --{name} (or --data)")))
        };
        let files = InputFiles {
            visits: pick(&self.visits, base.as_ref().map(|b| b.visits.clone()), "visits")?,
            hcps: pick(&self.hcps, base.as_ref().map(|b| b.hcps.clone()), "hcps")?,
            locations: pick(&self.locations, base.as_ref().map(|b| b.locations.clone()), "locations")?,
            spatial: self.spatial.clone().or(base.and_then(|b| b.spatial)),
        };
        let canon = |p: &Path| fs::canonicalize(p).map_err(|e| usage(format!("{}: {e}", p.display())));
        Ok(InputFiles {
            visits: canon(&files.visits)?,
            hcps: canon(&files.hcps)?,
            locations: canon(&files.locations)?,
            spatial: files.spatial.as_deref().map(canon).transpose()?,
        })
    }
}

/// Loads and validates the mobility log and, if named, the spatial graph.
pub fn load_inputs(files: &InputFiles) -> Result<(VisitGraph, Option<SpatialGraph>)> {
    let g = load_mobility_log(&files.visits, &files.hcps, &files.locations)?;
    let spatial = files.spatial.as_deref().map(load_spatial_graph).transpose()?;
    Ok((g, spatial))
}

/// Writes `bytes` to `path`, creating parent directories.
pub fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Number of bubbles.
    #[arg(long)]
    pub k: usize,
    /// Bubble diameter bound in meters, or `inf`.
    #[arg(long, default_value = "inf")]
    pub d_star_m: Limit,
    /// Per-group load gap bound in hours per day, or `inf`.
    #[arg(long, default_value = "inf")]
    pub y_star_h: Limit,
    /// Per-interval transmission probability; overrides `--rho`.
    #[arg(long)]
    pub z: Option<f64>,
    /// Infectivity per minute used to derive the interval probability.
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 60)]
    pub unit_s: u64,
    /// HCPs counted in the weights: `all` or `ns_only`.
    #[arg(long, default_value = "all")]
    pub weight_scope: HcpScope,
    /// Weights over the `whole` log or the mean of `daily` weights.
    #[arg(long, default_value = "whole")]
    pub weight_window: WeightWindow,
}

/// Model parameters as recorded in manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub inputs: InputFiles,
    pub k: usize,
    pub d_star_m: Limit,
    pub y_star_h: Limit,
    pub z: f64,
    pub unit_s: u64,
    pub weight_scope: HcpScope,
    pub weight_window: WeightWindow,
}

impl ModelConfig {
    fn from_args(inputs: &InputArgs, m: &ModelArgs) -> Result<Self> {
        let z = match (m.z, m.rho) {
            (Some(z), _) => z,
            (None, Some(r)) => default_z(r, m.unit_s),
            (None, None) => default_z(DEFAULT_RHO, m.unit_s),
        };
        if !(0.0..=1.0).contains(&z) {
            return Err(usage(format!("z must lie in [0, 1], got {z}")));
        }
        if m.unit_s == 0 {
            return Err(usage("--unit-s must be positive"));
        }
        Ok(Self {
            inputs: inputs.resolve()?,
            k: m.k,
            d_star_m: m.d_star_m,
            y_star_h: m.y_star_h,
            z,
            unit_s: m.unit_s,
            weight_scope: m.weight_scope,
            weight_window: m.weight_window,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub time_limit_s: Option<f64>,
    #[arg(long)]
    pub node_limit: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Record wall-clock timestamps in the manifest.
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub model: ModelConfig,
    pub time_limit_s: Option<f64>,
    pub node_limit: Option<u64>,
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub inputs: InputArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// `lp` or `mps`.
    #[arg(long, default_value = "lp")]
    pub format: ExportFormat,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportConfig {
    pub model: ModelConfig,
    pub format: ExportFormat,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Facility spec file; defaults to the preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// `ltcf30` or `micu`.
    #[arg(long, default_value = "ltcf30")]
    pub preset: String,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub spec: FacilitySpec,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// Facility spec file for a synthetic run.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Synthetic preset when no spec or data is given: `ltcf30` or `micu`.
    #[arg(long, default_value = "ltcf30")]
    pub preset: String,
    #[command(flatten)]
    pub inputs: InputArgs,
    /// Comma-separated bubble counts.
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub k: Vec<usize>,
    #[arg(long, conflicts_with = "target_r0")]
    pub rho: Option<f64>,
    #[arg(long, default_value_t = 2.86)]
    pub target_r0: f64,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub unit_s: u64,
    /// Diameter bound for the cost-bounded arm, or `inf`.
    #[arg(long, default_value = "inf")]
    pub d_star_m: Limit,
    /// Load gap bound for the cost-bounded arm, or `inf`.
    #[arg(long, default_value = "inf")]
    pub y_star_h: Limit,
    #[arg(long, default_value_t = 200_000)]
    pub node_limit: u64,
    #[arg(long, default_value = "ns_only")]
    pub weight_scope: HcpScope,
    #[arg(long, default_value = "daily")]
    pub weight_window: WeightWindow,
    /// Simulation config file supplying disease and casual-contact parameters.
    #[arg(long)]
    pub sim_config: Option<PathBuf>,
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    /// Write per-replicate transmission logs.
    #[arg(long)]
    pub transmissions: bool,
    #[arg(long)]
    pub keep_same_bubble_hcp: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub record_time: bool,
}

#[derive(Debug, Clone, Args)]
pub struct RerunArgs {
    /// Manifest of the run to repeat.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}

/// Caps worker threads at `CORN_THREADS` when set.
fn configure_threads() {
    if let Some(n) = std::env::var("CORN_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Validate(a) => cmd_validate(&a),
        Command::Cluster(a) => {
            let cfg = ClusterConfig {
                model: ModelConfig::from_args(&a.inputs, &a.model)?,
                time_limit_s: a.time_limit_s,
                node_limit: a.node_limit,
                seed: a.seed,
            };
            with_manifest("cluster", Some(cfg.seed), &cfg, &cfg.model.inputs.paths(), &a.out, a.record_time, |out| {
                cmd_cluster(&cfg, out)
            })
        }
        Command::Export(a) => {
            let cfg = ExportConfig {
                model: ModelConfig::from_args(&a.inputs, &a.model)?,
                format: a.format,
            };
            with_manifest("export", None, &cfg, &cfg.model.inputs.paths(), &a.out, a.record_time, |out| {
                cmd_export(&cfg, out)
            })
        }
        Command::Synth(a) => {
            let mut spec = match &a.spec {
                Some(p) => FacilitySpec::from_json(&fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?)
                    .map_err(usage)?,
                None => preset(&a.preset)?,
            };
            if let Some(s) = a.seed {
                spec.seed = s;
            }
            if let Some(d) = a.days {
                spec.days = d;
            }
            spec.validate().map_err(usage)?;
            let cfg = SynthConfig { spec };
            with_manifest("synth", Some(cfg.spec.seed), &cfg, &[], &a.out, a.record_time, |out| cmd_synth(&cfg, out))
        }
        Command::Experiment(a) => {
            let cfg = experiment_config(&a)?;
            let inputs = match &cfg.source {
                DataSource::Files(f) => f.paths(),
                DataSource::Synthetic(_) => Vec::new(),
            };
            with_manifest("experiment", Some(cfg.sim.seed), &cfg, &inputs, &a.out, a.record_time, |out| {
                run_experiment(&cfg, out).map(|(_, files)| (EXIT_OK, files))
            })
        }
        Command::Rerun(a) => cmd_rerun(&a),
    }
}

fn preset(name: &str) -> Result<FacilitySpec> {
    match name {
        "ltcf30" => Ok(FacilitySpec::ltcf_30()),
        "micu" => Ok(FacilitySpec::micu()),
        other => Err(usage(format!("unknown preset {other:?} (expected ltcf30 or micu)"))),
    }
}

fn experiment_config(a: &ExperimentArgs) -> Result<ExperimentConfig> {
    let has_files = a.inputs.data.is_some() || a.inputs.visits.is_some();
    let source = if has_files {
        DataSource::Files(a.inputs.resolve()?)
    } else if let Some(p) = &a.spec {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        DataSource::Synthetic(FacilitySpec::from_json(&text).map_err(usage)?)
    } else {
        DataSource::Synthetic(preset(&a.preset)?)
    };
    let mut sim = match &a.sim_config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            crate::episim::SimConfig::from_json(&text).map_err(usage)?
        }
        None => crate::episim::SimConfig::default(),
    };
    sim.replicates = a.replicates;
    sim.seed = a.seed;
    sim.record_transmissions = a.transmissions;
    let cfg = ExperimentConfig {
        source,
        k_list: a.k.clone(),
        infectivity: match a.rho {
            Some(r) => Infectivity::Rho(r),
            None => Infectivity::TargetR0(a.target_r0),
        },
        sim,
        unit_s: a.unit_s,
        weight_scope: a.weight_scope,
        weight_window: a.weight_window,
        d_star_m: a.d_star_m,
        y_star_h: a.y_star_h,
        node_limit: a.node_limit,
        bootstrap_resamples: a.bootstrap,
        rewire: RewireOptions {
            keep_same_bubble_hcp: a.keep_same_bubble_hcp,
        },
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

/// Runs `body` in `out`, then writes a manifest over the files it produced.
fn with_manifest<C: Serialize>(
    command: &str,
    seed: Option<u64>,
    cfg: &C,
    inputs: &[PathBuf],
    out: &Path,
    record_time: bool,
    body: impl FnOnce(&Path) -> Result<(i32, Vec<PathBuf>)>,
) -> Result<i32> {
    let mut manifest = RunManifest::new(command, seed, cfg, inputs)?;
    manifest.started_unix_s = record_time.then(manifest::unix_now);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (code, files) = body(out)?;
    manifest.record_outputs(out, &files)?;
    manifest.finished_unix_s = record_time.then(manifest::unix_now);
    manifest.write(out)?;
    Ok(code)
}

fn cmd_validate(a: &InputArgs) -> Result<i32> {
    let files = a.resolve()?;
    let g = load_mobility_log_unchecked(&files.visits, &files.hcps, &files.locations).map_err(usage)?;
    let mut problems: Vec<String> = g.validate().iter().map(|v| v.to_string()).collect();
    if let Some(p) = &files.spatial {
        match load_spatial_graph(p) {
            Ok(s) => {
                for l in g.locations.ids() {
                    if !s.location_map.contains_key(l) {
                        problems.push(format!("location {l} missing from the spatial graph"));
                    }
                }
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        println!(
            "ok: {} visits, {} HCPs, {} locations",
            g.visits().len(),
            g.hcps.len(),
            g.locations.len()
        );
        Ok(EXIT_OK)
    } else {
        for p in &problems {
            println!("{p}");
        }
        println!("{} violation(s)", problems.len());
        Ok(EXIT_FAILURE)
    }
}

struct Prepared {
    graph: VisitGraph,
    weights: crate::weights::WeightMatrix,
    dist: crate::spatial::DistanceMatrix,
    loads: crate::model::LoadDemandTable,
}

fn prepare(m: &ModelConfig) -> Result<Prepared> {
    let (graph, spatial) = load_inputs(&m.inputs).map_err(usage)?;
    let spatial = spatial.ok_or_else(|| usage("a spatial graph is required (--spatial)"))?;
    let dist = shortest_path_metric(&spatial)?;
    let weights = experiment::compute_weights(&graph, m.z, m.unit_s, m.weight_scope, m.weight_window)?;
    let loads = compute_loads_demands(&graph);
    Ok(Prepared {
        graph,
        weights,
        dist,
        loads,
    })
}

fn inputs_of<'a>(p: &'a Prepared, m: &ModelConfig) -> ClusteringInputs<'a> {
    ClusteringInputs {
        weights: &p.weights,
        dist: &p.dist,
        loads: &p.loads,
        hcps: &p.graph.hcps,
        locations: &p.graph.locations,
        k: m.k,
        d_star: m.d_star_m,
        y_star: m.y_star_h,
    }
}

/// Solver report written next to the clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub nodes: u64,
    pub verification: Vec<String>,
}

fn cmd_cluster(cfg: &ClusterConfig, out: &Path) -> Result<(i32, Vec<PathBuf>)> {
    let p = prepare(&cfg.model)?;
    let inputs = inputs_of(&p, &cfg.model);
    let model = build_model(&inputs).map_err(usage)?;
    let opts = SolveOptions {
        time_limit: cfg.time_limit_s.map(Duration::from_secs_f64),
        node_limit: cfg.node_limit,
        seed: cfg.seed,
        ..SolveOptions::default()
    };
    let (outcome, stats) = solve_with_stats(&model, &opts);
    let mut files = Vec::new();
    let mut weights_csv = Vec::new();
    p.weights.write_csv(&mut weights_csv)?;
    write_file(&out.join("weights.csv"), &weights_csv)?;
    files.push(PathBuf::from("weights.csv"));
    let mut verification = Vec::new();
    if let Some(c) = outcome.clustering() {
        verification = verify_clustering(c, &inputs);
        write_file(&out.join("clustering.json"), c.to_json().as_bytes())?;
        files.push(PathBuf::from("clustering.json"));
    }
    let report = SolveReport {
        status: outcome.status().into(),
        objective: outcome.objective(),
        bound: match &outcome {
            SolveOutcome::TimedOut { bound, .. } => Some(*bound),
            _ => outcome.objective(),
        },
        nodes: stats.nodes,
        verification,
    };
    write_file(&out.join("solve.json"), serde_json::to_string_pretty(&report)?.as_bytes())?;
    files.push(PathBuf::from("solve.json"));
    println!("{}: objective {:?}", report.status, report.objective);
    for v in &report.verification {
        println!("verification: {v}");
    }
    let code = match outcome {
        SolveOutcome::Optimal(_) => EXIT_OK,
        SolveOutcome::Infeasible => EXIT_INFEASIBLE,
        SolveOutcome::TimedOut { .. } => EXIT_TIMED_OUT,
    };
    Ok((code, files))
}

fn cmd_export(cfg: &ExportConfig, out: &Path) -> Result<(i32, Vec<PathBuf>)> {
    let p = prepare(&cfg.model)?;
    let model = build_model(&inputs_of(&p, &cfg.model)).map_err(usage)?;
    let name = match cfg.format {
        ExportFormat::Lp => "model.lp",
        ExportFormat::Mps => "model.mps",
    };
    write_file(&out.join(name), export_model(&model, cfg.format).as_bytes())?;
    let (vars, cons) = crate::optimizer::count_vars_constraints(&model);
    println!("{name}: {vars} variables, {cons} constraints");
    Ok((EXIT_OK, vec![PathBuf::from(name)]))
}

fn cmd_synth(cfg: &SynthConfig, out: &Path) -> Result<(i32, Vec<PathBuf>)> {
    let f = generate_facility(&cfg.spec)?;
    let g = generate_mobility(&f, &cfg.spec)?;
    let mut files = Vec::new();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        write_file(&out.join(name), &bytes)?;
        files.push(PathBuf::from(name));
        Ok(())
    };
    let mut b = Vec::new();
    write_visits(&mut b, g.visits())?;
    put("visits.csv", b)?;
    let mut b = Vec::new();
    write_hcp_roster(&mut b, &g.hcps)?;
    put("hcps.csv", b)?;
    let mut b = Vec::new();
    write_location_roster(&mut b, &g.locations)?;
    put("locations.csv", b)?;
    put("spatial.json", f.spatial.to_json().into_bytes())?;
    put("facility.json", cfg.spec.to_json().into_bytes())?;
    println!(
        "{} visits, {} HCPs, {} rooms over {} days",
        g.visits().len(),
        g.hcps.len(),
        g.locations.len(),
        g.day_count()
    );
    Ok((EXIT_OK, files))
}

fn cmd_rerun(a: &RerunArgs) -> Result<i32> {
    let old = RunManifest::read(&a.manifest).map_err(usage)?;
    let changed = old.changed_inputs();
    if !changed.is_empty() {
        bail!("inputs changed since the recorded run: {}", changed.join(", "));
    }
    let record_time = old.started_unix_s.is_some();
    let cfg = old.config.clone();
    let code = match old.command.as_str() {
        "cluster" => {
            let c: ClusterConfig = serde_json::from_value(cfg)?;
            with_manifest("cluster", Some(c.seed), &c, &c.model.inputs.paths(), &a.out, record_time, |out| {
                cmd_cluster(&c, out)
            })?
        }
        "export" => {
            let c: ExportConfig = serde_json::from_value(cfg)?;
            with_manifest("export", None, &c, &c.model.inputs.paths(), &a.out, record_time, |out| cmd_export(&c, out))?
        }
        "synth" => {
            let c: SynthConfig = serde_json::from_value(cfg)?;
            with_manifest("synth", Some(c.spec.seed), &c, &[], &a.out, record_time, |out| cmd_synth(&c, out))?
        }
        "experiment" => {
            let c: ExperimentConfig = serde_json::from_value(cfg)?;
            let inputs = match &c.source {
                DataSource::Files(f) => f.paths(),
                DataSource::Synthetic(_) => Vec::new(),
            };
            with_manifest("experiment", Some(c.sim.seed), &c, &inputs, &a.out, record_time, |out| {
                run_experiment(&c, out).map(|(_, files)| (EXIT_OK, files))
            })?
        }
        other => return Err(usage(format!("manifest names unknown command {other:?}"))),
    };
    let new = RunManifest::read(&a.out.join(MANIFEST_FILE))?;
    let diff = old.output_differences(&new);
    if diff.is_empty() {
        println!("reproduced {} output(s) identically", new.outputs.len());
        Ok(code)
    } else {
        for d in &diff {
            println!("differs: {d}");
        }
        Ok(EXIT_FAILURE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("corn").chain(args.iter().copied())).unwrap().command
    }

    #[test]
    fn experiment_flags_default_to_the_synthetic_setting() {
        let Command::Experiment(a) = parse(&["experiment", "--out", "x"]) else {
            panic!("expected experiment")
        };
        let cfg = experiment_config(&a).unwrap();
        let mut reference = ExperimentConfig::ltcf_default();
        reference.sim.record_transmissions = false;
        assert_eq!(serde_json::to_value(&cfg).unwrap(), serde_json::to_value(&reference).unwrap());
    }

    #[test]
    fn bad_arguments_are_usage_errors() {
        assert_eq!(run(["corn", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["corn", "experiment", "--out", "x", "--k", "0"]), EXIT_USAGE);
        assert_eq!(run(["corn", "synth", "--out", "x", "--preset", "nowhere"]), EXIT_USAGE);
        assert_eq!(run(["corn", "validate", "--data", "/definitely/not/here"]), EXIT_USAGE);
    }

    #[test]
    fn synth_output_validates_and_clusters() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        let d = data.to_str().unwrap();
        assert_eq!(run(["corn", "synth", "--out", d, "--days", "2"]), EXIT_OK);
        assert_eq!(run(["corn", "validate", "--data", d]), EXIT_OK);
        let out = dir.path().join("cl");
        let o = out.to_str().unwrap();
        let code = run(["corn", "cluster", "--data", d, "--k", "2", "--out", o, "--weight-scope", "ns_only"]);
        assert_eq!(code, EXIT_OK);
        let report: SolveReport = serde_json::from_str(&fs::read_to_string(out.join("solve.json")).unwrap()).unwrap();
        assert_eq!(report.status, "optimal");
        assert!(report.verification.is_empty());
        let m = RunManifest::read(&out.join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.inputs.len(), 4);
        assert_eq!(m.outputs.len(), 3);
    }
}
