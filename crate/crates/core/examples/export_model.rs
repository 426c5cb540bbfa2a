//! Writes the clustering program for the synthetic facility in LP and MPS form.

use corn::model::compute_loads_demands;
use corn::optimizer::{build_model, count_vars_constraints, export_model, ClusteringInputs, ExportFormat, Limit};
use corn::spatial::shortest_path_metric;
use corn::synth::{generate_facility, generate_mobility, FacilitySpec};
use corn::weights::{daily_weight_matrix, default_z, HcpScope};

fn main() -> anyhow::Result<()> {
    let spec = FacilitySpec::ltcf_30();
    let f = generate_facility(&spec)?;
    let g = generate_mobility(&f, &spec)?;
    let dist = shortest_path_metric(&f.spatial)?;
    let w = daily_weight_matrix(&g, default_z(2.4e-3, 60), 60, HcpScope::NsOnly)?;
    let loads = compute_loads_demands(&g);
    let model = build_model(&ClusteringInputs {
        weights: &w,
        dist: &dist,
        loads: &loads,
        hcps: &g.hcps,
        locations: &g.locations,
        k: 5,
        d_star: Limit::Finite(15.0),
        y_star: Limit::Finite(0.17),
    })?;
    let (vars, cons) = count_vars_constraints(&model);
    println!("{vars} variables, {cons} constraints");
    let lp = export_model(&model, ExportFormat::Lp);
    let mps = export_model(&model, ExportFormat::Mps);
    for line in lp.lines().filter(|l| !l.starts_with(" obj:")).take(5) {
        println!("{line}");
    }
    println!("... LP {} bytes, MPS {} bytes", lp.len(), mps.len());
    Ok(())
}
