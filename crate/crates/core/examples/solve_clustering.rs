//! Solves a small bubble clustering exactly and checks it against brute force.

use corn::model::{compute_loads_demands, HcpRoster, LocationKind, LocationRoster, VisitGraph};
use corn::optimizer::{
    brute_force_solve, build_model, count_vars_constraints, solve, verify_clustering, ClusteringInputs, Limit,
    SolveOptions,
};
use corn::spatial::DistanceMatrix;
use corn::weights::WeightMatrix;

fn main() -> anyhow::Result<()> {
    let mut hcps = HcpRoster::new();
    hcps.add_group("nurse");
    for p in ["n1", "n2"] {
        hcps.insert(p.into(), Some("nurse"));
    }
    let mut locs = LocationRoster::new();
    let ids = ["l1", "l2", "l3", "l4"];
    for l in ids {
        locs.insert(l.into(), LocationKind::Substitutable);
    }
    let g = VisitGraph::new(hcps, locs, Vec::new())?;
    let mut w = WeightMatrix::new(ids.iter().map(|&l| l.into()).collect(), 0.0);
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            w.set(&(*a).into(), &(*b).into(), 0.01);
        }
    }
    w.set(&"l1".into(), &"l2".into(), 0.9);
    w.set(&"l3".into(), &"l4".into(), 0.8);
    let dist = DistanceMatrix::from_fn(ids.iter().map(|&l| l.into()).collect(), |a, b| if a == b { 0.0 } else { 5.0 })?;
    let loads = compute_loads_demands(&g);
    let inputs = ClusteringInputs {
        weights: &w,
        dist: &dist,
        loads: &loads,
        hcps: &g.hcps,
        locations: &g.locations,
        k: 2,
        d_star: Limit::Unbounded,
        y_star: Limit::Unbounded,
    };
    let model = build_model(&inputs)?;
    println!("model size {:?}", count_vars_constraints(&model));
    let outcome = solve(&model, &SolveOptions::default());
    let c = outcome.clustering().expect("feasible");
    println!("objective {:.4}", c.objective_value.unwrap_or_default());
    for b in 0..c.k {
        println!("bubble {b}: {:?}", c.locations_in(b));
    }
    println!("violations {:?}", verify_clustering(c, &inputs));
    println!("brute force {:?}", brute_force_solve(&inputs)?.objective());
    Ok(())
}
