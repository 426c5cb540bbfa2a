//! Generates the 30-room synthetic facility and prints its shape.

use corn::model::compute_loads_demands;
use corn::spatial::shortest_path_metric;
use corn::synth::{generate_facility, generate_mobility, FacilitySpec};

fn main() -> anyhow::Result<()> {
    let spec = FacilitySpec::ltcf_30();
    let facility = generate_facility(&spec)?;
    let graph = generate_mobility(&facility, &spec)?;
    let dist = shortest_path_metric(&facility.spatial)?;
    let loads = compute_loads_demands(&graph);

    println!(
        "{} rooms, {} HCPs ({} non-substitutable), {} visits over {} days",
        graph.locations.len(),
        graph.hcps.len(),
        graph.hcps.non_substitutable().len(),
        graph.visits().len(),
        graph.day_count()
    );
    let rooms = graph.locations.substitutable();
    println!("corridor span {:.1} m", dist.diameter(&rooms));
    for p in graph.hcps.ids().take(4) {
        println!("{p}: {:.2} h/day", loads.load(p));
    }
    Ok(())
}
