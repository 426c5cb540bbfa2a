//! Closed-form room-to-room transmission weights checked against Monte Carlo.

use corn::model::{HcpRoster, LocationKind, LocationRoster, Visit, VisitGraph};
use corn::weights::{directed_weight, mc_directed_weight, weight_matrix, HcpScope};

fn main() -> anyhow::Result<()> {
    let mut hcps = HcpRoster::new();
    hcps.add_group("nurse");
    hcps.insert("p".into(), Some("nurse"));
    let mut locs = LocationRoster::new();
    for l in ["a", "b"] {
        locs.insert(l.into(), LocationKind::Substitutable);
    }
    // One unit at `a`, then two at `b`.
    let visits = vec![Visit::new("p", "a", 0, 60), Visit::new("p", "b", 60, 120), Visit::new("p", "b", 120, 180)];
    let g = VisitGraph::new(hcps, locs, visits)?;
    let z = 0.5;
    let exact = directed_weight(&g, &"a".into(), &"b".into(), z, 60)?;
    let mc = mc_directed_weight(&g, &"a".into(), &"b".into(), z, 60, 200_000, 1)?;
    println!("a -> b: exact {exact:.4}, monte carlo {mc:.4}");
    println!("b -> a: exact {:.4}", directed_weight(&g, &"b".into(), &"a".into(), z, 60)?);
    let w = weight_matrix(&g, z, 60, HcpScope::All)?;
    println!("symmetric weight {:.4}", w.get(&"a".into(), &"b".into()));
    Ok(())
}
