//! Rewires a two-bubble example and reports unmet demand and excess load.

use corn::model::{HcpRoster, LocationKind, LocationRoster, Visit, VisitGraph};
use corn::optimizer::BubbleClustering;
use corn::rewiring::{compute_costs, rewire, RewireOptions};
use corn::spatial::DistanceMatrix;

const H: u64 = 3600;

fn main() -> anyhow::Result<()> {
    let mut hcps = HcpRoster::new();
    hcps.add_group("1");
    for p in ["p1", "p2", "p3", "p5", "p6"] {
        hcps.insert(p.into(), Some("1"));
    }
    hcps.insert("p4".into(), None);
    let mut locs = LocationRoster::new();
    for l in ["l1", "l2", "l3", "l4"] {
        locs.insert(l.into(), LocationKind::Substitutable);
    }
    let v = |p: &str, l: &str, s: u64, e: u64| Visit::new(p, l, s * H, e * H);
    let visits = vec![
        v("p1", "l1", 0, 2),
        v("p2", "l2", 0, 2),
        v("p5", "l3", 0, 2),
        v("p6", "l4", 0, 2),
        v("p3", "l4", 1, 3),
        v("p2", "l3", 3, 4),
        v("p3", "l4", 3, 4),
        v("p4", "l1", 2, 3),
        v("p4", "l3", 4, 5),
    ];
    let g = VisitGraph::new(hcps, locs, visits)?;
    let c = BubbleClustering {
        k: 2,
        location_bubble: [("l1", 0), ("l2", 0), ("l3", 1), ("l4", 1)].into_iter().map(|(l, b)| (l.into(), b)).collect(),
        hcp_bubble: [("p1", 0), ("p2", 0), ("p3", 0), ("p5", 1), ("p6", 1)]
            .into_iter()
            .map(|(p, b)| (p.into(), b))
            .collect(),
        objective_value: None,
    };
    let r = rewire(&g, &c, 0, RewireOptions::default())?;
    let dist = DistanceMatrix::from_fn(g.locations.ids().cloned().collect(), |a, b| if a == b { 0.0 } else { 1.0 })?;
    let costs = compute_costs(&g, &r.graph, &c, &dist);
    for d in &r.dropped {
        println!("dropped {} at {} [{}h, {}h)", d.visit.hcp, d.visit.location, d.visit.start / H, d.visit.end / H);
    }
    println!("unmet demand {:?}", costs.unmet_demand);
    println!("excess load {:?}", costs.excess_load);
    Ok(())
}
