mod common;

use corn::rewiring::{compute_costs, rewire, RewireOptions};
use corn::spatial::DistanceMatrix;

#[test]
fn unmet_demand_and_excess_load_match_the_worked_example() {
    let (g, c) = common::two_bubble_example();
    let dist = DistanceMatrix::from_fn(g.locations.ids().cloned().collect(), |_, _| 1.0).unwrap();
    for seed in 0..20 {
        let r = rewire(&g, &c, seed, RewireOptions::default()).unwrap();
        let costs = compute_costs(&g, &r.graph, &c, &dist);
        for (l, u) in &costs.unmet_demand {
            assert_eq!(*u, if l.as_str() == "l4" { 2.0 } else { 0.0 }, "seed {seed} at {l}");
        }
        for (p, e) in &costs.excess_load {
            let want = if matches!(p.as_str(), "p5" | "p6") { 1.0 } else { 0.0 };
            assert_eq!(*e, want, "seed {seed} for {p}");
        }
        // Every group visit lands inside its room's bubble.
        for v in r.graph.visits() {
            if let Some(b) = c.hcp_bubble.get(&v.hcp) {
                assert_eq!(c.location_bubble[&v.location], *b);
            }
        }
        assert!(r.graph.validate().is_empty());
    }
}
