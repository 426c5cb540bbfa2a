//! Post-hoc check of a clustering against the problem constraints,
//! computed from the raw inputs.

use super::{BubbleClustering, ClusteringInputs, FEAS_TOL};

/// Human-readable descriptions of every violated constraint; empty when the
/// clustering is feasible and its recorded objective matches the cut.
pub fn verify_clustering(c: &BubbleClustering, inp: &ClusteringInputs<'_>) -> Vec<String> {
    let mut out = Vec::new();
    let k = inp.k;
    if c.k != k {
        out.push(format!("clustering has K={} but problem has K={k}", c.k));
    }
    let ls = inp.locations.substitutable();
    for l in &ls {
        match c.location_bubble.get(l) {
            None => out.push(format!("location {l} is not assigned")),
            Some(&b) if b >= k => out.push(format!("location {l} assigned to bubble {b} >= K")),
            Some(_) => {}
        }
    }
    for l in c.location_bubble.keys() {
        if !inp.locations.is_substitutable(l) {
            out.push(format!("location {l} is not substitutable but was clustered"));
        }
    }
    let cap = ls.len().div_ceil(k.max(1));
    for b in 0..k {
        let members: Vec<_> = ls.iter().filter(|l| c.location_bubble.get(*l) == Some(&b)).collect();
        if members.is_empty() {
            out.push(format!("bubble {b} has no locations"));
        }
        if members.len() > cap {
            out.push(format!("bubble {b} has {} locations, cap {cap}", members.len()));
        }
        if let Some(ds) = inp.d_star.finite() {
            let diam = inp.dist.diameter(members.iter().copied());
            if diam > ds + FEAS_TOL {
                out.push(format!("bubble {b} diameter {diam} exceeds {ds}"));
            }
        }
    }
    for p in inp.hcps.non_substitutable() {
        if c.hcp_bubble.contains_key(&p) {
            out.push(format!("HCP {p} is non-substitutable but was clustered"));
        }
    }
    for g in 0..inp.hcps.group_count() {
        let members = inp.hcps.group_members(g);
        let gcap = members.len().div_ceil(k.max(1));
        for p in &members {
            match c.hcp_bubble.get(p) {
                None => out.push(format!("HCP {p} is not assigned")),
                Some(&b) if b >= k => out.push(format!("HCP {p} assigned to bubble {b} >= K")),
                Some(_) => {}
            }
        }
        for b in 0..k {
            let in_b: Vec<_> = members.iter().filter(|p| c.hcp_bubble.get(*p) == Some(&b)).collect();
            let label = &inp.hcps.group_labels()[g];
            if in_b.is_empty() {
                out.push(format!("bubble {b} has no HCP of group {label}"));
            }
            if in_b.len() > gcap {
                out.push(format!("bubble {b} has {} HCPs of group {label}, cap {gcap}", in_b.len()));
            }
            if let Some(ys) = inp.y_star.finite() {
                let demand: f64 = ls
                    .iter()
                    .filter(|l| c.location_bubble.get(*l) == Some(&b))
                    .map(|l| inp.loads.group_demand(l, g))
                    .sum();
                let supply: f64 = in_b.iter().map(|p| inp.loads.load(p)).sum();
                if demand - supply > ys + FEAS_TOL {
                    out.push(format!(
                        "bubble {b} group {label}: demand {demand} exceeds load {supply} by more than {ys}"
                    ));
                }
            }
        }
    }
    if let Some(obj) = c.objective_value {
        let cut = c.cut_weight(inp.weights);
        if (cut - obj).abs() > 1e-9 * cut.abs().max(1.0) {
            out.push(format!("recorded objective {obj} differs from cut weight {cut}"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HcpRoster, LoadDemandTable, LocationRoster};
    use crate::optimizer::tests::four_room_inputs;
    use crate::optimizer::{build_model, ClusteringInputs, Limit};
    use crate::spatial::DistanceMatrix;
    use crate::weights::WeightMatrix;
    use crate::optimizer::{solve, SolveOptions};

    fn inputs<'a>(parts: &'a (WeightMatrix, DistanceMatrix, LoadDemandTable, HcpRoster, LocationRoster), d_star: Limit) -> ClusteringInputs<'a> {
        ClusteringInputs {
            weights: &parts.0,
            dist: &parts.1,
            loads: &parts.2,
            hcps: &parts.3,
            locations: &parts.4,
            k: 2,
            d_star,
            y_star: Limit::Unbounded,
        }
    }

    #[test]
    fn optimal_solution_verifies() {
        let parts = four_room_inputs();
        let inp = inputs(&parts, Limit::Unbounded);
        let out = solve(&build_model(&inp).unwrap(), &SolveOptions::default());
        assert_eq!(verify_clustering(out.clustering().unwrap(), &inp), Vec::<String>::new());
    }

    #[test]
    fn violations_are_named() {
        let parts = four_room_inputs();
        let inp = inputs(&parts, Limit::Finite(5.0));
        let c = BubbleClustering {
            k: 2,
            location_bubble: [("l1", 0), ("l2", 0), ("l3", 0), ("l4", 1)].into_iter().map(|(l, b)| (l.into(), b)).collect(),
            hcp_bubble: Default::default(),
            objective_value: None,
        };
        let v = verify_clustering(&c, &inp);
        assert!(v.iter().any(|s| s.contains("cap 2")), "{v:?}");
        assert!(v.iter().any(|s| s.contains("diameter")), "{v:?}");
    }
}
