mod common;

use corn::model::compute_loads_demands;
use corn::optimizer::{
    brute_force_solve, build_model, closed_form_counts, count_vars_constraints, solve, verify_clustering,
    ClusteringInputs, SolveOptions,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn exact_solver_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (mut optimal, mut infeasible) = (0, 0);
    for i in 0..40 {
        let inst = common::random_ilp_instance(&mut rng);
        let loads = compute_loads_demands(&inst.graph);
        let inp = ClusteringInputs {
            weights: &inst.weights,
            dist: &inst.dist,
            loads: &loads,
            hcps: &inst.graph.hcps,
            locations: &inst.graph.locations,
            k: inst.k,
            d_star: inst.d_star,
            y_star: inst.y_star,
        };
        let model = build_model(&inp).unwrap();
        let got = solve(&model, &SolveOptions::default());
        let want = brute_force_solve(&inp).unwrap();
        assert_eq!(got.status(), want.status(), "instance {i}");
        match (got.objective(), want.objective()) {
            (Some(a), Some(b)) => {
                assert!((a - b).abs() <= 1e-9, "instance {i}: {a} vs {b}");
                assert!(verify_clustering(got.clustering().unwrap(), &inp).is_empty(), "instance {i}");
                optimal += 1;
            }
            (None, None) => infeasible += 1,
            other => panic!("instance {i}: {other:?}"),
        }
        let counts = count_vars_constraints(&model);
        assert_eq!(counts, closed_form_counts(&model.shape()));
        assert_eq!(
            counts,
            common::expected_counts(&inst.weights, &inst.dist, &inst.graph.hcps, inst.k, inst.d_star, inst.y_star)
        );
    }
    assert!(optimal > 0 && infeasible > 0, "{optimal} optimal, {infeasible} infeasible");
}
