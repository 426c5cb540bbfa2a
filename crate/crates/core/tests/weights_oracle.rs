mod common;

use corn::weights::{directed_weight, mc_directed_weight, weight_matrix, HcpScope};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn closed_form_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let g = common::random_weight_log(&mut rng, 60);
        for z in [0.05, 0.3, 0.9] {
            for (a, b) in [("a", "b"), ("b", "a"), ("a", "c"), ("c", "b")] {
                let got = directed_weight(&g, &a.into(), &b.into(), z, 60).unwrap();
                let want = common::enumerate_directed_weight(&g, a, b, z);
                assert!((got - want).abs() <= 1e-12, "{a}->{b} z={z}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn monte_carlo_agrees_within_four_standard_errors() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for i in 0..3 {
        let g = common::random_weight_log(&mut rng, 60);
        let exact = directed_weight(&g, &"a".into(), &"b".into(), 0.4, 60).unwrap();
        let samples = 100_000;
        let mc = mc_directed_weight(&g, &"a".into(), &"b".into(), 0.4, 60, samples, i).unwrap();
        let se = (exact * (1.0 - exact) / samples as f64).sqrt().max(1e-9);
        assert!((mc - exact).abs() <= 4.0 * se, "mc {mc} exact {exact}");
    }
}

#[test]
fn matrix_is_the_mean_of_both_directions() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let g = common::random_weight_log(&mut rng, 60);
    let w = weight_matrix(&g, 0.2, 60, HcpScope::All).unwrap();
    let ab = directed_weight(&g, &"a".into(), &"b".into(), 0.2, 60).unwrap();
    let ba = directed_weight(&g, &"b".into(), &"a".into(), 0.2, 60).unwrap();
    assert!((w.get(&"a".into(), &"b".into()) - 0.5 * (ab + ba)).abs() < 1e-15);
}
