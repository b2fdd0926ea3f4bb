use bsde_lab::integrability::{psi, remark_sandwich, young_relative_gap};
use bsde_lab::ladder::truncate_value;
use bsde_lab::stochastic::{PathEnsemble, TimeGrid};
use proptest::prelude::*;

proptest! {
    #[test]
    fn young_gap_is_nonnegative(lambda in 0.1f64..10.0, x in -20.0f64..20.0, ln_y in -30.0f64..18.42) {
        let gap = young_relative_gap(lambda, x, ln_y.exp()).unwrap();
        prop_assert!(gap >= -1e-12, "gap {gap}");
    }

    #[test]
    fn young_gap_at_zero(lambda in 0.1f64..10.0, x in -20.0f64..20.0) {
        prop_assert!(young_relative_gap(lambda, x, 0.0).unwrap() >= 0.0);
    }

    #[test]
    fn sandwich_is_ordered(lambda in 0.1f64..10.0, eps in 0.05f64..1.0, p in 1.0f64..4.0, x in 0.0f64..1e6) {
        let s = remark_sandwich(lambda, eps, p, x).unwrap();
        prop_assert!(s.lower <= s.psi * (1.0 + 1e-14));
        prop_assert!(s.psi <= s.upper * (1.0 + 1e-12));
    }

    #[test]
    fn psi_is_increasing(lambda in 0.1f64..10.0, x in 0.0f64..1e6, dx in 1e-6f64..1e3) {
        prop_assert!(psi(lambda, x).unwrap() < psi(lambda, x + dx).unwrap());
    }

    #[test]
    fn psi_decreases_in_lambda(l1 in 0.1f64..10.0, dl in 0.01f64..5.0, x in 0.01f64..1e6) {
        prop_assert!(psi(l1 + dl, x).unwrap() <= psi(l1, x).unwrap());
    }

    #[test]
    fn truncation_is_monotone(x in -1e6f64..1e6, n in 0.1f64..1e3, p in 0.1f64..1e3, dn in 0.0f64..1e3) {
        prop_assert!(truncate_value(x, n, p) <= truncate_value(x, n + dn, p));
        prop_assert!(truncate_value(x, n, p + dn) <= truncate_value(x, n, p));
        prop_assert!(truncate_value(x, n, p) >= -p && truncate_value(x, n, p) <= n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ensembles_are_reproducible(seed in any::<u64>(), steps in 1usize..8, dim in 1usize..3) {
        let grid = TimeGrid::uniform(1.0f64, steps).unwrap();
        let a = PathEnsemble::sample(&grid, dim, 257, seed).unwrap();
        let b = PathEnsemble::sample(&grid, dim, 257, seed).unwrap();
        prop_assert_eq!(a.increments(), b.increments());
    }
}

#[test]
fn single_precision_is_supported() {
    let grid = TimeGrid::uniform(1.0f32, 4).unwrap();
    let paths = PathEnsemble::sample(&grid, 1, 4096, 3).unwrap();
    let w = paths.terminal_positions();
    let mean = w.iter().sum::<f32>() / w.len() as f32;
    assert!(mean.abs() < 0.1);
    assert!(young_relative_gap(2.0f32, 1.0, 3.0).unwrap() >= 0.0);
}
