use nalgebra::DMatrix;
use proptest::prelude::*;

use dynident::solver::{dct_truncate, estimate_derivatives, idct_expand, integrate, TimeGrid};
use dynident::systems::{catalog, eval_vector_field, lookup};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncate_then_expand_is_a_projection(
        t_len in 4usize..40,
        d in 1usize..4,
        keep in 0.05f64..1.0,
        seed in prop::collection::vec(-10.0f64..10.0, 160),
    ) {
        let x = DMatrix::from_fn(t_len, d, |i, j| seed[(i * d + j) % seed.len()] + (i as f64).sin());
        let once = idct_expand(&dct_truncate(&x, keep).unwrap(), t_len).unwrap();
        let twice = idct_expand(&dct_truncate(&once, keep).unwrap(), t_len).unwrap();
        let scale = 1.0 + x.abs().max();
        prop_assert!((once - twice).abs().max() <= 1e-12 * scale);
    }
}

#[test]
fn finite_differences_track_the_field() {
    for id in ["ode2", "ode24", "ode25", "ode27", "ode31"] {
        let sys = lookup(id).unwrap();
        let theta = &sys.canonical_theta;
        let mut errs = Vec::new();
        for t_len in [200, 400] {
            let grid = TimeGrid::uniform(0.0, sys.t_max, t_len).unwrap();
            let tr = integrate(sys, theta, &sys.initial_state, &grid).unwrap();
            let est = estimate_derivatives(&tr).unwrap();
            let mut worst = 0.0f64;
            for t in 0..t_len {
                let f = eval_vector_field(sys, theta, tr.state(t)).unwrap();
                for k in 0..sys.state_dim {
                    worst = worst.max((est[(t, k)] - f[k]).abs() / (1.0 + f[k].abs()));
                }
            }
            errs.push(worst);
        }
        // Second order: doubling T cuts the error by about four.
        assert!(errs[0] < 1e-2, "{id}: {errs:?}");
        assert!(errs[1] < errs[0] / 3.0, "{id}: {errs:?}");
    }
}

#[test]
fn every_catalog_system_integrates_at_its_canonical_point() {
    for sys in catalog() {
        let grid = TimeGrid::uniform(0.0, sys.t_max, sys.grid_points).unwrap();
        let tr = integrate(sys, &sys.canonical_theta, &sys.initial_state, &grid).unwrap();
        assert!(tr.states().iter().all(|v| v.is_finite()), "{}", sys.id);
        assert_eq!(tr.derivs().unwrap().len(), tr.states().len());
    }
}
