use proptest::prelude::*;

use dynident::solver::{integrate, TimeGrid};
use dynident::systems::{catalog, eval_vector_field, sample_parameters, OdeSystem};

fn with_basis() -> Vec<&'static OdeSystem> {
    catalog().iter().filter(|s| s.is_linear_in_theta()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn field_equals_basis_expansion(pick in 0usize..64, seed in any::<u64>(), xs in prop::collection::vec(-3.0f64..3.0, 4)) {
        let systems = with_basis();
        let sys = systems[pick % systems.len()];
        let theta = sample_parameters(sys, 1, seed).unwrap().remove(0).theta;
        let x = &xs[..sys.state_dim];
        let f = eval_vector_field(sys, &theta, x).unwrap();
        let phi = sys.eval_basis(x).unwrap();
        for (k, fk) in f.iter().enumerate() {
            let expanded: f64 = theta.iter().zip(&phi).map(|(t, p)| t * p[k]).sum();
            prop_assert!((fk - expanded).abs() <= 1e-12 * (1.0 + fk.abs()), "{}: {fk} vs {expanded}", sys.id);
        }
    }

    #[test]
    fn sampling_is_a_pure_function(seed in any::<u64>(), n in 1usize..20) {
        for sys in catalog() {
            let a = sample_parameters(sys, n, seed).unwrap();
            prop_assert_eq!(&a, &sample_parameters(sys, n, seed).unwrap());
            prop_assert!(a.iter().all(|d| sys.param_box.contains(&d.theta)));
        }
    }
}

#[test]
fn catalog_covers_the_listed_rows() {
    let ids: Vec<&str> = catalog().iter().map(|s| s.id.as_str()).collect();
    for id in ["ode2", "ode3", "ode5", "ode6", "ode24", "ode25", "ode27", "ode28", "ode31", "ode50", "ode56", "ode63", "cartpole"] {
        assert!(ids.contains(&id), "{id} missing");
    }
    assert!(catalog().iter().any(|s| s.chaotic));
}

// Necessary condition only: distinct parameters must give distinguishable trajectories.
#[test]
fn distinct_parameters_give_distinct_trajectories() {
    for sys in catalog() {
        let grid = TimeGrid::uniform(0.0, sys.t_max, sys.grid_points).unwrap();
        let draws = sample_parameters(sys, 40, 99).unwrap();
        for pair in draws.chunks(2) {
            let (a, b) = (&pair[0].theta, &pair[1].theta);
            assert_ne!(a, b);
            let ta = integrate(sys, a, &sys.initial_state, &grid).unwrap();
            let tb = integrate(sys, b, &sys.initial_state, &grid).unwrap();
            let sup = ta.states().iter().zip(tb.states()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(sup > 1e-6, "{}: {a:?} and {b:?} are indistinguishable ({sup})", sys.id);
        }
    }
}
