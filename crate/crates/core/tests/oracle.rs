use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tmpnn::systems::{self, SYSTEM_NAMES};
use tmpnn::{
    ode_to_map, ode_to_map_with_order, reference_trajectory, FlowConfig, Network, TaylorMap,
};

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn free_fall_map_matches_closed_form_trajectory() {
    let (m, g, k) = (100.0, 9.8, 0.392);
    let map = ode_to_map_with_order(&systems::free_fall(m, g, k).unwrap(), 8, &FlowConfig::new(0.1)).unwrap();
    let net = Network::shared_chain(map, 50).unwrap();
    let states = net.forward(&[0.0]).unwrap();
    for (i, s) in states.iter().enumerate() {
        let exact = systems::free_fall_analytic((i + 1) as f64 * 0.1, m, g, k).unwrap();
        assert!((s[0] - exact).abs() < 1e-9, "step {i}: {} vs {exact}", s[0]);
    }
}

#[test]
fn raising_the_order_shrinks_one_step_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for name in ["free_fall", "lotka_volterra", "pendulum"] {
        let ode = systems::build_system(name, &[]).unwrap().ode;
        let x: Vec<f64> = (0..ode.dim()).map(|_| rng.random_range(-0.3..0.3)).collect();
        let exact = reference_trajectory(&ode, &x, 0.05, 1).unwrap();
        let err = |k| {
            let map = ode_to_map_with_order(&ode, k, &FlowConfig::new(0.05)).unwrap();
            max_diff(&map.apply(&x).unwrap(), &exact[1])
        };
        let (e2, e4, e6) = (err(2), err(4), err(6));
        assert!(e4 < e2 && e6 <= e4.max(1e-13), "{name}: {e2:e} {e4:e} {e6:e}");
    }
}

#[test]
fn two_half_steps_compose_to_one_step() {
    let ode = systems::pendulum(9.8, 0.3).unwrap();
    let full = ode_to_map_with_order(&ode, 4, &FlowConfig::new(0.1)).unwrap();
    let half = ode_to_map_with_order(&ode, 4, &FlowConfig::new(0.05)).unwrap();
    let composed = TaylorMap::compose(&half, &half, 4).unwrap();
    assert!((full.weights() - composed.weights()).amax() < 1e-9);
}

#[test]
fn zero_system_map_is_identity() {
    let ode = systems::build_system("zero", &[]).unwrap().ode;
    let map = ode_to_map(&ode, &FlowConfig::new(0.3)).unwrap();
    assert_eq!(map.weights(), TaylorMap::identity(ode.dim(), ode.order()).weights());
}

#[test]
fn every_builtin_system_has_a_finite_map() {
    for name in SYSTEM_NAMES {
        let ode = systems::build_system(name, &[]).unwrap().ode;
        let map = ode_to_map(&ode, &FlowConfig::new(0.05)).unwrap();
        assert!(map.weights().iter().all(|v| v.is_finite()), "{name}");
    }
}
