use proptest::prelude::*;

use aoi_core::channel::{expected_age, simulate_frame};
use aoi_core::game::{best_response, best_response_residual, utility, utility_gradient};
use aoi_core::learning::{expected_drift, learning_update, subgradient};
use aoi_core::model::{b_factor, derive_params, success_probability};
use aoi_core::stream::FrameStreams;
use aoi_core::welfare::{system_gradient, system_utility};
use aoi_core::{FrameObservation, GameConfig, NodeParams};

fn params() -> impl Strategy<Value = NodeParams> {
    (0.1f64..10.0, 0.005f64..0.495).prop_map(|(c, pg)| derive_params(c, pg).unwrap())
}

fn profile(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..0.999, 1..max_len)
}

proptest! {
    #[test]
    fn update_stays_in_action_set(p in 0.0f64..=1.0, u in 0.0f64..=1.0, k in 0.0f64..=1.0, floor in 0.001f64..0.5) {
        // A subgradient never exceeds 1 - p: the cost term is at most 1 and
        // the age term is nonnegative.
        let p = p.max(floor);
        let v = -5.0 + u * (6.0 - p);
        let next = learning_update(p, v, k, floor);
        prop_assert!(next >= floor);
        prop_assert!(next <= 1.0);
    }

    #[test]
    fn b_factor_at_least_age_weight(probs in profile(12), rho2 in 0.0f64..3.0) {
        let b = b_factor(&probs, 0, rho2).unwrap();
        prop_assert!(b >= rho2.exp() * (1.0 - 1e-12));
        prop_assert!(b >= 1.0);
    }

    #[test]
    fn success_probability_is_a_probability(probs in profile(12), node in 0usize..12) {
        let node = node % probs.len();
        let nu = success_probability(&probs, node).unwrap();
        prop_assert!((0.0..=1.0).contains(&nu));
        prop_assert!(nu <= probs[node] + 1e-15);
    }

    #[test]
    fn frame_statistics_are_consistent(probs in prop::collection::vec(0.0f64..=1.0, 1..6), seed in any::<u64>()) {
        let config = GameConfig::homogeneous(probs.len(), 2.0, 0.05).unwrap();
        let obs = simulate_frame(&probs, &config.nodes, 300, FrameStreams::new(seed, 1)).unwrap();
        let total: u64 = obs.iter().map(|o| o.successes).sum();
        prop_assert!(total <= 300);
        for o in &obs {
            prop_assert!(o.successes <= o.transmissions);
            prop_assert!((o.avg_cost - 2.0 * o.transmissions as f64 / 300.0).abs() < 1e-12);
            prop_assert!(o.avg_age >= 0.0 && o.avg_age <= 150.5);
        }
    }

    #[test]
    fn gradient_matches_difference_quotient(p in 0.05f64..0.95, params in params(), b in 1.0f64..50.0) {
        let h = 1e-5;
        let numeric = (utility(p + h, params.alpha, b) - utility(p - h, params.alpha, b)) / (2.0 * h);
        let analytic = utility_gradient(p, params.alpha, b);
        prop_assert!((numeric - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
    }

    #[test]
    fn best_response_solves_first_order_condition(params in params(), others in prop::collection::vec(0.0f64..0.999, 0..20)) {
        let br = best_response(&others, &params).unwrap();
        prop_assert!(br >= params.p_min && br < 1.0);
        let mut profile = vec![br];
        profile.extend(&others);
        prop_assert!(best_response_residual(&profile, 0, &params) <= 1e-10);
    }

    #[test]
    fn mean_subgradient_is_expected_drift(probs in prop::collection::vec(0.05f64..0.95, 1..5)) {
        // Feeding the exact large-frame statistics reproduces the drift.
        let config = GameConfig::homogeneous(probs.len(), 1.0, 0.05).unwrap();
        let params = &config.nodes[0];
        let obs = FrameObservation {
            avg_cost: params.cost_per_transmission * probs[0],
            avg_age: expected_age(&probs, 0).unwrap(),
            successes: 0,
            transmissions: 0,
        };
        let v = subgradient(&obs, probs[0], params);
        let drift = expected_drift(&probs, 0, params).unwrap();
        prop_assert!((v - drift).abs() < 1e-12);
    }

    #[test]
    fn system_gradient_matches_difference_quotient(probs in prop::collection::vec(0.06f64..0.95, 1..6), j in 0usize..6) {
        let config = GameConfig::homogeneous(probs.len(), 1.0, 0.05).unwrap();
        let j = j % probs.len();
        let h = 1e-5;
        let at = |x: f64| {
            let mut q = probs.clone();
            q[j] = x;
            system_utility(&q, &config.nodes).unwrap()
        };
        let numeric = (at(probs[j] + h) - at(probs[j] - h)) / (2.0 * h);
        let analytic = system_gradient(&probs, j, &config.nodes).unwrap();
        prop_assert!((numeric - analytic).abs() <= 1e-6 * analytic.abs().max(1.0));
    }
}
