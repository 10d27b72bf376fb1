//! TD predictions against a brute-force discounted-return oracle.

use foresight_core::{FeatureVector, GvfLearner};
use proptest::prelude::*;

const LEN: usize = 97;
const GAMMA: f64 = 0.92;

/// Discounted return of every position in a periodic load sequence, summed
/// explicitly term by term. `loads[i]` is the load observed on leaving
/// position `i`.
fn oracle_returns(loads: &[f64], gamma: f64, horizon: usize) -> Vec<f64> {
    let n = loads.len();
    (0..n)
        .map(|i| {
            let mut total = 0.0;
            let mut discount = 1.0;
            for k in 0..=horizon {
                total += discount * loads[(i + k) % n];
                discount *= gamma;
            }
            total
        })
        .collect()
}

fn train_loop(states: &[usize], loads: &[f64], laps: usize) -> GvfLearner {
    let xs: Vec<FeatureVector> = states
        .iter()
        .map(|&s| FeatureVector::from_state_index(s, LEN).unwrap())
        .collect();
    let mut learner = GvfLearner::new(LEN, 0.1, GAMMA).unwrap();
    let n = xs.len();
    for _ in 0..laps {
        for i in 0..n {
            learner.update(&xs[i], loads[i], &xs[(i + 1) % n]).unwrap();
        }
    }
    learner.freeze();
    learner
}

#[test]
fn single_spike_decays_geometrically_backwards() {
    let n = 30;
    let states: Vec<usize> = (0..n).map(|i| i * 3).collect();
    let mut loads = vec![0.0; n];
    loads[n - 1] = 500.0;
    let learner = train_loop(&states, &loads, 3000);
    let expected = oracle_returns(&loads, GAMMA, 400);
    for (i, &s) in states.iter().enumerate() {
        let x = FeatureVector::from_state_index(s, LEN).unwrap();
        let p = learner.predict(&x).unwrap();
        assert!((p - expected[i]).abs() < 1e-3, "state {s}: {p} vs {}", expected[i]);
    }
    // one step further from the spike is worth gamma times as much
    let p = |i: usize| {
        learner
            .predict(&FeatureVector::from_state_index(states[i], LEN).unwrap())
            .unwrap()
    };
    assert!((p(n - 3) / p(n - 2) - GAMMA).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn deterministic_loop_matches_oracle(
        states in proptest::sample::subsequence((0..96).collect::<Vec<usize>>(), 2..60),
        seed_loads in proptest::collection::vec(0.0f64..1024.0, 60),
    ) {
        let loads = &seed_loads[..states.len()];
        let learner = train_loop(&states, loads, 3000);
        let expected = oracle_returns(loads, GAMMA, 400);
        for (i, &s) in states.iter().enumerate() {
            let x = FeatureVector::from_state_index(s, LEN).unwrap();
            let p = learner.predict(&x).unwrap();
            let tol = (1e-4 * expected[i].abs()).max(1e-2);
            prop_assert!((p - expected[i]).abs() <= tol, "state {}: {} vs {}", s, p, expected[i]);
        }
    }

    #[test]
    fn constant_load_predicts_geometric_sum(c in 0.0f64..1024.0, n in 1usize..40) {
        let states: Vec<usize> = (0..n).map(|i| i * 2).collect();
        let loads = vec![c; n];
        let learner = train_loop(&states, &loads, 1500);
        for &s in &states {
            let p = learner.predict(&FeatureVector::from_state_index(s, LEN).unwrap()).unwrap();
            prop_assert!((p - c / (1.0 - GAMMA)).abs() <= 1e-6 * c.max(1.0) + 1e-6);
        }
    }
}
