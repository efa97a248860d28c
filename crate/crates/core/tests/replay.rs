use drecsim::environment::Observation;
use drecsim::replay::{Experience, PrioritizedBuffer, ReplayConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exp(i: usize) -> Experience {
    let mut s = Observation::zeros();
    s.0[0] = i as f64;
    Experience {
        state: s,
        action: i,
        reward: 0.1 * i as f64,
        done: false,
        next_state: s,
    }
}

fn frozen_buffer(alpha: f64, tds: &[f64]) -> PrioritizedBuffer {
    let mut b = PrioritizedBuffer::new(ReplayConfig {
        capacity: tds.len(),
        burn_in: 0,
        batch_size: 1000,
        alpha,
        beta: 0.4,
        beta_annealing: 0.0,
        min_priority: 0.01,
    })
    .unwrap();
    for i in 0..tds.len() {
        b.store(exp(i));
    }
    let idx: Vec<usize> = (0..tds.len()).collect();
    b.update_priorities(&idx, tds).unwrap();
    b
}

#[test]
fn sampling_frequencies_follow_priority_law() {
    let tds = [0.5, 1.0, 2.0, 0.25, 4.0];
    for alpha in [0.0, 0.4, 1.0] {
        let mut b = frozen_buffer(alpha, &tds);
        let pri: Vec<f64> = tds.iter().map(|d: &f64| (d.abs() + 0.01).powf(alpha)).collect();
        let total: f64 = pri.iter().sum();
        let law: Vec<f64> = pri.iter().map(|p| p / total).collect();
        for (a, b) in b.probabilities().iter().zip(&law) {
            assert!((a - b).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n / 1000 {
            for i in b.sample(&mut rng).unwrap().indices {
                counts[i] += 1;
            }
        }
        for (c, p) in counts.iter().zip(&law) {
            let mean = n as f64 * p;
            let sd = (n as f64 * p * (1.0 - p)).sqrt();
            assert!(
                (*c as f64 - mean).abs() <= 5.0 * sd,
                "alpha {alpha}: {counts:?} vs {law:?}"
            );
        }
        if alpha == 0.0 {
            assert!(b.probabilities().iter().all(|&p| p == 0.2));
        }
    }
}

#[test]
fn is_weights_match_formula() {
    let tds = [0.5, 1.0, 2.0, 0.25, 4.0];
    let mut b = frozen_buffer(0.6, &tds);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let beta = b.beta();
    let batch = b.sample(&mut rng).unwrap();
    let probs = b.probabilities();
    let raw: Vec<f64> = batch
        .indices
        .iter()
        .map(|&i| (1.0 / 1000.0 / probs[i]).powf(beta))
        .collect();
    let max = raw.iter().copied().fold(0.0, f64::max);
    for (w, r) in batch.weights.iter().zip(&raw) {
        assert!((w - r / max).abs() < 1e-12);
    }
    assert!(batch.weights.contains(&1.0));
}

proptest! {
    #[test]
    fn weights_bounded_and_beta_anneals(
        tds in prop::collection::vec(-3.0f64..3.0, 2..30),
        draws in 1usize..80,
    ) {
        let mut b = PrioritizedBuffer::new(ReplayConfig {
            capacity: 64,
            burn_in: 1,
            batch_size: 8,
            ..Default::default()
        })
        .unwrap();
        for i in 0..tds.len() {
            b.store(exp(i));
        }
        let idx: Vec<usize> = (0..tds.len()).collect();
        b.update_priorities(&idx, &tds).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(draws as u64);
        let mut last = b.beta();
        for _ in 0..draws {
            let batch = b.sample(&mut rng).unwrap();
            prop_assert!(batch.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
            prop_assert!(b.beta() >= last && b.beta() <= 1.0);
            last = b.beta();
        }
        let total: f64 = b.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn new_items_get_max_priority(tds in prop::collection::vec(0.0f64..5.0, 1..20)) {
        let mut b = PrioritizedBuffer::new(ReplayConfig { capacity: 40, burn_in: 0, ..Default::default() }).unwrap();
        for i in 0..tds.len() {
            b.store(exp(i));
        }
        let idx: Vec<usize> = (0..tds.len()).collect();
        b.update_priorities(&idx, &tds).unwrap();
        let max = b.priorities().iter().copied().fold(0.0, f64::max);
        b.store(exp(99));
        prop_assert_eq!(*b.priorities().last().unwrap(), max);
    }
}
