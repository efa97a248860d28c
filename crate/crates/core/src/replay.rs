//! Prioritized experience replay with importance-sampling weights and
//! linear β annealing.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::Observation;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("buffer holds {size} experiences, needs more than {burn_in}")]
    NotReady { size: usize, burn_in: usize },
    #[error("priority index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("{indices} indices but {errors} td-errors")]
    LengthMismatch { indices: usize, errors: usize },
    #[error("invalid replay config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub done: bool,
    pub next_state: Observation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReplayConfig {
    pub capacity: usize,
    pub burn_in: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    pub beta_annealing: f64,
    pub min_priority: f64,
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self {
            capacity: 10_000,
            burn_in: 1_000,
            batch_size: 32,
            alpha: 0.4,
            beta: 0.4,
            beta_annealing: 0.01,
            min_priority: 0.01,
        }
    }
}

impl ReplayConfig {
    pub fn validate(&self) -> Result<(), ReplayError> {
        if self.capacity == 0 {
            return Err(ReplayError::InvalidConfig("capacity must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(ReplayError::InvalidConfig("batch_size must be >= 1"));
        }
        if self.burn_in >= self.capacity {
            return Err(ReplayError::InvalidConfig("burn_in must be below capacity"));
        }
        if !(self.alpha >= 0.0) {
            return Err(ReplayError::InvalidConfig("alpha must be >= 0"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ReplayError::InvalidConfig("beta must be in (0,1]"));
        }
        if !(self.beta_annealing >= 0.0) {
            return Err(ReplayError::InvalidConfig("beta_annealing must be >= 0"));
        }
        if !(self.min_priority > 0.0) {
            return Err(ReplayError::InvalidConfig("min_priority must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SampledBatch {
    pub experiences: Vec<Experience>,
    pub indices: Vec<usize>,
    /// Importance-sampling weights, max-normalized within the batch.
    pub weights: Vec<f64>,
    /// Sampling probability of each drawn experience.
    pub probabilities: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct PrioritizedBuffer {
    config: ReplayConfig,
    beta: f64,
    storage: Vec<Experience>,
    priorities: Vec<f64>,
    /// Slot the next store overwrites once the ring is full.
    next: usize,
    max_priority_seen: f64,
}

impl PrioritizedBuffer {
    pub fn new(config: ReplayConfig) -> Result<Self, ReplayError> {
        config.validate()?;
        Ok(Self {
            beta: config.beta,
            storage: Vec::with_capacity(config.capacity),
            priorities: Vec::with_capacity(config.capacity),
            next: 0,
            max_priority_seen: 1.0,
            config,
        })
    }

    pub fn config(&self) -> &ReplayConfig {
        &self.config
    }

    pub fn len(&self) -> usize {
        self.storage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.storage.is_empty()
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn priorities(&self) -> &[f64] {
        &self.priorities
    }

    pub fn max_priority_seen(&self) -> f64 {
        self.max_priority_seen
    }

    pub fn get(&self, index: usize) -> Option<&Experience> {
        self.storage.get(index)
    }

    /// Stores with priority `max(P)` (1.0 for an empty buffer), evicting the
    /// oldest experience when full.
    pub fn store(&mut self, exp: Experience) {
        let priority = if self.priorities.is_empty() {
            1.0
        } else {
            self.priorities.iter().copied().fold(f64::MIN, f64::max)
        };
        if self.storage.len() < self.config.capacity {
            self.storage.push(exp);
            self.priorities.push(priority);
        } else {
            self.storage[self.next] = exp;
            self.priorities[self.next] = priority;
        }
        self.next = (self.next + 1) % self.config.capacity;
    }

    /// True once more than `burn_in` experiences are stored.
    pub fn ready(&self) -> bool {
        self.storage.len() > self.config.burn_in
    }

    /// Exact sampling distribution `P^α / ΣP^α` over stored slots.
    pub fn probabilities(&self) -> Vec<f64> {
        let scaled: Vec<f64> = self.priorities.iter().map(|p| p.powf(self.config.alpha)).collect();
        let total: f64 = scaled.iter().sum();
        scaled.into_iter().map(|p| p / total).collect()
    }

    /// Draws `batch_size` slots with replacement, proportionally to `P^α`,
    /// then anneals β.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SampledBatch, ReplayError> {
        if !self.ready() {
            return Err(ReplayError::NotReady {
                size: self.len(),
                burn_in: self.config.burn_in,
            });
        }
        let n = self.config.batch_size;
        let mut cumulative = Vec::with_capacity(self.priorities.len());
        let mut acc = 0.0;
        for p in &self.priorities {
            acc += p.powf(self.config.alpha);
            cumulative.push(acc);
        }
        let total = acc;
        let last = cumulative.len() - 1;

        let mut indices = Vec::with_capacity(n);
        let mut probabilities = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.random::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c <= u).min(last);
            indices.push(idx);
            probabilities.push(self.priorities[idx].powf(self.config.alpha) / total);
        }
        // ((1/N_batch) * (1/P_b))^β, normalized by the batch maximum
        let raw: Vec<f64> = probabilities
            .iter()
            .map(|p| (1.0 / (n as f64 * p)).powf(self.beta))
            .collect();
        let max = raw.iter().copied().fold(f64::MIN, f64::max);
        let weights = raw.into_iter().map(|w| w / max).collect();

        self.beta = (self.beta + self.config.beta_annealing).min(1.0);
        Ok(SampledBatch {
            experiences: indices.iter().map(|&i| self.storage[i].clone()).collect(),
            indices,
            weights,
            probabilities,
        })
    }

    /// Sets `P_i = |δ_i| + ε` for each sampled slot.
    pub fn update_priorities(&mut self, indices: &[usize], td_errors: &[f64]) -> Result<(), ReplayError> {
        if indices.len() != td_errors.len() {
            return Err(ReplayError::LengthMismatch {
                indices: indices.len(),
                errors: td_errors.len(),
            });
        }
        let size = self.len();
        if let Some(&index) = indices.iter().find(|&&i| i >= size) {
            return Err(ReplayError::IndexOutOfRange { index, size });
        }
        for (&i, &delta) in indices.iter().zip(td_errors) {
            let p = delta.abs() + self.config.min_priority;
            self.priorities[i] = p;
            self.max_priority_seen = self.max_priority_seen.max(p);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn exp(tag: usize) -> Experience {
        Experience {
            state: Observation::zeros(),
            action: tag,
            reward: 0.5,
            done: false,
            next_state: Observation::zeros(),
        }
    }

    fn buffer(capacity: usize, burn_in: usize, batch_size: usize, alpha: f64) -> PrioritizedBuffer {
        PrioritizedBuffer::new(ReplayConfig {
            capacity,
            burn_in,
            batch_size,
            alpha,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn first_store_gets_unit_priority() {
        let mut b = buffer(4, 0, 1, 0.4);
        b.store(exp(0));
        assert_eq!(b.priorities(), &[1.0]);
    }

    #[test]
    fn store_uses_current_max_priority() {
        let mut b = buffer(4, 0, 1, 0.4);
        b.store(exp(0));
        b.store(exp(1));
        b.update_priorities(&[0], &[2.99]).unwrap();
        b.store(exp(2));
        assert!((b.priorities()[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn ring_evicts_oldest_first() {
        let mut b = buffer(2, 0, 1, 0.4);
        for i in 0..3 {
            b.store(exp(i));
        }
        assert_eq!(b.len(), 2);
        let actions: Vec<usize> = (0..2).map(|i| b.get(i).unwrap().action).collect();
        assert_eq!(actions, vec![2, 1]);
        b.store(exp(3));
        let actions: Vec<usize> = (0..2).map(|i| b.get(i).unwrap().action).collect();
        assert_eq!(actions, vec![2, 3]);
    }

    #[test]
    fn ready_is_strictly_above_burn_in() {
        let mut b = buffer(10, 3, 1, 0.4);
        for i in 0..3 {
            b.store(exp(i));
        }
        assert!(!b.ready());
        b.store(exp(3));
        assert!(b.ready());
        let mut b = buffer(10, 0, 1, 0.4);
        assert!(!b.ready());
        b.store(exp(0));
        assert!(b.ready());
    }

    #[test]
    fn sample_before_ready_errors() {
        let mut b = buffer(10, 3, 1, 0.4);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            b.sample(&mut rng).unwrap_err(),
            ReplayError::NotReady { size: 0, burn_in: 3 }
        );
    }

    #[test]
    fn alpha_zero_is_uniform() {
        let mut b = buffer(10, 0, 1, 0.0);
        for i in 0..4 {
            b.store(exp(i));
        }
        b.update_priorities(&[0, 1, 2], &[5.0, 0.1, 2.0]).unwrap();
        assert_eq!(b.probabilities(), vec![0.25; 4]);
    }

    #[test]
    fn alpha_one_normalizes_priorities() {
        let mut b = buffer(10, 0, 1, 1.0);
        b.store(exp(0));
        b.store(exp(1));
        b.update_priorities(&[0, 1], &[0.99, 2.99]).unwrap();
        let p = b.probabilities();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn equal_priorities_give_unit_weights_and_beta_anneals() {
        let mut b = PrioritizedBuffer::new(ReplayConfig {
            capacity: 10,
            burn_in: 0,
            batch_size: 8,
            alpha: 0.7,
            beta: 0.95,
            beta_annealing: 0.03,
            min_priority: 0.01,
        })
        .unwrap();
        for i in 0..5 {
            b.store(exp(i));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = b.sample(&mut rng).unwrap();
        assert!(batch.weights.iter().all(|&w| w == 1.0));
        assert!((b.beta() - 0.98).abs() < 1e-12);
        b.sample(&mut rng).unwrap();
        assert_eq!(b.beta(), 1.0);
        b.sample(&mut rng).unwrap();
        assert_eq!(b.beta(), 1.0);
    }

    #[test]
    fn weights_follow_formula() {
        let mut b = PrioritizedBuffer::new(ReplayConfig {
            capacity: 10,
            burn_in: 0,
            batch_size: 4,
            alpha: 1.0,
            beta: 0.5,
            beta_annealing: 0.0,
            min_priority: 0.01,
        })
        .unwrap();
        b.store(exp(0));
        b.store(exp(1));
        b.update_priorities(&[0, 1], &[0.99, 2.99]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let batch = b.sample(&mut rng).unwrap();
        let raw = |p: f64| (1.0 / (4.0 * p)).powf(0.5);
        let max = batch.probabilities.iter().map(|&p| raw(p)).fold(f64::MIN, f64::max);
        for (&w, &p) in batch.weights.iter().zip(&batch.probabilities) {
            assert!((w - raw(p) / max).abs() < 1e-12);
        }
    }

    #[test]
    fn priority_updates() {
        let mut b = buffer(10, 0, 1, 0.4);
        b.store(exp(0));
        b.store(exp(1));
        b.update_priorities(&[0, 1], &[0.0, -0.5]).unwrap();
        assert_eq!(b.priorities()[0], 0.01);
        assert!((b.priorities()[1] - 0.51).abs() < 1e-15);
        assert_eq!(
            b.update_priorities(&[2], &[0.1]).unwrap_err(),
            ReplayError::IndexOutOfRange { index: 2, size: 2 }
        );
        assert!(b.update_priorities(&[0], &[]).is_err());
    }

    #[test]
    fn exact_distribution_after_updates() {
        let mut b = buffer(10, 0, 1, 0.4);
        for i in 0..5 {
            b.store(exp(i));
        }
        let deltas = [0.3, 0.0, 1.7, 0.05, 4.0];
        b.update_priorities(&[0, 1, 2, 3, 4], &deltas).unwrap();
        // brute force: enumerate every slot's P^alpha and normalize
        let pa: Vec<f64> = deltas.iter().map(|d: &f64| (d.abs() + 0.01).powf(0.4)).collect();
        let total: f64 = pa.iter().sum();
        for (got, want) in b.probabilities().iter().zip(pa.iter().map(|p| p / total)) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = |f: fn(&mut ReplayConfig)| {
            let mut c = ReplayConfig::default();
            f(&mut c);
            PrioritizedBuffer::new(c).is_err()
        };
        assert!(bad(|c| c.capacity = 0));
        assert!(bad(|c| c.batch_size = 0));
        assert!(bad(|c| c.beta = 0.0));
        assert!(bad(|c| c.beta = 1.5));
        assert!(bad(|c| c.min_priority = 0.0));
        assert!(bad(|c| c.burn_in = c.capacity));
    }
}
