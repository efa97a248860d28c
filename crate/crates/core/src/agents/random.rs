use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Agent, AgentError, AgentKind, Result};
use crate::environment::Observation;
use crate::replay::Experience;

/// Uniformly random recommendations; the baseline every agent is compared to.
pub struct RandomAgent {
    n_actions: usize,
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(n_actions: usize, seed: u64) -> Self {
        assert!(n_actions > 0, "empty action space");
        Self {
            n_actions,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Random
    }

    fn act(&mut self, _state: &Observation) -> usize {
        self.rng.random_range(0..self.n_actions)
    }

    fn top_k(&mut self, _state: &Observation, k: usize) -> Result<Vec<usize>> {
        if k > self.n_actions {
            return Err(AgentError::KTooLarge { k, n: self.n_actions });
        }
        Ok(sample(&mut self.rng, self.n_actions, k).into_vec())
    }

    fn observe(&mut self, _exp: Experience) -> Result<Option<f64>> {
        Ok(None)
    }

    fn end_episode(&mut self) -> Result<Option<f64>> {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slates_are_distinct_and_bounded() {
        let mut a = RandomAgent::new(20, 1);
        let obs = Observation::zeros();
        let mut s = a.top_k(&obs, 20).unwrap();
        s.sort_unstable();
        assert_eq!(s, (0..20).collect::<Vec<_>>());
        assert!(a.top_k(&obs, 21).is_err());
        assert!((0..100).all(|_| a.act(&obs) < 20));
    }
}
