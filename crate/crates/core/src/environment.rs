//! Episodic recommendation environment over a [`Simulator`].
//!
//! Observation layout (25 values, all in `[0, 1]`):
//!
//! | slots  | content                                     |
//! |--------|---------------------------------------------|
//! | 0..19  | genre bits of the last recommended movie    |
//! | 19     | last simulated rating / 5                   |
//! | 20     | last movie's violence score                 |
//! | 21..25 | encoded user sex, age, occupation, zip code |

use std::collections::HashSet;
use std::sync::Arc;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Sex, UserProfile, GENRE_COUNT};
use crate::simulator::{transition_user, SimUserState, Simulator, MAX_RATING};

pub const OBS_DIM: usize = 25;
const RATING_SLOT: usize = GENRE_COUNT;
const VIOLENCE_SLOT: usize = GENRE_COUNT + 1;
const USER_SLOT: usize = GENRE_COUNT + 2;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("step called before reset")]
    NotReset,
    #[error("movie index {index} out of range (catalog has {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("slate contains movie {0} more than once")]
    DuplicateInSlate(usize),
    #[error("slate has {got} items, expected {expected}")]
    WrongSlateSize { got: usize, expected: usize },
    #[error("invalid environment config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, EnvError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation(pub [f64; OBS_DIM]);

impl Observation {
    pub fn zeros() -> Self {
        Observation([0.0; OBS_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub episode_length: usize,
    pub slate_size: usize,
    pub violence_weight: f64,
    pub drift: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            episode_length: 50,
            slate_size: 1,
            violence_weight: 0.0,
            drift: 0.01,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episode_length == 0 {
            return Err(EnvError::InvalidConfig("episode_length must be >= 1".into()));
        }
        if self.slate_size == 0 {
            return Err(EnvError::InvalidConfig("slate_size must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.violence_weight) {
            return Err(EnvError::InvalidConfig("violence_weight must be in [0,1]".into()));
        }
        if !(self.drift >= 0.0) {
            return Err(EnvError::InvalidConfig("drift must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    /// Movie the user interacted with (the action itself for single steps).
    pub chosen_index: usize,
    /// Simulated rating of the chosen movie, in `[0, 5]`.
    pub rating: f64,
    /// Simulated rating of every slate item, in slate order.
    pub slate_ratings: Vec<f64>,
}

/// Sex M -> 0, F -> 1; age bucket / 56; occupation / 20; zip first digit / 9.
pub fn encode_user(profile: &UserProfile) -> [f64; 4] {
    let sex = match profile.sex {
        Sex::M => 0.0,
        Sex::F => 1.0,
    };
    let zip = profile
        .zip_code
        .chars()
        .next()
        .and_then(|c| c.to_digit(10))
        .map_or(0.0, |d| d as f64 / 9.0);
    [sex, profile.age as f64 / 56.0, profile.occupation as f64 / 20.0, zip]
}

/// Reward mix of interest and (absence of) violence.
pub fn reward(rating: f64, violence: f64, violence_weight: f64) -> f64 {
    (1.0 - violence_weight) * (rating / MAX_RATING) + violence_weight * (1.0 - violence)
}

pub struct Environment {
    sim: Arc<Simulator>,
    config: EnvConfig,
    rng: ChaCha8Rng,
    user: Option<SimUserState>,
    step_count: usize,
    observation: Observation,
}

impl Environment {
    pub fn new(sim: Arc<Simulator>, config: EnvConfig) -> Result<Self> {
        config.validate()?;
        if sim.users().is_empty() {
            return Err(EnvError::InvalidConfig("simulator has no users".into()));
        }
        if config.slate_size > sim.n_movies() {
            return Err(EnvError::InvalidConfig("slate_size exceeds catalog size".into()));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            sim,
            config,
            user: None,
            step_count: 0,
            observation: Observation::zeros(),
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn n_actions(&self) -> usize {
        self.sim.n_movies()
    }

    pub fn simulator(&self) -> &Arc<Simulator> {
        &self.sim
    }

    /// The current simulated user (hidden from agents; exposed for evaluation).
    pub fn current_user(&self) -> Option<&SimUserState> {
        self.user.as_ref()
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn is_done(&self) -> bool {
        self.step_count >= self.config.episode_length
    }

    /// Starts a new episode with a freshly sampled user. Passing a seed
    /// reseeds the environment's generator first.
    pub fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(s) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(s);
        }
        let user = self
            .sim
            .sample_user(&mut self.rng)
            .expect("user pool checked nonempty at construction");
        let mut obs = Observation::zeros();
        obs.0[USER_SLOT..].copy_from_slice(&encode_user(&user.profile));
        self.user = Some(user);
        self.step_count = 0;
        self.observation = obs;
        obs
    }

    fn check_index(&self, index: usize) -> Result<()> {
        let len = self.sim.n_movies();
        if index >= len {
            return Err(EnvError::IndexOutOfRange { index, len });
        }
        Ok(())
    }

    fn check_running(&self) -> Result<&SimUserState> {
        let user = self.user.as_ref().ok_or(EnvError::NotReset)?;
        if self.step_count >= self.config.episode_length {
            return Err(EnvError::EpisodeFinished);
        }
        Ok(user)
    }

    pub fn step(&mut self, action: usize) -> Result<StepResult> {
        let user = self.check_running()?;
        self.check_index(action)?;
        let rating = self.sim.predict(user, action).expect("index checked");
        Ok(self.apply(action, rating, vec![rating]))
    }

    /// Shows a slate; the simulated user picks the item with the highest
    /// simulated rating, ties going to the lowest movie index.
    pub fn step_slate(&mut self, slate: &[usize]) -> Result<StepResult> {
        let user = self.check_running()?;
        if slate.len() != self.config.slate_size {
            return Err(EnvError::WrongSlateSize {
                got: slate.len(),
                expected: self.config.slate_size,
            });
        }
        let mut seen = HashSet::with_capacity(slate.len());
        for &m in slate {
            self.check_index(m)?;
            if !seen.insert(m) {
                return Err(EnvError::DuplicateInSlate(m));
            }
        }
        let ratings: Vec<f64> = slate
            .iter()
            .map(|&m| self.sim.predict(user, m).expect("index checked"))
            .collect();
        let mut best = 0;
        for i in 1..slate.len() {
            if ratings[i] > ratings[best] || (ratings[i] == ratings[best] && slate[i] < slate[best]) {
                best = i;
            }
        }
        Ok(self.apply(slate[best], ratings[best], ratings))
    }

    fn apply(&mut self, chosen: usize, rating: f64, slate_ratings: Vec<f64>) -> StepResult {
        let movie = &self.sim.movies()[chosen];
        let r = reward(rating, movie.violence, self.config.violence_weight);
        let user = self.user.as_ref().expect("checked running");
        self.user = Some(transition_user(user, rating, self.config.drift));

        let obs = &mut self.observation.0;
        for (slot, &bit) in obs[..GENRE_COUNT].iter_mut().zip(&movie.genres) {
            *slot = bit as f64;
        }
        obs[RATING_SLOT] = rating / MAX_RATING;
        obs[VIOLENCE_SLOT] = movie.violence;
        self.step_count += 1;
        StepResult {
            observation: self.observation,
            reward: r,
            done: self.step_count == self.config.episode_length,
            chosen_index: chosen,
            rating,
            slate_ratings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(sex: Sex, age: u8, occupation: u8, zip: &str) -> UserProfile {
        UserProfile {
            user_id: 1,
            sex,
            age,
            occupation,
            zip_code: zip.into(),
        }
    }

    #[test]
    fn encode_user_bounds_and_example() {
        assert_eq!(
            encode_user(&profile(Sex::M, 1, 0, "00000")),
            [0.0, 1.0 / 56.0, 0.0, 0.0]
        );
        assert_eq!(encode_user(&profile(Sex::F, 56, 20, "99999")), [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(
            encode_user(&profile(Sex::F, 25, 10, "48067")),
            [1.0, 25.0 / 56.0, 0.5, 4.0 / 9.0]
        );
        assert_eq!(encode_user(&profile(Sex::F, 25, 10, "T8H1N"))[3], 0.0);
    }

    #[test]
    fn reward_formula() {
        assert_eq!(reward(5.0, 0.9, 0.0), 1.0);
        assert_eq!(reward(0.0, 0.9, 0.0), 0.0);
        assert!((reward(4.0, 0.3, 1.0) - 0.7).abs() < 1e-15);
        assert!((reward(1.0, 0.3, 1.0) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let bad = EnvConfig {
            episode_length: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = EnvConfig {
            slate_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(EnvConfig::default().validate().is_ok());
    }
}
