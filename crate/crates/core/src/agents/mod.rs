//! Recommendation policies. Every agent picks single actions, ranks slates,
//! consumes experiences, and gets a hook at the end of each episode.

mod dqn;
mod policy;
mod random;

pub use dqn::{DqnAgent, DqnConfig};
pub use policy::{
    actor_critic_td_errors, discounted_returns, standardize, ActorCriticConfig, EpisodeTrace, PolicyAgent,
    ReinforceConfig,
};
pub use random::RandomAgent;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::Observation;
use crate::neural::NeuralError;
use crate::replay::{Experience, ReplayError};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error("episode trace is empty")]
    EmptyTrace,
    #[error("slate of {k} requested from {n} actions")]
    KTooLarge { k: usize, n: usize },
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, AgentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Random,
    Dqn,
    Reinforce,
    ActorCritic,
}

impl AgentKind {
    pub fn label(self) -> &'static str {
        match self {
            AgentKind::Random => "random",
            AgentKind::Dqn => "dqn",
            AgentKind::Reinforce => "reinforce",
            AgentKind::ActorCritic => "actor_critic",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "random" => Ok(AgentKind::Random),
            "dqn" => Ok(AgentKind::Dqn),
            "reinforce" => Ok(AgentKind::Reinforce),
            "actor_critic" | "actor-critic" => Ok(AgentKind::ActorCritic),
            other => Err(format!("unknown agent kind `{other}`")),
        }
    }
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

pub trait Agent: Send {
    fn kind(&self) -> AgentKind;

    fn act(&mut self, state: &Observation) -> usize;

    /// `k` distinct actions, best first.
    fn top_k(&mut self, state: &Observation, k: usize) -> Result<Vec<usize>>;

    /// Records a transition; returns a training loss when a learning step ran.
    fn observe(&mut self, exp: Experience) -> Result<Option<f64>>;

    /// Called once the episode is over; returns a training loss when a
    /// learning step ran.
    fn end_episode(&mut self) -> Result<Option<f64>>;
}

/// Indices of the `k` largest values, descending, ties to the lower index.
pub fn top_k_indices(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k > values.len() {
        return Err(AgentError::KTooLarge { k, n: values.len() });
    }
    let mut idx: Vec<usize> = (0..values.len()).collect();
    let cmp = |a: &usize, b: &usize| values[*b].total_cmp(&values[*a]).then(a.cmp(b));
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
    }
    idx.truncate(k);
    idx.sort_unstable_by(cmp);
    Ok(idx)
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

const CHECKPOINT_MAGIC: &[u8; 5] = b"DRAG1";

/// Agent checkpoint header: magic, agent kind, then a length-prefixed TOML
/// config. Network parameter blobs (`DRNN1`) follow.
pub(crate) fn write_checkpoint_header<W: Write, C: Serialize>(out: &mut W, kind: AgentKind, config: &C) -> Result<()> {
    let text = toml::to_string(config).map_err(|e| AgentError::BadCheckpoint(e.to_string()))?;
    out.write_all(CHECKPOINT_MAGIC)?;
    let label = kind.label().as_bytes();
    out.write_all(&[label.len() as u8])?;
    out.write_all(label)?;
    out.write_all(&(text.len() as u64).to_le_bytes())?;
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub(crate) fn read_checkpoint_header<R: Read, C: for<'de> Deserialize<'de>>(
    input: &mut R,
    expected: AgentKind,
) -> Result<C> {
    let mut magic = [0u8; 5];
    input.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(AgentError::BadCheckpoint("wrong magic".into()));
    }
    let mut len = [0u8; 1];
    input.read_exact(&mut len)?;
    let mut label = vec![0u8; len[0] as usize];
    input.read_exact(&mut label)?;
    if label != expected.label().as_bytes() {
        return Err(AgentError::BadCheckpoint(format!(
            "checkpoint is for `{}`, expected `{}`",
            String::from_utf8_lossy(&label),
            expected
        )));
    }
    let mut n = [0u8; 8];
    input.read_exact(&mut n)?;
    let n = u64::from_le_bytes(n) as usize;
    if n > 1 << 20 {
        return Err(AgentError::BadCheckpoint("config header too large".into()));
    }
    let mut text = vec![0u8; n];
    input.read_exact(&mut text)?;
    let text = String::from_utf8(text).map_err(|e| AgentError::BadCheckpoint(e.to_string()))?;
    toml::from_str(&text).map_err(|e| AgentError::BadCheckpoint(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn top_k_orders_and_breaks_ties_low() {
        let v = [0.5, 2.0, 2.0, -1.0, 0.5];
        assert_eq!(top_k_indices(&v, 1).unwrap(), vec![1]);
        assert_eq!(top_k_indices(&v, 3).unwrap(), vec![1, 2, 0]);
        assert_eq!(top_k_indices(&v, 5).unwrap(), vec![1, 2, 0, 4, 3]);
        assert!(top_k_indices(&v, 0).unwrap().is_empty());
        assert!(matches!(
            top_k_indices(&v, 6),
            Err(AgentError::KTooLarge { k: 6, n: 5 })
        ));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0]), 0);
    }

    #[test]
    fn kind_parsing() {
        for k in [
            AgentKind::Random,
            AgentKind::Dqn,
            AgentKind::Reinforce,
            AgentKind::ActorCritic,
        ] {
            assert_eq!(k.label().parse::<AgentKind>().unwrap(), k);
        }
        assert!("ppo".parse::<AgentKind>().is_err());
    }
}
