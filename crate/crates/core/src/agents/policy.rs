//! Episodic policy-gradient agents: REINFORCE with standardized discounted
//! returns, and Actor-Critic with a state-value critic.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{read_checkpoint_header, top_k_indices, write_checkpoint_header, Agent, AgentError, AgentKind, Result};
use crate::environment::{Observation, OBS_DIM};
use crate::neural::{Activation, AdamConfig, AdamState, Network, NetworkSpec, OutputKind};
use crate::replay::Experience;

const STD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReinforceConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub hidden: Vec<usize>,
}

impl Default for ReinforceConfig {
    fn default() -> Self {
        Self {
            gamma: 0.9,
            learning_rate: 0.001,
            hidden: vec![128, 128],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorCriticConfig {
    pub gamma: f64,
    pub actor_learning_rate: f64,
    pub actor_hidden: Vec<usize>,
    pub critic_learning_rate: f64,
    pub critic_hidden: Vec<usize>,
}

impl Default for ActorCriticConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            actor_learning_rate: 0.001,
            actor_hidden: vec![128, 128],
            critic_learning_rate: 0.0001,
            critic_hidden: vec![128, 64],
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(AgentError::InvalidConfig("gamma must be in [0,1]".into()));
    }
    Ok(())
}

pub fn actor_spec(hidden: &[usize], n_actions: usize) -> NetworkSpec {
    NetworkSpec {
        input_size: OBS_DIM,
        hidden: hidden.to_vec(),
        activation: Activation::Tanh,
        output: OutputKind::Softmax,
        output_size: n_actions,
        noisy: false,
        noise_sigma: 0.0,
        dueling_subnet_size: 0,
    }
}

pub fn critic_spec(hidden: &[usize]) -> NetworkSpec {
    NetworkSpec {
        input_size: OBS_DIM,
        hidden: hidden.to_vec(),
        activation: Activation::Relu,
        output: OutputKind::Linear,
        output_size: 1,
        noisy: false,
        noise_sigma: 0.0,
        dueling_subnet_size: 0,
    }
}

/// Transitions of one episode, in order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    pub transitions: Vec<Experience>,
}

impl EpisodeTrace {
    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn terminal(&self) -> bool {
        self.transitions.last().is_some_and(|e| e.done)
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|e| e.reward).collect()
    }

    fn states(&self) -> Vec<f64> {
        self.transitions.iter().flat_map(|e| e.state.0).collect()
    }

    fn next_states(&self) -> Vec<f64> {
        self.transitions.iter().flat_map(|e| e.next_state.0).collect()
    }
}

/// `G_t = Σ_{k>=t} γ^{k-t} R_k`.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    out
}

/// Subtracts the mean and divides by the (population) standard deviation.
pub fn standardize(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt() + STD_EPS;
    values.iter().map(|v| (v - mean) / sd).collect()
}

/// `δ_t = R_t + γ (1 - done_t) V(s_{t+1}) - V(s_t)` under the given critic.
pub fn actor_critic_td_errors(critic: &Network, trace: &EpisodeTrace, gamma: f64) -> Result<Vec<f64>> {
    if trace.is_empty() {
        return Err(AgentError::EmptyTrace);
    }
    let t = trace.len();
    let v = critic.forward_batch(&trace.states(), t)?;
    let v_next = critic.forward_batch(&trace.next_states(), t)?;
    Ok(trace
        .transitions
        .iter()
        .enumerate()
        .map(|(i, e)| {
            let boot = if e.done { 0.0 } else { v_next[i] };
            e.reward + gamma * boot - v[i]
        })
        .collect())
}

struct Critic {
    net: Network,
    adam: AdamState,
}

/// Softmax policy trained once per episode. With a critic it is the
/// Actor-Critic agent, without one REINFORCE.
pub struct PolicyAgent {
    kind: AgentKind,
    gamma: f64,
    actor: Network,
    actor_adam: AdamState,
    critic: Option<Critic>,
    trace: EpisodeTrace,
    rng: ChaCha8Rng,
    n_actions: usize,
    actor_lr: f64,
    critic_cfg: Option<ActorCriticConfig>,
    reinforce_cfg: Option<ReinforceConfig>,
}

impl PolicyAgent {
    pub fn reinforce(config: ReinforceConfig, n_actions: usize, seed: u64) -> Result<Self> {
        check_gamma(config.gamma)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Network::new(actor_spec(&config.hidden, n_actions), &mut rng)?;
        let mut agent = Self::from_networks(config.gamma, actor, config.learning_rate, None, rng)?;
        agent.reinforce_cfg = Some(config);
        Ok(agent)
    }

    pub fn actor_critic(config: ActorCriticConfig, n_actions: usize, seed: u64) -> Result<Self> {
        check_gamma(config.gamma)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let actor = Network::new(actor_spec(&config.actor_hidden, n_actions), &mut rng)?;
        let critic = Network::new(critic_spec(&config.critic_hidden), &mut rng)?;
        let mut agent = Self::from_networks(
            config.gamma,
            actor,
            config.actor_learning_rate,
            Some((critic, config.critic_learning_rate)),
            rng,
        )?;
        agent.critic_cfg = Some(config);
        Ok(agent)
    }

    /// Assembles an agent from explicit networks. The actor must have a
    /// softmax output; the critic a single linear output.
    pub fn from_networks(
        gamma: f64,
        actor: Network,
        actor_lr: f64,
        critic: Option<(Network, f64)>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        check_gamma(gamma)?;
        if actor.spec().output != OutputKind::Softmax || actor.spec().input_size != OBS_DIM {
            return Err(AgentError::InvalidConfig(
                "actor must be a softmax network over observations".into(),
            ));
        }
        let critic = match critic {
            Some((net, lr)) => {
                let s = net.spec();
                if s.output != OutputKind::Linear || s.output_size != 1 || s.input_size != OBS_DIM {
                    return Err(AgentError::InvalidConfig(
                        "critic must map observations to one value".into(),
                    ));
                }
                Some(Critic {
                    adam: AdamState::new(net.parameters(), AdamConfig::new(lr)),
                    net,
                })
            }
            None => None,
        };
        Ok(Self {
            kind: if critic.is_some() {
                AgentKind::ActorCritic
            } else {
                AgentKind::Reinforce
            },
            gamma,
            actor_adam: AdamState::new(actor.parameters(), AdamConfig::new(actor_lr)),
            n_actions: actor.spec().output_size,
            actor,
            critic,
            trace: EpisodeTrace::default(),
            rng,
            actor_lr,
            critic_cfg: None,
            reinforce_cfg: None,
        })
    }

    pub fn actor(&self) -> &Network {
        &self.actor
    }

    pub fn critic(&self) -> Option<&Network> {
        self.critic.as_ref().map(|c| &c.net)
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn probabilities(&self, state: &Observation) -> Vec<f64> {
        self.actor.forward(state.as_slice()).expect("observation width")
    }

    /// Draws an action from `probs` with the agent's generator.
    fn sample_action(&mut self, probs: &[f64]) -> usize {
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // round-off left u above the final cumulative sum
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }

    /// Applies `-Σ_t weight_t ln π(a_t|s_t)` as one Adam step on the actor
    /// and returns that loss.
    fn policy_step(&mut self, trace: &EpisodeTrace, weights: &[f64]) -> Result<f64> {
        let t = trace.len();
        let n = self.n_actions;
        let probs = self.actor.forward_cached(&trace.states(), t)?;
        let mut grad = vec![0.0; t * n];
        let mut loss = 0.0;
        for (i, (e, &w)) in trace.transitions.iter().zip(weights).enumerate() {
            let p = probs[i * n + e.action].max(f64::MIN_POSITIVE);
            loss -= w * p.ln();
            grad[i * n + e.action] = -w / p;
        }
        let grads = self.actor.backward(&grad)?;
        self.actor_adam.step(self.actor.parameters_mut(), &grads)?;
        Ok(loss)
    }

    /// REINFORCE update on a finished episode.
    pub fn reinforce_learn(&mut self, trace: &EpisodeTrace) -> Result<f64> {
        if trace.is_empty() {
            return Err(AgentError::EmptyTrace);
        }
        let returns = standardize(&discounted_returns(&trace.rewards(), self.gamma));
        self.policy_step(trace, &returns)
    }

    /// Actor-Critic update on a finished episode; returns the critic's
    /// mean squared TD error before the update.
    pub fn actor_critic_learn(&mut self, trace: &EpisodeTrace) -> Result<f64> {
        let critic = self
            .critic
            .as_mut()
            .ok_or_else(|| AgentError::InvalidConfig("agent has no critic".into()))?;
        let deltas = actor_critic_td_errors(&critic.net, trace, self.gamma)?;
        let t = trace.len();
        critic.net.forward_cached(&trace.states(), t)?;
        // d/dV(s_t) of mean(δ_t^2), with V(s_{t+1}) held fixed
        let grad: Vec<f64> = deltas.iter().map(|d| -2.0 * d / t as f64).collect();
        let grads = critic.net.backward(&grad)?;
        critic.adam.step(critic.net.parameters_mut(), &grads)?;
        let critic_loss = deltas.iter().map(|d| d * d).sum::<f64>() / t as f64;
        self.policy_step(trace, &deltas)?;
        Ok(critic_loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Checkpoint: config header, the actor's parameters, then the critic's.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        match self.kind {
            AgentKind::ActorCritic => {
                let cfg = self.critic_cfg.clone().unwrap_or_else(|| ActorCriticConfig {
                    gamma: self.gamma,
                    actor_learning_rate: self.actor_lr,
                    actor_hidden: self.actor.spec().hidden.clone(),
                    critic_learning_rate: self.critic.as_ref().map_or(0.0, |c| c.adam.config.learning_rate),
                    critic_hidden: self.critic.as_ref().map_or(Vec::new(), |c| c.net.spec().hidden.clone()),
                });
                write_checkpoint_header(out, self.kind, &cfg)?;
            }
            _ => {
                let cfg = self.reinforce_cfg.clone().unwrap_or_else(|| ReinforceConfig {
                    gamma: self.gamma,
                    learning_rate: self.actor_lr,
                    hidden: self.actor.spec().hidden.clone(),
                });
                write_checkpoint_header(out, self.kind, &cfg)?;
            }
        }
        self.actor.write_to(&mut *out)?;
        if let Some(c) = &self.critic {
            c.net.write_to(&mut *out)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(input: &mut R, kind: AgentKind, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match kind {
            AgentKind::Reinforce => {
                let cfg: ReinforceConfig = read_checkpoint_header(input, kind)?;
                let actor = Network::read_from(&mut *input, &mut rng)?;
                let mut agent = Self::from_networks(cfg.gamma, actor, cfg.learning_rate, None, rng)?;
                agent.reinforce_cfg = Some(cfg);
                Ok(agent)
            }
            AgentKind::ActorCritic => {
                let cfg: ActorCriticConfig = read_checkpoint_header(input, kind)?;
                let actor = Network::read_from(&mut *input, &mut rng)?;
                let critic = Network::read_from(&mut *input, &mut rng)?;
                let mut agent = Self::from_networks(
                    cfg.gamma,
                    actor,
                    cfg.actor_learning_rate,
                    Some((critic, cfg.critic_learning_rate)),
                    rng,
                )?;
                agent.critic_cfg = Some(cfg);
                Ok(agent)
            }
            other => Err(AgentError::BadCheckpoint(format!("`{other}` is not a policy agent"))),
        }
    }
}

impl Agent for PolicyAgent {
    fn kind(&self) -> AgentKind {
        self.kind
    }

    fn act(&mut self, state: &Observation) -> usize {
        let probs = self.probabilities(state);
        self.sample_action(&probs)
    }

    fn top_k(&mut self, state: &Observation, k: usize) -> Result<Vec<usize>> {
        top_k_indices(&self.probabilities(state), k)
    }

    fn observe(&mut self, exp: Experience) -> Result<Option<f64>> {
        self.trace.transitions.push(exp);
        Ok(None)
    }

    fn end_episode(&mut self) -> Result<Option<f64>> {
        if self.trace.is_empty() {
            return Ok(None);
        }
        let trace = std::mem::take(&mut self.trace);
        let loss = match self.kind {
            AgentKind::ActorCritic => self.actor_critic_learn(&trace)?,
            _ => self.reinforce_learn(&trace)?,
        };
        Ok(Some(loss))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discounted_return_cases() {
        assert_eq!(discounted_returns(&[0.3, 0.7, 0.1], 0.0), vec![0.3, 0.7, 0.1]);
        let g = discounted_returns(&[1.0, 1.0, 1.0], 0.9);
        let want = [2.71, 1.9, 1.0];
        for (a, b) in g.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(discounted_returns(&[], 0.9).is_empty());
    }

    #[test]
    fn standardize_zero_and_moments() {
        assert_eq!(standardize(&[0.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0]);
        let s = standardize(&[1.0, 2.0, 3.0, 6.0]);
        let mean: f64 = s.iter().sum::<f64>() / 4.0;
        let var: f64 = s.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-7);
    }

    #[test]
    fn empty_trace_errors() {
        let mut a = PolicyAgent::reinforce(
            ReinforceConfig {
                hidden: vec![4],
                ..Default::default()
            },
            6,
            0,
        )
        .unwrap();
        assert!(matches!(
            a.reinforce_learn(&EpisodeTrace::default()),
            Err(AgentError::EmptyTrace)
        ));
        assert_eq!(a.end_episode().unwrap(), None);
        let mut ac = PolicyAgent::actor_critic(
            ActorCriticConfig {
                actor_hidden: vec![4],
                critic_hidden: vec![3],
                ..Default::default()
            },
            6,
            0,
        )
        .unwrap();
        assert!(matches!(
            ac.actor_critic_learn(&EpisodeTrace::default()),
            Err(AgentError::EmptyTrace)
        ));
    }

    #[test]
    fn checkpoints_round_trip() {
        let ac = PolicyAgent::actor_critic(
            ActorCriticConfig {
                actor_hidden: vec![4],
                critic_hidden: vec![3],
                ..Default::default()
            },
            6,
            1,
        )
        .unwrap();
        let mut buf = Vec::new();
        ac.write_to(&mut buf).unwrap();
        let back = PolicyAgent::read_from(&mut &buf[..], AgentKind::ActorCritic, 2).unwrap();
        assert_eq!(back.actor().parameters(), ac.actor().parameters());
        assert_eq!(back.critic().unwrap().parameters(), ac.critic().unwrap().parameters());
        assert!(PolicyAgent::read_from(&mut &buf[..], AgentKind::Reinforce, 2).is_err());
    }
}
