//! Dueling double-DQN with prioritized replay and noisy layers.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, read_checkpoint_header, top_k_indices, write_checkpoint_header, Agent, AgentError, AgentKind, Result,
};
use crate::environment::{Observation, OBS_DIM};
use crate::neural::{Activation, AdamConfig, AdamState, Network, NetworkSpec, OutputKind};
use crate::replay::{Experience, PrioritizedBuffer, ReplayConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DqnConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    /// Train the main network every this many post-burn-in steps.
    pub train_frequency: usize,
    /// Copy main weights to the target network every this many steps.
    pub sync_frequency: usize,
    pub hidden: Vec<usize>,
    pub subnet_size: usize,
    pub noise_sigma: f64,
    /// Bootstrap with `argmax_a Q(S, a)` on the current state instead of the
    /// next state.
    pub literal_algorithm1: bool,
    pub replay: ReplayConfig,
}

impl Default for DqnConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 0.001,
            train_frequency: 3,
            sync_frequency: 300,
            hidden: vec![512, 512],
            subnet_size: 128,
            noise_sigma: 0.017,
            literal_algorithm1: false,
            replay: ReplayConfig::default(),
        }
    }
}

impl DqnConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(AgentError::InvalidConfig("dqn gamma must be in (0,1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(AgentError::InvalidConfig("dqn learning_rate must be > 0".into()));
        }
        if self.train_frequency == 0 || self.sync_frequency < self.train_frequency {
            return Err(AgentError::InvalidConfig(
                "need train_frequency >= 1 and sync_frequency >= train_frequency".into(),
            ));
        }
        self.replay.validate()?;
        Ok(())
    }

    pub fn network_spec(&self, n_actions: usize) -> NetworkSpec {
        NetworkSpec {
            input_size: OBS_DIM,
            hidden: self.hidden.clone(),
            activation: Activation::Relu,
            output: OutputKind::Dueling,
            output_size: n_actions,
            noisy: true,
            noise_sigma: self.noise_sigma,
            dueling_subnet_size: self.subnet_size,
        }
    }
}

pub struct DqnAgent {
    config: DqnConfig,
    main: Network,
    target: Network,
    adam: AdamState,
    buffer: PrioritizedBuffer,
    rng: ChaCha8Rng,
    steps: u64,
    n_actions: usize,
}

impl DqnAgent {
    pub fn new(config: DqnConfig, n_actions: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let main = Network::new(config.network_spec(n_actions), &mut rng)?;
        Self::assemble(config, main, rng)
    }

    /// Builds an agent around an existing main network (any spec with
    /// `OBS_DIM` inputs).
    pub fn with_network(config: DqnConfig, main: Network, seed: u64) -> Result<Self> {
        config.validate()?;
        Self::assemble(config, main, ChaCha8Rng::seed_from_u64(seed))
    }

    fn assemble(config: DqnConfig, main: Network, rng: ChaCha8Rng) -> Result<Self> {
        if main.spec().input_size != OBS_DIM {
            return Err(AgentError::InvalidConfig(format!("network must take {OBS_DIM} inputs")));
        }
        let adam = AdamState::new(main.parameters(), AdamConfig::new(config.learning_rate));
        let buffer = PrioritizedBuffer::new(config.replay)?;
        Ok(Self {
            n_actions: main.spec().output_size,
            target: main.clone(),
            main,
            adam,
            buffer,
            rng,
            steps: 0,
            config,
        })
    }

    pub fn config(&self) -> &DqnConfig {
        &self.config
    }

    pub fn main(&self) -> &Network {
        &self.main
    }

    pub fn target(&self) -> &Network {
        &self.target
    }

    pub fn buffer(&self) -> &PrioritizedBuffer {
        &self.buffer
    }

    /// Post-burn-in step counter.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn sync_target(&mut self) {
        self.target
            .load_parameters(self.main.parameters())
            .expect("main and target share a spec");
    }

    fn resample(net: &mut Network, rng: &mut ChaCha8Rng) {
        if net.spec().noisy {
            net.sample_noise(rng).expect("noisy network");
        }
    }

    /// Target-network Q-values under fresh noise.
    pub fn q_values(&mut self, state: &Observation) -> Vec<f64> {
        Self::resample(&mut self.target, &mut self.rng);
        self.target.forward(state.as_slice()).expect("observation width")
    }

    /// One prioritized double-DQN update; returns the weighted loss.
    pub fn learn(&mut self) -> Result<f64> {
        let batch = self.buffer.sample(&mut self.rng)?;
        Self::resample(&mut self.main, &mut self.rng);
        Self::resample(&mut self.target, &mut self.rng);
        let b = batch.experiences.len();
        let n = self.n_actions;

        let mut states = Vec::with_capacity(b * OBS_DIM);
        let mut next_states = Vec::with_capacity(b * OBS_DIM);
        for e in &batch.experiences {
            states.extend_from_slice(e.state.as_slice());
            next_states.extend_from_slice(e.next_state.as_slice());
        }
        let selector_input = if self.config.literal_algorithm1 {
            &states
        } else {
            &next_states
        };
        let q_select = self.main.forward_batch(selector_input, b)?;
        let q_next = self.target.forward_batch(&next_states, b)?;
        let q = self.main.forward_cached(&states, b)?;

        let mut deltas = Vec::with_capacity(b);
        let mut grad = vec![0.0; b * n];
        let mut loss = 0.0;
        for (i, e) in batch.experiences.iter().enumerate() {
            let row = i * n..(i + 1) * n;
            let best = argmax(&q_select[row.clone()]);
            let bootstrap = if e.done { 0.0 } else { q_next[row.start + best] };
            let target = e.reward + self.config.gamma * bootstrap;
            let delta = q[row.start + e.action] - target;
            let w = batch.weights[i];
            loss += w * delta * delta;
            grad[row.start + e.action] = 2.0 * w * delta / b as f64;
            deltas.push(delta);
        }
        loss /= b as f64;
        let grads = self.main.backward(&grad)?;
        self.adam.step(self.main.parameters_mut(), &grads)?;
        self.buffer.update_priorities(&batch.indices, &deltas)?;
        Ok(loss)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// Checkpoint: config header followed by the main network's parameters.
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        write_checkpoint_header(out, AgentKind::Dqn, &self.config)?;
        self.main.write_to(out)?;
        Ok(())
    }

    /// Restores a checkpoint; the target network starts synced and the
    /// replay buffer empty.
    pub fn read_from<R: Read>(input: &mut R, seed: u64) -> Result<Self> {
        let config: DqnConfig = read_checkpoint_header(input, AgentKind::Dqn)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let main = Network::read_from(input, &mut rng)?;
        if main.spec().output != OutputKind::Dueling {
            return Err(AgentError::BadCheckpoint("dqn checkpoint without dueling head".into()));
        }
        Self::with_network(config, main, seed)
    }
}

impl Agent for DqnAgent {
    fn kind(&self) -> AgentKind {
        AgentKind::Dqn
    }

    /// Uniform random until the buffer is past burn-in, then greedy on the
    /// target network with freshly sampled noise.
    fn act(&mut self, state: &Observation) -> usize {
        if !self.buffer.ready() {
            return self.rng.random_range(0..self.n_actions);
        }
        argmax(&self.q_values(state))
    }

    fn top_k(&mut self, state: &Observation, k: usize) -> Result<Vec<usize>> {
        if k > self.n_actions {
            return Err(AgentError::KTooLarge { k, n: self.n_actions });
        }
        if !self.buffer.ready() {
            return Ok(sample(&mut self.rng, self.n_actions, k).into_vec());
        }
        let q = self.q_values(state);
        top_k_indices(&q, k)
    }

    fn observe(&mut self, exp: Experience) -> Result<Option<f64>> {
        let mut loss = None;
        if self.buffer.ready() {
            self.steps += 1;
            if self.steps.is_multiple_of(self.config.train_frequency as u64) {
                loss = Some(self.learn()?);
            }
            if self.steps.is_multiple_of(self.config.sync_frequency as u64) {
                self.sync_target();
            }
        }
        self.buffer.store(exp);
        Ok(loss)
    }

    fn end_episode(&mut self) -> Result<Option<f64>> {
        Ok(None)
    }
}
