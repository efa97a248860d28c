use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::agents::{ActorCriticConfig, AgentKind, DqnConfig, ReinforceConfig};
use crate::environment::EnvConfig;
use crate::simulator::NmfOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    /// Directory holding `ratings.dat`, `users.dat` and `movies.dat`.
    pub dir: PathBuf,
    pub violence_csv: Option<PathBuf>,
    /// Factorization file written by `factorize` and read by every
    /// training command. Defaults to `<out>/factorization.bin`.
    pub factorization: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub kind: Option<AgentKind>,
    pub dqn: DqnConfig,
    pub reinforce: ReinforceConfig,
    pub actor_critic: ActorCriticConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub episodes: usize,
    pub seed: u64,
    /// Runs per candidate value in a sweep.
    pub runs: usize,
    pub window: usize,
    /// Dotted config key, e.g. `agent.reinforce.gamma`.
    pub sweep_parameter: Option<String>,
    pub sweep_values: Vec<toml::Value>,
    pub benchmark_agents: Vec<AgentKind>,
    /// Seeds per agent kind; kinds not listed use `default_seeds`.
    pub seeds: BTreeMap<AgentKind, usize>,
    pub default_seeds: usize,
    pub slate_size: usize,
    pub slate_agents: Vec<AgentKind>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            episodes: 500,
            seed: 0,
            runs: 3,
            window: crate::metrics::MOVING_WINDOW,
            sweep_parameter: None,
            sweep_values: Vec::new(),
            benchmark_agents: vec![AgentKind::Dqn, AgentKind::Reinforce, AgentKind::ActorCritic],
            seeds: BTreeMap::new(),
            default_seeds: 5,
            slate_size: 10,
            slate_agents: vec![AgentKind::Dqn],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentSection {
    pub fn seeds_for(&self, kind: AgentKind) -> usize {
        self.seeds.get(&kind).copied().unwrap_or(self.default_seeds)
    }
}

/// The whole experiment description, one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub dataset: DatasetSection,
    pub factorization: NmfOptions,
    pub environment: EnvConfig,
    pub agent: AgentSection,
    pub experiment: ExperimentSection,
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Reads a config file; relative dataset paths resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() && !p.as_os_str().is_empty() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.dir);
        if let Some(p) = self.dataset.violence_csv.as_mut() {
            fix(p);
        }
        if let Some(p) = self.dataset.factorization.as_mut() {
            fix(p);
        }
        fix(&mut self.experiment.output_dir);
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        value
            .try_into()
            .map_err(|e: toml::de::Error| HarnessError::Config(e.to_string()))
    }

    /// Copy of this config with the dotted `key` replaced by `value`. The key
    /// must already exist (every field is serialized with its default).
    pub fn with_override(&self, key: &str, value: &toml::Value) -> Result<Self> {
        let mut root = self.to_value()?;
        set_path(&mut root, key, value.clone())?;
        Self::from_value(root)
    }

    pub fn factorization_path(&self) -> PathBuf {
        self.dataset
            .factorization
            .clone()
            .unwrap_or_else(|| self.experiment.output_dir.join("factorization.bin"))
    }

    pub fn validate(&self) -> Result<()> {
        self.environment.validate()?;
        self.agent.dqn.validate()?;
        if self.experiment.episodes == 0 {
            return Err(HarnessError::Config("experiment.episodes must be >= 1".into()));
        }
        if self.experiment.window == 0 {
            return Err(HarnessError::Config("experiment.window must be >= 1".into()));
        }
        Ok(())
    }
}

/// Replaces the value at a dotted path. Integers written into float fields
/// are widened so `0` and `0.0` both work on the command line.
pub fn set_path(root: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| HarnessError::Config(format!("`{key}`: `{part}` is not inside a table")))?;
        let slot = table
            .get_mut(*part)
            .ok_or_else(|| HarnessError::Config(format!("unknown config key `{key}`")))?;
        if i + 1 == parts.len() {
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(n)) => toml::Value::Float(n as f64),
                (_, v) => v,
            };
            return Ok(());
        }
        node = slot;
    }
    Err(HarnessError::Config("empty config key".into()))
}
