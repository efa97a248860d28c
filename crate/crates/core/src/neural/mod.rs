//! Small fixed-architecture feed-forward engine: dense and noisy-dense
//! layers, linear/softmax/dueling heads, backpropagation, Adam, and a
//! finite-difference gradient checker. Everything runs in `f64`.

mod adam;
mod gradcheck;
mod layer;
mod network;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheckConfig, GradCheckReport};
pub use layer::{DenseLayer, NoisyParams};
pub use network::{softmax_in_place, Gradients, Network, ParameterSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("network has no noisy layers")]
    NotNoisy,
    #[error("backward called without a cached forward pass")]
    NoCachedForward,
    #[error("invalid network spec: {0}")]
    InvalidSpec(&'static str),
    #[error("bad parameter file: {0}")]
    BadFile(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Linear,
    Softmax,
    /// `Q = V + Adv - mean(Adv)` from separate value and advantage subnets.
    Dueling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub input_size: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub output: OutputKind,
    pub output_size: usize,
    #[serde(default)]
    pub noisy: bool,
    #[serde(default)]
    pub noise_sigma: f64,
    /// Width of the hidden layer in each dueling subnet.
    #[serde(default)]
    pub dueling_subnet_size: usize,
}

impl NetworkSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_size == 0 || self.output_size == 0 {
            return Err(NeuralError::InvalidSpec("input and output sizes must be >= 1"));
        }
        if self.hidden.contains(&0) {
            return Err(NeuralError::InvalidSpec("hidden layer sizes must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(NeuralError::InvalidSpec("noise sigma must be >= 0"));
        }
        if self.output == OutputKind::Dueling && self.dueling_subnet_size == 0 {
            return Err(NeuralError::InvalidSpec("dueling subnet size must be >= 1"));
        }
        Ok(())
    }
}
