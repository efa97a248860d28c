use serde::{Deserialize, Serialize};

use super::{Gradients, NeuralError, ParameterSet, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators shaped like a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &ParameterSet, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.shapes().into_iter().map(|n| vec![0.0; n]).collect();
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut ParameterSet, grads: &Gradients) -> Result<()> {
        let shapes = params.shapes();
        let grad_shapes: Vec<usize> = grads.0.iter().map(Vec::len).collect();
        if shapes != grad_shapes
            || shapes.len() != self.m.len()
            || self.m.iter().map(Vec::len).ne(shapes.iter().copied())
        {
            return Err(NeuralError::ShapeMismatch(
                "gradients, parameters and optimizer state differ".into(),
            ));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        for (((p, g), m), v) in params
            .tensors_mut()
            .into_iter()
            .zip(&grads.0)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::{Activation, Network, NetworkSpec, OutputKind};
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net(seed: u64) -> Network {
        let spec = NetworkSpec {
            input_size: 3,
            hidden: vec![4],
            activation: Activation::Tanh,
            output: OutputKind::Linear,
            output_size: 2,
            noisy: false,
            noise_sigma: 0.0,
            dueling_subnet_size: 0,
        };
        Network::new(spec, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut n = net(0);
        let before = n.copy_parameters();
        let mut adam = AdamState::new(n.parameters(), AdamConfig::new(0.01));
        let g = Gradients::zeros_like(n.parameters());
        adam.step(n.parameters_mut(), &g).unwrap();
        assert_eq!(n.parameters(), &before);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn constant_gradient_steps_approach_learning_rate() {
        // with g constant, m_hat = g and v_hat = g^2 exactly after bias
        // correction, so each update is lr * g / (|g| + eps) -> lr * sign(g)
        let mut n = net(1);
        let lr = 0.003;
        let mut adam = AdamState::new(n.parameters(), AdamConfig::new(lr));
        let mut g = Gradients::zeros_like(n.parameters());
        for (t, tensor) in g.0.iter_mut().enumerate() {
            for (i, x) in tensor.iter_mut().enumerate() {
                *x = if (t + i) % 2 == 0 { 0.7 } else { -2.5 };
            }
        }
        for _ in 0..200 {
            let before = n.copy_parameters();
            adam.step(n.parameters_mut(), &g).unwrap();
            for ((a, b), gt) in before.tensors().iter().zip(n.parameters().tensors()).zip(&g.0) {
                for i in 0..a.len() {
                    let delta = a[i] - b[i];
                    let want = lr * gt[i].signum();
                    assert!((delta - want).abs() < lr * 1e-6, "{delta} vs {want}");
                }
            }
        }
    }

    #[test]
    fn deterministic_and_shape_checked() {
        let run = || {
            let mut n = net(2);
            let mut adam = AdamState::new(n.parameters(), AdamConfig::new(0.01));
            let mut g = Gradients::zeros_like(n.parameters());
            g.0[0][0] = 0.3;
            for _ in 0..5 {
                adam.step(n.parameters_mut(), &g).unwrap();
            }
            n.copy_parameters()
        };
        assert_eq!(run(), run());
        let mut n = net(3);
        let mut adam = AdamState::new(n.parameters(), AdamConfig::new(0.01));
        let bad = Gradients(vec![vec![0.0; 3]]);
        assert!(adam.step(n.parameters_mut(), &bad).is_err());
    }
}
