use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{gemm, Op};

/// Learnable noise scales plus the most recent standard-normal draws.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyParams {
    pub sigma_weight: Vec<f64>,
    pub sigma_bias: Vec<f64>,
    pub eps_weight: Vec<f64>,
    pub eps_bias: Vec<f64>,
}

/// Affine layer `y = W x + b`, `W` stored `outputs x inputs` row-major.
/// A noisy layer uses `(W + σ_W ∘ ε_W) x + (b + σ_b ∘ ε_b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub noise: Option<NoisyParams>,
}

impl DenseLayer {
    /// Uniform `±1/sqrt(fan_in)` weights, zero biases, σ set to `sigma` when noisy.
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, noisy: Option<f64>, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        let weight = (0..inputs * outputs)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        let noise = noisy.map(|sigma| NoisyParams {
            sigma_weight: vec![sigma; inputs * outputs],
            sigma_bias: vec![sigma; outputs],
            eps_weight: vec![0.0; inputs * outputs],
            eps_bias: vec![0.0; outputs],
        });
        Self {
            inputs,
            outputs,
            weight,
            bias: vec![0.0; outputs],
            noise,
        }
    }

    pub fn resample<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Some(n) = self.noise.as_mut() {
            for e in n.eps_weight.iter_mut().chain(n.eps_bias.iter_mut()) {
                *e = rng.sample(StandardNormal);
            }
        }
    }

    pub fn effective_weight(&self) -> std::borrow::Cow<'_, [f64]> {
        match &self.noise {
            None => std::borrow::Cow::Borrowed(&self.weight),
            Some(n) => std::borrow::Cow::Owned(
                self.weight
                    .iter()
                    .zip(&n.sigma_weight)
                    .zip(&n.eps_weight)
                    .map(|((w, s), e)| w + s * e)
                    .collect(),
            ),
        }
    }

    pub fn effective_bias(&self) -> std::borrow::Cow<'_, [f64]> {
        match &self.noise {
            None => std::borrow::Cow::Borrowed(&self.bias),
            Some(n) => std::borrow::Cow::Owned(
                self.bias
                    .iter()
                    .zip(&n.sigma_bias)
                    .zip(&n.eps_bias)
                    .map(|((b, s), e)| b + s * e)
                    .collect(),
            ),
        }
    }

    /// `batch x inputs` -> `batch x outputs` pre-activations.
    pub fn forward(&self, x: &[f64], batch: usize) -> Vec<f64> {
        let bias = self.effective_bias();
        let mut z = Vec::with_capacity(batch * self.outputs);
        for _ in 0..batch {
            z.extend_from_slice(&bias);
        }
        let w = self.effective_weight();
        gemm(batch, self.inputs, self.outputs, 1.0, x, Op::N, &w, Op::T, 1.0, &mut z);
        z
    }

    /// Given `dz` (`batch x outputs`) and the layer input, returns this
    /// layer's parameter gradients (weight, bias, then σ's) and the gradient
    /// with respect to the input.
    pub fn backward(&self, x: &[f64], dz: &[f64], batch: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut dw = vec![0.0; self.outputs * self.inputs];
        gemm(self.outputs, batch, self.inputs, 1.0, dz, Op::T, x, Op::N, 0.0, &mut dw);
        let mut db = vec![0.0; self.outputs];
        for row in dz.chunks_exact(self.outputs) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        let w = self.effective_weight();
        let mut dx = vec![0.0; batch * self.inputs];
        gemm(
            batch,
            self.outputs,
            self.inputs,
            1.0,
            dz,
            Op::N,
            &w,
            Op::N,
            0.0,
            &mut dx,
        );

        let noisy_grads = self.noise.as_ref().map(|n| {
            let dsw: Vec<f64> = dw.iter().zip(&n.eps_weight).map(|(g, e)| g * e).collect();
            let dsb: Vec<f64> = db.iter().zip(&n.eps_bias).map(|(g, e)| g * e).collect();
            (dsw, dsb)
        });
        let mut grads = vec![dw, db];
        if let Some((dsw, dsb)) = noisy_grads {
            grads.push(dsw);
            grads.push(dsb);
        }
        (grads, dx)
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = vec![&self.weight, &self.bias];
        if let Some(n) = &self.noise {
            out.push(&n.sigma_weight);
            out.push(&n.sigma_bias);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = vec![&mut self.weight, &mut self.bias];
        if let Some(n) = &mut self.noise {
            out.push(&mut n.sigma_weight);
            out.push(&mut n.sigma_bias);
        }
        out
    }
}
