use rand::seq::index::sample;
use rand::Rng;

use super::{Network, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    /// Central-difference step.
    pub step: f64,
    pub rel_tol: f64,
    /// Differences below this are accepted regardless of magnitude; covers
    /// round-off of the finite difference on near-zero gradients.
    pub abs_tol: f64,
    /// Coordinates probed per tensor (all of them when the tensor is smaller).
    pub coords_per_tensor: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            rel_tol: 1e-4,
            abs_tol: 1e-8,
            coords_per_tensor: 16,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates whose perturbation flipped a ReLU gate.
    pub skipped: usize,
    pub failures: usize,
    /// Over coordinates whose gradient exceeds the absolute tolerance.
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }

    pub fn merge(&mut self, other: &GradCheckReport) {
        self.checked += other.checked;
        self.skipped += other.skipped;
        self.failures += other.failures;
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
    }
}

/// Compares backpropagated gradients of `loss` against central finite
/// differences on a random subset of coordinates of every tensor.
///
/// `loss` maps the network output (`batch x output_size`) to a scalar and
/// its gradient with respect to that output.
pub fn gradient_check<R, L>(
    net: &mut Network,
    input: &[f64],
    batch: usize,
    loss: L,
    config: &GradCheckConfig,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    R: Rng + ?Sized,
    L: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let out = net.forward_cached(input, batch)?;
    let (_, dout) = loss(&out);
    let analytic = net.backward(&dout)?;
    let gates = net.relu_gates(input, batch);

    let mut report = GradCheckReport::default();
    let n_tensors = analytic.0.len();
    for t in 0..n_tensors {
        let len = analytic.0[t].len();
        let picks: Vec<usize> = if len <= config.coords_per_tensor {
            (0..len).collect()
        } else {
            sample(rng, len, config.coords_per_tensor).into_vec()
        };
        for i in picks {
            let original = net.parameters().tensors()[t][i];
            let mut eval = |value: f64| -> Result<(f64, bool)> {
                net.parameters_mut().tensors_mut()[t][i] = value;
                let y = net.forward_batch(input, batch)?;
                let same_gates = net.relu_gates(input, batch) == gates;
                Ok((loss(&y).0, same_gates))
            };
            let (plus, gates_plus) = eval(original + config.step)?;
            let (minus, gates_minus) = eval(original - config.step)?;
            net.parameters_mut().tensors_mut()[t][i] = original;
            if !(gates_plus && gates_minus) {
                report.skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * config.step);
            let a = analytic.0[t][i];
            let diff = (a - numeric).abs();
            let scale = a.abs().max(numeric.abs());
            let rel = if scale > 0.0 { diff / scale } else { 0.0 };
            report.checked += 1;
            if diff > config.abs_tol && rel > config.rel_tol {
                report.failures += 1;
            }
            if scale > config.abs_tol {
                report.max_rel_error = report.max_rel_error.max(rel);
            }
        }
    }
    Ok(report)
}
