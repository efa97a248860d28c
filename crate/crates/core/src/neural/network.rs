use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use super::layer::DenseLayer;
use super::{Activation, NetworkSpec, NeuralError, OutputKind, Result};

const PARAM_MAGIC: &[u8; 5] = b"DRNN1";

/// Trainable weights of a [`Network`]: a shared trunk and one head (linear
/// and softmax outputs) or two heads (dueling value then advantage).
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet {
    pub trunk: Vec<DenseLayer>,
    pub heads: Vec<Vec<DenseLayer>>,
}

impl ParameterSet {
    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.trunk.iter().chain(self.heads.iter().flatten())
    }

    fn layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.trunk.iter_mut().chain(self.heads.iter_mut().flatten())
    }

    /// Every trainable tensor in canonical order: per layer (trunk first,
    /// then heads) weight, bias and, for noisy layers, σ-weight and σ-bias.
    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers().flat_map(|l| l.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers_mut().flat_map(|l| l.tensors_mut()).collect()
    }

    pub fn shapes(&self) -> Vec<usize> {
        self.tensors().iter().map(|t| t.len()).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.shapes().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }
}

/// Gradients laid out like [`ParameterSet::tensors`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(params: &ParameterSet) -> Self {
        Gradients(params.shapes().into_iter().map(|n| vec![0.0; n]).collect())
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.iter().all(|&g| g == 0.0))
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    input: Vec<f64>,
    pre: Vec<f64>,
    /// Activated output; `None` for the last layer of a head.
    post: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
struct ForwardCache {
    batch: usize,
    trunk: Vec<LayerCache>,
    heads: Vec<Vec<LayerCache>>,
    /// Softmax probabilities (softmax output only).
    probs: Option<Vec<f64>>,
}

/// A network spec, its parameters, and the activations of the last
/// training forward pass.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    params: ParameterSet,
    cache: Option<ForwardCache>,
}

pub fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in row.iter_mut() {
        *x /= sum;
    }
}

impl Network {
    pub fn new<R: Rng + ?Sized>(spec: NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let noisy = spec.noisy.then_some(spec.noise_sigma);
        let mut trunk = Vec::with_capacity(spec.hidden.len());
        let mut width = spec.input_size;
        for &h in &spec.hidden {
            trunk.push(DenseLayer::new(width, h, noisy, rng));
            width = h;
        }
        let heads = match spec.output {
            OutputKind::Linear | OutputKind::Softmax => {
                vec![vec![DenseLayer::new(width, spec.output_size, noisy, rng)]]
            }
            OutputKind::Dueling => {
                let s = spec.dueling_subnet_size;
                vec![
                    vec![DenseLayer::new(width, s, noisy, rng), DenseLayer::new(s, 1, noisy, rng)],
                    vec![
                        DenseLayer::new(width, s, noisy, rng),
                        DenseLayer::new(s, spec.output_size, noisy, rng),
                    ],
                ]
            }
        };
        Ok(Self {
            spec,
            params: ParameterSet { trunk, heads },
            cache: None,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn parameters(&self) -> &ParameterSet {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut ParameterSet {
        self.cache = None;
        &mut self.params
    }

    /// Deep copy of the current parameters.
    pub fn copy_parameters(&self) -> ParameterSet {
        self.params.clone()
    }

    /// Replaces the parameters with a copy of `params` (same architecture).
    pub fn load_parameters(&mut self, params: &ParameterSet) -> Result<()> {
        if params.shapes() != self.params.shapes() {
            return Err(NeuralError::ShapeMismatch(
                "parameter set does not fit this network".into(),
            ));
        }
        self.params.clone_from(params);
        self.cache = None;
        Ok(())
    }

    /// Draws fresh standard-normal noise for every noisy layer.
    pub fn sample_noise<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        if !self.spec.noisy {
            return Err(NeuralError::NotNoisy);
        }
        for layer in self.params.layers_mut() {
            layer.resample(rng);
        }
        Ok(())
    }

    fn check_input(&self, input: &[f64], batch: usize) -> Result<()> {
        if batch == 0 || input.len() != batch * self.spec.input_size {
            return Err(NeuralError::ShapeMismatch(format!(
                "input of length {} for batch {} x {}",
                input.len(),
                batch,
                self.spec.input_size
            )));
        }
        Ok(())
    }

    fn run_layers(
        layers: &[DenseLayer],
        activation: Activation,
        mut x: Vec<f64>,
        batch: usize,
        activate_last: bool,
        record: bool,
    ) -> (Vec<f64>, Vec<LayerCache>) {
        let mut caches = Vec::new();
        for (i, layer) in layers.iter().enumerate() {
            let pre = layer.forward(&x, batch);
            let is_last = i + 1 == layers.len();
            let out = if is_last && !activate_last {
                None
            } else {
                Some(pre.iter().map(|&z| activation.apply(z)).collect::<Vec<f64>>())
            };
            let next = out.clone().unwrap_or_else(|| pre.clone());
            if record {
                caches.push(LayerCache {
                    input: x,
                    pre,
                    post: out,
                });
            }
            x = next;
        }
        (x, caches)
    }

    fn run(&self, input: &[f64], batch: usize, record: bool) -> (Vec<f64>, Option<ForwardCache>) {
        let act = self.spec.activation;
        let (h, trunk) = Self::run_layers(&self.params.trunk, act, input.to_vec(), batch, true, record);
        let n = self.spec.output_size;
        let mut heads = Vec::new();
        let mut probs = None;
        let out = match self.spec.output {
            OutputKind::Linear => {
                let (y, c) = Self::run_layers(&self.params.heads[0], act, h, batch, false, record);
                heads.push(c);
                y
            }
            OutputKind::Softmax => {
                let (mut y, c) = Self::run_layers(&self.params.heads[0], act, h, batch, false, record);
                heads.push(c);
                for row in y.chunks_exact_mut(n) {
                    softmax_in_place(row);
                }
                if record {
                    probs = Some(y.clone());
                }
                y
            }
            OutputKind::Dueling => {
                let (v, cv) = Self::run_layers(&self.params.heads[0], act, h.clone(), batch, false, record);
                let (mut a, ca) = Self::run_layers(&self.params.heads[1], act, h, batch, false, record);
                heads.push(cv);
                heads.push(ca);
                for (row, &value) in a.chunks_exact_mut(n).zip(&v) {
                    let mean = row.iter().sum::<f64>() / n as f64;
                    for q in row.iter_mut() {
                        *q += value - mean;
                    }
                }
                a
            }
        };
        let cache = record.then_some(ForwardCache {
            batch,
            trunk,
            heads,
            probs,
        });
        (out, cache)
    }

    /// Inference on a `batch x input_size` row-major matrix; nothing is cached.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_input(input, batch)?;
        Ok(self.run(input, batch, false).0)
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(input, 1)
    }

    /// Forward pass that keeps the activations for a following [`backward`](Self::backward).
    pub fn forward_cached(&mut self, input: &[f64], batch: usize) -> Result<Vec<f64>> {
        self.check_input(input, batch)?;
        let (out, cache) = self.run(input, batch, true);
        self.cache = cache;
        Ok(out)
    }

    /// Value and advantage streams of a dueling network, for inspection.
    pub fn dueling_streams(&self, input: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.spec.output != OutputKind::Dueling {
            return Err(NeuralError::InvalidSpec("not a dueling network"));
        }
        self.check_input(input, 1)?;
        let act = self.spec.activation;
        let (h, _) = Self::run_layers(&self.params.trunk, act, input.to_vec(), 1, true, false);
        let (v, _) = Self::run_layers(&self.params.heads[0], act, h.clone(), 1, false, false);
        let (a, _) = Self::run_layers(&self.params.heads[1], act, h, 1, false, false);
        Ok((v[0], a))
    }

    /// ReLU gate pattern (`pre > 0`) of every rectified unit for `input`.
    pub(crate) fn relu_gates(&self, input: &[f64], batch: usize) -> Vec<bool> {
        if self.spec.activation != Activation::Relu {
            return Vec::new();
        }
        let (_, cache) = self.run(input, batch, true);
        let cache = cache.expect("recorded");
        cache
            .trunk
            .iter()
            .chain(cache.heads.iter().flatten())
            .filter(|c| c.post.is_some())
            .flat_map(|c| c.pre.iter().map(|&z| z > 0.0))
            .collect()
    }

    fn backprop_layers(
        layers: &[DenseLayer],
        caches: &[LayerCache],
        activation: Activation,
        mut grad: Vec<f64>,
        batch: usize,
    ) -> (Vec<Vec<Vec<f64>>>, Vec<f64>) {
        let mut per_layer = vec![Vec::new(); layers.len()];
        for i in (0..layers.len()).rev() {
            let c = &caches[i];
            if let Some(post) = &c.post {
                for ((g, &z), &a) in grad.iter_mut().zip(&c.pre).zip(post) {
                    *g *= activation.derivative(z, a);
                }
            }
            let (grads, dx) = layers[i].backward(&c.input, &grad, batch);
            per_layer[i] = grads;
            grad = dx;
        }
        (per_layer, grad)
    }

    /// Gradients of a scalar loss with respect to every trainable tensor,
    /// given `dL/d(output)` for the last [`forward_cached`](Self::forward_cached)
    /// pass. Stored noise draws are treated as constants. Consumes the cache.
    pub fn backward(&mut self, output_grad: &[f64]) -> Result<Gradients> {
        let cache = self.cache.take().ok_or(NeuralError::NoCachedForward)?;
        let batch = cache.batch;
        let n = self.spec.output_size;
        if output_grad.len() != batch * n {
            let len = output_grad.len();
            self.cache = Some(cache);
            return Err(NeuralError::ShapeMismatch(format!(
                "output gradient of length {len} for batch {batch} x {n}"
            )));
        }
        let act = self.spec.activation;
        let mut head_grads = Vec::new();
        let mut dh = vec![0.0; cache.trunk.last().map_or(batch * self.spec.input_size, |c| c.pre.len())];
        match self.spec.output {
            OutputKind::Linear => {
                let (g, dx) =
                    Self::backprop_layers(&self.params.heads[0], &cache.heads[0], act, output_grad.to_vec(), batch);
                head_grads.push(g);
                dh = dx;
            }
            OutputKind::Softmax => {
                let probs = cache.probs.as_ref().expect("softmax cache");
                let mut dz = vec![0.0; batch * n];
                for ((dz, p), g) in dz
                    .chunks_exact_mut(n)
                    .zip(probs.chunks_exact(n))
                    .zip(output_grad.chunks_exact(n))
                {
                    let s: f64 = p.iter().zip(g).map(|(p, g)| p * g).sum();
                    for j in 0..n {
                        dz[j] = p[j] * (g[j] - s);
                    }
                }
                let (g, dx) = Self::backprop_layers(&self.params.heads[0], &cache.heads[0], act, dz, batch);
                head_grads.push(g);
                dh = dx;
            }
            OutputKind::Dueling => {
                let mut dv = vec![0.0; batch];
                let mut da = vec![0.0; batch * n];
                for ((dv, da), g) in dv
                    .iter_mut()
                    .zip(da.chunks_exact_mut(n))
                    .zip(output_grad.chunks_exact(n))
                {
                    let s: f64 = g.iter().sum();
                    *dv = s;
                    let mean = s / n as f64;
                    for (a, &gj) in da.iter_mut().zip(g) {
                        *a = gj - mean;
                    }
                }
                let (gv, dxv) = Self::backprop_layers(&self.params.heads[0], &cache.heads[0], act, dv, batch);
                let (ga, dxa) = Self::backprop_layers(&self.params.heads[1], &cache.heads[1], act, da, batch);
                head_grads.push(gv);
                head_grads.push(ga);
                for ((d, a), b) in dh.iter_mut().zip(&dxv).zip(&dxa) {
                    *d = a + b;
                }
            }
        }
        let (trunk_grads, _) = Self::backprop_layers(&self.params.trunk, &cache.trunk, act, dh, batch);
        let tensors = trunk_grads
            .into_iter()
            .chain(head_grads.into_iter().flatten())
            .flatten()
            .collect();
        Ok(Gradients(tensors))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.spec;
        out.write_all(PARAM_MAGIC)?;
        let u = |out: &mut W, v: usize| out.write_all(&(v as u64).to_le_bytes());
        u(&mut out, s.input_size)?;
        u(&mut out, s.hidden.len())?;
        for &h in &s.hidden {
            u(&mut out, h)?;
        }
        let act = match s.activation {
            Activation::Relu => 0u8,
            Activation::Tanh => 1,
        };
        let kind = match s.output {
            OutputKind::Linear => 0u8,
            OutputKind::Softmax => 1,
            OutputKind::Dueling => 2,
        };
        out.write_all(&[act, kind, s.noisy as u8])?;
        u(&mut out, s.output_size)?;
        out.write_all(&s.noise_sigma.to_le_bytes())?;
        u(&mut out, s.dueling_subnet_size)?;
        for t in self.params.tensors() {
            for x in t {
                out.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read, G: Rng + ?Sized>(mut input: R, rng: &mut G) -> Result<Self> {
        let mut magic = [0u8; 5];
        input.read_exact(&mut magic)?;
        if &magic != PARAM_MAGIC {
            return Err(NeuralError::BadFile("wrong magic".into()));
        }
        let read_u = |input: &mut R| -> Result<usize> {
            let mut b = [0u8; 8];
            input.read_exact(&mut b)?;
            usize::try_from(u64::from_le_bytes(b)).map_err(|_| NeuralError::BadFile("size overflow".into()))
        };
        let input_size = read_u(&mut input)?;
        let n_hidden = read_u(&mut input)?;
        if n_hidden > 1024 {
            return Err(NeuralError::BadFile("implausible hidden layer count".into()));
        }
        let hidden = (0..n_hidden).map(|_| read_u(&mut input)).collect::<Result<Vec<_>>>()?;
        let mut flags = [0u8; 3];
        input.read_exact(&mut flags)?;
        let activation = match flags[0] {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            _ => return Err(NeuralError::BadFile("unknown activation".into())),
        };
        let output = match flags[1] {
            0 => OutputKind::Linear,
            1 => OutputKind::Softmax,
            2 => OutputKind::Dueling,
            _ => return Err(NeuralError::BadFile("unknown output kind".into())),
        };
        let output_size = read_u(&mut input)?;
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        let noise_sigma = f64::from_le_bytes(b);
        let dueling_subnet_size = read_u(&mut input)?;
        let spec = NetworkSpec {
            input_size,
            hidden,
            activation,
            output,
            output_size,
            noisy: flags[2] != 0,
            noise_sigma,
            dueling_subnet_size,
        };
        let mut net = Network::new(spec, rng)?;
        for t in net.params.tensors_mut() {
            for x in t.iter_mut() {
                input.read_exact(&mut b)?;
                *x = f64::from_le_bytes(b);
            }
        }
        if !net.params.is_finite() {
            return Err(NeuralError::BadFile("non-finite parameter".into()));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn load<G: Rng + ?Sized>(path: &Path, rng: &mut G) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?), rng)
    }
}
