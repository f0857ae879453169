//! Fully connected network with hand-written reverse mode.
//!
//! Hidden layers are `affine → activation → dropout`; the last layer is affine
//! only and produces a single scalar per sample. All arithmetic is `f64`.

mod linalg;
pub mod optim;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use rand::{Rng, RngCore};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

pub use optim::{Adam, AdamConfig, CosineSchedule, ParamSlot};

pub const DEFAULT_OMEGA0: f64 = 30.0;
pub const DEFAULT_HOSC_BETA: f64 = 8.0;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase"))]
pub enum Activation {
    Relu,
    /// `sin(omega0 · z)`
    Siren {
        omega0: f64,
    },
    /// `tanh(beta · sin(omega0 · z))`
    Hosc {
        beta: f64,
        omega0: f64,
    },
}

impl Activation {
    pub fn siren() -> Self {
        Activation::Siren { omega0: DEFAULT_OMEGA0 }
    }

    pub fn hosc() -> Self {
        Activation::Hosc { beta: DEFAULT_HOSC_BETA, omega0: 1.0 }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::Siren { omega0 } => libm::sin(omega0 * z),
            Activation::Hosc { beta, omega0 } => libm::tanh(beta * libm::sin(omega0 * z)),
        }
    }

    /// Derivative at pre-activation `z`, given the activation value `h`.
    #[inline]
    pub fn derivative(&self, z: f64, h: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Siren { omega0 } => omega0 * libm::cos(omega0 * z),
            Activation::Hosc { beta, omega0 } => (1.0 - h * h) * beta * omega0 * libm::cos(omega0 * z),
        }
    }
}

/// Affine layer, `weight` stored `outputs × inputs` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weight: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NetDims {
    pub input: usize,
    pub hidden: usize,
    /// Number of hidden layers; 0 gives a single affine map.
    pub depth: usize,
}

impl NetDims {
    pub fn layer_sizes(&self) -> Vec<(usize, usize)> {
        let mut sizes = Vec::with_capacity(self.depth + 1);
        let mut fan_in = self.input;
        for _ in 0..self.depth {
            sizes.push((fan_in, self.hidden));
            fan_in = self.hidden;
        }
        sizes.push((fan_in, 1));
        sizes
    }
}

/// Train mode carries the dropout random stream.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut dyn RngCore),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet {
    layers: Vec<Dense>,
    activation: Activation,
    dropout: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| DenseGrad { weight: vec![0.0; l.weight.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight.iter_mut().zip(&b.weight).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weight.iter_mut().chain(l.bias.iter_mut()).for_each(|x| *x *= factor);
        }
    }
}

/// Everything backward needs from one batched forward pass.
#[derive(Clone, Debug)]
pub struct BatchCache {
    batch: usize,
    /// `inputs[l]` is the `batch × in_l` input seen by layer `l` (post-dropout).
    inputs: Vec<Vec<f64>>,
    /// Hidden pre-activations, `batch × out_l`.
    pre: Vec<Vec<f64>>,
    /// Hidden activations before dropout.
    post: Vec<Vec<f64>>,
    /// Inverted-dropout factors (0 or 1/(1-p)); empty when dropout was off.
    dropout: Vec<Vec<f64>>,
    output: Vec<f64>,
    layer_shapes: Vec<(usize, usize)>,
}

impl BatchCache {
    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn batch(&self) -> usize {
        self.batch
    }
}

impl MlpNet {
    pub fn from_layers(layers: Vec<Dense>, activation: Activation, dropout: f64) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        if !(0.0..1.0).contains(&dropout) {
            return Err(Error::InvalidArgument(format!("dropout rate {dropout} not in [0, 1)")));
        }
        for (l, layer) in layers.iter().enumerate() {
            if layer.weight.len() != layer.inputs * layer.outputs || layer.bias.len() != layer.outputs {
                return Err(Error::ShapeMismatch {
                    what: "layer parameters",
                    expected: layer.inputs * layer.outputs,
                    found: layer.weight.len(),
                });
            }
            if l > 0 && layers[l - 1].outputs != layer.inputs {
                return Err(Error::ShapeMismatch {
                    what: "layer width",
                    expected: layers[l - 1].outputs,
                    found: layer.inputs,
                });
            }
            if !layer.weight.iter().chain(&layer.bias).all(|x| x.is_finite()) {
                return Err(Error::InvalidArgument(format!("layer {l} has non-finite parameters")));
            }
        }
        if layers.last().map(|l| l.outputs) != Some(1) {
            return Err(Error::InvalidArgument("final layer must have one output".into()));
        }
        Ok(Self { layers, activation, dropout })
    }

    /// Random initialisation.
    ///
    /// SIREN: first-layer weights `U(±1/fan_in)`, later hidden layers
    /// `U(±√(6/fan_in)/ω0)`. ReLU and HOSC use He-uniform `U(±√(6/fan_in))`.
    /// The output layer is He-uniform for every activation and all biases are
    /// `U(±1/√fan_in)`.
    pub fn init(dims: NetDims, activation: Activation, dropout: f64, seed: u64) -> Result<Self> {
        if dims.input == 0 || (dims.depth > 0 && dims.hidden == 0) {
            return Err(Error::InvalidArgument("network dimensions must be positive".into()));
        }
        let mut r = rng::stream(seed, &[rng::tag::NET_INIT]);
        let sizes = dims.layer_sizes();
        let last = sizes.len() - 1;
        let layers = sizes
            .iter()
            .enumerate()
            .map(|(l, &(fan_in, fan_out))| {
                let fan = fan_in as f64;
                let he = libm::sqrt(6.0 / fan);
                let bound = match activation {
                    _ if l == last => he,
                    Activation::Siren { .. } if l == 0 => 1.0 / fan,
                    Activation::Siren { omega0 } => he / omega0,
                    Activation::Relu | Activation::Hosc { .. } => he,
                };
                let bias_bound = 1.0 / libm::sqrt(fan);
                let w = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                let b = Uniform::new_inclusive(-bias_bound, bias_bound).expect("finite bound");
                let weight = (0..fan_in * fan_out).map(|_| w.sample(&mut r)).collect();
                let bias = (0..fan_out).map(|_| b.sample(&mut r)).collect();
                Dense { inputs: fan_in, outputs: fan_out, weight, bias }
            })
            .collect();
        Self::from_layers(layers, activation, dropout)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn dropout(&self) -> f64 {
        self.dropout
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn hidden_dim(&self) -> usize {
        if self.layers.len() > 1 {
            self.layers[0].outputs
        } else {
            0
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn param_names(&self) -> Vec<(String, String)> {
        (0..self.layers.len()).map(|l| (format!("layer{l}.weight"), format!("layer{l}.bias"))).collect()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64], mode: Mode<'_>) -> Result<(f64, BatchCache)> {
        let cache = self.forward_batch(input, 1, mode)?;
        Ok((cache.output[0], cache))
    }

    /// Single-sample reverse pass for output gradient `dout`.
    pub fn backward(&self, cache: &BatchCache, dout: f64) -> Result<(Gradients, Vec<f64>)> {
        if cache.batch != 1 {
            return Err(Error::ShapeMismatch { what: "cache batch", expected: 1, found: cache.batch });
        }
        self.backward_batch(cache, &[dout])
    }

    /// Forward over `batch` row-major inputs of width `input_dim`.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize, mut mode: Mode<'_>) -> Result<BatchCache> {
        let d_in = self.input_dim();
        if inputs.len() != batch * d_in {
            return Err(Error::ShapeMismatch { what: "network input", expected: batch * d_in, found: inputs.len() });
        }
        if !inputs.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let n_layers = self.layers.len();
        let mut cache = BatchCache {
            batch,
            inputs: Vec::with_capacity(n_layers),
            pre: Vec::with_capacity(n_layers - 1),
            post: Vec::with_capacity(n_layers - 1),
            dropout: Vec::new(),
            output: Vec::new(),
            layer_shapes: self.layers.iter().map(|l| (l.inputs, l.outputs)).collect(),
        };
        let mut current = inputs.to_vec();
        for (l, layer) in self.layers.iter().enumerate() {
            let mut z = affine(layer, &current, batch);
            cache.inputs.push(current);
            if l + 1 == n_layers {
                cache.output = z;
                break;
            }
            let mut h: Vec<f64> = z.iter().map(|&v| self.activation.apply(v)).collect();
            let post = h.clone();
            if let Mode::Train(ref mut r) = mode {
                if self.dropout > 0.0 {
                    let keep = 1.0 - self.dropout;
                    let factors: Vec<f64> =
                        (0..h.len()).map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 }).collect();
                    h.iter_mut().zip(&factors).for_each(|(x, f)| *x *= f);
                    cache.dropout.push(factors);
                }
            }
            cache.pre.push(core::mem::take(&mut z));
            cache.post.push(post);
            current = h;
        }
        Ok(cache)
    }

    /// Eval-mode outputs only, without keeping a cache.
    pub fn predict_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        let d_in = self.input_dim();
        if inputs.len() != batch * d_in {
            return Err(Error::ShapeMismatch { what: "network input", expected: batch * d_in, found: inputs.len() });
        }
        if !inputs.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let n_layers = self.layers.len();
        let mut current = affine(&self.layers[0], inputs, batch);
        for layer in &self.layers[1..] {
            current.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            current = affine(layer, &current, batch);
        }
        debug_assert_eq!(current.len(), batch * self.layers[n_layers - 1].outputs);
        Ok(current)
    }

    /// Reverse pass: parameter gradients summed over the batch, plus the
    /// `batch × input_dim` input gradient.
    pub fn backward_batch(&self, cache: &BatchCache, dout: &[f64]) -> Result<(Gradients, Vec<f64>)> {
        let (grads, dx) = self.reverse(cache, dout, true)?;
        Ok((grads.expect("parameter gradients requested"), dx))
    }

    /// Input gradient only; parameter gradients are skipped.
    pub fn input_gradient(&self, cache: &BatchCache, dout: &[f64]) -> Result<Vec<f64>> {
        Ok(self.reverse(cache, dout, false)?.1)
    }

    fn reverse(&self, cache: &BatchCache, dout: &[f64], want_params: bool) -> Result<(Option<Gradients>, Vec<f64>)> {
        let shapes_match = cache.layer_shapes.len() == self.layers.len()
            && cache.layer_shapes.iter().zip(&self.layers).all(|(&(i, o), l)| i == l.inputs && o == l.outputs);
        if !shapes_match {
            return Err(Error::InvalidArgument("cache was produced by a different network".into()));
        }
        let batch = cache.batch;
        if dout.len() != batch {
            return Err(Error::ShapeMismatch { what: "output gradient", expected: batch, found: dout.len() });
        }
        let mut grads = if want_params { Some(Gradients::zeros_like(self)) } else { None };
        // dz for the current layer, batch × out_l
        let mut dz = dout.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let x = &cache.inputs[l];
            if let Some(g) = grads.as_mut() {
                let gl = &mut g.layers[l];
                linalg::matmul_at(layer.outputs, batch, layer.inputs, &dz, x, 0.0, &mut gl.weight);
                for row in dz.chunks_exact(layer.outputs) {
                    gl.bias.iter_mut().zip(row).for_each(|(b, d)| *b += d);
                }
            }
            let mut dx = vec![0.0; batch * layer.inputs];
            linalg::matmul(batch, layer.outputs, layer.inputs, &dz, &layer.weight, 0.0, &mut dx);
            if l == 0 {
                return Ok((grads, dx));
            }
            // back through dropout and activation of hidden layer l-1
            let h = l - 1;
            if let Some(f) = cache.dropout.get(h) {
                dx.iter_mut().zip(f).for_each(|(d, f)| *d *= f);
            }
            for ((d, &z), &a) in dx.iter_mut().zip(&cache.pre[h]).zip(&cache.post[h]) {
                *d *= self.activation.derivative(z, a);
            }
            dz = dx;
        }
        unreachable!("loop returns at layer 0")
    }
}

fn affine(layer: &Dense, x: &[f64], batch: usize) -> Vec<f64> {
    let mut z = Vec::with_capacity(batch * layer.outputs);
    for _ in 0..batch {
        z.extend_from_slice(&layer.bias);
    }
    linalg::matmul_bt(batch, layer.inputs, layer.outputs, x, &layer.weight, 1.0, &mut z);
    z
}
