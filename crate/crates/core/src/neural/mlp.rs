use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problem::check_len;
use crate::{Matrix, Vector};

pub const DEFAULT_HIDDEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutputActivation {
    /// Keeps every output inside the open unit ball.
    Tanh,
    Identity,
}

impl OutputActivation {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputActivation::Tanh => "tanh",
            OutputActivation::Identity => "identity",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(OutputActivation::Tanh),
            "identity" => Some(OutputActivation::Identity),
            _ => None,
        }
    }
}

/// Fully connected network, rectifier on hidden layers.
///
/// Inputs are standardised as `(input - input_shift) * input_scale` before
/// the first layer. Parameters flatten layer by layer: the weight matrix in
/// column-major order, then the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    /// `weights[l]` is `layer_dims[l + 1] x layer_dims[l]`.
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vector>,
    pub output_activation: OutputActivation,
    pub input_shift: Vector,
    pub input_scale: Vector,
}

/// Intermediate values kept by [`MlpModel::forward_trace`] for backprop.
#[derive(Debug, Clone)]
pub struct MlpTrace {
    /// `post[0]` is the standardised input; `post[l + 1]` the output of layer `l`.
    pub post: Vec<Vector>,
    pub pre: Vec<Vector>,
}

impl MlpTrace {
    pub fn output(&self) -> &Vector {
        self.post.last().expect("trace has an input")
    }
}

impl MlpModel {
    /// All-zero parameters.
    pub fn zeros(layer_dims: &[usize], output_activation: OutputActivation) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::InvalidConfig(alloc::format!("bad layer sizes {layer_dims:?}")));
        }
        let weights = layer_dims.windows(2).map(|w| Matrix::zeros(w[1], w[0])).collect();
        let biases = layer_dims[1..].iter().map(|&d| Vector::zeros(d)).collect();
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            output_activation,
            input_shift: Vector::zeros(layer_dims[0]),
            input_scale: Vector::from_element(layer_dims[0], 1.0),
        })
    }

    /// He-uniform hidden layers, Glorot-uniform output layer, zero biases.
    pub fn new(layer_dims: &[usize], output_activation: OutputActivation, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_dims, output_activation)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = model.weights.len() - 1;
        for (l, w) in model.weights.iter_mut().enumerate() {
            let (fan_out, fan_in) = w.shape();
            let bound = if l == last {
                libm::sqrt(6.0 / (fan_in + fan_out) as f64)
            } else {
                libm::sqrt(6.0 / fan_in as f64)
            };
            for v in w.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(model)
    }

    /// `[n_in, hidden, n_out]`.
    pub fn with_hidden(n_in: usize, hidden: usize, n_out: usize, act: OutputActivation, seed: u64) -> Result<Self> {
        Self::new(&[n_in, hidden, n_out], act, seed)
    }

    pub fn n_in(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn n_out(&self) -> usize {
        *self.layer_dims.last().expect("at least two layers")
    }

    pub fn n_params(&self) -> usize {
        self.layer_dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn params(&self) -> Vector {
        let mut out = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        Vector::from_vec(out)
    }

    pub fn set_params(&mut self, flat: &Vector) -> Result<()> {
        check_len("parameters", self.n_params(), flat.len())?;
        let mut at = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let nw = w.len();
            w.as_mut_slice().copy_from_slice(&flat.as_slice()[at..at + nw]);
            at += nw;
            let nb = b.len();
            b.as_mut_slice().copy_from_slice(&flat.as_slice()[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Standardises inputs to zero mean and unit spread over `inputs`.
    /// Constant coordinates keep scale 1.
    pub fn fit_normalization<'a>(&mut self, inputs: impl IntoIterator<Item = &'a Vector>) -> Result<()> {
        let d = self.n_in();
        let mut sum = Vector::zeros(d);
        let mut sq = Vector::zeros(d);
        let mut count = 0usize;
        for v in inputs {
            check_len("network input", d, v.len())?;
            sum += v;
            sq += v.component_mul(v);
            count += 1;
        }
        if count == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = count as f64;
        let mean = sum / n;
        for i in 0..d {
            let var = (sq[i] / n - mean[i] * mean[i]).max(0.0);
            let sd = libm::sqrt(var);
            self.input_scale[i] = if sd > 1e-8 * (1.0 + mean[i].abs()) {
                1.0 / sd
            } else {
                1.0
            };
        }
        self.input_shift = mean;
        Ok(())
    }

    pub fn forward(&self, input: &Vector) -> Result<Vector> {
        let mut h = self.standardise(input)?;
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * &h + b;
            h = if l == last { self.activate_output(z) } else { relu(z) };
        }
        Ok(h)
    }

    pub fn forward_trace(&self, input: &Vector) -> Result<MlpTrace> {
        let h0 = self.standardise(input)?;
        let mut post = Vec::with_capacity(self.weights.len() + 1);
        let mut pre = Vec::with_capacity(self.weights.len());
        post.push(h0);
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * &post[l] + b;
            let h = if l == last {
                self.activate_output(z.clone())
            } else {
                relu(z.clone())
            };
            pre.push(z);
            post.push(h);
        }
        Ok(MlpTrace { post, pre })
    }

    /// Gradient of `grad_out . output` with respect to the flat parameters.
    pub fn backward(&self, trace: &MlpTrace, grad_out: &Vector) -> Result<Vector> {
        check_len("output gradient", self.n_out(), grad_out.len())?;
        let layers = self.weights.len();
        let mut delta = match self.output_activation {
            OutputActivation::Tanh => grad_out.zip_map(trace.output(), |g, y| g * (1.0 - y * y)),
            OutputActivation::Identity => grad_out.clone(),
        };
        let mut grads: Vec<(Matrix, Vector)> = Vec::with_capacity(layers);
        for l in (0..layers).rev() {
            let gw = &delta * trace.post[l].transpose();
            let next = if l > 0 {
                let back = self.weights[l].tr_mul(&delta);
                Some(back.zip_map(&trace.pre[l - 1], |g, z| if z > 0.0 { g } else { 0.0 }))
            } else {
                None
            };
            grads.push((gw, delta));
            match next {
                Some(d) => delta = d,
                None => break,
            }
        }
        grads.reverse();
        let mut out = Vec::with_capacity(self.n_params());
        for (gw, gb) in &grads {
            out.extend_from_slice(gw.as_slice());
            out.extend_from_slice(gb.as_slice());
        }
        Ok(Vector::from_vec(out))
    }

    fn standardise(&self, input: &Vector) -> Result<Vector> {
        check_len("network input", self.n_in(), input.len())?;
        Ok((input - &self.input_shift).component_mul(&self.input_scale))
    }

    fn activate_output(&self, z: Vector) -> Vector {
        match self.output_activation {
            OutputActivation::Tanh => z.map(libm::tanh),
            OutputActivation::Identity => z,
        }
    }
}

fn relu(z: Vector) -> Vector {
    z.map(|v| v.max(0.0))
}
