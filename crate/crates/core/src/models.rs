//! A small fully connected network with softmax cross-entropy loss and an L2
//! penalty, exposing exact value and gradient oracles over a flat parameter
//! vector.
//!
//! Flat layout: for each layer in order, the weight matrix row-major
//! (`out x in`, so `W[o][i]` sits at `o * in + i`), followed by its bias.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::lipschitz::ParamVector;
use crate::testbed::{Dataset, MiniBatch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation; 0 at the ReLU kink.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Self::Relu),
            "tanh" => Ok(Self::Tanh),
            other => Err(invalid(format!("unknown activation `{other}` (relu | tanh)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpSpec {
    pub layer_widths: Vec<usize>,
    pub activation: Activation,
    pub weight_decay: f64,
}

/// Borrowed view of one layer inside a flat parameter vector.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

impl MlpSpec {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, weight_decay: f64) -> Result<Self> {
        let spec = Self { layer_widths, activation, weight_decay };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 {
            return Err(invalid("an MLP needs at least input and output widths"));
        }
        if self.layer_widths.contains(&0) {
            return Err(invalid("layer widths must be positive"));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(invalid(format!("weight decay must be nonnegative, got {}", self.weight_decay)));
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_widths.last().expect("validated")
    }

    pub fn num_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Splits a flat vector into per-layer views.
    pub fn unpack<'a>(&self, params: &'a [f64]) -> Result<Vec<LayerView<'a>>> {
        if params.len() != self.param_count() {
            return Err(invalid(format!(
                "parameter vector has {} entries, spec needs {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut rest = params;
        let mut out = Vec::with_capacity(self.num_layers());
        for w in self.layer_widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let (weights, tail) = rest.split_at(fan_in * fan_out);
            let (bias, tail) = tail.split_at(fan_out);
            rest = tail;
            out.push(LayerView { fan_in, fan_out, weights, bias });
        }
        Ok(out)
    }

    /// Concatenates per-layer `(weights, bias)` pairs into a flat vector.
    pub fn pack(&self, layers: &[(Vec<f64>, Vec<f64>)]) -> Result<ParamVector> {
        if layers.len() != self.num_layers() {
            return Err(invalid("layer count does not match spec"));
        }
        let mut flat = Vec::with_capacity(self.param_count());
        for (w, (weights, bias)) in self.layer_widths.windows(2).zip(layers) {
            if weights.len() != w[0] * w[1] || bias.len() != w[1] {
                return Err(invalid("layer block has the wrong shape"));
            }
            flat.extend_from_slice(weights);
            flat.extend_from_slice(bias);
        }
        ParamVector::new(flat)
    }

    /// Uniform Glorot initialization, biases zero.
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut flat = Vec::with_capacity(self.param_count());
        for w in self.layer_widths.windows(2) {
            let a = (6.0 / (w[0] + w[1]) as f64).sqrt();
            flat.extend((0..w[0] * w[1]).map(|_| rng.random_range(-a..=a)));
            flat.extend(std::iter::repeat_n(0.0, w[1]));
        }
        ParamVector::new(flat).expect("finite init")
    }

    fn check_batch(&self, batch: &MiniBatch) -> Result<()> {
        if batch.is_empty() {
            return Err(invalid("batch is empty"));
        }
        if batch.d_in != self.input_width() {
            return Err(invalid(format!(
                "batch has {} features, network expects {}",
                batch.d_in,
                self.input_width()
            )));
        }
        if let Some(y) = batch.labels.iter().find(|&&y| y >= self.classes()) {
            return Err(invalid(format!("label {y} outside the {} output classes", self.classes())));
        }
        Ok(())
    }

    /// Pre-activations of every layer for one input; the last entry is the logits.
    fn forward(&self, layers: &[LayerView<'_>], x: &[f64]) -> Vec<Vec<f64>> {
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(layers.len());
        let mut input: Vec<f64> = x.to_vec();
        for (li, layer) in layers.iter().enumerate() {
            let z: Vec<f64> = (0..layer.fan_out)
                .map(|o| {
                    let row = &layer.weights[o * layer.fan_in..(o + 1) * layer.fan_in];
                    layer.bias[o] + row.iter().zip(&input).map(|(w, a)| w * a).sum::<f64>()
                })
                .collect();
            if li + 1 < layers.len() {
                input = z.iter().map(|&v| self.activation.apply(v)).collect();
            }
            zs.push(z);
        }
        zs
    }

    pub fn logits(&self, params: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let layers = self.unpack(params)?;
        if x.len() != self.input_width() {
            return Err(invalid("input width mismatch"));
        }
        Ok(self.forward(&layers, x).pop().expect("at least one layer"))
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn penalty(spec: &MlpSpec, params: &[f64]) -> f64 {
    0.5 * spec.weight_decay * params.iter().map(|p| p * p).sum::<f64>()
}

/// Mean softmax cross-entropy over the batch plus `weight_decay / 2 * |params|^2`.
pub fn objective(spec: &MlpSpec, params: &[f64], batch: &MiniBatch) -> Result<f64> {
    spec.check_batch(batch)?;
    let layers = spec.unpack(params)?;
    let mut loss = 0.0;
    for i in 0..batch.len() {
        let z = spec.forward(&layers, batch.row(i));
        let logits = z.last().expect("at least one layer");
        // lse >= z_y, clamp the rounding residue so F1 holds exactly
        loss += (log_sum_exp(logits) - logits[batch.labels[i]]).max(0.0);
    }
    Ok(loss / batch.len() as f64 + penalty(spec, params))
}

/// Exact gradient of [`objective`], same layout as the parameters.
pub fn gradient(spec: &MlpSpec, params: &[f64], batch: &MiniBatch) -> Result<ParamVector> {
    value_and_gradient(spec, params, batch).map(|(_, g)| g)
}

/// Objective and gradient in one forward/backward pass.
pub fn value_and_gradient(spec: &MlpSpec, params: &[f64], batch: &MiniBatch) -> Result<(f64, ParamVector)> {
    scaled_value_and_gradient(spec, params, batch, 1.0)
}

/// Same as [`value_and_gradient`] with the data term scaled by `loss_scale`.
pub(crate) fn scaled_value_and_gradient(
    spec: &MlpSpec,
    params: &[f64],
    batch: &MiniBatch,
    loss_scale: f64,
) -> Result<(f64, ParamVector)> {
    spec.check_batch(batch)?;
    let layers = spec.unpack(params)?;
    let mut grad = vec![0.0; params.len()];
    // flat offsets of each layer's weight block and bias block
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for l in &layers {
        offsets.push((off, off + l.fan_in * l.fan_out));
        off += l.fan_in * l.fan_out + l.fan_out;
    }

    let scale = loss_scale / batch.len() as f64;
    let mut loss = 0.0;
    for i in 0..batch.len() {
        let x = batch.row(i);
        let zs = spec.forward(&layers, x);
        let logits = zs.last().expect("at least one layer");
        let lse = log_sum_exp(logits);
        let y = batch.labels[i];
        loss += (lse - logits[y]).max(0.0);

        let mut delta: Vec<f64> = logits.iter().map(|z| (z - lse).exp()).collect();
        delta[y] -= 1.0;

        for li in (0..layers.len()).rev() {
            let layer = &layers[li];
            let input: Vec<f64> = if li == 0 {
                x.to_vec()
            } else {
                zs[li - 1].iter().map(|&z| spec.activation.apply(z)).collect()
            };
            let (w_off, b_off) = offsets[li];
            for o in 0..layer.fan_out {
                let d = delta[o] * scale;
                if d == 0.0 {
                    continue;
                }
                let row = &mut grad[w_off + o * layer.fan_in..w_off + (o + 1) * layer.fan_in];
                for (g, a) in row.iter_mut().zip(&input) {
                    *g += d * a;
                }
                grad[b_off + o] += d;
            }
            if li > 0 {
                let prev = &zs[li - 1];
                delta = (0..layer.fan_in)
                    .map(|j| {
                        let back: f64 =
                            (0..layer.fan_out).map(|o| layer.weights[o * layer.fan_in + j] * delta[o]).sum();
                        back * spec.activation.derivative(prev[j])
                    })
                    .collect();
            }
        }
    }
    for (g, p) in grad.iter_mut().zip(params) {
        *g += spec.weight_decay * p;
    }
    let value = loss_scale * loss / batch.len() as f64 + penalty(spec, params);
    Ok((value, ParamVector::new(grad)?))
}

/// Predicted class: argmax of the logits, ties to the lowest index.
pub fn predict(spec: &MlpSpec, params: &[f64], x: &[f64]) -> Result<usize> {
    let logits = spec.logits(params, x)?;
    let mut best = 0;
    for (k, &v) in logits.iter().enumerate().skip(1) {
        if v > logits[best] {
            best = k;
        }
    }
    Ok(best)
}

/// Fraction of examples whose predicted class matches the label.
pub fn accuracy(spec: &MlpSpec, params: &[f64], data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(invalid("accuracy needs a nonempty dataset"));
    }
    let mut correct = 0usize;
    for i in 0..data.len() {
        if predict(spec, params, data.row(i))? == data.labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
