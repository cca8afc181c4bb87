use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::mask::DropoutMask;
use crate::mixtures::Categorical;
use crate::numerics::{axpy, dot, Rng};

/// Hidden-layer nonlinearity. The output layer is always softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Relu => z.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            Activation::Sigmoid => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(Activation::Sigmoid),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Offsets of one affine layer inside the flat parameter vector.
///
/// Weights are stored row-major as an `n_out × n_in` block, followed by the
/// `n_out` biases.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerLayout {
    pub n_in: usize,
    pub n_out: usize,
    pub weights: usize,
    pub biases: usize,
}

impl LayerLayout {
    #[inline]
    pub fn weight_index(&self, out: usize, inp: usize) -> usize {
        self.weights + out * self.n_in + inp
    }

    #[inline]
    pub fn bias_index(&self, out: usize) -> usize {
        self.biases + out
    }

    pub fn end(&self) -> usize {
        self.biases + self.n_out
    }

    pub fn param_count(&self) -> usize {
        (self.n_in + 1) * self.n_out
    }
}

/// Layer widths `(d, hidden…, K)` and the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawArchitecture", into = "RawArchitecture")]
pub struct Architecture {
    sizes: Vec<usize>,
    activation: Activation,
    layouts: Vec<LayerLayout>,
}

#[derive(Serialize, Deserialize)]
struct RawArchitecture {
    sizes: Vec<usize>,
    activation: Activation,
}

impl TryFrom<RawArchitecture> for Architecture {
    type Error = Error;

    fn try_from(raw: RawArchitecture) -> Result<Self> {
        Self::new(raw.sizes, raw.activation)
    }
}

impl From<Architecture> for RawArchitecture {
    fn from(a: Architecture) -> Self {
        Self {
            sizes: a.sizes,
            activation: a.activation,
        }
    }
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::Config("an architecture needs input and output sizes".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::Config(format!("zero-width layer in {sizes:?}")));
        }
        let mut layouts = Vec::with_capacity(sizes.len() - 1);
        let mut offset = 0;
        for w in sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            layouts.push(LayerLayout {
                n_in,
                n_out,
                weights: offset,
                biases: offset + n_in * n_out,
            });
            offset += (n_in + 1) * n_out;
        }
        Ok(Self {
            sizes,
            activation,
            layouts,
        })
    }

    /// Softmax regression: a single affine layer.
    pub fn linear(input_dim: usize, classes: usize) -> Result<Self> {
        Self::new(vec![input_dim, classes], Activation::Sigmoid)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn n_classes(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn n_layers(&self) -> usize {
        self.layouts.len()
    }

    pub fn layer(&self, l: usize) -> LayerLayout {
        self.layouts[l]
    }

    pub fn layers(&self) -> &[LayerLayout] {
        &self.layouts
    }

    pub fn param_count(&self) -> usize {
        self.layouts.last().map_or(0, LayerLayout::end)
    }

    /// Widths of the hidden layers only.
    pub fn hidden_sizes(&self) -> &[usize] {
        &self.sizes[1..self.sizes.len() - 1]
    }

    /// Parameter indices of the output-layer biases.
    pub fn output_bias_range(&self) -> std::ops::Range<usize> {
        let last = self.layouts[self.layouts.len() - 1];
        last.biases..last.end()
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub(crate) struct Trace {
    /// `acts[l]` is the input of layer `l` (`acts[0]` is the example).
    pub acts: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    pub pre: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    deltas: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(arch: &Architecture) -> Self {
        let sizes = arch.sizes();
        Self {
            acts: sizes[..sizes.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            pre: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
            probs: vec![0.0; arch.n_classes()],
            deltas: sizes[1..].iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// `ln p_y` from the stored logits.
    pub fn log_prob(&self, y: usize) -> f64 {
        let z = &self.pre[self.pre.len() - 1];
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        z[y] - lse
    }

    /// Pre-activation gradients from the latest [`backward`] call.
    pub fn deltas(&self) -> &[Vec<f64>] {
        &self.deltas
    }
}

/// Forward pass with optional per-hidden-layer multiplicative unit scales
/// (inverted dropout).
pub(crate) fn forward(arch: &Architecture, params: &[f64], x: &[f64], scales: Option<&[Vec<f64>]>, tr: &mut Trace) {
    let act = arch.activation();
    let last = arch.n_layers() - 1;
    tr.acts[0].copy_from_slice(x);
    for (l, lay) in arch.layers().iter().enumerate() {
        let (head, tail) = tr.acts.split_at_mut(l + 1);
        let input = &head[l];
        let z = &mut tr.pre[l];
        for (o, zo) in z.iter_mut().enumerate() {
            let row = &params[lay.weights + o * lay.n_in..lay.weights + (o + 1) * lay.n_in];
            *zo = dot(row, input) + params[lay.biases + o];
        }
        if l < last {
            let out = &mut tail[0];
            match scales {
                Some(s) => {
                    for ((a, &zo), &sc) in out.iter_mut().zip(z.iter()).zip(&s[l]) {
                        *a = if sc == 0.0 { 0.0 } else { act.apply(zo) * sc };
                    }
                }
                None => {
                    for (a, &zo) in out.iter_mut().zip(z.iter()) {
                        *a = act.apply(zo);
                    }
                }
            }
        }
    }
    softmax_into(&tr.pre[last], &mut tr.probs);
}

/// Backpropagates `delta_out = ∂L/∂z_out`, leaving all pre-activation
/// gradients in the trace and accumulating `scale · ∂L/∂θ` into `grad`.
pub(crate) fn backward(
    arch: &Architecture,
    params: &[f64],
    tr: &mut Trace,
    delta_out: &[f64],
    scales: Option<&[Vec<f64>]>,
    mut grad: Option<(&mut [f64], f64)>,
) {
    let act = arch.activation();
    let last = arch.n_layers() - 1;
    tr.deltas[last].copy_from_slice(delta_out);
    for l in (0..=last).rev() {
        let lay = arch.layer(l);
        let (lower, upper) = tr.deltas.split_at_mut(l);
        let delta = &upper[0];
        if let Some((g, s)) = grad.as_mut() {
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g[lay.weights + o * lay.n_in..lay.weights + (o + 1) * lay.n_in];
                axpy(*s * d, &tr.acts[l], row);
                g[lay.biases + o] += *s * d;
            }
        }
        if l > 0 {
            let prev = &mut lower[l - 1];
            prev.iter_mut().for_each(|v| *v = 0.0);
            for (o, &d) in delta.iter().enumerate() {
                if d != 0.0 {
                    axpy(d, &params[lay.weights + o * lay.n_in..lay.weights + (o + 1) * lay.n_in], prev);
                }
            }
            let z = &tr.pre[l - 1];
            match scales {
                Some(sc) => {
                    for ((p, &zh), &s) in prev.iter_mut().zip(z).zip(&sc[l - 1]) {
                        *p *= s * act.derivative(zh);
                    }
                }
                None => {
                    for (p, &zh) in prev.iter_mut().zip(z) {
                        *p *= act.derivative(zh);
                    }
                }
            }
        }
    }
}

pub(crate) fn softmax_into(z: &[f64], out: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for (o, &v) in out.iter_mut().zip(z) {
        *o = (v - m).exp();
        s += *o;
    }
    out.iter_mut().for_each(|o| *o /= s);
}

/// Multilayer perceptron with softmax output over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    arch: Architecture,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn zeros(arch: Architecture) -> Self {
        let n = arch.param_count();
        Self {
            arch,
            params: vec![0.0; n],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(arch: Architecture, rng: &mut Rng) -> Self {
        let mut params = vec![0.0; arch.param_count()];
        for lay in arch.layers() {
            let bound = (6.0 / (lay.n_in + lay.n_out) as f64).sqrt();
            for w in &mut params[lay.weights..lay.biases] {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        Self { arch, params }
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        if params.len() != arch.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters given, architecture {:?} has {}",
                params.len(),
                arch.sizes(),
                arch.param_count()
            )));
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn check_mask(&self, mask: &DropoutMask) -> Result<()> {
        if mask.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "mask over {} coordinates, model has {}",
                mask.len(),
                self.params.len()
            )));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::Shape(format!(
                "input of length {}, model expects {}",
                x.len(),
                self.arch.input_dim()
            )));
        }
        Ok(())
    }

    /// Copy with masked coordinates overwritten by zero.
    pub fn masked(&self, mask: &DropoutMask) -> Result<Self> {
        self.check_mask(mask)?;
        Ok(Self {
            arch: self.arch.clone(),
            params: mask.applied(&self.params),
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Categorical> {
        self.check_input(x)?;
        let mut tr = Trace::new(&self.arch);
        forward(&self.arch, &self.params, x, None, &mut tr);
        Categorical::new(tr.probs).map_err(|_| Error::Numerical("non-finite forward pass".into()))
    }

    /// Class probabilities with masked coordinates treated as zero.
    pub fn forward(&self, x: &[f64], mask: &DropoutMask) -> Result<Categorical> {
        self.masked(mask)?.predict(x)
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut tr = Trace::new(&self.arch);
        forward(&self.arch, &self.params, x, None, &mut tr);
        Ok(tr.pre.pop().unwrap_or_default())
    }

    /// Mean cross-entropy over `rows` of `data` and its gradient. Gradient
    /// entries at masked coordinates are exactly zero.
    pub fn loss_and_grad(&self, data: &Dataset, rows: &[usize], mask: &DropoutMask) -> Result<(f64, Vec<f64>)> {
        self.check_mask(mask)?;
        if mask.is_full() {
            let (loss, grad) = self.raw_loss_and_grad(data, rows, None)?;
            return Ok((loss, grad));
        }
        let params = mask.applied(&self.params);
        let m = Self {
            arch: self.arch.clone(),
            params,
        };
        let (loss, mut grad) = m.raw_loss_and_grad(data, rows, None)?;
        mask.apply(&mut grad);
        Ok((loss, grad))
    }

    /// Gradient of the mean loss with optional per-example hidden-unit scales.
    pub(crate) fn raw_loss_and_grad(
        &self,
        data: &Dataset,
        rows: &[usize],
        mut scales: Option<&mut dyn FnMut(usize) -> Vec<Vec<f64>>>,
    ) -> Result<(f64, Vec<f64>)> {
        if rows.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if data.dim() != self.arch.input_dim() || data.n_classes() != self.arch.n_classes() {
            return Err(Error::Shape(format!(
                "dataset (d={}, K={}) does not fit architecture {:?}",
                data.dim(),
                data.n_classes(),
                self.arch.sizes()
            )));
        }
        let mut grad = vec![0.0; self.params.len()];
        let mut tr = Trace::new(&self.arch);
        let mut delta = vec![0.0; self.arch.n_classes()];
        let inv = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for (pos, &r) in rows.iter().enumerate() {
            let x = data.row(r);
            let y = data.label(r);
            let sc = scales.as_mut().map(|f| f(pos));
            forward(&self.arch, &self.params, x, sc.as_deref(), &mut tr);
            loss += -tr.log_prob(y);
            delta.copy_from_slice(&tr.probs);
            delta[y] -= 1.0;
            backward(&self.arch, &self.params, &mut tr, &delta, sc.as_deref(), Some((&mut grad, inv)));
        }
        Ok((loss * inv, grad))
    }

    /// Mean cross-entropy and accuracy over the whole dataset.
    pub fn evaluate(&self, data: &Dataset) -> Result<(f64, f64)> {
        if data.dim() != self.arch.input_dim() {
            return Err(Error::Shape("dataset dimension does not match the model".into()));
        }
        if data.is_empty() {
            return Err(Error::Shape("empty dataset".into()));
        }
        let mut tr = Trace::new(&self.arch);
        let (mut loss, mut correct) = (0.0, 0usize);
        for i in 0..data.len() {
            forward(&self.arch, &self.params, data.row(i), None, &mut tr);
            let y = data.label(i);
            loss -= tr.log_prob(y);
            let pred = tr
                .probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (k, &p)| if p > b.1 { (k, p) } else { b })
                .0;
            correct += usize::from(pred == y);
        }
        let n = data.len() as f64;
        Ok((loss / n, correct as f64 / n))
    }
}
