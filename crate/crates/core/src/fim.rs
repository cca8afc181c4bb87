//! Fisher information: exact class enumeration, Monte-Carlo sampling and
//! K-FAC, plus norms and Φ(I(θ)) penalties.
//!
//! Sums over inputs run in fixed chunks of [`FIM_CHUNK`] rows whose partial
//! results are always added in chunk order, so estimates are bit-identical
//! for any thread count.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{backward, forward, Architecture, Dataset, MlpModel, Trace};
use crate::numerics::{psd_lambda_max, sym_eig, try_finite_diff_grad, DenseMatrix, Rng, DEFAULT_STEP};

/// Rows per reduction chunk.
pub const FIM_CHUNK: usize = 64;
/// Dense guard for [`exact_fim`] and [`mc_fim`].
pub const EXACT_MAX_PARAMS: usize = 2000;
/// Guard for Φ-regularized training, whose penalty gradient is taken by
/// finite differences.
pub const PHI_MAX_PARAMS: usize = 200;
/// Largest model for which K-FAC blocks are expanded into a dense matrix.
pub const MATERIALIZE_MAX_PARAMS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FimKind {
    Exact,
    MonteCarlo,
    Kfac,
}

/// One K-FAC factor pair: `A` over bias-augmented layer inputs, `G` over the
/// layer's pre-activation gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfacBlock {
    pub a: DenseMatrix,
    pub g: DenseMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FimEstimate {
    pub kind: FimKind,
    pub full: Option<DenseMatrix>,
    pub kfac_blocks: Option<Vec<KfacBlock>>,
    pub n_samples: usize,
    pub arch: Architecture,
}

impl FimEstimate {
    pub fn param_count(&self) -> usize {
        self.arch.param_count()
    }

    /// Dense `P × P` matrix in parameter order. K-FAC blocks land on the
    /// block diagonal with `(A ⊗ G)[i·n_out + o, i'·n_out + o']` mapped to the
    /// parameters `(o, i)` and `(o', i')`; input index `n_in` is the bias.
    pub fn materialize(&self) -> Result<DenseMatrix> {
        if let Some(f) = &self.full {
            return Ok(f.clone());
        }
        let blocks = self.blocks()?;
        let p = self.param_count();
        if p > MATERIALIZE_MAX_PARAMS {
            return Err(Error::Capacity {
                what: "parameters to materialize",
                actual: p,
                limit: MATERIALIZE_MAX_PARAMS,
            });
        }
        let mut out = DenseMatrix::zeros(p, p);
        for (lay, b) in self.arch.layers().iter().zip(blocks) {
            let idx = |o: usize, i: usize| if i < lay.n_in { lay.weight_index(o, i) } else { lay.bias_index(o) };
            for i in 0..=lay.n_in {
                for i2 in 0..=lay.n_in {
                    let a = b.a[(i, i2)];
                    for o in 0..lay.n_out {
                        for o2 in 0..lay.n_out {
                            out[(idx(o, i), idx(o2, i2))] = a * b.g[(o, o2)];
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    fn blocks(&self) -> Result<&[KfacBlock]> {
        self.kfac_blocks
            .as_deref()
            .ok_or_else(|| Error::Shape("estimate carries neither a dense matrix nor K-FAC blocks".into()))
    }

    /// `δᵀ I δ` without materializing K-FAC blocks.
    pub fn quadratic_form(&self, delta: &[f64]) -> Result<f64> {
        if delta.len() != self.param_count() {
            return Err(Error::Shape(format!(
                "displacement of length {}, model has {} parameters",
                delta.len(),
                self.param_count()
            )));
        }
        if let Some(f) = &self.full {
            return f.quadratic_form(delta);
        }
        let mut total = 0.0;
        for (lay, b) in self.arch.layers().iter().zip(self.blocks()?) {
            let m = lay.n_in + 1;
            let d = DenseMatrix::from_fn(lay.n_out, m, |o, i| {
                delta[if i < lay.n_in { lay.weight_index(o, i) } else { lay.bias_index(o) }]
            });
            let gd = b.g.matmul(&d)?;
            let da = d.matmul(&b.a)?;
            total += gd.data().iter().zip(da.data()).map(|(x, y)| x * y).sum::<f64>();
        }
        Ok(total)
    }

    /// Smallest eigenvalue of every stored factor is at least `−tol·trace`.
    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        let ok = |m: &DenseMatrix| -> Result<bool> {
            if !m.is_symmetric(1e-12) {
                return Ok(false);
            }
            let e = sym_eig(m)?;
            let min = e.eigenvalues.last().copied().unwrap_or(0.0);
            Ok(min >= -tol * m.trace().abs().max(f64::MIN_POSITIVE))
        };
        if let Some(f) = &self.full {
            return ok(f);
        }
        for b in self.blocks()? {
            if !ok(&b.a)? || !ok(&b.g)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Frobenius,
    Spectral,
    Trace,
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Frobenius => "frobenius",
            NormKind::Spectral => "spectral",
            NormKind::Trace => "trace",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "frobenius" => Ok(NormKind::Frobenius),
            "spectral" => Ok(NormKind::Spectral),
            "trace" => Ok(NormKind::Trace),
            other => Err(Error::Config(format!("unknown norm '{other}'"))),
        }
    }
}

/// Scalar size of a FIM estimate. K-FAC norms use the Kronecker identities
/// on each block.
pub fn fim_norm(est: &FimEstimate, which: NormKind) -> Result<f64> {
    if let Some(f) = &est.full {
        return match which {
            NormKind::Frobenius => Ok(f.frobenius_norm()),
            NormKind::Trace => Ok(f.trace()),
            NormKind::Spectral => psd_lambda_max(f),
        };
    }
    let blocks = est.blocks()?;
    match which {
        NormKind::Frobenius => Ok(blocks
            .iter()
            .map(|b| (b.a.frobenius_norm() * b.g.frobenius_norm()).powi(2))
            .sum::<f64>()
            .sqrt()),
        NormKind::Trace => Ok(blocks.iter().map(|b| b.a.trace() * b.g.trace()).sum()),
        NormKind::Spectral => blocks.iter().try_fold(0.0_f64, |m, b| {
            Ok(m.max(psd_lambda_max(&b.a)? * psd_lambda_max(&b.g)?))
        }),
    }
}

fn chunk_ranges(n: usize) -> Vec<Range<usize>> {
    (0..n).step_by(FIM_CHUNK).map(|s| s..(s + FIM_CHUNK).min(n)).collect()
}

/// Sums per-chunk buffers of length `len` in chunk order. Chunks run in
/// parallel waves sized to the thread pool, bounding memory.
fn chunked_sum<F>(n: usize, len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, Range<usize>, &mut [f64]) + Sync,
{
    let chunks: Vec<(usize, Range<usize>)> = chunk_ranges(n).into_iter().enumerate().collect();
    let wave = rayon::current_num_threads().max(1);
    let mut total = vec![0.0; len];
    for group in chunks.chunks(wave) {
        let partials: Vec<Vec<f64>> = group
            .par_iter()
            .map(|(c, r)| {
                let mut buf = vec![0.0; len];
                f(*c, r.clone(), &mut buf);
                buf
            })
            .collect();
        for p in partials {
            for (t, v) in total.iter_mut().zip(p) {
                *t += v;
            }
        }
    }
    total
}

/// `buf += w · v vᵀ` on the upper triangle of a row-major `n × n` buffer.
#[inline]
fn rank_one_upper(buf: &mut [f64], v: &[f64], w: f64) {
    let n = v.len();
    for i in 0..n {
        let s = w * v[i];
        if s == 0.0 {
            continue;
        }
        let row = &mut buf[i * n + i..(i + 1) * n];
        for (b, &vj) in row.iter_mut().zip(&v[i..]) {
            *b += s * vj;
        }
    }
}

fn upper_to_symmetric(n: usize, mut data: Vec<f64>, scale: f64) -> DenseMatrix {
    for i in 0..n {
        for j in i..n {
            let v = data[i * n + j] * scale;
            data[i * n + j] = v;
            data[j * n + i] = v;
        }
    }
    DenseMatrix::new(n, n, data).expect("square buffer")
}

fn check_inputs(model: &MlpModel, inputs: &DenseMatrix) -> Result<()> {
    if inputs.cols() != model.arch().input_dim() {
        return Err(Error::Shape(format!(
            "inputs have {} columns, model expects {}",
            inputs.cols(),
            model.arch().input_dim()
        )));
    }
    if inputs.rows() == 0 {
        return Err(Error::Shape("no inputs".into()));
    }
    Ok(())
}

fn dense_guard(model: &MlpModel) -> Result<()> {
    if model.param_count() > EXACT_MAX_PARAMS {
        return Err(Error::Capacity {
            what: "parameters for a dense FIM",
            actual: model.param_count(),
            limit: EXACT_MAX_PARAMS,
        });
    }
    Ok(())
}

/// `∇_θ ln p(y|x)` for the sampled or enumerated class `y`.
fn score(arch: &Architecture, params: &[f64], tr: &mut Trace, y: usize, delta: &mut [f64], g: &mut [f64]) {
    delta.iter_mut().zip(&tr.probs).for_each(|(d, &p)| *d = -p);
    delta[y] += 1.0;
    g.iter_mut().for_each(|v| *v = 0.0);
    backward(arch, params, tr, delta, None, Some((g, 1.0)));
}

/// Model-expectation FIM `mean_x Σ_y p(y|x) ∇ln p ∇ln pᵀ`, enumerating
/// classes exactly.
pub fn exact_fim(model: &MlpModel, inputs: &DenseMatrix) -> Result<FimEstimate> {
    check_inputs(model, inputs)?;
    dense_guard(model)?;
    let arch = model.arch();
    let p = model.param_count();
    let k = arch.n_classes();
    let sum = chunked_sum(inputs.rows(), p * p, |_, rows, buf| {
        let mut tr = Trace::new(arch);
        let mut delta = vec![0.0; k];
        let mut g = vec![0.0; p];
        for r in rows {
            forward(arch, model.params(), inputs.row(r), None, &mut tr);
            let probs = tr.probs.clone();
            for (y, &py) in probs.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                score(arch, model.params(), &mut tr, y, &mut delta, &mut g);
                rank_one_upper(buf, &g, py);
            }
        }
    });
    Ok(FimEstimate {
        kind: FimKind::Exact,
        full: Some(upper_to_symmetric(p, sum, 1.0 / inputs.rows() as f64)),
        kfac_blocks: None,
        n_samples: inputs.rows(),
        arch: arch.clone(),
    })
}

/// Monte-Carlo FIM with labels drawn from the model's own conditional.
pub fn mc_fim(model: &MlpModel, inputs: &DenseMatrix, samples_per_input: usize, rng: &mut Rng) -> Result<FimEstimate> {
    check_inputs(model, inputs)?;
    dense_guard(model)?;
    if samples_per_input == 0 {
        return Err(Error::Config("samples_per_input must be at least 1".into()));
    }
    let arch = model.arch();
    let p = model.param_count();
    let k = arch.n_classes();
    let seed = rng.next_u64();
    let sum = chunked_sum(inputs.rows(), p * p, |c, rows, buf| {
        let mut local = Rng::stream(seed, c as u64);
        let mut tr = Trace::new(arch);
        let mut delta = vec![0.0; k];
        let mut g = vec![0.0; p];
        for r in rows {
            forward(arch, model.params(), inputs.row(r), None, &mut tr);
            for _ in 0..samples_per_input {
                let y = local.categorical(&tr.probs);
                score(arch, model.params(), &mut tr, y, &mut delta, &mut g);
                rank_one_upper(buf, &g, 1.0);
            }
        }
    });
    let n = inputs.rows() * samples_per_input;
    Ok(FimEstimate {
        kind: FimKind::MonteCarlo,
        full: Some(upper_to_symmetric(p, sum, 1.0 / n as f64)),
        kfac_blocks: None,
        n_samples: n,
        arch: arch.clone(),
    })
}

/// K-FAC factors with the class expectation in `G` taken exactly.
pub fn kfac_fim(model: &MlpModel, inputs: &DenseMatrix) -> Result<FimEstimate> {
    kfac_impl(model, inputs, None)
}

/// K-FAC under the dropout distribution: every input gets a fresh
/// Bernoulli(`rate`) hidden-unit pattern with inverted scaling, drawn from
/// per-chunk streams of `seed`.
pub fn kfac_fim_dropout(model: &MlpModel, inputs: &DenseMatrix, rate: f64, seed: u64) -> Result<FimEstimate> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
    }
    if rate == 0.0 {
        return kfac_fim(model, inputs);
    }
    kfac_impl(model, inputs, Some((rate, seed)))
}

fn kfac_impl(model: &MlpModel, inputs: &DenseMatrix, dropout: Option<(f64, u64)>) -> Result<FimEstimate> {
    check_inputs(model, inputs)?;
    let arch = model.arch();
    let k = arch.n_classes();
    let a_dims: Vec<usize> = arch.layers().iter().map(|l| l.n_in + 1).collect();
    let g_dims: Vec<usize> = arch.layers().iter().map(|l| l.n_out).collect();
    let mut offsets = Vec::new();
    let mut len = 0;
    for (&a, &g) in a_dims.iter().zip(&g_dims) {
        offsets.push((len, len + a * a));
        len += a * a + g * g;
    }
    let last = arch.n_layers() - 1;
    let sum = chunked_sum(inputs.rows(), len, |c, rows, buf| {
        let mut tr = Trace::new(arch);
        let mut delta = vec![0.0; k];
        let mut aug = Vec::new();
        let mut local = dropout.map(|(_, seed)| Rng::stream(seed, c as u64));
        for r in rows {
            let scales = match (&mut local, dropout) {
                (Some(rng), Some((rate, _))) => Some(crate::models::draw_unit_scales(arch, rate, rng)),
                _ => None,
            };
            let scales = scales.as_deref();
            forward(arch, model.params(), inputs.row(r), scales, &mut tr);
            for (l, &(ao, _)) in offsets.iter().enumerate() {
                aug.clear();
                aug.extend_from_slice(&tr.acts[l]);
                aug.push(1.0);
                let n = aug.len();
                rank_one_upper(&mut buf[ao..ao + n * n], &aug, 1.0);
            }
            // Output layer: Σ_y p_y (e_y − p)(e_y − p)ᵀ = diag(p) − p pᵀ.
            let (_, go) = offsets[last];
            let probs = tr.probs.clone();
            for i in 0..k {
                buf[go + i * k + i] += probs[i];
            }
            rank_one_upper(&mut buf[go..go + k * k], &probs, -1.0);
            if last == 0 {
                continue;
            }
            for (y, &py) in probs.iter().enumerate() {
                if py == 0.0 {
                    continue;
                }
                delta.iter_mut().zip(&probs).for_each(|(d, &p)| *d = -p);
                delta[y] += 1.0;
                backward(arch, model.params(), &mut tr, &delta, scales, None);
                for l in 0..last {
                    let (_, gl) = offsets[l];
                    let n = g_dims[l];
                    rank_one_upper(&mut buf[gl..gl + n * n], &tr.deltas()[l], py);
                }
            }
        }
    });
    let scale = 1.0 / inputs.rows() as f64;
    let blocks = offsets
        .iter()
        .zip(a_dims.iter().zip(&g_dims))
        .map(|(&(ao, go), (&a, &g))| KfacBlock {
            a: upper_to_symmetric(a, sum[ao..ao + a * a].to_vec(), scale),
            g: upper_to_symmetric(g, sum[go..go + g * g].to_vec(), scale),
        })
        .collect();
    Ok(FimEstimate {
        kind: FimKind::Kfac,
        full: None,
        kfac_blocks: Some(blocks),
        n_samples: inputs.rows(),
        arch: arch.clone(),
    })
}

/// Penalty `Φ(I(θ))` added to the training loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PhiRegularizer {
    /// `μ · ‖I(θ)‖`.
    FimNorm { mu: f64, norm: NormKind },
    /// `δᵀ I(θ) δ` for a fixed displacement `δ`.
    Distill { delta: Vec<f64> },
    /// `λ²C/(8n) + ln((δᵀIδ + 1/ε)/λ)`.
    PacBayes {
        lambda: f64,
        c: f64,
        n: usize,
        epsilon: f64,
        delta: Vec<f64>,
    },
}

impl PhiRegularizer {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhiRegularizer::FimNorm { mu, .. } if !(*mu >= 0.0) || !mu.is_finite() => {
                Err(Error::Config(format!("μ must be finite and nonnegative, got {mu}")))
            }
            PhiRegularizer::PacBayes { lambda, n, epsilon, .. } if !(*lambda > 0.0) || *n == 0 || !(*epsilon > 0.0) => {
                Err(Error::Config("PAC-Bayes penalty needs λ > 0, n ≥ 1 and ε > 0".into()))
            }
            _ => Ok(()),
        }
    }

    /// True when the penalty is identically zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, PhiRegularizer::FimNorm { mu, .. } if *mu == 0.0)
    }
}

/// Evaluates `Φ` on an estimate at parameters `theta`.
pub fn phi_value(reg: &PhiRegularizer, est: &FimEstimate, theta: &[f64]) -> Result<f64> {
    reg.validate()?;
    if theta.len() != est.param_count() {
        return Err(Error::Shape(format!(
            "θ of length {}, estimate covers {} parameters",
            theta.len(),
            est.param_count()
        )));
    }
    match reg {
        PhiRegularizer::FimNorm { mu, norm } => Ok(mu * fim_norm(est, *norm)?),
        PhiRegularizer::Distill { delta } => est.quadratic_form(delta),
        PhiRegularizer::PacBayes {
            lambda,
            c,
            n,
            epsilon,
            delta,
        } => {
            let kl = est.quadratic_form(delta)?;
            let arg = (kl + 1.0 / epsilon) / lambda;
            if !(arg > 0.0) {
                return Err(Error::Domain(format!("PAC-Bayes log argument {arg} is not positive")));
            }
            Ok(lambda * lambda * c / (8.0 * *n as f64) + arg.ln())
        }
    }
}

/// `∇_θ Φ(I(θ))` by central differences, with `I` the K-FAC estimate on the
/// fixed minibatch `batch`.
pub fn phi_gradient(reg: &PhiRegularizer, arch: &Architecture, theta: &[f64], batch: &Dataset) -> Result<Vec<f64>> {
    if theta.len() > PHI_MAX_PARAMS {
        return Err(Error::Capacity {
            what: "parameters for Φ gradients",
            actual: theta.len(),
            limit: PHI_MAX_PARAMS,
        });
    }
    let f = |t: &[f64]| -> Result<f64> {
        let m = MlpModel::from_params(arch.clone(), t.to_vec())?;
        phi_value(reg, &kfac_fim(&m, batch.features())?, t)
    };
    try_finite_diff_grad(f, theta, DEFAULT_STEP)
}

/// SGD on `ℓ + Φ` over all coordinates. Requires `cfg.phi`.
pub fn train_with_phi(
    arch: &Architecture,
    data: &Dataset,
    cfg: &crate::models::TrainConfig,
) -> Result<crate::models::TrainOutcome> {
    if cfg.phi.is_none() {
        return Err(Error::Config("train_with_phi needs a Φ regularizer".into()));
    }
    crate::models::train_projection(arch, data, &crate::mask::DropoutMask::full(arch.param_count()), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Activation;
    use crate::numerics::kron;

    fn softmax_regression(rng: &mut Rng, d: usize, k: usize) -> MlpModel {
        let mut m = MlpModel::zeros(Architecture::linear(d, k).unwrap());
        m.params_mut().iter_mut().for_each(|v| *v = rng.normal());
        m
    }

    #[test]
    fn logistic_example() {
        let m = MlpModel::zeros(Architecture::linear(2, 2).unwrap());
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let f = exact_fim(&m, &x).unwrap().full.unwrap();
        // Per-class parameters (w_y1, w_y2, b_y): cov(e_y) ⊗ x̃x̃ᵀ with x̃ = (1,0,1).
        let w = |o: usize, i: usize| o * 2 + i;
        let b = |o: usize| 4 + o;
        assert!((f[(w(0, 0), w(0, 0))] - 0.25).abs() < 1e-15);
        assert!((f[(w(0, 0), b(0))] - 0.25).abs() < 1e-15);
        assert!((f[(b(0), b(0))] - 0.25).abs() < 1e-15);
        assert!((f[(w(0, 0), w(1, 0))] + 0.25).abs() < 1e-15);
        assert_eq!(f[(w(0, 1), w(0, 1))], 0.0);
    }

    #[test]
    fn softmax_regression_closed_form() {
        let mut rng = Rng::new(4);
        let m = softmax_regression(&mut rng, 2, 3);
        let x = DenseMatrix::from_fn(5, 2, |_, _| rng.normal());
        let f = exact_fim(&m, &x).unwrap().full.unwrap();
        let lay = m.arch().layer(0);
        let idx = |o: usize, i: usize| if i < 2 { lay.weight_index(o, i) } else { lay.bias_index(o) };
        let mut expect = DenseMatrix::zeros(9, 9);
        for r in 0..5 {
            let p = m.predict(x.row(r)).unwrap();
            let xt = [x[(r, 0)], x[(r, 1)], 1.0];
            for o in 0..3 {
                for o2 in 0..3 {
                    let c = if o == o2 { p.probs()[o] } else { 0.0 } - p.probs()[o] * p.probs()[o2];
                    for i in 0..3 {
                        for i2 in 0..3 {
                            expect[(idx(o, i), idx(o2, i2))] += c * xt[i] * xt[i2] / 5.0;
                        }
                    }
                }
            }
        }
        assert!(f.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn kfac_is_exact_for_one_input_one_layer() {
        let mut rng = Rng::new(8);
        let m = softmax_regression(&mut rng, 3, 4);
        let x = DenseMatrix::from_fn(1, 3, |_, _| rng.normal());
        let e = exact_fim(&m, &x).unwrap().full.unwrap();
        let k = kfac_fim(&m, &x).unwrap().materialize().unwrap();
        assert!(e.sub(&k).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn kfac_zero_network_a_is_input_second_moment() {
        let arch = Architecture::new(vec![2, 3, 2], Activation::Sigmoid).unwrap();
        let m = MlpModel::zeros(arch);
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let est = kfac_fim(&m, &x).unwrap();
        let a = &est.kfac_blocks.as_ref().unwrap()[0].a;
        assert!((a[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((a[(0, 1)] - 0.5 * (2.0 - 0.5)).abs() < 1e-15);
        assert!((a[(2, 2)] - 1.0).abs() < 1e-15);
        assert!((a[(1, 2)] - 1.25).abs() < 1e-15);
    }

    #[test]
    fn kfac_norms_match_materialized() {
        let mut rng = Rng::new(6);
        let arch = Architecture::new(vec![3, 4, 3], Activation::Relu).unwrap();
        let m = MlpModel::init(arch, &mut rng);
        let x = DenseMatrix::from_fn(10, 3, |_, _| rng.normal());
        let est = kfac_fim(&m, &x).unwrap();
        let dense = est.materialize().unwrap();
        assert!((fim_norm(&est, NormKind::Frobenius).unwrap() - dense.frobenius_norm()).abs() < 1e-10);
        assert!((fim_norm(&est, NormKind::Trace).unwrap() - dense.trace()).abs() < 1e-10);
        let delta: Vec<f64> = (0..m.param_count()).map(|_| rng.normal()).collect();
        let q = est.quadratic_form(&delta).unwrap();
        assert!((q - dense.quadratic_form(&delta).unwrap()).abs() < 1e-10 * q.abs().max(1.0));
        assert!(est.is_psd(1e-8).unwrap());
    }

    #[test]
    fn kronecker_norm_identities() {
        let a = DenseMatrix::identity(2);
        let g = DenseMatrix::identity(3);
        let est = FimEstimate {
            kind: FimKind::Kfac,
            full: None,
            kfac_blocks: Some(vec![KfacBlock { a: a.clone(), g: g.clone() }]),
            n_samples: 1,
            arch: Architecture::linear(1, 3).unwrap(),
        };
        assert!((fim_norm(&est, NormKind::Frobenius).unwrap() - 6.0_f64.sqrt()).abs() < 1e-15);
        assert!((kron(&a, &g).unwrap().frobenius_norm() - 6.0_f64.sqrt()).abs() < 1e-15);
        let full = FimEstimate {
            kind: FimKind::Exact,
            full: Some(DenseMatrix::identity(3)),
            kfac_blocks: None,
            n_samples: 1,
            arch: Architecture::linear(1, 1).unwrap(),
        };
        assert!((fim_norm(&full, NormKind::Frobenius).unwrap() - 3.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(fim_norm(&full, NormKind::Trace).unwrap(), 3.0);
        assert!((fim_norm(&full, NormKind::Spectral).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phi_examples() {
        let est = FimEstimate {
            kind: FimKind::Exact,
            full: Some(DenseMatrix::identity(2)),
            kfac_blocks: None,
            n_samples: 1,
            arch: Architecture::linear(1, 1).unwrap(),
        };
        let theta = [0.0, 0.0];
        let d = |delta: Vec<f64>| phi_value(&PhiRegularizer::Distill { delta }, &est, &theta).unwrap();
        assert_eq!(d(vec![0.0, 0.0]), 0.0);
        assert!((d(vec![0.1, 0.0]) - 0.01).abs() < 1e-15);
        let pb = PhiRegularizer::PacBayes {
            lambda: 1.0,
            c: 0.0,
            n: 1,
            epsilon: 1.0,
            delta: vec![0.0, 0.0],
        };
        assert_eq!(phi_value(&pb, &est, &theta).unwrap(), 0.0);
        let fim_norm_reg = PhiRegularizer::FimNorm {
            mu: 0.5,
            norm: NormKind::Trace,
        };
        assert_eq!(phi_value(&fim_norm_reg, &est, &theta).unwrap(), 1.0);
    }

    #[test]
    fn mc_fim_is_seeded() {
        let mut rng = Rng::new(1);
        let m = softmax_regression(&mut rng, 2, 3);
        let x = DenseMatrix::from_fn(7, 2, |_, _| rng.normal());
        let a = mc_fim(&m, &x, 5, &mut Rng::new(9)).unwrap();
        let b = mc_fim(&m, &x, 5, &mut Rng::new(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dense_guard_applies() {
        let m = MlpModel::zeros(Architecture::linear(400, 10).unwrap());
        let x = DenseMatrix::zeros(1, 400);
        assert!(matches!(exact_fim(&m, &x), Err(Error::Capacity { .. })));
        assert!(kfac_fim(&m, &x).is_ok());
    }
}
