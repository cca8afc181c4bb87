//! f-interpolation, α-divergences and α-integration of categorical
//! distributions.
//!
//! The α-divergence uses Amari's convention
//! `D_α[p‖q] = 4/(1−α²) (1 − Σ p^{(1−α)/2} q^{(1+α)/2})`, whose limits are
//! `D_{−1}[p‖q] = KL(p‖q)` and `D_1[p‖q] = KL(q‖p)`. Under this convention the
//! α-integration `f_α⁻¹(Σ w_k f_α(p_k))`, renormalized, is the exact minimizer
//! of `Σ w_k D_α[p_k‖q]` over the simplex.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-12;
/// Largest class count accepted by [`argmin_weighted_divergence`].
pub const ORACLE_MAX_CLASSES: usize = 10;

/// Probability vector over `K` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("empty distribution".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::Domain(format!("invalid probability {p}")));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain(format!("probabilities sum to {s}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_unnormalized(weights: Vec<f64>) -> Result<Self> {
        let s: f64 = weights.iter().sum();
        if !(s > 0.0) || !s.is_finite() || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Domain("weights cannot be normalized".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / s).collect(),
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    /// Softmax of a logit vector.
    pub fn softmax(logits: &[f64]) -> Self {
        let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Self {
            probs: e.into_iter().map(|v| v / s).collect(),
        }
    }

    /// Natural parameters relative to the last class, `η_y = ln p_y − ln p_K`.
    pub fn natural_params(&self) -> Result<Vec<f64>> {
        if self.probs.iter().any(|&p| p <= 0.0) {
            return Err(Error::Domain("natural parameters need strictly positive probabilities".into()));
        }
        let last = self.probs[self.probs.len() - 1].ln();
        Ok(self.probs[..self.probs.len() - 1].iter().map(|p| p.ln() - last).collect())
    }

    pub fn from_natural_params(eta: &[f64]) -> Self {
        let mut logits = eta.to_vec();
        logits.push(0.0);
        Self::softmax(&logits)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn argmax(&self) -> usize {
        self.probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Mixture weights: nonnegative, summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Domain("empty weight vector".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("weights must be finite and nonnegative".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::Domain(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { weights })
    }

    /// `w_k = 1/K`.
    pub fn uniform(k: usize) -> Self {
        Self {
            weights: vec![1.0 / k as f64; k],
        }
    }

    /// Normalizes log-weights (softmax), e.g. mask log-likelihoods.
    pub fn from_log_weights(log_w: &[f64]) -> Result<Self> {
        if log_w.is_empty() {
            return Err(Error::Domain("empty weight vector".into()));
        }
        Ok(Self {
            weights: Categorical::softmax(log_w).probs,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

fn exponent(alpha: f64) -> f64 {
    0.5 * (1.0 - alpha)
}

fn is_log(alpha: f64) -> bool {
    alpha == 1.0
}

/// `f_α(a) = a^{(1−α)/2}` for `α ≠ 1`, `ln a` for `α = 1`.
pub fn f_alpha(a: f64, alpha: f64) -> Result<f64> {
    if is_log(alpha) {
        if a > 0.0 {
            return Ok(a.ln());
        }
        return Err(Error::Domain(format!("log branch needs a > 0, got {a}")));
    }
    let e = exponent(alpha);
    if a > 0.0 || (a == 0.0 && e > 0.0) {
        Ok(a.powf(e))
    } else {
        Err(Error::Domain(format!("f_α({a}) undefined for α = {alpha}")))
    }
}

/// Inverse of [`f_alpha`].
pub fn f_alpha_inv(b: f64, alpha: f64) -> Result<f64> {
    if is_log(alpha) {
        return Ok(b.exp());
    }
    let e = exponent(alpha);
    if b > 0.0 || (b == 0.0 && e > 0.0) {
        Ok(b.powf(1.0 / e))
    } else {
        Err(Error::Domain(format!("f_α⁻¹({b}) undefined for α = {alpha}")))
    }
}

/// f-interpolation `f_α⁻¹{(1−λ) f_α(a) + λ f_α(b)}`, optionally multiplied by
/// `c_α = 2^{2/(1−α)}` (`normalized = false`).
pub fn f_mean(a: f64, b: f64, lambda: f64, alpha: f64, normalized: bool) -> Result<f64> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("λ must lie in [0, 1], got {lambda}")));
    }
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("f-mean needs positive arguments, got {a}, {b}")));
    }
    if !normalized && is_log(alpha) {
        return Err(Error::Unsupported("c_α = 2^{2/(1−α)} diverges at α = 1".into()));
    }
    let m = f_alpha_inv((1.0 - lambda) * f_alpha(a, alpha)? + lambda * f_alpha(b, alpha)?, alpha)?;
    if normalized {
        Ok(m)
    } else {
        Ok(2.0_f64.powf(2.0 / (1.0 - alpha)) * m)
    }
}

fn check_same_support_len(p: &Categorical, q: &Categorical) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("distributions over {} and {} classes", p.len(), q.len())));
    }
    Ok(())
}

fn kl(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (y, (&a, &b)) in p.iter().zip(q).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::Domain(format!("KL undefined: class {y} has mass {a} against 0")));
            }
            s += a * (a / b).ln();
        }
    }
    Ok(s.max(0.0))
}

/// `D_α[p‖q]` (Amari convention; see module docs).
pub fn alpha_divergence(p: &Categorical, q: &Categorical, alpha: f64) -> Result<f64> {
    check_same_support_len(p, q)?;
    if alpha == 1.0 {
        return kl(&q.probs, &p.probs);
    }
    if alpha == -1.0 {
        return kl(&p.probs, &q.probs);
    }
    let (ep, eq) = (0.5 * (1.0 - alpha), 0.5 * (1.0 + alpha));
    let mut s = 0.0;
    for (y, (&a, &b)) in p.probs.iter().zip(&q.probs).enumerate() {
        if a == 0.0 && b == 0.0 {
            continue;
        }
        if (a == 0.0 && ep < 0.0) || (b == 0.0 && eq < 0.0) {
            return Err(Error::Domain(format!("D_{alpha} undefined: zero mass at class {y}")));
        }
        s += a.powf(ep) * b.powf(eq);
    }
    Ok((4.0 / (1.0 - alpha * alpha) * (1.0 - s)).max(0.0))
}

/// How the normalizer of an α-integration is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalizer {
    /// `q ∝ f_α⁻¹(Σ w_k f_α(p_k))`: rescale after inverting. Minimizes
    /// `Σ w_k D_α[p_k‖q]` on the simplex.
    Scale,
    /// `q = f_α⁻¹(Σ w_k f_α(p_k) − C)` with `C` found by bisection so the
    /// result sums to one. Coincides with `Scale` at `α = ±1`.
    Shift,
}

fn check_members(dists: &[Categorical], w: &WeightVector) -> Result<usize> {
    let first = dists.first().ok_or_else(|| Error::Domain("no distributions to integrate".into()))?;
    if dists.len() != w.len() {
        return Err(Error::Shape(format!("{} distributions but {} weights", dists.len(), w.len())));
    }
    let k = first.len();
    if dists.iter().any(|d| d.len() != k) {
        return Err(Error::Shape("distributions over different class counts".into()));
    }
    Ok(k)
}

/// Per-class f-means `Σ_k w_k f_α(p_ky)`; zero-weight members are skipped.
fn weighted_f_sums(dists: &[Categorical], w: &WeightVector, alpha: f64, k: usize) -> Result<Vec<f64>> {
    let mut sums = vec![0.0; k];
    for (d, &wk) in dists.iter().zip(w.as_slice()) {
        if wk == 0.0 {
            continue;
        }
        for (s, &p) in sums.iter_mut().zip(d.probs()) {
            *s += wk * f_alpha(p, alpha)?;
        }
    }
    Ok(sums)
}

/// α-integration of categorical distributions.
pub fn alpha_integrate(dists: &[Categorical], w: &WeightVector, alpha: f64) -> Result<Categorical> {
    alpha_integrate_with(dists, w, alpha, Normalizer::Scale)
}

pub fn alpha_integrate_with(
    dists: &[Categorical],
    w: &WeightVector,
    alpha: f64,
    normalizer: Normalizer,
) -> Result<Categorical> {
    let k = check_members(dists, w)?;
    let sums = weighted_f_sums(dists, w, alpha, k)?;
    if is_log(alpha) {
        // Both normalizers reduce to the normalized weighted geometric mean.
        return Ok(Categorical::softmax(&sums));
    }
    if alpha == -1.0 {
        return Categorical::from_unnormalized(sums);
    }
    match normalizer {
        Normalizer::Scale => {
            let inv_e = 1.0 / exponent(alpha);
            let logs: Vec<f64> = sums
                .iter()
                .map(|&s| if s > 0.0 { inv_e * s.ln() } else { f64::NEG_INFINITY })
                .collect();
            if logs.iter().all(|l| *l == f64::NEG_INFINITY) {
                return Err(Error::Domain("all classes have zero mass".into()));
            }
            Ok(Categorical::softmax(&logs))
        }
        Normalizer::Shift => shift_normalize(&sums, alpha),
    }
}

fn shift_normalize(sums: &[f64], alpha: f64) -> Result<Categorical> {
    let e = exponent(alpha);
    let inv = |t: f64| -> f64 {
        if t <= 0.0 {
            if e > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            t.powf(1.0 / e)
        }
    };
    let total = |c: f64| -> f64 { sums.iter().map(|&s| inv(s - c)).sum() };
    let lo_s = sums.iter().copied().fold(f64::INFINITY, f64::min);
    let hi_s = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // total(c) is decreasing in c when e > 0 and increasing when e < 0.
    let (mut lo, mut hi) = if e > 0.0 { (lo_s - 1.0, hi_s) } else { (lo_s - 1.0, lo_s) };
    if e < 0.0 {
        while total(lo) >= 1.0 {
            lo = lo_s - 2.0 * (lo_s - lo);
            if !lo.is_finite() {
                return Err(Error::Numerical("could not bracket the shift normalizer".into()));
            }
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let t = total(mid);
        let too_big = t > 1.0;
        if (e > 0.0) == too_big {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Categorical::from_unnormalized(sums.iter().map(|&s| inv(s - c)).collect())
}

/// Objective `Σ_k w_k D_α[p_k‖q]` and its gradient in `q`.
fn weighted_objective(dists: &[Categorical], w: &[f64], q: &[f64], alpha: f64) -> Result<(f64, Vec<f64>)> {
    let qc = Categorical { probs: q.to_vec() };
    let mut value = 0.0;
    let mut grad = vec![0.0; q.len()];
    for (d, &wk) in dists.iter().zip(w) {
        if wk == 0.0 {
            continue;
        }
        value += wk * alpha_divergence(d, &qc, alpha)?;
        for (y, g) in grad.iter_mut().enumerate() {
            let (p, qy) = (d.probs[y], q[y]);
            *g += wk * if alpha == 1.0 {
                (qy / p).ln() + 1.0
            } else if alpha == -1.0 {
                -p / qy
            } else {
                -(2.0 / (1.0 - alpha)) * p.powf(0.5 * (1.0 - alpha)) * qy.powf(0.5 * (alpha - 1.0))
            };
        }
    }
    Ok((value, grad))
}

fn fw_gap(q: &[f64], grad: &[f64]) -> f64 {
    let mean: f64 = q.iter().zip(grad).map(|(a, b)| a * b).sum();
    mean - grad.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Direct minimizer of `Σ_k w_k D_α[p_k‖q]` over the simplex by exponentiated
/// gradient descent with step control. Stops when the Frank-Wolfe gap
/// `⟨∇F, q⟩ − min_y ∇F_y`, an upper bound on the suboptimality, drops below
/// `tol`.
pub fn argmin_weighted_divergence(
    dists: &[Categorical],
    w: &WeightVector,
    alpha: f64,
    tol: f64,
) -> Result<Categorical> {
    let k = check_members(dists, w)?;
    if k > ORACLE_MAX_CLASSES {
        return Err(Error::Capacity {
            what: "classes",
            actual: k,
            limit: ORACLE_MAX_CLASSES,
        });
    }
    if !(-1.0..1.0).contains(&alpha) {
        for (d, &wk) in dists.iter().zip(w.as_slice()) {
            let strictly_needed = (alpha >= 1.0) && wk > 0.0;
            if strictly_needed && d.probs.iter().any(|&p| p <= 0.0) {
                return Err(Error::Domain(format!("α = {alpha} needs strictly positive members")));
            }
        }
    }
    let w = w.as_slice();
    let mut logits = vec![0.0; k];
    let mut q = Categorical::softmax(&logits).probs;
    let (mut value, mut grad) = weighted_objective(dists, w, &q, alpha)?;
    let mut step = 1.0;
    for _ in 0..500_000 {
        let gap = fw_gap(&q, &grad);
        if gap <= tol {
            return Categorical::from_unnormalized(q);
        }
        loop {
            let trial: Vec<f64> = logits.iter().zip(&grad).map(|(z, g)| z - step * g).collect();
            let tq = Categorical::softmax(&trial).probs;
            let attempt = if tq.iter().all(|&v| v > 0.0) {
                weighted_objective(dists, w, &tq, alpha).ok()
            } else {
                None
            };
            match attempt {
                // Near the optimum the objective stops resolving progress, so
                // ties within a few ulps are settled by the gap instead.
                Some((tv, tg)) if tv < value - 4.0 * f64::EPSILON * value.abs()
                    || (tv <= value + 4.0 * f64::EPSILON * value.abs() && fw_gap(&tq, &tg) < gap) =>
                {
                    let m = trial.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    logits = trial.into_iter().map(|z| z - m).collect();
                    q = tq;
                    value = tv;
                    grad = tg;
                    step *= 1.5;
                    break;
                }
                _ => {
                    step *= 0.5;
                    if step < 1e-300 {
                        // No further progress is representable; accept the
                        // current point if it is already near-stationary.
                        return if gap <= tol.sqrt() {
                            Categorical::from_unnormalized(q)
                        } else {
                            Err(Error::Numerical(format!(
                                "divergence minimizer stalled with gap {:e}",
                                gap
                            )))
                        };
                    }
                }
            }
        }
    }
    Err(Error::Numerical("divergence minimizer hit the iteration cap".into()))
}
