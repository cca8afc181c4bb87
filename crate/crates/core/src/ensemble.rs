//! Dropout ensembles: projections onto masked submanifolds, recombined by
//! parameter averaging and by α-integration of predictive distributions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::DropoutMask;
use crate::mixtures::{alpha_integrate, Categorical, WeightVector};
use crate::models::{
    mask_log_likelihood, sample_masks, train_projection, Architecture, Dataset, MaskScheme, MlpModel, TrainConfig,
};
use crate::numerics::Rng;

/// How member weights are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum WeightMode {
    /// `w_k = 1/K`.
    Uniform,
    Explicit { weights: WeightVector },
    /// `w_k ∝` probability of mask `k` under independent Bernoulli drops.
    MaskLikelihood,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub n_masks: usize,
    pub weights: WeightMode,
    pub scheme: MaskScheme,
    pub rate: f64,
    pub alpha: f64,
    pub train: TrainConfig,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_masks == 0 {
            return Err(Error::Config("an ensemble needs at least one mask".into()));
        }
        if let WeightMode::Explicit { weights } = &self.weights {
            if weights.len() != self.n_masks {
                return Err(Error::Config(format!(
                    "{} explicit weights for {} masks",
                    weights.len(),
                    self.n_masks
                )));
            }
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub architecture: Architecture,
    pub alpha: f64,
    pub weights: Vec<f64>,
    pub kept_counts: Vec<usize>,
    pub members: Vec<Vec<f64>>,
    /// `θ*_D = Σ_k w_k θ*_k`.
    pub averaged: Vec<f64>,
    pub member_metrics: Vec<Metrics>,
    pub averaged_metrics: Metrics,
    pub integrated_metrics: Metrics,
}

impl EnsembleResult {
    /// Largest deviation between the stored average and `Σ_k w_k θ*_k`.
    pub fn average_residual(&self) -> f64 {
        let again = weighted_average(&self.members, &self.weights);
        again
            .iter()
            .zip(&self.averaged)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("cannot serialize report: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad ensemble report: {e}")))?;
        if r.average_residual() > 1e-12 {
            return Err(Error::Config("report average does not match its members".into()));
        }
        Ok(r)
    }
}

fn weighted_average(members: &[Vec<f64>], w: &[f64]) -> Vec<f64> {
    let mut avg = vec![0.0; members.first().map_or(0, Vec::len)];
    for (m, &wk) in members.iter().zip(w) {
        for (a, &t) in avg.iter_mut().zip(m) {
            *a += wk * t;
        }
    }
    avg
}

/// Trains each member with [`train_projection`].
pub fn run_ensemble(arch: &Architecture, train: &Dataset, test: &Dataset, spec: &EnsembleSpec, rng: &mut Rng) -> Result<EnsembleResult> {
    run_ensemble_with(arch, train, test, spec, rng, |mask, cfg| {
        Ok(train_projection(arch, train, mask, cfg)?.model.into_params())
    })
}

/// Ensemble with an injected member trainer `(mask, cfg) → θ*_k`. Members
/// train in parallel; member `k` uses seed stream `k` of a seed drawn from
/// `rng`.
pub fn run_ensemble_with<F>(
    arch: &Architecture,
    _train: &Dataset,
    test: &Dataset,
    spec: &EnsembleSpec,
    rng: &mut Rng,
    trainer: F,
) -> Result<EnsembleResult>
where
    F: Fn(&DropoutMask, &TrainConfig) -> Result<Vec<f64>> + Sync,
{
    spec.validate()?;
    let masks = sample_masks(arch, spec.rate, spec.n_masks, rng, spec.scheme)?;
    let base = rng.next_u64();
    let members: Vec<Vec<f64>> = masks
        .par_iter()
        .enumerate()
        .map(|(k, mask)| {
            let cfg = TrainConfig {
                seed: Rng::stream(base, k as u64).next_u64(),
                ..spec.train.clone()
            };
            let theta = trainer(mask, &cfg).map_err(|e| Error::Member {
                index: k,
                source: Box::new(e),
            })?;
            if theta.len() != arch.param_count() {
                return Err(Error::Member {
                    index: k,
                    source: Box::new(Error::Shape("trainer returned the wrong parameter count".into())),
                });
            }
            Ok(theta)
        })
        .collect::<Result<_>>()?;
    let w = match &spec.weights {
        WeightMode::Uniform => WeightVector::uniform(spec.n_masks),
        WeightMode::Explicit { weights } => weights.clone(),
        WeightMode::MaskLikelihood => {
            let logs = masks
                .iter()
                .map(|m| mask_log_likelihood(arch, m, spec.rate, spec.scheme))
                .collect::<Result<Vec<_>>>()?;
            WeightVector::from_log_weights(&logs)?
        }
    };
    let averaged = weighted_average(&members, w.as_slice());
    let member_metrics = members
        .iter()
        .map(|t| metrics_of(&MlpModel::from_params(arch.clone(), t.clone())?, test))
        .collect::<Result<Vec<_>>>()?;
    let averaged_metrics = metrics_of(&MlpModel::from_params(arch.clone(), averaged.clone())?, test)?;
    let integrated_metrics = integrated_metrics(arch, &members, &w, spec.alpha, test)?;
    Ok(EnsembleResult {
        architecture: arch.clone(),
        alpha: spec.alpha,
        weights: w.as_slice().to_vec(),
        kept_counts: masks.iter().map(DropoutMask::kept_count).collect(),
        members,
        averaged,
        member_metrics,
        averaged_metrics,
        integrated_metrics,
    })
}

fn metrics_of(model: &MlpModel, test: &Dataset) -> Result<Metrics> {
    let (loss, accuracy) = model.evaluate(test)?;
    Ok(Metrics { loss, accuracy })
}

fn member_models(arch: &Architecture, members: &[Vec<f64>]) -> Result<Vec<MlpModel>> {
    if members.is_empty() {
        return Err(Error::Domain("no ensemble members".into()));
    }
    members
        .iter()
        .map(|t| MlpModel::from_params(arch.clone(), t.clone()))
        .collect()
}

fn integrate_at(models: &[MlpModel], x: &[f64], w: &WeightVector, alpha: f64) -> Result<Categorical> {
    let preds = models.iter().map(|m| m.predict(x)).collect::<Result<Vec<_>>>()?;
    alpha_integrate(&preds, w, alpha)
}

/// α-integration of the members' predictive distributions at `x`.
pub fn predict_integrated(
    arch: &Architecture,
    members: &[Vec<f64>],
    x: &[f64],
    w: &WeightVector,
    alpha: f64,
) -> Result<Categorical> {
    integrate_at(&member_models(arch, members)?, x, w, alpha)
}

fn integrated_metrics(arch: &Architecture, members: &[Vec<f64>], w: &WeightVector, alpha: f64, test: &Dataset) -> Result<Metrics> {
    let models = member_models(arch, members)?;
    let (mut loss, mut correct) = (0.0, 0usize);
    for i in 0..test.len() {
        let q = integrate_at(&models, test.row(i), w, alpha)?;
        let y = test.label(i);
        loss -= q.probs()[y].max(f64::MIN_POSITIVE).ln();
        correct += usize::from(q.argmax() == y);
    }
    let n = test.len().max(1) as f64;
    Ok(Metrics {
        loss: loss / n,
        accuracy: correct as f64 / n,
    })
}

/// Mean total-variation distance between the parameter-averaged model's
/// prediction and the α-integrated member prediction.
pub fn flatness_gap(arch: &Architecture, members: &[Vec<f64>], w: &WeightVector, data: &Dataset, alpha: f64) -> Result<f64> {
    if members.len() < 2 {
        return Err(Error::Domain("flatness gap needs at least two members".into()));
    }
    if w.len() != members.len() {
        return Err(Error::Shape(format!("{} weights for {} members", w.len(), members.len())));
    }
    if data.is_empty() {
        return Err(Error::Shape("empty dataset".into()));
    }
    let models = member_models(arch, members)?;
    let avg = MlpModel::from_params(arch.clone(), weighted_average(members, w.as_slice()))?;
    let mut total = 0.0;
    for i in 0..data.len() {
        let x = data.row(i);
        total += avg.predict(x)?.total_variation(&integrate_at(&models, x, w, alpha)?);
    }
    Ok(total / data.len() as f64)
}
