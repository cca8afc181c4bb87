use serde::{Deserialize, Serialize};

use super::{Architecture, Dataset, MlpModel};
use crate::error::{Error, Result};
use crate::fim::{phi_gradient, PhiRegularizer, PHI_MAX_PARAMS};
use crate::mask::DropoutMask;
use crate::numerics::Rng;

/// Rows of the fixed minibatch on which the Φ penalty's FIM is measured.
pub const PHI_BATCH: usize = 64;

/// SGD hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Coefficient of `½ l2 ‖θ‖²`.
    pub l2: f64,
    pub phi: Option<PhiRegularizer>,
    /// Hidden-unit drop probability for [`train_dropout`].
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            batch_size: 64,
            epochs: 3,
            seed: 0,
            l2: 0.0,
            phi: None,
            dropout_rate: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::Config(format!("l2 must be nonnegative, got {}", self.l2)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!("dropout rate {} outside [0, 1)", self.dropout_rate)));
        }
        if let Some(phi) = &self.phi {
            phi.validate()?;
        }
        Ok(())
    }
}

/// Result of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub model: MlpModel,
    /// Mean minibatch loss per epoch (Φ excluded).
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

/// Projection onto the masked submanifold: SGD on the cross-entropy over the
/// kept coordinates only. Dropped coordinates are zero from initialization
/// on. Honors `cfg.phi` when set.
pub fn train_projection(arch: &Architecture, data: &Dataset, mask: &DropoutMask, cfg: &TrainConfig) -> Result<TrainOutcome> {
    run(arch, data, mask, cfg, 0.0)
}

/// Standard dropout training: every example in every minibatch gets a fresh
/// Bernoulli(`cfg.dropout_rate`) pattern over hidden units, with inverted
/// scaling `1/(1−p)` on survivors. At rate 0 this is exactly
/// [`train_projection`] with a full mask.
pub fn train_dropout(arch: &Architecture, data: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    run(arch, data, &DropoutMask::full(arch.param_count()), cfg, cfg.dropout_rate)
}

/// Inverted-dropout multipliers per hidden unit: 0 with probability `p`,
/// otherwise `1/(1−p)`.
pub fn draw_unit_scales(arch: &Architecture, p: f64, rng: &mut Rng) -> Vec<Vec<f64>> {
    let keep = 1.0 / (1.0 - p);
    arch.hidden_sizes()
        .iter()
        .map(|&n| (0..n).map(|_| if rng.bernoulli(p) { 0.0 } else { keep }).collect())
        .collect()
}

fn run(arch: &Architecture, data: &Dataset, mask: &DropoutMask, cfg: &TrainConfig, rate: f64) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n_params = arch.param_count();
    if mask.len() != n_params {
        return Err(Error::Shape(format!("mask over {} coordinates, model has {n_params}", mask.len())));
    }
    if data.is_empty() {
        return Err(Error::Shape("empty training set".into()));
    }
    if data.dim() != arch.input_dim() || data.n_classes() != arch.n_classes() {
        return Err(Error::Shape(format!(
            "dataset (d={}, K={}) does not fit architecture {:?}",
            data.dim(),
            data.n_classes(),
            arch.sizes()
        )));
    }
    if cfg.phi.is_some() && n_params > PHI_MAX_PARAMS {
        return Err(Error::Capacity {
            what: "parameters for Φ-regularized training",
            actual: n_params,
            limit: PHI_MAX_PARAMS,
        });
    }

    let mut rng = Rng::new(cfg.seed);
    let mut model = MlpModel::init(arch.clone(), &mut rng);
    mask.apply(model.params_mut());

    if mask.kept_count() == 0 {
        let (loss, _) = model.evaluate(data)?;
        return Ok(TrainOutcome {
            model,
            epoch_losses: vec![loss; cfg.epochs],
            steps: 0,
        });
    }

    let phi_rows: Vec<usize> = (0..data.len().min(PHI_BATCH)).collect();
    let phi_data = cfg.phi.as_ref().map(|_| data.subset(&phi_rows));
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    let mut next = vec![0.0; n_params];

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut sum = 0.0;
        let mut batches = 0;
        for (step, rows) in order.chunks(cfg.batch_size).enumerate() {
            let (loss, mut grad) = if rate > 0.0 {
                let mut draw = |_: usize| draw_unit_scales(arch, rate, &mut rng);
                let (l, mut g) = model.raw_loss_and_grad(data, rows, Some(&mut draw))?;
                mask.apply(&mut g);
                (l, g)
            } else {
                model.loss_and_grad(data, rows, mask)?
            };
            if cfg.l2 > 0.0 {
                for (g, &t) in grad.iter_mut().zip(model.params()) {
                    *g += cfg.l2 * t;
                }
            }
            if let (Some(reg), Some(pd)) = (&cfg.phi, &phi_data) {
                if !reg.is_zero() {
                    let g_phi = phi_gradient(reg, arch, model.params(), pd)?;
                    for (g, v) in grad.iter_mut().zip(g_phi) {
                        *g += v;
                    }
                }
                mask.apply(&mut grad);
            }
            let mut finite = loss.is_finite();
            for ((n, &t), &g) in next.iter_mut().zip(model.params()).zip(&grad) {
                *n = t - cfg.learning_rate * g;
                finite &= n.is_finite();
            }
            if !finite {
                return Err(Error::Diverged {
                    epoch,
                    step,
                    last_finite: model.into_params(),
                });
            }
            model.params_mut().copy_from_slice(&next);
            sum += loss;
            batches += 1;
            steps += 1;
        }
        epoch_losses.push(sum / batches as f64);
    }
    Ok(TrainOutcome {
        model,
        epoch_losses,
        steps,
    })
}
