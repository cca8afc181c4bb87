//! Subcommand implementations. Reports go to stdout; files go under `--out`.

use std::f64::consts::PI;
use std::fs;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use geodrop::ensemble::{run_ensemble, EnsembleSpec, WeightMode};
use geodrop::experiment::{rows_to_csv, run_sweep, run_trial_with_model, summarize, summary_to_csv, write_outputs, SweepConfig};
use geodrop::fim::{exact_fim, fim_norm, kfac_fim, mc_fim, FimEstimate, NormKind};
use geodrop::geometry::{
    curvature_report, second_fundamental_form, volume_ratio, Christoffel, Euclidean, FnEmbedding, GaussianFisher,
    LeviCivita, MetricField, RoundSphere,
};
use geodrop::mixtures::{alpha_integrate, argmin_weighted_divergence, Categorical, WeightVector};
use geodrop::models::{load_checkpoint, save_checkpoint, Architecture, MaskScheme, MlpModel, TrainConfig};
use geodrop::numerics::Rng;
use geodrop::{Error, Result};

use crate::config::{parse_list, Settings};
use crate::expr::{parse_point, ExprMetric};

fn architecture(s: &Settings, input_dim: usize, classes: usize) -> Result<Architecture> {
    let mut sizes = vec![input_dim];
    sizes.extend(&s.hidden);
    sizes.push(classes);
    Architecture::new(sizes, s.activation)
}

fn train_config(s: &Settings) -> TrainConfig {
    TrainConfig {
        learning_rate: s.learning_rate,
        batch_size: s.batch_size,
        epochs: s.epochs,
        seed: s.seed,
        ..TrainConfig::default()
    }
}

fn sweep_config(s: &Settings, arch: Architecture) -> SweepConfig {
    SweepConfig {
        arch,
        rates: s.rates.clone(),
        trials: s.trials,
        seed: s.seed,
        train: train_config(s),
        norm: s.norm,
        fim_inputs: s.fim_inputs,
        fim_measurement: s.fim_measurement,
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dropout rate used during training.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
    /// Write the trained parameters here.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

/// Trial 0 of the sweep at a single rate, so `train` and `sweep` agree.
pub fn train(s: &Settings, a: &TrainArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.rate) {
        return Err(Error::Config(format!("dropout rate {} outside [0, 1)", a.rate)));
    }
    let (train, test, desc) = s.load_data()?;
    let cfg = sweep_config(s, architecture(s, train.dim(), train.n_classes())?);
    cfg.train.validate()?;
    let (row, model) = run_trial_with_model(&cfg, &train, &test, a.rate, 0)?;
    println!("# data: {desc}");
    print!("{}", rows_to_csv(std::slice::from_ref(&row)));
    match (model, &a.checkpoint) {
        (Some(m), Some(path)) => {
            save_checkpoint(&m, path)?;
            println!("# checkpoint: {}", path.display());
        }
        (None, _) => {
            return Err(Error::Numerical("training diverged; no checkpoint written".into()));
        }
        _ => {}
    }
    Ok(())
}

pub fn sweep(s: &Settings) -> Result<()> {
    let (train, test, desc) = s.load_data()?;
    let cfg = sweep_config(s, architecture(s, train.dim(), train.n_classes())?);
    let rows = run_sweep(&cfg, &train, &test)?;
    let meta = vec![("data".to_string(), desc)];
    let paths = write_outputs(&s.out, &cfg, &rows, &meta)?;
    print!("{}", summary_to_csv(&summarize(&rows)));
    for p in [&paths.csv, &paths.summary, &paths.svg, &paths.metadata] {
        println!("# wrote {}", p.display());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct EnsembleArgs {
    /// Number of sampled masks (members).
    #[arg(long, default_value_t = 8)]
    masks: usize,
    /// Drop probability per unit or coordinate.
    #[arg(long, default_value_t = 0.5)]
    rate: f64,
    /// unit or coordinate.
    #[arg(long, default_value = "unit")]
    scheme: String,
    /// uniform, likelihood, or a comma-separated weight list.
    #[arg(long, default_value = "uniform")]
    weights: String,
}

pub fn ensemble(s: &Settings, a: &EnsembleArgs) -> Result<()> {
    if !(0.0..1.0).contains(&a.rate) {
        return Err(Error::Config(format!("dropout rate {} outside [0, 1)", a.rate)));
    }
    let weights = match a.weights.as_str() {
        "uniform" => WeightMode::Uniform,
        "likelihood" => WeightMode::MaskLikelihood,
        list => WeightMode::Explicit {
            weights: WeightVector::new(parse_list("weights", list)?)?,
        },
    };
    let (train, test, desc) = s.load_data()?;
    let arch = architecture(s, train.dim(), train.n_classes())?;
    let spec = EnsembleSpec {
        n_masks: a.masks,
        weights,
        scheme: a.scheme.parse::<MaskScheme>()?,
        rate: a.rate,
        alpha: s.alpha,
        train: train_config(s),
    };
    let mut rng = Rng::new(s.seed);
    let result = run_ensemble(&arch, &train, &test, &spec, &mut rng)?;
    fs::create_dir_all(&s.out)?;
    let path = s.out.join("ensemble.json");
    fs::write(&path, result.to_json()?)?;
    println!("# data: {desc}");
    println!("member,weight,kept,loss,accuracy");
    for (k, m) in result.member_metrics.iter().enumerate() {
        println!("{k},{},{},{},{}", result.weights[k], result.kept_counts[k], m.loss, m.accuracy);
    }
    let (av, it) = (result.averaged_metrics, result.integrated_metrics);
    println!("averaged,,,{},{}", av.loss, av.accuracy);
    println!("integrated(alpha={}),,,{},{}", s.alpha, it.loss, it.accuracy);
    println!("# wrote {}", path.display());
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Estimator {
    Exact,
    Mc,
    Kfac,
}

#[derive(Args, Debug)]
pub struct FimArgs {
    #[arg(long, value_enum, default_value_t = Estimator::Kfac)]
    estimator: Estimator,
    /// Label samples per input for the Monte-Carlo estimator.
    #[arg(long, default_value_t = 1)]
    samples: usize,
    /// Measure a saved model instead of training one.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Dropout rate when a model is trained here.
    #[arg(long, default_value_t = 0.0)]
    rate: f64,
}

pub fn fim(s: &Settings, a: &FimArgs) -> Result<()> {
    let (train, test, desc) = s.load_data()?;
    let model: MlpModel = match &a.checkpoint {
        Some(path) => {
            let m = load_checkpoint(path)?;
            if m.arch().input_dim() != train.dim() || m.arch().n_classes() != train.n_classes() {
                return Err(Error::Config(format!(
                    "checkpoint expects {} inputs and {} classes, data has {} and {}",
                    m.arch().input_dim(),
                    m.arch().n_classes(),
                    train.dim(),
                    train.n_classes()
                )));
            }
            m
        }
        None => {
            if !(0.0..1.0).contains(&a.rate) {
                return Err(Error::Config(format!("dropout rate {} outside [0, 1)", a.rate)));
            }
            let cfg = sweep_config(s, architecture(s, train.dim(), train.n_classes())?);
            cfg.train.validate()?;
            run_trial_with_model(&cfg, &train, &test, a.rate, 0)?
                .1
                .ok_or_else(|| Error::Numerical("training diverged".into()))?
        }
    };
    let inputs = train.head(s.fim_inputs);
    let est: FimEstimate = match a.estimator {
        Estimator::Exact => exact_fim(&model, inputs.features())?,
        Estimator::Mc => mc_fim(&model, inputs.features(), a.samples, &mut Rng::new(s.seed))?,
        Estimator::Kfac => kfac_fim(&model, inputs.features())?,
    };
    println!("# data: {desc}");
    println!("# params={} inputs={}", model.param_count(), inputs.len());
    println!("norm,value");
    for n in [NormKind::Frobenius, NormKind::Trace, NormKind::Spectral] {
        println!("{n},{}", fim_norm(&est, n)?);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Family {
    Gaussian,
    Sphere,
    Euclidean,
    Custom,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Quantity {
    Christoffel,
    Torsion,
    Riemann,
    Scalar,
    VolumeRatio,
}

#[derive(Args, Debug)]
pub struct GeometryArgs {
    #[arg(long, value_enum)]
    family: Family,
    /// Comma-separated coordinates; expressions such as `pi/4` are allowed.
    #[arg(long, allow_hyphen_values = true)]
    point: String,
    #[arg(long, value_enum, default_value_t = Quantity::Scalar)]
    quantity: Quantity,
    /// Geodesic ball radius for `volume-ratio`.
    #[arg(long, default_value_t = 0.2)]
    radius: f64,
    /// Dimension of the euclidean family.
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Metric definition for the custom family.
    #[arg(long)]
    metric_file: Option<PathBuf>,
}

fn print_christoffel(label: &str, c: &Christoffel) {
    let n = c.dim();
    println!("{label},k,i,j,value");
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                println!("{label},{k},{i},{j},{}", c[(k, i, j)]);
            }
        }
    }
}

pub fn geometry(a: &GeometryArgs) -> Result<()> {
    let point = parse_point(&a.point)?;
    let metric: Box<dyn MetricField> = match a.family {
        Family::Gaussian => Box::new(GaussianFisher),
        Family::Sphere => {
            if point.len() == 2 && !(point[0] > 0.0 && point[0] < PI) {
                return Err(Error::Domain(format!("polar angle must lie in (0, π), got {}", point[0])));
            }
            Box::new(RoundSphere)
        }
        Family::Euclidean => Box::new(Euclidean { dim: a.dim }),
        Family::Custom => {
            let path = a
                .metric_file
                .as_ref()
                .ok_or_else(|| Error::Config("--family custom needs --metric-file".into()))?;
            Box::new(ExprMetric::from_file(path)?)
        }
    };
    if point.len() != metric.dim() {
        return Err(Error::Config(format!(
            "point has {} coordinates, family has dimension {}",
            point.len(),
            metric.dim()
        )));
    }
    let lc = LeviCivita::new(metric.as_ref());
    match a.quantity {
        Quantity::Christoffel => print_christoffel("gamma", &geodrop::geometry::levi_civita(metric.as_ref(), &point)?),
        Quantity::Torsion => print_christoffel("torsion", &curvature_report(metric.as_ref(), &lc, &point)?.torsion),
        Quantity::Riemann => {
            let r = curvature_report(metric.as_ref(), &lc, &point)?.riemann;
            let n = r.dim();
            println!("riemann,r,i,j,k,value");
            for a in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            println!("riemann,{a},{i},{j},{k},{}", r[(a, i, j, k)]);
                        }
                    }
                }
            }
        }
        Quantity::Scalar => {
            println!("scalar,{}", curvature_report(metric.as_ref(), &lc, &point)?.scalar);
        }
        Quantity::VolumeRatio => {
            let scalar = curvature_report(metric.as_ref(), &lc, &point)?.scalar;
            println!("scalar,{scalar}");
            println!("radius,{}", a.radius);
            println!("volume_ratio,{}", volume_ratio(scalar, metric.dim(), a.radius)?);
        }
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct AlphaMixArgs {
    /// One distribution as a comma-separated probability list; repeat the flag.
    #[arg(long = "dist", required = true)]
    dists: Vec<String>,
    /// Comma-separated mixture weights (default uniform).
    #[arg(long)]
    weights: Option<String>,
}

fn fmt_probs(c: &Categorical) -> String {
    c.probs().iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

pub fn alpha_mix(s: &Settings, a: &AlphaMixArgs) -> Result<()> {
    let dists = a
        .dists
        .iter()
        .map(|d| Categorical::new(parse_list("dist", d)?))
        .collect::<Result<Vec<_>>>()?;
    let w = match &a.weights {
        Some(list) => WeightVector::new(parse_list("weights", list)?)?,
        None => WeightVector::uniform(dists.len()),
    };
    let mixed = alpha_integrate(&dists, &w, s.alpha)?;
    let oracle = argmin_weighted_divergence(&dists, &w, s.alpha, 1e-12)?;
    println!("alpha,{}", s.alpha);
    println!("integrated,{}", fmt_probs(&mixed));
    println!("argmin,{}", fmt_probs(&oracle));
    println!("gap,{}", mixed.max_abs_diff(&oracle));
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Embedding {
    /// `(u, v) ↦ (u, v, 0)`.
    Plane,
    /// `t ↦ (t, t²)`.
    Parabola,
    /// `t ↦ (cos t, sin t)`.
    Circle,
    /// Unit sphere in polar coordinates.
    Sphere,
    /// `(u, v) ↦ (u, v, u² + v²)`.
    Paraboloid,
}

#[derive(Args, Debug)]
pub struct SffArgs {
    #[arg(long, value_enum)]
    embedding: Embedding,
    #[arg(long, allow_hyphen_values = true)]
    point: String,
}

pub fn sff(a: &SffArgs) -> Result<()> {
    let point = parse_point(&a.point)?;
    let family: FnEmbedding<Box<dyn Fn(&[f64]) -> Vec<f64>>> = match a.embedding {
        Embedding::Plane => FnEmbedding::new(2, 3, Box::new(|t: &[f64]| vec![t[0], t[1], 0.0])),
        Embedding::Parabola => FnEmbedding::new(1, 2, Box::new(|t: &[f64]| vec![t[0], t[0] * t[0]])),
        Embedding::Circle => FnEmbedding::new(1, 2, Box::new(|t: &[f64]| vec![t[0].cos(), t[0].sin()])),
        Embedding::Sphere => FnEmbedding::new(
            2,
            3,
            Box::new(|t: &[f64]| vec![t[0].sin() * t[1].cos(), t[0].sin() * t[1].sin(), t[0].cos()]),
        ),
        Embedding::Paraboloid => {
            FnEmbedding::new(2, 3, Box::new(|t: &[f64]| vec![t[0], t[1], t[0] * t[0] + t[1] * t[1]]))
        }
    };
    let expected = geodrop::geometry::EmbeddedFamily::param_dim(&family);
    if point.len() != expected {
        return Err(Error::Config(format!(
            "point has {} coordinates, embedding has {expected} parameters",
            point.len()
        )));
    }
    let form = second_fundamental_form(&family, &point)?;
    let eig: Vec<String> = form.eigenvalues.iter().map(f64::to_string).collect();
    println!("eigenvalues,{}", eig.join(","));
    println!("norm,{}", form.norm);
    Ok(())
}
