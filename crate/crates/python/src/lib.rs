//! `pygeodrop`: Python bindings over plain lists of floats.

use std::path::PathBuf;

use geodrop::experiment::{run_sweep, RowStatus, SweepConfig};
use geodrop::fim::{exact_fim, fim_norm, kfac_fim, mc_fim, FimEstimate, NormKind};
use geodrop::geometry::{scalar_curvature, volume_ratio, Euclidean, GaussianFisher, MetricField, RoundSphere};
use geodrop::mixtures::{self, Categorical, WeightVector};
use geodrop::models::{self, Activation, Architecture, Dataset, MlpModel, TrainConfig};
use geodrop::numerics::{DenseMatrix, Rng};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(pygeodrop, GeodropError, PyException, "Error raised by the geodrop core.");

fn err(e: geodrop::Error) -> PyErr {
    GeodropError::new_err(e.to_string())
}

fn matrix(rows: Vec<Vec<f64>>) -> PyResult<DenseMatrix> {
    DenseMatrix::from_rows(&rows).map_err(err)
}

fn dataset(features: Vec<Vec<f64>>, labels: Vec<usize>, classes: Option<usize>) -> PyResult<Dataset> {
    let k = classes.unwrap_or_else(|| labels.iter().max().map_or(0, |m| m + 1));
    Dataset::new(matrix(features)?, labels, k).map_err(err)
}

fn categoricals(dists: Vec<Vec<f64>>) -> PyResult<Vec<Categorical>> {
    dists.into_iter().map(|d| Categorical::new(d).map_err(err)).collect()
}

fn weights(w: Option<Vec<f64>>, n: usize) -> PyResult<WeightVector> {
    match w {
        Some(w) => WeightVector::new(w).map_err(err),
        None => Ok(WeightVector::uniform(n)),
    }
}

/// Softmax multilayer perceptron.
#[pyclass(name = "Mlp", module = "pygeodrop")]
struct PyMlp {
    inner: MlpModel,
}

#[pymethods]
impl PyMlp {
    /// Glorot-initialized network with layer widths `sizes`.
    #[new]
    #[pyo3(signature = (sizes, activation = "relu", seed = 0))]
    fn new(sizes: Vec<usize>, activation: &str, seed: u64) -> PyResult<Self> {
        let act: Activation = activation.parse().map_err(err)?;
        let arch = Architecture::new(sizes, act).map_err(err)?;
        Ok(Self {
            inner: MlpModel::init(arch, &mut Rng::new(seed)),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: models::load_checkpoint(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        models::save_checkpoint(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn sizes(&self) -> Vec<usize> {
        self.inner.arch().sizes().to_vec()
    }

    #[getter]
    fn activation(&self) -> String {
        self.inner.arch().activation().to_string()
    }

    #[getter]
    fn params(&self) -> Vec<f64> {
        self.inner.params().to_vec()
    }

    #[setter]
    fn set_params(&mut self, params: Vec<f64>) -> PyResult<()> {
        self.inner = MlpModel::from_params(self.inner.arch().clone(), params).map_err(err)?;
        Ok(())
    }

    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    /// Class probabilities at one input.
    fn predict(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        Ok(self.inner.predict(&x).map_err(err)?.probs().to_vec())
    }

    /// `(mean cross-entropy, accuracy)`.
    fn evaluate(&self, features: Vec<Vec<f64>>, labels: Vec<usize>) -> PyResult<(f64, f64)> {
        let data = dataset(features, labels, Some(self.inner.arch().n_classes()))?;
        self.inner.evaluate(&data).map_err(err)
    }

    /// Fisher information norm on `inputs`. `estimator` is `exact`, `mc` or
    /// `kfac`; `norm` is `frobenius`, `trace` or `spectral`.
    #[pyo3(signature = (inputs, estimator = "kfac", norm = "frobenius", samples = 1, seed = 0))]
    fn fim_norm(&self, inputs: Vec<Vec<f64>>, estimator: &str, norm: &str, samples: usize, seed: u64) -> PyResult<f64> {
        let x = matrix(inputs)?;
        let est: FimEstimate = match estimator {
            "exact" => exact_fim(&self.inner, &x),
            "mc" => mc_fim(&self.inner, &x, samples, &mut Rng::new(seed)),
            "kfac" => kfac_fim(&self.inner, &x),
            other => return Err(GeodropError::new_err(format!("unknown estimator '{other}'"))),
        }
        .map_err(err)?;
        let which: NormKind = norm.parse().map_err(err)?;
        fim_norm(&est, which).map_err(err)
    }

    /// Dense Fisher matrix (small models only).
    #[pyo3(signature = (inputs, estimator = "exact"))]
    fn fim_matrix(&self, inputs: Vec<Vec<f64>>, estimator: &str) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(inputs)?;
        let est = match estimator {
            "exact" => exact_fim(&self.inner, &x),
            "kfac" => kfac_fim(&self.inner, &x),
            other => return Err(GeodropError::new_err(format!("unknown estimator '{other}'"))),
        }
        .map_err(err)?;
        let m = est.materialize().map_err(err)?;
        Ok((0..m.rows()).map(|r| m.row(r).to_vec()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Mlp(sizes={:?}, activation='{}')", self.sizes(), self.activation())
    }
}

/// Trains with per-example hidden-unit dropout at `rate`.
#[pyfunction]
#[pyo3(signature = (sizes, features, labels, rate = 0.0, epochs = 3, learning_rate = 0.1, batch_size = 64, seed = 0, activation = "relu"))]
#[allow(clippy::too_many_arguments)]
fn train(
    sizes: Vec<usize>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    rate: f64,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    seed: u64,
    activation: &str,
) -> PyResult<PyMlp> {
    let arch = Architecture::new(sizes, activation.parse().map_err(err)?).map_err(err)?;
    let data = dataset(features, labels, Some(arch.n_classes()))?;
    let cfg = TrainConfig {
        learning_rate,
        batch_size,
        epochs,
        seed,
        dropout_rate: rate,
        ..TrainConfig::default()
    };
    let out = models::train_dropout(&arch, &data, &cfg).map_err(err)?;
    Ok(PyMlp { inner: out.model })
}

/// Gaussian blobs at simplex vertices: `(features, labels)`.
#[pyfunction]
#[pyo3(signature = (classes, per_class, dim, separation, seed = 0))]
fn synth_blobs(classes: usize, per_class: usize, dim: usize, separation: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let d = models::synth_blobs(classes, per_class, dim, separation, seed).map_err(err)?;
    Ok(((0..d.len()).map(|i| d.row(i).to_vec()).collect(), d.labels().to_vec()))
}

/// Dropout-rate sweep. Returns `(rate, trial, fim_norm, test_accuracy,
/// train_loss, ok)` tuples in rate-major order.
#[pyfunction]
#[pyo3(signature = (train_features, train_labels, test_features, test_labels, hidden, rates, trials = 10, seed = 0, epochs = 3, learning_rate = 0.1, batch_size = 64, norm = "frobenius", fim_inputs = 1000))]
#[allow(clippy::too_many_arguments)]
fn sweep(
    train_features: Vec<Vec<f64>>,
    train_labels: Vec<usize>,
    test_features: Vec<Vec<f64>>,
    test_labels: Vec<usize>,
    hidden: Vec<usize>,
    rates: Vec<f64>,
    trials: usize,
    seed: u64,
    epochs: usize,
    learning_rate: f64,
    batch_size: usize,
    norm: &str,
    fim_inputs: usize,
) -> PyResult<Vec<(f64, usize, f64, f64, f64, bool)>> {
    let train = dataset(train_features, train_labels, None)?;
    let test = dataset(test_features, test_labels, Some(train.n_classes()))?;
    let mut sizes = vec![train.dim()];
    sizes.extend(hidden);
    sizes.push(train.n_classes());
    let cfg = SweepConfig {
        arch: Architecture::new(sizes, Activation::Relu).map_err(err)?,
        rates,
        trials,
        seed,
        train: TrainConfig {
            learning_rate,
            batch_size,
            epochs,
            ..TrainConfig::default()
        },
        norm: norm.parse().map_err(err)?,
        fim_inputs,
        fim_measurement: Default::default(),
    };
    let rows = run_sweep(&cfg, &train, &test).map_err(err)?;
    Ok(rows
        .into_iter()
        .map(|r| (r.rate, r.trial, r.fim_norm, r.test_accuracy, r.train_loss, r.status == RowStatus::Ok))
        .collect())
}

/// Amari α-divergence `D_α[p‖q]`.
#[pyfunction]
fn alpha_divergence(p: Vec<f64>, q: Vec<f64>, alpha: f64) -> PyResult<f64> {
    let (p, q) = (Categorical::new(p).map_err(err)?, Categorical::new(q).map_err(err)?);
    mixtures::alpha_divergence(&p, &q, alpha).map_err(err)
}

/// α-integration of categorical distributions (uniform weights by default).
#[pyfunction]
#[pyo3(signature = (dists, alpha, weights = None))]
fn alpha_integrate(dists: Vec<Vec<f64>>, alpha: f64, weights: Option<Vec<f64>>) -> PyResult<Vec<f64>> {
    let ds = categoricals(dists)?;
    let w = self::weights(weights, ds.len())?;
    Ok(mixtures::alpha_integrate(&ds, &w, alpha).map_err(err)?.probs().to_vec())
}

/// Direct numerical minimizer of `Σ w_k D_α[p_k‖q]`.
#[pyfunction]
#[pyo3(signature = (dists, alpha, weights = None, tol = 1e-12))]
fn argmin_weighted_divergence(dists: Vec<Vec<f64>>, alpha: f64, weights: Option<Vec<f64>>, tol: f64) -> PyResult<Vec<f64>> {
    let ds = categoricals(dists)?;
    let w = self::weights(weights, ds.len())?;
    Ok(mixtures::argmin_weighted_divergence(&ds, &w, alpha, tol).map_err(err)?.probs().to_vec())
}

/// Scalar curvature of `gaussian`, `sphere` or `euclidean` at `point`.
#[pyfunction]
fn scalar_curvature_of(family: &str, point: Vec<f64>) -> PyResult<f64> {
    let metric: Box<dyn MetricField> = match family {
        "gaussian" => Box::new(GaussianFisher),
        "sphere" => Box::new(RoundSphere),
        "euclidean" => Box::new(Euclidean { dim: point.len() }),
        other => return Err(GeodropError::new_err(format!("unknown family '{other}'"))),
    };
    scalar_curvature(metric.as_ref(), &point).map_err(err)
}

/// `1 − R r² / (6(n + 2))`.
#[pyfunction]
#[pyo3(name = "volume_ratio")]
fn volume_ratio_py(scalar: f64, dim: usize, radius: f64) -> PyResult<f64> {
    volume_ratio(scalar, dim, radius).map_err(err)
}

#[pymodule]
fn pygeodrop(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("GeodropError", m.py().get_type::<GeodropError>())?;
    m.add_class::<PyMlp>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(synth_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(alpha_integrate, m)?)?;
    m.add_function(wrap_pyfunction!(argmin_weighted_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(scalar_curvature_of, m)?)?;
    m.add_function(wrap_pyfunction!(volume_ratio_py, m)?)?;
    Ok(())
}
