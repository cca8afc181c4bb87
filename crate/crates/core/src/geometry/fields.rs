//! Metric and connection fields: point → tensor maps.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Richardson};

use super::connection::{dual_coefficients, levi_civita_with};
use super::tensor::Christoffel;

/// A Riemannian metric `g(θ)` given in coordinates.
///
/// Implementations must be pure: the same point always yields the same
/// matrix.
pub trait MetricField {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix>;
}

/// Connection coefficients `Γ^k_ij(θ)`.
pub trait ConnectionField {
    fn dim(&self) -> usize;
    fn eval(&self, theta: &[f64]) -> Result<Christoffel>;
}

impl<T: MetricField + ?Sized> MetricField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        (**self).eval(theta)
    }
}

impl<T: ConnectionField + ?Sized> ConnectionField for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        (**self).eval(theta)
    }
}

pub(crate) fn check_point(dim: usize, theta: &[f64]) -> Result<()> {
    if theta.len() != dim {
        return Err(Error::Shape(format!(
            "point has {} coordinates, field dimension is {dim}",
            theta.len()
        )));
    }
    Ok(())
}

/// Metric backed by a closure.
pub struct FnMetric<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> DenseMatrix> FnMetric<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> DenseMatrix> MetricField for FnMetric<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        check_point(self.dim, theta)?;
        Ok((self.f)(theta))
    }
}

/// Flat metric `g = I`.
#[derive(Debug, Clone, Copy)]
pub struct Euclidean {
    pub dim: usize,
}

impl MetricField for Euclidean {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        check_point(self.dim, theta)?;
        Ok(DenseMatrix::identity(self.dim))
    }
}

/// Unit round sphere in polar coordinates `(θ, φ)`: `g = diag(1, sin²θ)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoundSphere;

impl MetricField for RoundSphere {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        check_point(2, theta)?;
        let s = theta[0].sin();
        Ok(DenseMatrix::from_diag(&[1.0, s * s]))
    }
}

/// Fisher metric of the univariate normal family in `(μ, σ)`:
/// `g = diag(1/σ², 2/σ²)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct GaussianFisher;

impl MetricField for GaussianFisher {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, theta: &[f64]) -> Result<DenseMatrix> {
        check_point(2, theta)?;
        let sigma = theta[1];
        if !(sigma > 0.0) {
            return Err(Error::Domain(format!("σ must be positive, got {sigma}")));
        }
        let s2 = sigma * sigma;
        Ok(DenseMatrix::from_diag(&[1.0 / s2, 2.0 / s2]))
    }
}

/// Connection backed by a closure.
pub struct FnConnection<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Christoffel> FnConnection<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64]) -> Christoffel> ConnectionField for FnConnection<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        check_point(self.dim, theta)?;
        Ok((self.f)(theta))
    }
}

/// The identically zero connection (flat in the given coordinates).
#[derive(Debug, Clone, Copy)]
pub struct ZeroConnection {
    pub dim: usize,
}

impl ConnectionField for ZeroConnection {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        check_point(self.dim, theta)?;
        Ok(Christoffel::zeros(self.dim))
    }
}

/// Levi-Civita connection of a metric field.
pub struct LeviCivita<M> {
    pub metric: M,
    pub diff: Richardson,
}

impl<M: MetricField> LeviCivita<M> {
    pub fn new(metric: M) -> Self {
        Self {
            metric,
            diff: Richardson::default(),
        }
    }
}

impl<M: MetricField> ConnectionField for LeviCivita<M> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        levi_civita_with(&self.metric, theta, self.diff)
    }
}

/// The connection dual to `primal` with respect to `metric`.
pub struct DualConnection<M, C> {
    pub metric: M,
    pub primal: C,
    pub diff: Richardson,
}

impl<M: MetricField, C: ConnectionField> DualConnection<M, C> {
    pub fn new(metric: M, primal: C) -> Self {
        Self {
            metric,
            primal,
            diff: Richardson::default(),
        }
    }
}

impl<M: MetricField, C: ConnectionField> ConnectionField for DualConnection<M, C> {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        let gamma = self.primal.eval(theta)?;
        dual_coefficients(&self.metric, &gamma, theta, self.diff)
    }
}

/// `∇^(α) = (1+α)/2 ∇* + (1−α)/2 ∇`.
pub struct AlphaConnection<C, D> {
    pub primal: C,
    pub dual: D,
    pub alpha: f64,
}

impl<C: ConnectionField, D: ConnectionField> ConnectionField for AlphaConnection<C, D> {
    fn dim(&self) -> usize {
        self.primal.dim()
    }

    fn eval(&self, theta: &[f64]) -> Result<Christoffel> {
        super::connection::alpha_combine(
            &self.primal.eval(theta)?,
            &self.dual.eval(theta)?,
            self.alpha,
        )
    }
}
