use crate::error::{Error, Result};

use super::connection::{riemann, torsion_of};
use super::fields::{ConnectionField, LeviCivita, MetricField};
use super::tensor::{Christoffel, Riemann};

/// Torsion, curvature and scalar curvature of a connection at one point.
#[derive(Debug, Clone)]
pub struct CurvatureReport {
    pub torsion: Christoffel,
    pub riemann: Riemann,
    pub scalar: f64,
}

/// `R = g^{jk} R^i_{ijk}`: the trace over the first direction gives the Ricci
/// tensor, which is then contracted with the inverse metric. With this
/// ordering the unit sphere has `R = +2`.
pub fn contract_scalar(ginv: &crate::numerics::DenseMatrix, r: &Riemann) -> f64 {
    let n = r.dim();
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            let ricci: f64 = (0..n).map(|i| r[(i, i, j, k)]).sum();
            s += ginv[(j, k)] * ricci;
        }
    }
    s
}

pub fn curvature_report<M, C>(g: &M, connection: &C, theta: &[f64]) -> Result<CurvatureReport>
where
    M: MetricField + ?Sized,
    C: ConnectionField + ?Sized,
{
    let torsion = torsion_of(&connection.eval(theta)?);
    let riemann = riemann(connection, theta)?;
    let ginv = g.eval(theta)?.spd_inverse()?;
    let scalar = contract_scalar(&ginv, &riemann);
    if !scalar.is_finite() {
        return Err(Error::Numerical("scalar curvature is not finite".into()));
    }
    Ok(CurvatureReport {
        torsion,
        riemann,
        scalar,
    })
}

/// Scalar curvature of the Levi-Civita connection of `g`.
pub fn scalar_curvature<M: MetricField + ?Sized>(g: &M, theta: &[f64]) -> Result<f64> {
    let lc = LeviCivita::new(g);
    Ok(curvature_report(g, &lc, theta)?.scalar)
}

/// Small-ball volume ratio against flat space,
/// `1 − R r² / (6(n + 2))`, truncated after the `r²` term.
pub fn volume_ratio(scalar: f64, n: usize, r: f64) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {r}")));
    }
    Ok(1.0 - scalar * r * r / (6.0 * (n as f64 + 2.0)))
}
