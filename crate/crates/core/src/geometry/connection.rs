//! Connections, torsion, curvature and duality in local coordinates.

use crate::error::{Error, Result};
use crate::numerics::{DenseMatrix, Richardson};

use super::fields::{check_point, ConnectionField, MetricField};
use super::tensor::{Christoffel, Riemann};

/// `∂_k g(θ)` for every coordinate `k`.
pub fn metric_derivatives<M: MetricField + ?Sized>(
    g: &M,
    theta: &[f64],
    diff: Richardson,
) -> Result<Vec<DenseMatrix>> {
    let n = g.dim();
    check_point(n, theta)?;
    let parts = diff.jacobian(|p| Ok(g.eval(p)?.into_data()), theta)?;
    parts
        .into_iter()
        .map(|d| DenseMatrix::new(n, n, d))
        .collect()
}

fn metric_at<M: MetricField + ?Sized>(g: &M, theta: &[f64]) -> Result<(DenseMatrix, DenseMatrix)> {
    let gm = g.eval(theta)?;
    let inv = gm.spd_inverse()?;
    Ok((gm, inv))
}

/// Levi-Civita coefficients
/// `Γ^k_ij = ½ g^{kl} (∂_i g_jl + ∂_j g_il − ∂_l g_ij)`.
pub fn levi_civita<M: MetricField + ?Sized>(g: &M, theta: &[f64]) -> Result<Christoffel> {
    levi_civita_with(g, theta, Richardson::default())
}

pub fn levi_civita_with<M: MetricField + ?Sized>(
    g: &M,
    theta: &[f64],
    diff: Richardson,
) -> Result<Christoffel> {
    let n = g.dim();
    let (_, ginv) = metric_at(g, theta)?;
    let dg = metric_derivatives(g, theta, diff)?;
    // First-kind symbols Γ_{ij,l}.
    let first = |i: usize, j: usize, l: usize| 0.5 * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]);
    let mut out = Christoffel::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let lowered: Vec<f64> = (0..n).map(|l| first(i, j, l)).collect();
            for k in 0..n {
                let v: f64 = (0..n).map(|l| ginv[(k, l)] * lowered[l]).sum();
                out[(k, i, j)] = v;
                out[(k, j, i)] = v;
            }
        }
    }
    Ok(out)
}

/// Lowers the upper index: entry `(k, i, j)` of the result is
/// `Γ_{ki,j} = g_{jm} Γ^m_{ki}`.
pub fn lower_connection(g: &DenseMatrix, gamma: &Christoffel) -> Christoffel {
    let n = gamma.dim();
    Christoffel::from_fn(n, |k, i, j| (0..n).map(|m| g[(j, m)] * gamma[(m, k, i)]).sum())
}

/// Raises the last index: inverse of [`lower_connection`].
pub fn raise_connection(ginv: &DenseMatrix, lowered: &Christoffel) -> Christoffel {
    let n = lowered.dim();
    Christoffel::from_fn(n, |m, k, i| (0..n).map(|j| ginv[(m, j)] * lowered[(k, i, j)]).sum())
}

/// Dual coefficients at one point given the primal coefficients there.
pub(crate) fn dual_coefficients<M: MetricField + ?Sized>(
    g: &M,
    gamma: &Christoffel,
    theta: &[f64],
    diff: Richardson,
) -> Result<Christoffel> {
    let n = g.dim();
    if gamma.dim() != n {
        return Err(Error::Shape(format!(
            "connection of dimension {} against metric of dimension {n}",
            gamma.dim()
        )));
    }
    let (gm, ginv) = metric_at(g, theta)?;
    let dg = metric_derivatives(g, theta, diff)?;
    let low = lower_connection(&gm, gamma);
    // Γ*_{kj,i} = ∂_k g_ij − Γ_{ki,j}, stored at (k, j, i).
    let dual_low = Christoffel::from_fn(n, |k, j, i| dg[k][(i, j)] - low[(k, i, j)]);
    Ok(raise_connection(&ginv, &dual_low))
}

/// The unique connection `∇*` with `∂_k g_ij = Γ_{ki,j} + Γ*_{kj,i}`.
pub fn dual_connection<M, C>(g: &M, connection: &C, theta: &[f64]) -> Result<Christoffel>
where
    M: MetricField + ?Sized,
    C: ConnectionField + ?Sized,
{
    let gamma = connection.eval(theta)?;
    dual_coefficients(g, &gamma, theta, Richardson::default())
}

/// Entrywise `(1+α)/2 Γ* + (1−α)/2 Γ`.
pub fn alpha_combine(primal: &Christoffel, dual: &Christoffel, alpha: f64) -> Result<Christoffel> {
    if primal.dim() != dual.dim() {
        return Err(Error::Shape(format!(
            "connections of dimension {} and {}",
            primal.dim(),
            dual.dim()
        )));
    }
    Ok(dual.combine(0.5 * (1.0 + alpha), primal, 0.5 * (1.0 - alpha)))
}

/// α-connection of a dual pair evaluated at `theta`.
pub fn alpha_connection<C, D>(primal: &C, dual: &D, alpha: f64, theta: &[f64]) -> Result<Christoffel>
where
    C: ConnectionField + ?Sized,
    D: ConnectionField + ?Sized,
{
    if primal.dim() != dual.dim() {
        return Err(Error::Shape(format!(
            "connections of dimension {} and {}",
            primal.dim(),
            dual.dim()
        )));
    }
    alpha_combine(&primal.eval(theta)?, &dual.eval(theta)?, alpha)
}

/// `T^k_ij = Γ^k_ij − Γ^k_ji` (coordinate frame, so the bracket term vanishes).
pub fn torsion_of(gamma: &Christoffel) -> Christoffel {
    Christoffel::from_fn(gamma.dim(), |k, i, j| gamma[(k, i, j)] - gamma[(k, j, i)])
}

pub fn torsion<C: ConnectionField + ?Sized>(connection: &C, theta: &[f64]) -> Result<Christoffel> {
    Ok(torsion_of(&connection.eval(theta)?))
}

/// `R^r_ijk = ∂_iΓ^r_jk − ∂_jΓ^r_ik + Γ^r_ih Γ^h_jk − Γ^r_jh Γ^h_ik`.
pub fn riemann<C: ConnectionField + ?Sized>(connection: &C, theta: &[f64]) -> Result<Riemann> {
    riemann_with(connection, theta, Richardson::default())
}

pub fn riemann_with<C: ConnectionField + ?Sized>(
    connection: &C,
    theta: &[f64],
    diff: Richardson,
) -> Result<Riemann> {
    let n = connection.dim();
    check_point(n, theta)?;
    let gamma = connection.eval(theta)?;
    let d_gamma: Vec<Christoffel> = diff
        .jacobian(|p| Ok(connection.eval(p)?.as_slice().to_vec()), theta)?
        .into_iter()
        .map(|flat| Christoffel::from_flat(n, flat))
        .collect();
    let mut out = Riemann::zeros(n);
    for r in 0..n {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let mut v = d_gamma[i][(r, j, k)] - d_gamma[j][(r, i, k)];
                    for h in 0..n {
                        v += gamma[(r, i, h)] * gamma[(h, j, k)] - gamma[(r, j, h)] * gamma[(h, i, k)];
                    }
                    out[(r, i, j, k)] = v;
                }
            }
        }
    }
    if out.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite curvature component".into()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fields::{Euclidean, FnConnection, GaussianFisher, LeviCivita, RoundSphere, ZeroConnection};
    use std::f64::consts::PI;

    #[test]
    fn euclidean_christoffels_vanish() {
        let g = levi_civita(&Euclidean { dim: 3 }, &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(g.max_abs(), 0.0);
    }

    #[test]
    fn gaussian_mixed_symbol() {
        // Γ^μ_{μσ} = ½ g^{μμ} ∂_σ g_μμ = ½ σ² (−2/σ³) = −1/σ.
        let g = levi_civita(&GaussianFisher, &[0.0, 1.0]).unwrap();
        assert!((g[(0, 0, 1)] + 1.0).abs() < 1e-9);
        assert!((g[(0, 1, 0)] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn sphere_symbol() {
        let g = levi_civita(&RoundSphere, &[PI / 4.0, 0.0]).unwrap();
        assert!((g[(0, 1, 1)] + 0.5).abs() < 1e-10);
        let cot = 1.0 / (PI / 4.0).tan();
        assert!((g[(1, 0, 1)] - cot).abs() < 1e-10);
    }

    #[test]
    fn torsion_examples() {
        let sym = Christoffel::from_fn(2, |k, i, j| (k + i + j) as f64 + (i * j) as f64);
        assert_eq!(torsion_of(&sym).max_abs(), 0.0);
        assert_eq!(torsion(&ZeroConnection { dim: 3 }, &[0.0; 3]).unwrap().max_abs(), 0.0);

        let mut g = Christoffel::zeros(2);
        g[(0, 0, 1)] = 1.0;
        let t = torsion_of(&g);
        assert_eq!(t[(0, 0, 1)], 1.0);
        assert_eq!(t[(0, 1, 0)], -1.0);
    }

    #[test]
    fn constant_connection_keeps_only_quadratic_terms() {
        // Γ^0_{01} = 1 only: every product Γ^r_{ih}Γ^h_{jk} needs h = 1 in the
        // first factor and then Γ^1_{jk} = 0, so R vanishes.
        let mut single = Christoffel::zeros(2);
        single[(0, 0, 1)] = 1.0;
        let c = single.clone();
        let conn = FnConnection::new(2, move |_| c.clone());
        assert_eq!(riemann(&conn, &[0.1, 0.2]).unwrap().max_abs(), 0.0);

        // Γ^0_{00} = a and Γ^0_{11} = b: R^0_{101} = Γ^0_{1h}Γ^h_{01} − Γ^0_{0h}Γ^h_{11}
        // = 0 − Γ^0_{00}Γ^0_{11} = −ab, and R^0_{011} = +ab.
        let (a, b) = (2.0, 3.0);
        let conn = FnConnection::new(2, move |_| {
            let mut g = Christoffel::zeros(2);
            g[(0, 0, 0)] = a;
            g[(0, 1, 1)] = b;
            g
        });
        let r = riemann(&conn, &[0.0, 0.0]).unwrap();
        assert_eq!(r[(0, 1, 0, 1)], -a * b);
        assert_eq!(r[(0, 0, 1, 1)], a * b);
        assert_eq!(r[(1, 0, 1, 1)], 0.0);
    }

    #[test]
    fn sphere_curvature_component() {
        let lc = LeviCivita::new(RoundSphere);
        let t = PI / 3.0;
        let r = riemann(&lc, &[t, 0.4]).unwrap();
        let s2 = t.sin().powi(2);
        // R(∂_θ, ∂_φ)∂_φ = sin²θ ∂_θ in the (directions, transported) order.
        assert!((r[(0, 0, 1, 1)] - s2).abs() < 1e-4);
        assert!((r[(0, 1, 0, 1)] + s2).abs() < 1e-4);
    }

    #[test]
    fn zero_connection_is_flat_exactly() {
        let r = riemann(&ZeroConnection { dim: 3 }, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn dual_of_zero_on_constant_metric_is_zero() {
        let d = dual_connection(&Euclidean { dim: 2 }, &ZeroConnection { dim: 2 }, &[0.4, 0.1]).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn dual_of_zero_on_gaussian_metric() {
        let g = GaussianFisher;
        let d = dual_connection(&g, &ZeroConnection { dim: 2 }, &[0.0, 1.0]).unwrap();
        let low = lower_connection(&g.eval(&[0.0, 1.0]).unwrap(), &d);
        // Γ*_{σσ,σ} = ∂_σ(2σ⁻²) = −4 at σ = 1.
        assert!((low[(1, 1, 1)] + 4.0).abs() < 1e-9);
        // Γ*_{σμ,μ} = ∂_σ g_μμ = −2.
        assert!((low[(1, 0, 0)] + 2.0).abs() < 1e-9);
    }

    #[test]
    fn levi_civita_is_self_dual() {
        let g = GaussianFisher;
        let lc = LeviCivita::new(g);
        let theta = [0.3, 1.7];
        let d = dual_connection(&g, &lc, &theta).unwrap();
        assert!(d.max_abs_diff(&lc.eval(&theta).unwrap()) < 1e-10);
    }

    #[test]
    fn alpha_endpoints_and_midpoint() {
        let p = Christoffel::from_fn(2, |k, i, j| (k * 4 + i * 2 + j) as f64);
        let d = Christoffel::from_fn(2, |k, i, j| -((k + i + j) as f64));
        assert_eq!(alpha_combine(&p, &d, -1.0).unwrap(), p);
        assert_eq!(alpha_combine(&p, &d, 1.0).unwrap(), d);
        let mut single = Christoffel::zeros(2);
        single[(1, 0, 1)] = 2.0;
        let mid = alpha_combine(&Christoffel::zeros(2), &single, 0.0).unwrap();
        assert_eq!(mid[(1, 0, 1)], 1.0);
        assert!(matches!(
            alpha_combine(&Christoffel::zeros(2), &Christoffel::zeros(3), 0.0),
            Err(Error::Shape(_))
        ));
    }
}
