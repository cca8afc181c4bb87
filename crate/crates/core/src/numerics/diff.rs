//! Finite-difference calculus.
//!
//! [`finite_diff_grad`] is the plain central-difference gradient used for
//! gradient checks. [`Richardson`] combines central differences at steps `h`
//! and `h/2`, cancelling the `O(h²)` error term; the geometry kernels use it
//! for metric and connection derivatives.

use crate::error::{Error, Result};

/// Default relative step for [`finite_diff_grad`].
pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar field.
///
/// The step on coordinate `i` is `h * max(1, |x_i|)`.
pub fn finite_diff_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Result<Vec<f64>> {
    try_finite_diff_grad(|p| Ok(f(p)), x, h)
}

/// [`finite_diff_grad`] for fallible functions; the first error is returned.
pub fn try_finite_diff_grad(f: impl Fn(&[f64]) -> Result<f64>, x: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let hi = h * x[i].abs().max(1.0);
        probe[i] = x[i] + hi;
        let fp = f(&probe)?;
        probe[i] = x[i] - hi;
        let fm = f(&probe)?;
        probe[i] = x[i];
        if fp.is_nan() || fm.is_nan() {
            return Err(Error::Numerical(format!("function returned NaN near coordinate {i}")));
        }
        grad.push((fp - fm) / (2.0 * hi));
    }
    Ok(grad)
}

/// Richardson-extrapolated central differences of vector-valued functions.
#[derive(Debug, Clone, Copy)]
pub struct Richardson {
    /// Base step, scaled per coordinate by the smallest power of two that is
    /// at least `max(1, |x_i|)`. Powers of two keep `x ± h` exact for dyadic
    /// points.
    pub step: f64,
}

impl Default for Richardson {
    fn default() -> Self {
        Self {
            step: (2.0_f64).powi(-9),
        }
    }
}

impl Richardson {
    pub fn new(step: f64) -> Self {
        Self { step }
    }

    fn step_at(&self, xi: f64) -> f64 {
        let scale = xi.abs().max(1.0);
        self.step * (2.0_f64).powi(scale.log2().ceil() as i32)
    }

    /// `out[k] = ∂_k f(x)`, one vector per coordinate.
    pub fn jacobian<F>(&self, f: F, x: &[f64]) -> Result<Vec<Vec<f64>>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let mut probe = x.to_vec();
        let mut out = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let h = self.step_at(x[k]);
            let mut central = |h: f64| -> Result<Vec<f64>> {
                probe[k] = x[k] + h;
                let fp = f(&probe)?;
                probe[k] = x[k] - h;
                let fm = f(&probe)?;
                probe[k] = x[k];
                check_finite(&fp)?;
                check_finite(&fm)?;
                Ok(fp.iter().zip(&fm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
            };
            let coarse = central(h)?;
            let fine = central(0.5 * h)?;
            out.push(extrapolate(&fine, &coarse));
        }
        Ok(out)
    }

    /// `out[i][j] = ∂_i ∂_j f(x)` (symmetric in `i`, `j`).
    pub fn hessian<F>(&self, f: F, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let n = x.len();
        let f0 = f(x)?;
        check_finite(&f0)?;
        let mut probe = x.to_vec();
        let mut eval = |di: (usize, f64), dj: Option<(usize, f64)>| -> Result<Vec<f64>> {
            probe.copy_from_slice(x);
            probe[di.0] += di.1;
            if let Some((j, hj)) = dj {
                probe[j] += hj;
            }
            let v = f(&probe)?;
            check_finite(&v)?;
            Ok(v)
        };
        let mut out = vec![vec![Vec::new(); n]; n];
        for i in 0..n {
            let hi0 = self.step_at(x[i]);
            for j in 0..=i {
                let hj0 = self.step_at(x[j]);
                let mut second = |s: f64| -> Result<Vec<f64>> {
                    let (hi, hj) = (hi0 * s, hj0 * s);
                    if i == j {
                        let fp = eval((i, hi), None)?;
                        let fm = eval((i, -hi), None)?;
                        Ok((0..f0.len())
                            .map(|a| (fp[a] - 2.0 * f0[a] + fm[a]) / (hi * hi))
                            .collect())
                    } else {
                        let fpp = eval((i, hi), Some((j, hj)))?;
                        let fpm = eval((i, hi), Some((j, -hj)))?;
                        let fmp = eval((i, -hi), Some((j, hj)))?;
                        let fmm = eval((i, -hi), Some((j, -hj)))?;
                        Ok((0..f0.len())
                            .map(|a| (fpp[a] - fpm[a] - fmp[a] + fmm[a]) / (4.0 * hi * hj))
                            .collect())
                    }
                };
                let coarse = second(1.0)?;
                let fine = second(0.5)?;
                let h = extrapolate(&fine, &coarse);
                out[j][i] = h.clone();
                out[i][j] = h;
            }
        }
        Ok(out)
    }
}

fn extrapolate(fine: &[f64], coarse: &[f64]) -> Vec<f64> {
    fine.iter().zip(coarse).map(|(f, c)| (4.0 * f - c) / 3.0).collect()
}

fn check_finite(v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numerical("non-finite value in finite-difference stencil".into()))
    }
}
