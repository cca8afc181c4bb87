use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Singular values in descending order by one-sided Jacobi rotations.
///
/// Works on the columns directly, so small singular values keep high relative
/// accuracy (unlike eigenvalues of `AᵀA`).
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    // Column-major working copy.
    let mut cols: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = cols.split_at_mut(q);
                for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
                    let (u, v) = (*x, *y);
                    *x = c * u - s * v;
                    *y = s * u + c * v;
                }
            }
        }
        if !rotated {
            let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
            sv.sort_by(|a, b| b.total_cmp(a));
            sv.truncate(m.min(n));
            return Ok(sv);
        }
    }
    Err(Error::Numerical("one-sided Jacobi SVD did not converge".into()))
}

/// Count of singular values above `rel_tol · σ_max`.
pub fn numerical_rank(a: &DenseMatrix, rel_tol: f64) -> Result<usize> {
    let sv = singular_values(a)?;
    let top = sv.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(sv.iter().filter(|&&s| s > rel_tol * top).count())
}
