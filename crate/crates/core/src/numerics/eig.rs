use crate::error::{Error, Result};
use crate::numerics::matrix::{dot, DenseMatrix};

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymEig {
    /// Sorted in descending order.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `eigenvalues`.
    pub eigenvectors: DenseMatrix,
}

impl SymEig {
    /// `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|&l| f(l)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s: f64 = (0..n).map(|k| v[(i, k)] * fl[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(|l| l)
    }
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix.
pub fn sym_eig(a: &DenseMatrix) -> Result<SymEig> {
    if !a.is_square() {
        return Err(Error::Shape(format!("sym_eig needs a square matrix, got {:?}", a.shape())));
    }
    if !a.is_symmetric(1e-10) {
        return Err(Error::Shape("sym_eig input is not symmetric".into()));
    }
    let n = a.rows();
    let mut m = a.clone();
    m.symmetrize();
    let mut v = DenseMatrix::identity(n);
    let scale = m.frobenius_norm();

    let mut converged = scale == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }
    if !converged {
        let off: f64 = (0..n)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off > 1e-12 * scale {
            return Err(Error::Numerical(format!(
                "Jacobi did not converge after {MAX_SWEEPS} sweeps (off-diagonal {off:e})"
            )));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let eigenvalues = order.iter().map(|&i| m[(i, i)]).collect();
    let eigenvectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
///
/// Small matrices go through [`sym_eig`]; large ones use power iteration,
/// which is all the spectral norm of a Kronecker factor needs.
pub fn psd_lambda_max(a: &DenseMatrix) -> Result<f64> {
    let n = a.rows();
    if n == 0 {
        return Ok(0.0);
    }
    if n <= 128 {
        return Ok(sym_eig(a)?.eigenvalues[0].max(0.0));
    }
    if !a.is_symmetric(1e-10) {
        return Err(Error::Shape("psd_lambda_max input is not symmetric".into()));
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618_033_988_75).fract()).collect();
    let nx = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    let mut lambda = 0.0;
    for _ in 0..20_000 {
        let y = a.matvec(&x)?;
        let ny = dot(&y, &y).sqrt();
        if ny == 0.0 {
            return Ok(0.0);
        }
        let next = dot(&x, &y);
        x = y.into_iter().map(|v| v / ny).collect();
        if (next - lambda).abs() <= 1e-13 * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::Numerical("power iteration did not converge".into()))
}
