use crate::error::{Error, Result};
use crate::mask::DropoutMask;
use crate::numerics::{dot, sym_eig, DenseMatrix, Richardson};

use super::fields::MetricField;

/// Metric induced on the coordinate subspace kept by `mask`: the principal
/// submatrix of `g(θ)` on the kept coordinates.
pub fn induced_metric<M: MetricField + ?Sized>(
    g: &M,
    mask: &DropoutMask,
    theta: &[f64],
) -> Result<DenseMatrix> {
    if mask.len() != g.dim() {
        return Err(Error::Shape(format!(
            "mask of length {} for a {}-dimensional metric",
            mask.len(),
            g.dim()
        )));
    }
    let kept = mask.kept_indices();
    if kept.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(g.eval(theta)?.principal_submatrix(&kept))
}

/// A parametrized submanifold `θ ↦ φ(θ)` of Euclidean space.
pub trait EmbeddedFamily {
    fn param_dim(&self) -> usize;
    fn ambient_dim(&self) -> usize;
    fn embed(&self, theta: &[f64]) -> Vec<f64>;
}

/// Embedding backed by a closure.
pub struct FnEmbedding<F> {
    param_dim: usize,
    ambient_dim: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Vec<f64>> FnEmbedding<F> {
    pub fn new(param_dim: usize, ambient_dim: usize, f: F) -> Self {
        Self {
            param_dim,
            ambient_dim,
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> Vec<f64>> EmbeddedFamily for FnEmbedding<F> {
    fn param_dim(&self) -> usize {
        self.param_dim
    }

    fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    fn embed(&self, theta: &[f64]) -> Vec<f64> {
        (self.f)(theta)
    }
}

/// Second fundamental form of an embedding at one point.
#[derive(Debug, Clone)]
pub struct SecondFundamentalForm {
    /// `normal[i][j]` is the ambient vector `L_ij = (I − P) ∂_i∂_j φ`.
    pub normal: Vec<Vec<Vec<f64>>>,
    /// Induced metric `JᵀJ`.
    pub metric: DenseMatrix,
    /// Eigenvalues of `g^{-1/2} (Σ_a L^a L^aᵀ)^{1/2} g^{-1/2}`, descending.
    pub eigenvalues: Vec<f64>,
    /// Euclidean norm of `eigenvalues`.
    pub norm: f64,
}

/// `L_ij = (I − P) H_ij`, with `H` the finite-difference Hessian of the
/// embedding and `P` the orthogonal projector onto the Jacobian's columns.
pub fn second_fundamental_form<E: EmbeddedFamily + ?Sized>(
    family: &E,
    theta: &[f64],
) -> Result<SecondFundamentalForm> {
    let n = family.param_dim();
    let m = family.ambient_dim();
    if theta.len() != n {
        return Err(Error::Shape(format!("point has {} coordinates, expected {n}", theta.len())));
    }
    let embed = |p: &[f64]| -> Result<Vec<f64>> {
        let v = family.embed(p);
        if v.len() != m {
            return Err(Error::Shape(format!("embedding returned {} coordinates, expected {m}", v.len())));
        }
        Ok(v)
    };
    let diff = Richardson::default();
    let tangents = diff.jacobian(embed, theta)?;
    let hess = diff.hessian(embed, theta)?;

    let metric = DenseMatrix::from_fn(n, n, |i, j| dot(&tangents[i], &tangents[j]));
    let rank = numerical_rank(&metric)?;
    if rank < n {
        return Err(Error::DegenerateChart { rank, dim: n });
    }
    let chol = metric.cholesky().map_err(|_| Error::DegenerateChart { rank, dim: n })?;

    // (I − P) v = v − J (JᵀJ)⁻¹ Jᵀ v.
    let project_out = |v: &[f64]| -> Vec<f64> {
        let mut coef: Vec<f64> = tangents.iter().map(|t| dot(t, v)).collect();
        crate::numerics::cholesky_solve_in_place(&chol, &mut coef);
        let mut out = v.to_vec();
        for (t, c) in tangents.iter().zip(&coef) {
            for (o, ti) in out.iter_mut().zip(t) {
                *o -= c * ti;
            }
        }
        out
    };
    let normal: Vec<Vec<Vec<f64>>> = hess
        .iter()
        .map(|row| row.iter().map(|h| project_out(h)).collect())
        .collect();

    // Σ_a L^a L^aᵀ, entry (i, j) = Σ_k ⟨L_ik, L_jk⟩.
    let gram = DenseMatrix::from_fn(n, n, |i, j| (0..n).map(|k| dot(&normal[i][k], &normal[j][k])).sum());
    let gram_sqrt = sym_eig(&gram)?.reconstruct_with(|l| l.max(0.0).sqrt());
    let metric_isqrt = sym_eig(&metric)?.reconstruct_with(|l| 1.0 / l.sqrt());
    let mut shaped = metric_isqrt.matmul(&gram_sqrt)?.matmul(&metric_isqrt)?;
    shaped.symmetrize();
    let eigenvalues = sym_eig(&shaped)?.eigenvalues;
    let norm = eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
    Ok(SecondFundamentalForm {
        normal,
        metric,
        eigenvalues,
        norm,
    })
}

/// Rank of a Gram matrix `JᵀJ`, counting singular values of `J` above
/// `1e-7 · σ_max`.
fn numerical_rank(gram: &DenseMatrix) -> Result<usize> {
    let ev = sym_eig(gram)?.eigenvalues;
    let top = ev.first().copied().unwrap_or(0.0).max(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(ev.iter().filter(|&&l| l > 1e-14 * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fields::FnMetric;

    #[test]
    fn induced_metric_is_a_submatrix() {
        let g = FnMetric::new(3, |_| DenseMatrix::from_diag(&[1.0, 2.0, 3.0]));
        let full = induced_metric(&g, &DropoutMask::full(3), &[0.0; 3]).unwrap();
        assert_eq!(full, DenseMatrix::from_diag(&[1.0, 2.0, 3.0]));
        let sub = induced_metric(&g, &DropoutMask::from_indices(3, &[0, 2]), &[0.0; 3]).unwrap();
        assert_eq!(sub, DenseMatrix::from_diag(&[1.0, 3.0]));
        assert!(matches!(
            induced_metric(&g, &DropoutMask::from_indices(3, &[]), &[0.0; 3]),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn linear_embedding_is_totally_geodesic() {
        let fam = FnEmbedding::new(2, 3, |t: &[f64]| vec![t[0] + 2.0 * t[1], -t[1], 3.0 * t[0]]);
        let sff = second_fundamental_form(&fam, &[0.5, -0.25]).unwrap();
        assert_eq!(sff.norm, 0.0);
    }

    #[test]
    fn parabola_at_vertex() {
        let fam = FnEmbedding::new(1, 2, |t: &[f64]| vec![t[0], t[0] * t[0]]);
        let sff = second_fundamental_form(&fam, &[0.0]).unwrap();
        assert!((sff.normal[0][0][0]).abs() < 1e-9);
        assert!((sff.normal[0][0][1] - 2.0).abs() < 1e-9);
        assert!((sff.norm - 2.0).abs() < 1e-6);
    }

    #[test]
    fn circle_has_unit_curvature() {
        let fam = FnEmbedding::new(1, 2, |t: &[f64]| vec![t[0].cos(), t[0].sin()]);
        for t in [0.0, 0.7, 2.5, -1.3] {
            let sff = second_fundamental_form(&fam, &[t]).unwrap();
            assert!((sff.norm - 1.0).abs() < 1e-6, "{t}: {}", sff.norm);
        }
    }

    #[test]
    fn rank_deficient_chart_is_rejected() {
        let fam = FnEmbedding::new(2, 3, |t: &[f64]| {
            let s = t[0] + t[1];
            vec![s, s * s, 0.0]
        });
        assert!(matches!(
            second_fundamental_form(&fam, &[0.1, 0.2]),
            Err(Error::DegenerateChart { rank: 1, dim: 2 })
        ));
    }
}
