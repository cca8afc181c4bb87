use std::ops::{Index, IndexMut};

/// Connection coefficients `Γ^k_ij` at one point, indexed `[(k, i, j)]`.
///
/// No symmetry in `(i, j)` is assumed.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    dim: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    t[(k, i, j)] = f(k, i, j);
                }
            }
        }
        t
    }

    pub(crate) fn from_flat(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// `a * self + b * other`, entrywise.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(x, y)| a * x + b * y).collect(),
        }
    }
}

impl Index<(usize, usize, usize)> for Christoffel {
    type Output = f64;

    #[inline]
    fn index(&self, (k, i, j): (usize, usize, usize)) -> &f64 {
        &self.data[(k * self.dim + i) * self.dim + j]
    }
}

impl IndexMut<(usize, usize, usize)> for Christoffel {
    #[inline]
    fn index_mut(&mut self, (k, i, j): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[(k * self.dim + i) * self.dim + j]
    }
}

/// Curvature components `R^r_ijk`, indexed `[(r, i, j, k)]`, where `i, j`
/// are the two differentiation directions and `k` the transported direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Riemann {
    dim: usize,
    data: Vec<f64>,
}

impl Riemann {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl Index<(usize, usize, usize, usize)> for Riemann {
    type Output = f64;

    #[inline]
    fn index(&self, (r, i, j, k): (usize, usize, usize, usize)) -> &f64 {
        let n = self.dim;
        &self.data[((r * n + i) * n + j) * n + k]
    }
}

impl IndexMut<(usize, usize, usize, usize)> for Riemann {
    #[inline]
    fn index_mut(&mut self, (r, i, j, k): (usize, usize, usize, usize)) -> &mut f64 {
        let n = self.dim;
        &mut self.data[((r * n + i) * n + j) * n + k]
    }
}
