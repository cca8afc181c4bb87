use super::mlp::sigmoid;
use crate::error::{Error, Result};
use crate::numerics::{numerical_rank, DenseMatrix};

/// Relative singular-value threshold used by [`jacobian_rank`].
pub const RANK_TOL: f64 = 1e-8;

/// `y(x) = σ(θ₀ + Σᵢ θᵢ xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmoidUnit {
    theta: Vec<f64>,
}

impl SigmoidUnit {
    /// `theta[0]` is the bias.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Shape("a sigmoid unit needs at least a bias".into()));
        }
        Ok(Self { theta })
    }

    pub fn input_dim(&self) -> usize {
        self.theta.len() - 1
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape(format!("input of length {}, unit expects {}", x.len(), self.input_dim())));
        }
        Ok(())
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let z = self.theta[0] + self.theta[1..].iter().zip(x).map(|(t, v)| t * v).sum::<f64>();
        Ok(sigmoid(z))
    }

    /// `∂y/∂θ = y(1−y)·(1, x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.output(x)?;
        let s = y * (1.0 - y);
        Ok(std::iter::once(s).chain(x.iter().map(|v| s * v)).collect())
    }
}

/// Numerical rank of the matrix whose rows are `∂y/∂θ` at each input.
pub fn jacobian_rank(unit: &SigmoidUnit, inputs: &[Vec<f64>]) -> Result<usize> {
    let rows = inputs.iter().map(|x| unit.gradient(x)).collect::<Result<Vec<_>>>()?;
    if rows.is_empty() {
        return Ok(0);
    }
    numerical_rank(&DenseMatrix::from_rows(&rows)?, RANK_TOL)
}
