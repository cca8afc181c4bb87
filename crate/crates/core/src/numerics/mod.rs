//! Dense linear algebra, seeded randomness and finite differences.

mod diff;
mod eig;
mod matrix;
mod rng;
mod svd;

pub use diff::{finite_diff_grad, try_finite_diff_grad, Richardson, DEFAULT_STEP};
pub use eig::{psd_lambda_max, sym_eig, SymEig};
pub use matrix::{axpy, cholesky_solve_in_place, dot, kron, norm2, DenseMatrix};
pub use rng::Rng;
pub use svd::{numerical_rank, singular_values};
