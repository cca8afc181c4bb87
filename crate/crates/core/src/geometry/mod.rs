//! Differential geometry over metric fields in local coordinates.
//!
//! Conventions: `Christoffel[(k, i, j)] = Γ^k_ij` with `∇_{∂_i}∂_j = Γ^k_ij ∂_k`;
//! `Riemann[(r, i, j, k)] = R^r_ijk`, the `∂_r` component of `R(∂_i, ∂_j)∂_k`.
//! All derivatives are Richardson-extrapolated central differences.

mod connection;
mod curvature;
mod fields;
mod submanifold;
mod tensor;

pub use connection::{
    alpha_combine, alpha_connection, dual_connection, levi_civita, levi_civita_with, lower_connection,
    metric_derivatives, raise_connection, riemann, riemann_with, torsion, torsion_of,
};
pub use curvature::{contract_scalar, curvature_report, scalar_curvature, volume_ratio, CurvatureReport};
pub use fields::{
    AlphaConnection, ConnectionField, DualConnection, Euclidean, FnConnection, FnMetric, GaussianFisher,
    LeviCivita, MetricField, RoundSphere, ZeroConnection,
};
pub use submanifold::{induced_metric, second_fundamental_form, EmbeddedFamily, FnEmbedding, SecondFundamentalForm};
pub use tensor::{Christoffel, Riemann};
