#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` deliberately rejects NaN.

pub mod ensemble;
pub mod experiment;
pub mod error;
pub mod fim;
pub mod geometry;
pub mod mask;
pub mod mixtures;
pub mod models;
pub mod numerics;

pub use error::{Error, Result};
pub use mask::DropoutMask;
