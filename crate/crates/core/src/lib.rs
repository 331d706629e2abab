//! Partitioned kernel ridge regression.
//!
//! Exact KRR, divide-and-conquer KRR and the K-means / K-balance partitioned
//! variants, together with the clustering, Cholesky solver, parallel
//! partition runtime and α-β-γ cost model they are built on.

pub mod benchmarks;
pub mod clustering;
pub mod data;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod rng;
pub mod runtime;
pub mod solver;
pub mod strategies;

pub use error::{KrrError, Result};
