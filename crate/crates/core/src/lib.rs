//! Differentially private geodesic regression on Riemannian manifolds.
//!
//! A geodesic `γ(x) = Exp(p, x·v)` is fitted to manifold-valued responses by
//! least squares, then released privately by drawing the footpoint and the
//! shooting vector from K-norm gradient densities with random-walk
//! Metropolis–Hastings chains.

pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
mod linalg;
pub mod manifolds;
pub mod mechanism;
pub mod regression;
pub mod sampler;

pub use error::{Error, Result};
pub use geometry::{Manifold, ManifoldId, Point, Space, Tangent, Variation};
