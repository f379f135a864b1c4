//! Reconstruction of a spatially distributed dielectric constant in
//! Ω = (-1, 1)² from multi-angle boundary measurements of scattered waves.
//!
//! The pipeline: simulate boundary data with a Robin-truncated Helmholtz
//! solver, reduce the θ-differentiated field equation to a coupled elliptic
//! system through a polynomial-exponential basis, solve that system by a
//! Carleman-weighted regularized least-squares Picard iteration, and
//! evaluate the dielectric constant from the converged field.

pub mod basis;
pub mod contraction;
pub mod dd;
pub mod error;
pub mod exec;
pub mod forward;
pub mod grid;
pub mod pipeline;
pub mod preprocess;
pub mod quad;
pub mod reconstruct;
pub mod sparse;

pub use error::{Error, Result};
