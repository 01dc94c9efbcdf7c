//! Spectral-domain shape generation.
//!
//! Watertight meshes are voxelized into signed distance fields, squashed by a
//! tanh limiter, reduced to the coarse band of a single-level 3D wavelet
//! transform and projected onto a dataset-wide SVD basis. A preconditioned
//! dense denoiser is trained on the resulting low-dimensional features and
//! new features are decoded back into meshes through the same chain.
//!
//! Sign convention: signed distances are **positive inside** the surface and
//! negative outside. Under the limiter `g(f) = 0.5·tanh(f) − 0.5` the far
//! interior therefore approaches 0 while the far exterior approaches −1, and
//! the surface sits at −0.5.

pub mod clustering;
pub mod diffusion;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod rng;
pub mod spectral;
pub mod volume;
pub mod wavelet;

pub use error::{Error, Result};
pub use volume::Volume;
