//! Compression codec for static and dynamic Gaussian Splats.
//!
//! The pipeline: prune -> canonicalize -> quantize -> sort onto a 2D grid ->
//! image-code or entropy-code each attribute -> single-file container.
//! A reference CPU renderer and PSNR/SSIM metrics close the loop for
//! rate-distortion evaluation.

pub mod container;
pub mod dynamics;
pub mod entropy;
pub mod error;
pub mod metrics;
pub mod par;
pub mod plas;
pub mod ply;
pub mod preprocess;
pub mod quantize;
pub mod render;
pub mod splat;
pub mod sweep;

pub use error::{Error, Result};
pub use splat::{DynamicGaussianCloud, GaussianCloud};
