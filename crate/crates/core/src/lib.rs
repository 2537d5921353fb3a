//! Shading-independent color correction.
//!
//! Camera RGBs and reference XYZs of the same surfaces differ by a 3×3 map
//! and an unknown per-sample brightness. Their chromaticities are therefore
//! related by a planar homography, which this crate estimates with plain
//! least squares, alternating least squares, or a RANSAC search scored in
//! CIE L\*u\*v\*, and then evaluates with ΔE statistics.

pub mod chart_io;
pub mod cli;
pub mod colorimetry;
pub mod error;
pub mod homography;
pub mod solvers;
pub mod synth;

pub use error::{Error, Result};
