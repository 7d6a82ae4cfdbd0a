//! Design automation for folded metasurface reflectarray antennas.
//!
//! The crate covers the whole chain from unit-cell phase data to a printable
//! model:
//!
//! * [`emcore`]: complex amplitudes, Jones algebra, unit helpers.
//! * [`unitcell`]: eigen-reflection model of the polarization-rotating cell,
//!   sweep tables, an analytic surrogate and inverse geometry lookup.
//! * [`layout`]: folded geometry, triangular lattice, phase synthesis.
//! * [`polarizer`]: strip-grid polarizer and the folded polarization cascade.
//! * [`pofield`]: feed model, aperture illumination, far field and metrics.
//! * [`fabricate`]: watertight meshes and binary STL export.
//! * [`pipeline`]: run configuration and the end-to-end commands used by the CLI.
//!
//! The low-level math in [`emcore`] is generic over the scalar type
//! ([`Scalar`], implemented for `f32` and `f64`); everything above it works
//! in `f64` through the aliases below.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emcore;
pub mod error;
pub mod fabricate;
pub mod layout;
pub mod pipeline;
pub mod pofield;
pub mod polarizer;
pub mod scalar;
pub mod unitcell;

mod sum;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Double-precision complex amplitude.
pub type C64 = num_complex::Complex<f64>;
/// Double-precision Jones vector.
pub type Jones2 = emcore::JonesVector<f64>;
/// Double-precision Jones matrix.
pub type Jones = emcore::JonesMatrix<f64>;
/// Double-precision frequency in GHz.
pub type Freq = emcore::Frequency<f64>;

/// Single-precision variants, mostly useful for bulk pattern work.
pub type C32 = num_complex::Complex<f32>;
pub type Jones32 = emcore::JonesMatrix<f32>;
