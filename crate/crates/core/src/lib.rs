//! Radio map estimation from sparse spectrum measurements.
//!
//! The map is modelled as a sum of `R` emitter components, each the outer
//! product of a spatial loss field (SLF) and a power spectral density (PSD).
//! [`solver::lapnp_solve`] runs plug-and-play ADMM on the latent SLFs, while
//! [`solver::dapnp_solve`] denoises every frequency band of the map directly.
//!
//! The crate is `no_std` (with `alloc`); file formats and the CLI live in the
//! `rme` crate.

#![no_std]
extern crate alloc;

pub mod analysis;
pub mod datagen;
pub mod denoise;
pub mod error;
pub mod init;
pub mod linalg;
pub mod metrics;
pub mod solver;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{compose, restrict, vec_index, ColMatrix, FactorModel, Field, MeasurementSet, RadioMap, SamplingMask, Tensor3};
