//! File formats, the external-denoiser bridge and experiment plumbing around
//! [`rme_core`].
//!
//! The `rme` binary exposes all of this as `gen`, `sample`, `solve`, `eval`,
//! `analyze`, `bench` and `render` subcommands.

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod io;
pub mod plugin;
pub mod render;
pub mod runlog;

pub use error::{RmeError, Result};
