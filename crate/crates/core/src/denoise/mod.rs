//! Denoisers used as implicit priors in the ADMM z-step.
//!
//! Built-in denoisers are explicit sparse matrices: box and Gaussian
//! kernels (image independent) and non-local means, either classic
//! row-normalized or symmetrized to a doubly stochastic matrix (DSG-NLM).
//! Data-dependent matrices are rebuilt from the current input until the
//! freeze iteration, after which the stored matrix is reused verbatim.

mod kernel;
mod linear;
mod logwrap;

use alloc::string::String;
use alloc::vec::Vec;

pub use kernel::{build_kernel_matrix, KernelSpec};
pub use linear::{dsg_normalize, row_normalize, LinearDenoiser, Normalization, SINKHORN_MAX_SWEEPS, SINKHORN_TOL};
pub use logwrap::{frame_floor, log_forward, log_inverse, LogFrame, RELATIVE_FLOOR};

use crate::error::{arg_err, Error, Result};
use crate::tensor::Field;

/// Denoiser family.
#[derive(Debug, Clone, PartialEq)]
pub enum DenoiserKind {
    Identity,
    Box,
    Gaussian,
    /// Classic row-normalized non-local means.
    Nlm,
    /// Non-local means scaled to a symmetric doubly stochastic matrix.
    DsgNlm,
    /// Child process speaking the DNRQ/DNRS protocol.
    External { command: String },
}

impl DenoiserKind {
    pub fn name(&self) -> &str {
        match self {
            DenoiserKind::Identity => "identity",
            DenoiserKind::Box => "box",
            DenoiserKind::Gaussian => "gaussian",
            DenoiserKind::Nlm => "nlm",
            DenoiserKind::DsgNlm => "dsg-nlm",
            DenoiserKind::External { .. } => "external",
        }
    }

    pub fn is_data_dependent(&self) -> bool {
        matches!(self, DenoiserKind::Nlm | DenoiserKind::DsgNlm)
    }
}

impl core::str::FromStr for DenoiserKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(DenoiserKind::Identity),
            "box" => Ok(DenoiserKind::Box),
            "gaussian" => Ok(DenoiserKind::Gaussian),
            "nlm" => Ok(DenoiserKind::Nlm),
            "dsg-nlm" => Ok(DenoiserKind::DsgNlm),
            other => match other.strip_prefix("external:") {
                Some(cmd) if !cmd.trim().is_empty() => Ok(DenoiserKind::External { command: cmd.into() }),
                _ => Err(arg_err(alloc::format!("unknown denoiser '{other}'"))),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserSpec {
    pub kind: DenoiserKind,
    /// Box/Gaussian window radius.
    pub radius: usize,
    /// Gaussian spatial bandwidth (grid units).
    pub bandwidth: f64,
    /// NLM patch radius (2 gives 5x5 patches).
    pub patch_radius: usize,
    /// NLM search radius (5 gives an 11x11 window).
    pub search_radius: usize,
    /// Multiplier on `h^2 = 2 * patch_pixels * sigma^2`.
    pub h_factor: f64,
    /// Last ADMM iteration at which data-dependent matrices are rebuilt.
    pub freeze_after: usize,
    pub log_wrap: bool,
    /// Compute NLM patch similarities on the log-normalized input; `W` still acts on the raw input.
    pub log_guide: bool,
    /// Replace `W` with `(W + I) / 2` after normalization.
    pub spectral_shift: bool,
}

impl DenoiserSpec {
    pub fn new(kind: DenoiserKind) -> Self {
        let log_wrap = matches!(kind, DenoiserKind::External { .. });
        Self {
            kind,
            radius: 1,
            bandwidth: 1.0,
            patch_radius: 2,
            search_radius: 5,
            h_factor: 1e-3,
            freeze_after: 10,
            log_wrap,
            log_guide: true,
            spectral_shift: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !(self.h_factor > 0.0) {
            return Err(arg_err("denoiser bandwidth parameters must be positive"));
        }
        if self.freeze_after == 0 {
            return Err(arg_err("freeze_after must be at least 1"));
        }
        Ok(())
    }

    /// NLM bandwidth tied to the ADMM noise level.
    pub fn nlm_h(&self, sigma: f64) -> f64 {
        let pixels = ((2 * self.patch_radius + 1) * (2 * self.patch_radius + 1)) as f64;
        libm::sqrt(self.h_factor * 2.0 * pixels) * sigma
    }
}

/// Whether the matrix of a data-dependent denoiser is rebuilt at `iteration` (1-based).
pub fn freeze_policy(spec: &DenoiserSpec, iteration: usize) -> bool {
    spec.kind.is_data_dependent() && iteration <= spec.freeze_after
}

/// A denoiser plugged into ADMM.
///
/// `slot` names the independent image stream (latent component or band);
/// stateful denoisers keep one matrix per slot.
pub trait PlugDenoiser {
    fn denoise(&mut self, slot: usize, iteration: usize, image: &Field, sigma: f64) -> Result<Field>;

    /// Explicit matrix currently used for `slot`, if the denoiser is linear.
    fn linear_operator(&self, _slot: usize) -> Option<&LinearDenoiser> {
        None
    }

    fn name(&self) -> String;
}

impl<D: PlugDenoiser + ?Sized> PlugDenoiser for alloc::boxed::Box<D> {
    fn denoise(&mut self, slot: usize, iteration: usize, image: &Field, sigma: f64) -> Result<Field> {
        (**self).denoise(slot, iteration, image, sigma)
    }

    fn linear_operator(&self, slot: usize) -> Option<&LinearDenoiser> {
        (**self).linear_operator(slot)
    }

    fn name(&self) -> String {
        (**self).name()
    }
}

/// Built-in matrix denoisers.
#[derive(Debug, Clone)]
pub struct KernelDenoiser {
    spec: DenoiserSpec,
    dims: (usize, usize),
    shared: Option<LinearDenoiser>,
    slots: Vec<Option<LinearDenoiser>>,
}

impl KernelDenoiser {
    pub fn new(spec: DenoiserSpec, dims: (usize, usize)) -> Result<Self> {
        spec.validate()?;
        if let DenoiserKind::External { .. } = spec.kind {
            return Err(Error::UnsupportedDenoiser("external denoisers run through the plugin bridge".into()));
        }
        Ok(Self { spec, dims, shared: None, slots: Vec::new() })
    }

    pub fn spec(&self) -> &DenoiserSpec {
        &self.spec
    }

    /// Builds the normalized matrix for an input image.
    pub fn build(&self, image: &Field, sigma: f64) -> Result<LinearDenoiser> {
        let cells = self.dims.0 * self.dims.1;
        let s = &self.spec;
        match s.kind {
            DenoiserKind::Identity => Ok(LinearDenoiser::identity(cells)),
            DenoiserKind::Box => dsg_normalize(&build_kernel_matrix(image, &KernelSpec::Box { radius: s.radius })?, s.spectral_shift),
            DenoiserKind::Gaussian => dsg_normalize(
                &build_kernel_matrix(image, &KernelSpec::Gaussian { radius: s.radius, bandwidth: s.bandwidth })?,
                s.spectral_shift,
            ),
            DenoiserKind::Nlm | DenoiserKind::DsgNlm => {
                if !(sigma > 0.0) || !sigma.is_finite() {
                    return Err(arg_err("NLM needs a positive noise level"));
                }
                let spec = KernelSpec::Nlm {
                    patch_radius: s.patch_radius,
                    search_radius: s.search_radius,
                    h: s.nlm_h(sigma),
                };
                let k = if s.log_guide {
                    build_kernel_matrix(&log_forward(image, frame_floor(image)).0, &spec)?
                } else {
                    build_kernel_matrix(image, &spec)?
                };
                if s.kind == DenoiserKind::Nlm {
                    row_normalize(&k)
                } else {
                    dsg_normalize(&k, s.spectral_shift)
                }
            }
            DenoiserKind::External { .. } => Err(Error::UnsupportedDenoiser("external".into())),
        }
    }
}

impl PlugDenoiser for KernelDenoiser {
    fn denoise(&mut self, slot: usize, iteration: usize, image: &Field, sigma: f64) -> Result<Field> {
        if image.dims() != self.dims {
            return Err(crate::error::shape_err("image size differs from denoiser grid"));
        }
        match self.spec.kind {
            DenoiserKind::Identity => Ok(image.clone()),
            DenoiserKind::Box | DenoiserKind::Gaussian => {
                if self.shared.is_none() {
                    let mut w = self.build(image, sigma)?;
                    w.frozen = true;
                    self.shared = Some(w);
                }
                self.shared.as_ref().expect("built").apply(image)
            }
            _ => {
                if self.slots.len() <= slot {
                    self.slots.resize(slot + 1, None);
                }
                let rebuild = self.slots[slot].is_none() || freeze_policy(&self.spec, iteration);
                if rebuild {
                    let mut w = self.build(image, sigma)?;
                    w.built_at_iter = iteration;
                    self.slots[slot] = Some(w);
                } else if let Some(w) = self.slots[slot].as_mut() {
                    w.frozen = true;
                }
                self.slots[slot].as_ref().expect("built").apply(image)
            }
        }
    }

    fn linear_operator(&self, slot: usize) -> Option<&LinearDenoiser> {
        match self.spec.kind {
            DenoiserKind::Box | DenoiserKind::Gaussian => self.shared.as_ref(),
            _ => self.slots.get(slot).and_then(Option::as_ref),
        }
    }

    fn name(&self) -> String {
        self.spec.kind.name().into()
    }
}

/// Runs an inner denoiser on log-transformed, `[0, 1]`-normalized frames.
#[derive(Debug, Clone)]
pub struct LogWrapped<D> {
    pub inner: D,
}

impl<D: PlugDenoiser> PlugDenoiser for LogWrapped<D> {
    fn denoise(&mut self, slot: usize, iteration: usize, image: &Field, sigma: f64) -> Result<Field> {
        let (t, frame) = log_forward(image, frame_floor(image));
        let out = self.inner.denoise(slot, iteration, &t, sigma)?;
        if out.dims() != image.dims() {
            return Err(crate::error::shape_err("wrapped denoiser changed the frame size"));
        }
        Ok(log_inverse(&out, &frame))
    }

    fn name(&self) -> String {
        alloc::format!("log-{}", self.inner.name())
    }
}

/// Builds a built-in denoiser, log-wrapped when the spec asks for it.
pub fn build_denoiser(spec: &DenoiserSpec, dims: (usize, usize)) -> Result<alloc::boxed::Box<dyn PlugDenoiser>> {
    let inner = KernelDenoiser::new(spec.clone(), dims)?;
    if spec.log_wrap {
        Ok(alloc::boxed::Box::new(LogWrapped { inner }))
    } else {
        Ok(alloc::boxed::Box::new(inner))
    }
}

/// Ratio `|D(x) - x|_F^2 / (MN sigma^2)`.
pub fn denoiser_bound_ratio(input: &Field, output: &Field, sigma: f64) -> f64 {
    let diff: f64 = input.as_slice().iter().zip(output.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    diff / (input.len() as f64 * sigma * sigma)
}
