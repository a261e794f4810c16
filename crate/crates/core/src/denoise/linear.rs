//! Explicit linear denoisers `D(x) = W x`.

use alloc::vec::Vec;

use crate::error::{shape_err, Error, Result};
use crate::linalg::CsrMatrix;
use crate::tensor::Field;

/// Row-sum tolerance at which symmetric Sinkhorn stops.
pub const SINKHORN_TOL: f64 = 1e-8;
/// Sweep cap for symmetric Sinkhorn.
pub const SINKHORN_MAX_SWEEPS: usize = 1000;

/// How the raw kernel was normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `D K D`, symmetric and doubly stochastic.
    DoublyStochastic,
    /// Classic `diag(K 1)^-1 K`; not symmetric.
    RowStochastic,
    /// No normalization (identity denoiser).
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDenoiser {
    w: CsrMatrix,
    /// Set once the matrix stops being rebuilt.
    pub frozen: bool,
    /// ADMM iteration whose input produced `w` (0 for image-independent kernels).
    pub built_at_iter: usize,
    pub spectral_shift: bool,
    pub normalization: Normalization,
    /// Sinkhorn sweeps used (0 when not applicable).
    pub sweeps: usize,
}

impl LinearDenoiser {
    pub fn identity(cells: usize) -> Self {
        Self {
            w: CsrMatrix::identity(cells),
            frozen: true,
            built_at_iter: 0,
            spectral_shift: false,
            normalization: Normalization::None,
            sweeps: 0,
        }
    }

    /// Wraps an explicit matrix as-is.
    pub fn from_matrix(w: CsrMatrix, normalization: Normalization) -> Self {
        Self { w, frozen: false, built_at_iter: 0, spectral_shift: false, normalization, sweeps: 0 }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.w
    }

    /// `mat(W vec(image))`.
    pub fn apply(&self, image: &Field) -> Result<Field> {
        if image.len() != self.w.dim() {
            return Err(shape_err(alloc::format!(
                "image has {} cells, denoiser expects {}",
                image.len(),
                self.w.dim()
            )));
        }
        let (m, n) = image.dims();
        Field::from_vec(m, n, self.w.mul_vec(image.as_slice())?)
    }
}

/// Symmetric Sinkhorn scaling `W = D K D`, optionally followed by `W <- (W + I) / 2`.
pub fn dsg_normalize(k: &CsrMatrix, spectral_shift: bool) -> Result<LinearDenoiser> {
    let n = k.dim();
    let sums = k.row_sums();
    if let Some(row) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateKernel { row });
    }
    let mut d: Vec<f64> = sums.iter().map(|&s| 1.0 / libm::sqrt(s)).collect();
    let mut sweeps = 0;
    loop {
        let kd = k.mul_vec(&d)?;
        let dev = d.iter().zip(&kd).map(|(di, ki)| (di * ki - 1.0).abs()).fold(0.0, f64::max);
        if !dev.is_finite() {
            return Err(Error::Numerical("Sinkhorn scaling produced non-finite values".into()));
        }
        if dev <= SINKHORN_TOL {
            break;
        }
        if sweeps == SINKHORN_MAX_SWEEPS {
            return Err(Error::Numerical(alloc::format!(
                "symmetric Sinkhorn did not converge in {SINKHORN_MAX_SWEEPS} sweeps (row deviation {dev:e})"
            )));
        }
        for (di, ki) in d.iter_mut().zip(&kd) {
            *di = libm::sqrt(*di / ki);
        }
        sweeps += 1;
    }
    let mut w = k.clone();
    for i in 0..n {
        for p in w.row_range(i) {
            let j = w.col_at(p);
            // d_i * d_j first so that W stays bit-symmetric
            let scale = d[i] * d[j];
            w.values_mut()[p] *= scale;
        }
    }
    let w = if spectral_shift { w.half_shift() } else { w };
    Ok(LinearDenoiser {
        w,
        frozen: false,
        built_at_iter: 0,
        spectral_shift,
        normalization: Normalization::DoublyStochastic,
        sweeps,
    })
}

/// Classic NLM normalization `diag(K 1)^-1 K`.
pub fn row_normalize(k: &CsrMatrix) -> Result<LinearDenoiser> {
    let sums = k.row_sums();
    if let Some(row) = sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateKernel { row });
    }
    let mut w = k.clone();
    for (i, s) in sums.iter().enumerate() {
        for p in w.row_range(i) {
            w.values_mut()[p] /= s;
        }
    }
    Ok(LinearDenoiser::from_matrix(w, Normalization::RowStochastic))
}
