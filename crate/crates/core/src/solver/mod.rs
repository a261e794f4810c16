//! Plug-and-play ADMM solvers.
//!
//! [`lapnp_solve`] works on the latent SLFs of the factor model and calls
//! the denoiser `R` times per iteration; [`dapnp_solve`] denoises each of the
//! `K` bands of the map directly.

mod data;
mod latent;

pub use data::{dapnp_solve, dapnp_x_update, DapnpOutput, DataProblem, DataState};
pub use latent::{
    data_objective, dual_update, grad_c, grad_s, hals_c, hals_objective, hals_s_obs, lapnp_solve, s_unobs, z_update,
    LapnpOutput, LatentProblem, LatentState,
};

use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::tensor::Field;

/// Residual above which the iteration is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    /// Weight of the implicit denoiser prior (on max-normalized data).
    pub lambda: f64,
    /// Ridge weight on the PSDs.
    pub zeta: f64,
    pub rho0: f64,
    /// Residual shrink threshold for the rho schedule.
    pub eta: f64,
    /// Rho growth factor.
    pub gamma_rho: f64,
    /// HALS sweeps per outer iteration.
    pub j_inner: usize,
    pub max_iter: usize,
    /// Stop once the residual drops below this.
    pub tol: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { lambda: 1e-2, zeta: 1e-3, rho0: 1.0, eta: 0.95, gamma_rho: 1.1, j_inner: 20, max_iter: 100, tol: 1e-4 }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.lambda, self.zeta, self.rho0, self.eta, self.gamma_rho, self.tol].iter().all(|v| v.is_finite());
        if !finite {
            return Err(arg_err("solver parameters must be finite"));
        }
        if self.lambda < 0.0 || self.zeta < 0.0 {
            return Err(arg_err("lambda and zeta must be nonnegative"));
        }
        if !(self.rho0 > 0.0) || !(self.tol > 0.0) {
            return Err(arg_err("rho0 and tol must be positive"));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(arg_err("eta must lie in (0, 1]"));
        }
        if !(self.gamma_rho > 1.0) {
            return Err(arg_err("gamma_rho must exceed 1"));
        }
        if self.j_inner == 0 || self.max_iter == 0 {
            return Err(arg_err("j_inner and max_iter must be at least 1"));
        }
        Ok(())
    }

    /// Denoiser strength `sqrt(lambda / rho)`.
    pub fn sigma(&self, rho: f64) -> f64 {
        libm::sqrt(self.lambda / rho)
    }
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub delta: f64,
    /// Rho in effect during this iteration.
    pub rho: f64,
    pub objective: f64,
    pub denoiser_calls: usize,
    /// Largest `|D(x) - x|^2 / (MN sigma^2)` over this iteration's calls.
    pub denoiser_bound: f64,
    /// Largest `|grad_s f| / sqrt(MN)` (latent solver only, 0 otherwise).
    pub grad_bound: f64,
    /// `|S - Z|_F / |S|_F` after the iteration.
    pub fixed_point_gap: f64,
}

/// Rho schedule: grow by `gamma_rho` unless the residual shrank enough.
pub fn next_rho(params: &SolverParams, rho: f64, delta: f64, prev_delta: Option<f64>) -> f64 {
    match prev_delta {
        Some(prev) if delta >= params.eta * prev => params.gamma_rho * rho,
        _ => rho,
    }
}

/// `(1/sqrt(MN)) sum_i (|a_i - a'_i| + |b_i - b'_i| + |c_i - c'_i|)` over triples of field lists.
pub fn admm_residual(before: [&[Field]; 3], after: [&[Field]; 3]) -> f64 {
    let mut total = 0.0;
    let mut cells = 0;
    for (old, new) in before.iter().zip(after.iter()) {
        for (a, b) in old.iter().zip(new.iter()) {
            cells = a.len();
            total += crate::linalg::dist(a.as_slice(), b.as_slice());
        }
    }
    if cells == 0 {
        return 0.0;
    }
    total / libm::sqrt(cells as f64)
}

pub(crate) fn gap_ratio(s: &[Field], z: &[Field]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in s.iter().zip(z) {
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            num += (x - y) * (x - y);
            den += x * x;
        }
    }
    if den > 0.0 {
        libm::sqrt(num / den)
    } else {
        libm::sqrt(num)
    }
}

pub(crate) fn add_fields(a: &Field, b: &Field) -> Field {
    let data: Vec<f64> = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect();
    Field::from_vec(a.rows(), a.cols(), data).expect("same shape")
}
