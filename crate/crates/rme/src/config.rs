//! JSON configuration: solver parameters, denoiser, synthetic data and bench grid.
//!
//! Solver keys sit at the top level; `denoiser`, `data` and `grid` are nested
//! objects. Every key is optional and unknown keys are rejected.

use std::path::Path;

use rme_core::datagen::{PsdConfig, StatModelConfig};
use rme_core::denoise::{DenoiserKind, DenoiserSpec};
use rme_core::solver::SolverParams;
use serde::{Deserialize, Serialize};

use crate::error::{io_err, RmeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lapnp,
    Dapnp,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lapnp => "lapnp",
            Method::Dapnp => "dapnp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DenoiserConfig {
    /// `identity`, `box`, `gaussian`, `nlm`, `dsg-nlm` or `external:<command>`.
    pub kind: String,
    pub radius: usize,
    pub bandwidth: f64,
    pub patch_radius: usize,
    pub search_radius: usize,
    pub h_factor: f64,
    pub freeze_after: usize,
    /// Defaults to true for external denoisers only.
    pub log_wrap: Option<bool>,
    pub log_guide: bool,
    pub spectral_shift: bool,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        let d = DenoiserSpec::new(DenoiserKind::DsgNlm);
        Self {
            kind: d.kind.name().into(),
            radius: d.radius,
            bandwidth: d.bandwidth,
            patch_radius: d.patch_radius,
            search_radius: d.search_radius,
            h_factor: d.h_factor,
            freeze_after: d.freeze_after,
            log_wrap: None,
            log_guide: d.log_guide,
            spectral_shift: d.spectral_shift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub rank: usize,
    pub d0: f64,
    pub gamma_pl: [f64; 2],
    pub sigma_s: f64,
    pub d_c: f64,
    pub psd_bumps: [usize; 2],
    pub psd_half_width: [usize; 2],
    pub psd_amplitude: [f64; 2],
    pub tau: f64,
    /// `null` for clean data.
    pub snr_db: Option<f64>,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = StatModelConfig::default();
        Self {
            m: s.m,
            n: s.n,
            k: s.k,
            rank: s.r,
            d0: s.d0,
            gamma_pl: [s.gamma_pl_range.0, s.gamma_pl_range.1],
            sigma_s: s.sigma_s,
            d_c: s.d_c,
            psd_bumps: [s.psd.bumps.0, s.psd.bumps.1],
            psd_half_width: [s.psd.half_width.0, s.psd.half_width.1],
            psd_amplitude: [s.psd.amplitude.0, s.psd.amplitude.1],
            tau: 0.1,
            snr_db: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub tau: Vec<f64>,
    pub sigma_s: Vec<f64>,
    pub snr_db: Vec<Option<f64>>,
    pub methods: Vec<Method>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { tau: vec![0.05, 0.1, 0.15, 0.2], sigma_s: vec![6.0], snr_db: vec![None], methods: vec![Method::Lapnp] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub lambda: f64,
    pub zeta: f64,
    pub rho0: f64,
    pub eta: f64,
    pub gamma_rho: f64,
    pub j_inner: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub denoiser: DenoiserConfig,
    pub data: DataConfig,
    pub grid: GridConfig,
}

impl Default for Config {
    fn default() -> Self {
        let p = SolverParams::default();
        Self {
            lambda: p.lambda,
            zeta: p.zeta,
            rho0: p.rho0,
            eta: p.eta,
            gamma_rho: p.gamma_rho,
            j_inner: p.j_inner,
            max_iter: p.max_iter,
            tol: p.tol,
            denoiser: DenoiserConfig::default(),
            data: DataConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

fn bad(key: &str, msg: impl Into<String>) -> RmeError {
    RmeError::Config { key: key.into(), msg: msg.into() }
}

fn check(ok: bool, key: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(bad(key, msg))
    }
}

fn finite_pos(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        check(self.lambda.is_finite() && self.lambda >= 0.0, "lambda", "must be finite and >= 0")?;
        check(self.zeta.is_finite() && self.zeta >= 0.0, "zeta", "must be finite and >= 0")?;
        check(finite_pos(self.rho0), "rho0", "must be positive")?;
        check(self.eta > 0.0 && self.eta <= 1.0, "eta", "must lie in (0, 1]")?;
        check(self.gamma_rho.is_finite() && self.gamma_rho > 1.0, "gamma_rho", "must exceed 1")?;
        check(self.j_inner >= 1, "j_inner", "must be at least 1")?;
        check(self.max_iter >= 1, "max_iter", "must be at least 1")?;
        check(finite_pos(self.tol), "tol", "must be positive")?;

        let d = &self.denoiser;
        d.kind.parse::<DenoiserKind>().map_err(|e| bad("denoiser.kind", e.to_string()))?;
        check(finite_pos(d.bandwidth), "denoiser.bandwidth", "must be positive")?;
        check(finite_pos(d.h_factor), "denoiser.h_factor", "must be positive")?;
        check(d.freeze_after >= 1, "denoiser.freeze_after", "must be at least 1")?;

        let g = &self.data;
        check(g.m >= 1 && g.n >= 1 && g.k >= 1, "data.m/n/k", "grid dimensions must be positive")?;
        check(g.rank >= 1, "data.rank", "must be at least 1")?;
        check(finite_pos(g.d0), "data.d0", "must be positive")?;
        check(finite_pos(g.d_c), "data.d_c", "must be positive")?;
        check(g.sigma_s.is_finite() && g.sigma_s >= 0.0, "data.sigma_s", "must be finite and >= 0")?;
        check(g.tau > 0.0 && g.tau <= 1.0, "data.tau", "must lie in (0, 1]")?;
        check(g.snr_db.is_none_or(f64::is_finite), "data.snr_db", "must be finite or null")?;
        self.stat_model(0).validate().map_err(|e| bad("data", e.to_string()))?;

        let grid = &self.grid;
        check(!grid.tau.is_empty() && grid.tau.iter().all(|&t| t > 0.0 && t <= 1.0), "grid.tau", "values must lie in (0, 1]")?;
        check(
            !grid.sigma_s.is_empty() && grid.sigma_s.iter().all(|&s| s.is_finite() && s >= 0.0),
            "grid.sigma_s",
            "values must be finite and >= 0",
        )?;
        check(!grid.snr_db.is_empty() && grid.snr_db.iter().all(|s| s.is_none_or(f64::is_finite)), "grid.snr_db", "values must be finite or null")?;
        check(!grid.methods.is_empty(), "grid.methods", "must not be empty")?;
        Ok(())
    }

    pub fn solver_params(&self) -> SolverParams {
        SolverParams {
            lambda: self.lambda,
            zeta: self.zeta,
            rho0: self.rho0,
            eta: self.eta,
            gamma_rho: self.gamma_rho,
            j_inner: self.j_inner,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    /// Denoiser spec, with `kind_override` (e.g. from the command line) taking precedence.
    pub fn denoiser_spec(&self, kind_override: Option<&str>) -> Result<DenoiserSpec> {
        let d = &self.denoiser;
        let kind: DenoiserKind = kind_override
            .unwrap_or(&d.kind)
            .parse()
            .map_err(|e: rme_core::Error| bad("denoiser.kind", e.to_string()))?;
        let mut spec = DenoiserSpec::new(kind);
        spec.radius = d.radius;
        spec.bandwidth = d.bandwidth;
        spec.patch_radius = d.patch_radius;
        spec.search_radius = d.search_radius;
        spec.h_factor = d.h_factor;
        spec.freeze_after = d.freeze_after;
        if let Some(w) = d.log_wrap {
            spec.log_wrap = w;
        }
        spec.log_guide = d.log_guide;
        spec.spectral_shift = d.spectral_shift;
        spec.validate().map_err(|e| bad("denoiser", e.to_string()))?;
        Ok(spec)
    }

    pub fn stat_model(&self, seed: u64) -> StatModelConfig {
        let g = &self.data;
        StatModelConfig {
            m: g.m,
            n: g.n,
            k: g.k,
            r: g.rank,
            d0: g.d0,
            gamma_pl_range: (g.gamma_pl[0], g.gamma_pl[1]),
            sigma_s: g.sigma_s,
            d_c: g.d_c,
            psd: PsdConfig {
                bumps: (g.psd_bumps[0], g.psd_bumps[1]),
                half_width: (g.psd_half_width[0], g.psd_half_width[1]),
                amplitude: (g.psd_amplitude[0], g.psd_amplitude[1]),
            },
            seed,
        }
    }
}

pub fn parse_config(text: &str) -> Result<Config> {
    let cfg: Config = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads a config file; `None` gives the defaults.
pub fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(io_err(p))?;
            parse_config(&text)
        }
    }
}
