//! One synthetic trial: generate, sample, add noise, solve, score.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rme_core::datagen::{add_noise, generate, sample_mask, NoiseSpec, ShadowFieldSampler, StatModelConfig};
use rme_core::denoise::{DenoiserSpec, PlugDenoiser};
use rme_core::solver::{dapnp_solve, lapnp_solve, IterationRecord, SolverParams};
use rme_core::{metrics, restrict, FactorModel, MeasurementSet, SamplingMask, Tensor3};

use crate::config::Method;
use crate::error::Result;
use crate::plugin::make_denoiser;

#[derive(Debug, Clone)]
pub struct TrialData {
    pub truth: FactorModel,
    pub clean: Tensor3,
    /// Full noisy tensor (equal to `clean` for clean data).
    pub observed: Tensor3,
    pub noise: Tensor3,
    pub mask: SamplingMask,
    pub meas: MeasurementSet,
}

pub fn noise_spec(snr_db: Option<f64>) -> NoiseSpec {
    snr_db.map_or(NoiseSpec::Clean, NoiseSpec::SnrDb)
}

/// Draws map, mask and noise from one ChaCha8 stream seeded with `seed`.
///
/// The map is drawn first, so equal seeds give the same map for every `tau`.
pub fn make_trial(
    cfg: &StatModelConfig,
    sampler: &ShadowFieldSampler,
    tau: f64,
    noise: NoiseSpec,
    seed: u64,
) -> Result<TrialData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = generate(cfg, sampler, &mut rng)?;
    let clean = map.map.into_tensor();
    let mask = sample_mask((cfg.m, cfg.n), tau, &mut rng)?;
    let (observed, v) = add_noise(&clean, noise, &mut rng)?;
    let meas = restrict(&observed.matricize(), &mask)?;
    Ok(TrialData { truth: map.truth, clean, observed, noise: v, mask, meas })
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub estimate: Tensor3,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub seconds: f64,
    /// Final `|s_r - z_r| / |s_r|` per component (LaPnP only).
    pub component_gaps: Vec<f64>,
}

pub fn solve<D: PlugDenoiser + ?Sized>(
    method: Method,
    meas: &MeasurementSet,
    rank: usize,
    params: &SolverParams,
    denoiser: &mut D,
) -> Result<SolveOutcome> {
    let t0 = Instant::now();
    match method {
        Method::Lapnp => {
            let out = lapnp_solve(meas, rank, params, denoiser)?;
            let seconds = t0.elapsed().as_secs_f64();
            let component_gaps = out
                .state
                .s
                .iter()
                .zip(&out.state.z)
                .map(|(s, z)| {
                    let num: f64 = s.as_slice().iter().zip(z.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
                    let den = s.norm_sq();
                    if den > 0.0 {
                        (num / den).sqrt()
                    } else {
                        num.sqrt()
                    }
                })
                .collect();
            Ok(SolveOutcome {
                estimate: out.estimate.into_tensor(),
                history: out.history,
                converged: out.converged,
                seconds,
                component_gaps,
            })
        }
        Method::Dapnp => {
            let out = dapnp_solve(meas, params, denoiser)?;
            Ok(SolveOutcome {
                estimate: out.estimate,
                history: out.history,
                converged: out.converged,
                seconds: t0.elapsed().as_secs_f64(),
                component_gaps: Vec::new(),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct TrialRecord {
    pub method: String,
    pub denoiser: String,
    pub tau: f64,
    pub sigma_s: f64,
    /// Empty for clean data.
    pub snr_db: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub rse: f64,
    pub mssim: f64,
    pub seconds: f64,
    pub iterations: usize,
    pub converged: bool,
    pub final_delta: f64,
}

/// Generates and solves one trial with a fresh denoiser.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    cfg: &StatModelConfig,
    sampler: &ShadowFieldSampler,
    tau: f64,
    snr_db: Option<f64>,
    method: Method,
    params: &SolverParams,
    spec: &DenoiserSpec,
    trial: usize,
    seed: u64,
) -> Result<(TrialRecord, TrialData, SolveOutcome)> {
    let data = make_trial(cfg, sampler, tau, noise_spec(snr_db), seed)?;
    let mut d = make_denoiser(spec, (cfg.m, cfg.n))?;
    let out = solve(method, &data.meas, cfg.r, params, &mut d)?;
    let rec = TrialRecord {
        method: method.name().into(),
        denoiser: spec.kind.name().into(),
        tau,
        sigma_s: cfg.sigma_s,
        snr_db,
        trial,
        seed,
        rse: metrics::rse(&out.estimate, &data.clean)?,
        mssim: metrics::mssim(&out.estimate, &data.clean)?,
        seconds: out.seconds,
        iterations: out.history.len(),
        converged: out.converged,
        final_delta: out.history.last().map_or(f64::NAN, |h| h.delta),
    };
    Ok((rec, data, out))
}
