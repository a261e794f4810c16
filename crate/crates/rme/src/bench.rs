//! Seeded Monte Carlo grid over sampling rate, shadowing, SNR and method.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use rme_core::datagen::ShadowFieldSampler;

use crate::config::{Config, Method};
use crate::error::{RmeError, Result};
use crate::experiment::{run_trial, TrialRecord};
use crate::io::write_atomic;

/// Thread cap from `RME_THREADS`; all cores when unset or invalid.
pub fn thread_limit() -> Option<usize> {
    std::env::var("RME_THREADS").ok().and_then(|v| v.trim().parse().ok()).filter(|&n: &usize| n > 0)
}

#[derive(Debug, Clone)]
struct Job {
    tau: f64,
    sigma_s: f64,
    snr_db: Option<f64>,
    method: Method,
    trial: usize,
}

/// Runs every grid point for `trials` trials; trial `i` uses seed `seed + i`
/// for every grid point, so configurations are paired.
pub fn run_bench(cfg: &Config, kind_override: Option<&str>, trials: usize, seed: u64) -> Result<Vec<TrialRecord>> {
    let params = cfg.solver_params();
    let spec = cfg.denoiser_spec(kind_override)?;
    let mut jobs = Vec::new();
    for &sigma_s in &cfg.grid.sigma_s {
        for &snr_db in &cfg.grid.snr_db {
            for &tau in &cfg.grid.tau {
                for &method in &cfg.grid.methods {
                    for trial in 0..trials {
                        jobs.push(Job { tau, sigma_s, snr_db, method, trial });
                    }
                }
            }
        }
    }
    let base = cfg.stat_model(seed);
    let sampler = ShadowFieldSampler::for_config(&base)?;
    let run = |job: &Job| -> Result<TrialRecord> {
        let mut sm = base.clone();
        sm.sigma_s = job.sigma_s;
        let s = seed + job.trial as u64;
        run_trial(&sm, &sampler, job.tau, job.snr_db, job.method, &params, &spec, job.trial, s).map(|r| r.0)
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_limit() {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| RmeError::Format(format!("thread pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(run).collect())
}

pub fn trials_csv(records: &[TrialRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| RmeError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub denoiser: String,
    pub sigma_s: f64,
    pub snr_db: Option<f64>,
    pub tau: f64,
    pub trials: usize,
    pub mean_rse: f64,
    pub mean_mssim: f64,
    pub mean_seconds: f64,
    pub converged: usize,
}

/// Means per (method, sigma_s, SNR, tau), in grid order.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, u64, Option<u64>, u64), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.method.clone(), r.sigma_s.to_bits(), r.snr_db.map(f64::to_bits), r.tau.to_bits());
        groups.entry(key).or_default().push(r);
    }
    let mut rows: Vec<SummaryRow> = groups
        .into_values()
        .map(|g| {
            let n = g.len() as f64;
            SummaryRow {
                method: g[0].method.clone(),
                denoiser: g[0].denoiser.clone(),
                sigma_s: g[0].sigma_s,
                snr_db: g[0].snr_db,
                tau: g[0].tau,
                trials: g.len(),
                mean_rse: g.iter().map(|r| r.rse).sum::<f64>() / n,
                mean_mssim: g.iter().map(|r| r.mssim).sum::<f64>() / n,
                mean_seconds: g.iter().map(|r| r.seconds).sum::<f64>() / n,
                converged: g.iter().filter(|r| r.converged).count(),
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        (a.method.as_str(), a.sigma_s, a.snr_db.unwrap_or(f64::INFINITY), a.tau)
            .partial_cmp(&(b.method.as_str(), b.sigma_s, b.snr_db.unwrap_or(f64::INFINITY), b.tau))
            .expect("finite grid values")
    });
    rows
}

pub fn summary_csv(rows: &[SummaryRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| RmeError::Format(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_bench(out_dir: &Path, records: &[TrialRecord]) -> Result<()> {
    write_atomic(&out_dir.join("trials.csv"), trials_csv(records)?.as_bytes())?;
    write_atomic(&out_dir.join("summary.csv"), summary_csv(&summarize(records))?.as_bytes())
}
