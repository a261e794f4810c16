//! JSON-lines run log, one object per ADMM iteration.

use std::path::Path;

use rme_core::solver::IterationRecord;
use serde_json::json;

use crate::error::Result;
use crate::io::write_atomic;

pub fn record_json(method: &str, r: &IterationRecord) -> serde_json::Value {
    json!({
        "method": method,
        "iter": r.iter,
        "delta": r.delta,
        "rho": r.rho,
        "objective": r.objective,
        "denoiser_calls": r.denoiser_calls,
        "denoiser_bound": r.denoiser_bound,
        "grad_bound": r.grad_bound,
        "fixed_point_gap": r.fixed_point_gap,
    })
}

pub fn runlog_text(method: &str, history: &[IterationRecord]) -> String {
    let mut out = String::new();
    for r in history {
        out.push_str(&record_json(method, r).to_string());
        out.push('\n');
    }
    out
}

pub fn write_runlog(path: &Path, method: &str, history: &[IterationRecord]) -> Result<()> {
    write_atomic(path, runlog_text(method, history).as_bytes())
}
