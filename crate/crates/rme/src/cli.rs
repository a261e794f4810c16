//! Command-line driver.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rme_core::analysis::{kkt_residual, lemma2_bounds, linear_operators, verify_assumption1};
use rme_core::datagen::{add_noise, generate, sample_mask, ShadowFieldSampler};
use rme_core::solver::{lapnp_solve, LatentProblem};
use rme_core::{metrics, restrict, FactorModel, Field, Tensor3};
use serde_json::json;

use crate::config::{load_config, Config, Method};
use crate::error::{format_err, Result};
use crate::experiment::{noise_spec, solve};
use crate::io::{read_json, read_mask, read_tensor, sidecar_path, write_atomic, write_json, write_mask, write_sidecar, write_tensor, Sidecar};
use crate::plugin::make_denoiser;
use crate::{bench, render, runlog};

#[derive(Debug, Parser)]
#[command(name = "rme", version, about = "Radio map estimation by latent-domain plug-and-play ADMM")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Observed tensor (RMT1).
    #[arg(long)]
    pub input: PathBuf,
    /// Mask JSON; all cells when omitted.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Lapnp)]
    pub method: Method,
    /// identity, box, gaussian, nlm, dsg-nlm or external:<cmd>
    #[arg(long)]
    pub denoiser: Option<String>,
    #[arg(long)]
    pub rank: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic map: map.rmt, observed.rmt, noise.rmt, slf.rmt, psd.rmt.
    Gen {
        #[command(flatten)]
        common: Common,
    },
    /// Draw a uniform sampling mask for the grid of `--input`.
    Sample {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Reconstruct a map: estimate.rmt and runlog.jsonl.
    Solve {
        #[command(flatten)]
        args: SolveArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Score an estimate against the truth: metrics.csv.
    Eval {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Run LaPnP with a linear denoiser and report spectral, KKT and bound checks: analysis.json.
    Analyze {
        #[command(flatten)]
        args: SolveArgs,
        /// Clean map written by `gen`; slf.rmt, psd.rmt and noise.rmt are read from its directory.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Seeded Monte Carlo grid: trials.csv and summary.csv.
    Bench {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long)]
        denoiser: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Write one band of a tensor as a grayscale PNG.
    Render {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        band: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { common } => cmd_gen(&common),
        Command::Sample { input, common } => cmd_sample(&input, &common),
        Command::Solve { args, common } => cmd_solve(&args, &common),
        Command::Eval { input, truth, out_dir } => cmd_eval(&input, &truth, &out_dir),
        Command::Analyze { args, truth, common } => cmd_analyze(&args, truth.as_deref(), &common),
        Command::Bench { trials, denoiser, common } => cmd_bench(trials, denoiser.as_deref(), &common),
        Command::Render { input, band, out_dir } => cmd_render(&input, band, &out_dir),
    }
}

fn config_value(cfg: &Config) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn prepare(common: &Common) -> Result<Config> {
    let cfg = load_config(common.config.as_deref())?;
    std::fs::create_dir_all(&common.out_dir).map_err(crate::error::io_err(&common.out_dir))?;
    Ok(cfg)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

fn put_tensor(path: &Path, t: &Tensor3, sidecar: &Sidecar) -> Result<()> {
    write_tensor(path, t)?;
    write_sidecar(path, sidecar)
}

/// Map first, then noise, from one ChaCha8 stream.
fn cmd_gen(common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let sm = cfg.stat_model(common.seed);
    let sampler = ShadowFieldSampler::for_config(&sm)?;
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let map = generate(&sm, &sampler, &mut rng)?;
    let clean = map.map.into_tensor();
    let (observed, noise) = add_noise(&clean, noise_spec(cfg.data.snr_db), &mut rng)?;
    let mut side = Sidecar::new("gen", Some(common.seed), config_value(&cfg));
    side.summary = json!({ "emitters": map.emitters, "gammas": map.gammas });
    let dir = &common.out_dir;
    put_tensor(&dir.join("map.rmt"), &clean, &side)?;
    put_tensor(&dir.join("observed.rmt"), &observed, &side)?;
    put_tensor(&dir.join("noise.rmt"), &noise, &side)?;
    let (slfs, psds) = map.truth.into_parts();
    put_tensor(&dir.join("slf.rmt"), &Tensor3::from_bands(&slfs)?, &side)?;
    put_tensor(&dir.join("psd.rmt"), &psd_tensor(&psds)?, &side)
}

/// PSDs as an `R x 1 x K` tensor.
pub fn psd_tensor(psds: &[Vec<f64>]) -> Result<Tensor3> {
    let k = psds.first().map_or(0, Vec::len);
    Ok(Tensor3::from_vec(psds.len(), 1, k, psds.concat())?)
}

pub fn read_factor_model(slf: &Path, psd: &Path) -> Result<FactorModel> {
    let s = read_tensor(slf)?;
    let p = read_tensor(psd)?;
    let (_, _, r) = s.dims();
    let (pr, pn, k) = p.dims();
    if pr != r || pn != 1 {
        return Err(format_err(format!("dim mismatch: {r} SLFs but PSD tensor is {pr}x{pn}x{k}")));
    }
    let slfs = (0..r).map(|i| s.band(i)).collect();
    let psds = (0..r).map(|i| p.fiber(i).to_vec()).collect();
    Ok(FactorModel::new(slfs, psds)?)
}

fn cmd_sample(input: &Path, common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let (m, n, _) = read_tensor(input)?.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(common.seed);
    let mask = sample_mask((m, n), cfg.data.tau, &mut rng)?;
    let path = common.out_dir.join("mask.json");
    write_mask(&path, &mask)?;
    let mut side = Sidecar::new("sample", Some(common.seed), config_value(&cfg));
    side.inputs = vec![display(input)];
    side.summary = json!({ "tau": cfg.data.tau, "observed": mask.len() });
    write_sidecar(&path, &side)
}

fn load_measurements(args: &SolveArgs) -> Result<(Tensor3, rme_core::MeasurementSet)> {
    let observed = read_tensor(&args.input)?;
    let (m, n, _) = observed.dims();
    let mask = match &args.mask {
        Some(p) => read_mask(p, (m, n))?,
        None => rme_core::SamplingMask::full(m, n),
    };
    let meas = restrict(&observed.matricize(), &mask)?;
    Ok((observed, meas))
}

fn solve_inputs(args: &SolveArgs) -> Vec<String> {
    let mut v = vec![display(&args.input)];
    v.extend(args.mask.as_deref().map(display));
    v
}

fn cmd_solve(args: &SolveArgs, common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let (observed, meas) = load_measurements(args)?;
    let (m, n, _) = observed.dims();
    let spec = cfg.denoiser_spec(args.denoiser.as_deref())?;
    let rank = args.rank.unwrap_or(cfg.data.rank);
    let mut d = make_denoiser(&spec, (m, n))?;
    let out = solve(args.method, &meas, rank, &cfg.solver_params(), &mut d)?;

    let path = common.out_dir.join("estimate.rmt");
    let mut side = Sidecar::new("solve", Some(common.seed), config_value(&cfg));
    side.inputs = solve_inputs(args);
    side.summary = json!({
        "method": args.method.name(),
        "denoiser": spec.kind.name(),
        "rank": rank,
        "tau": meas.mask().len() as f64 / (m * n) as f64,
        "iterations": out.history.len(),
        "converged": out.converged,
        "seconds": out.seconds,
        "component_gaps": out.component_gaps,
    });
    put_tensor(&path, &out.estimate, &side)?;
    let log = common.out_dir.join("runlog.jsonl");
    runlog::write_runlog(&log, args.method.name(), &out.history)?;
    write_sidecar(&log, &side)
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MetricsRow {
    pub run_id: String,
    pub method: String,
    pub tau: Option<f64>,
    pub sigma_s: Option<f64>,
    pub snr: Option<f64>,
    pub rse: f64,
    pub mssim: f64,
    pub seconds: Option<f64>,
}

fn cmd_eval(input: &Path, truth: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(crate::error::io_err(out_dir))?;
    let est = read_tensor(input)?;
    let tru = read_tensor(truth)?;
    if est.dims() != tru.dims() {
        return Err(format_err(format!("dim mismatch: estimate {:?} vs truth {:?}", est.dims(), tru.dims())));
    }
    let side: Option<Sidecar> = read_json(&sidecar_path(input)).ok();
    let summary = side.as_ref().map(|s| &s.summary);
    let get = |k: &str| summary.and_then(|s| s.get(k)).and_then(serde_json::Value::as_f64);
    let data = side.as_ref().and_then(|s| s.config.get("data"));
    let row = MetricsRow {
        run_id: input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        method: summary.and_then(|s| s.get("method")).and_then(|v| v.as_str()).unwrap_or("unknown").into(),
        tau: get("tau"),
        sigma_s: data.and_then(|d| d.get("sigma_s")).and_then(serde_json::Value::as_f64),
        snr: data.and_then(|d| d.get("snr_db")).and_then(serde_json::Value::as_f64),
        rse: metrics::rse(&est, &tru)?,
        mssim: metrics::mssim(&est, &tru)?,
        seconds: get("seconds"),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(&row)?;
    let bytes = w.into_inner().map_err(|e| format_err(e.to_string()))?;
    let path = out_dir.join("metrics.csv");
    write_atomic(&path, &bytes)?;
    let mut s = Sidecar::new("eval", side.as_ref().and_then(|s| s.seed), side.map_or(serde_json::Value::Null, |s| s.config));
    s.inputs = vec![display(input), display(truth)];
    write_sidecar(&path, &s)
}

fn cmd_analyze(args: &SolveArgs, truth: Option<&Path>, common: &Common) -> Result<()> {
    let cfg = prepare(common)?;
    let (observed, meas) = load_measurements(args)?;
    let (m, n, _) = observed.dims();
    let spec = cfg.denoiser_spec(args.denoiser.as_deref())?;
    let rank = args.rank.unwrap_or(cfg.data.rank);
    let params = cfg.solver_params();
    let mut d = make_denoiser(&spec, (m, n))?;
    let out = lapnp_solve(&meas, rank, &params, &mut d)?;
    let ops = linear_operators(&d, rank)?;
    let rho = out.history.last().map_or(params.rho0, |h| h.rho);

    let mut spectral = Vec::with_capacity(rank);
    for w in &ops {
        let rep = verify_assumption1(w)?;
        spectral.push(json!({
            "passes": rep.passes(),
            "symmetric_err": rep.symmetric_err,
            "min_entry": rep.min_entry,
            "row_sum_dev": rep.row_sum_dev,
            "col_sum_dev": rep.col_sum_dev,
            "irreducible": rep.irreducible,
            "lambda_max": rep.lambda_max,
            "lambda_min": rep.lambda_min,
            "lambda_second": rep.lambda_second,
        }));
    }
    let prob = LatentProblem::new(&meas);
    let kkt = kkt_residual(&out.state, &prob, &ops, rho, params.zeta)?;
    let mut report = json!({
        "iterations": out.history.len(),
        "converged": out.converged,
        "final_rho": rho,
        "assumption1": spectral,
        "kkt": {
            "max": kkt.max(),
            "stationarity": kkt.stationarity,
            "sign": kkt.sign,
            "complementarity": kkt.complementarity,
            "range": kkt.range,
        },
    });
    let mut inputs = solve_inputs(args);
    if let Some(t) = truth {
        let dir = t.parent().unwrap_or(Path::new("."));
        let model = read_factor_model(&dir.join("slf.rmt"), &dir.join("psd.rmt"))?;
        let noise_fro = read_tensor(&dir.join("noise.rmt")).map(|v| v.frobenius_sq().sqrt()).unwrap_or(0.0);
        let b = lemma2_bounds(&model, &meas, &ops, rho, params.zeta, noise_fro, Some(&out.state.c))?;
        let c_sq: f64 = out.state.c.iter().flatten().map(|v| v * v).sum();
        let s_sq: f64 = out.state.s.iter().map(Field::norm_sq).sum();
        report["bounds"] = json!({
            "alpha": b.alpha,
            "beta": b.beta,
            "c_norm_sq": c_sq,
            "s_norm_sq": s_sq,
            "within_alpha": c_sq <= b.alpha,
            "within_beta": s_sq <= b.beta,
            "lambda_min_g": b.lambda_min_g,
            "v_obj": b.v_obj_natural,
            "theorem1_rhs": b.theorem1_rhs,
            "gap_bound": b.gap_bound,
            "xi": b.xi,
            "iota": b.iota,
            "log10_covering": b.log10_covering,
            "rank_deficient": b.rank_deficient,
        });
        report["rse"] = json!(metrics::rse(&out.estimate.into_tensor(), &read_tensor(t)?)?);
        inputs.push(display(t));
    }
    let path = common.out_dir.join("analysis.json");
    write_json(&path, &report)?;
    let mut side = Sidecar::new("analyze", Some(common.seed), config_value(&cfg));
    side.inputs = inputs;
    write_sidecar(&path, &side)
}

fn cmd_bench(trials: usize, denoiser: Option<&str>, common: &Common) -> Result<()> {
    if trials == 0 {
        return Err(format_err("--trials must be at least 1"));
    }
    let cfg = prepare(common)?;
    let records = bench::run_bench(&cfg, denoiser, trials, common.seed)?;
    bench::write_bench(&common.out_dir, &records)?;
    let mut side = Sidecar::new("bench", Some(common.seed), config_value(&cfg));
    side.summary = json!({ "trials": trials, "denoiser": denoiser, "rows": records.len() });
    write_sidecar(&common.out_dir.join("summary.csv"), &side)
}

fn cmd_render(input: &Path, band: usize, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(crate::error::io_err(out_dir))?;
    let t = read_tensor(input)?;
    let (_, _, k) = t.dims();
    if band >= k {
        return Err(format_err(format!("--band {band} out of range for {k} bands")));
    }
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "tensor".into());
    let path = out_dir.join(format!("{stem}_band{band}.png"));
    render::render_heatmap(&t.band(band), &path)?;
    let mut side = Sidecar::new("render", None, serde_json::Value::Null);
    side.inputs = vec![display(input)];
    side.summary = json!({ "band": band });
    write_sidecar(&path, &side)
}
