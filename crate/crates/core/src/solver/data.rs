//! Data-domain ADMM baseline: band-by-band denoising of the full map.

use alloc::vec::Vec;

use super::{add_fields, admm_residual, gap_ratio, next_rho, IterationRecord, SolverParams, DIVERGENCE_LIMIT};
use crate::denoise::{denoiser_bound_ratio, PlugDenoiser};
use crate::error::{Error, Result};
use crate::init::nn_fill;
use crate::tensor::{Field, MeasurementSet, SamplingMask, Tensor3};

/// Normalized observations, one entry list per band.
#[derive(Debug, Clone, PartialEq)]
pub struct DataProblem {
    /// `y[k][j]`: band `k` at the `j`-th observed cell.
    pub y: Vec<Vec<f64>>,
    pub mask: SamplingMask,
    pub scale: f64,
}

impl DataProblem {
    pub fn new(meas: &MeasurementSet) -> Self {
        let ymat = meas.normalized();
        let y = (0..ymat.rows()).map(|k| (0..ymat.cols()).map(|j| ymat.get(k, j)).collect()).collect();
        Self { y, mask: meas.mask().clone(), scale: meas.scale() }
    }

    pub fn bins(&self) -> usize {
        self.y.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataState {
    pub x: Vec<Field>,
    pub z: Vec<Field>,
    pub u: Vec<Field>,
    pub rho: f64,
}

/// Closed-form X-step: `(2y + rho (z - u)) / (2 + rho)` where observed, `z - u` elsewhere.
pub fn dapnp_x_update(state: &mut DataState, prob: &DataProblem) {
    let rho = state.rho;
    let obs = prob.mask.indices();
    for k in 0..prob.bins() {
        let (z, u) = (state.z[k].as_slice(), state.u[k].as_slice());
        let mut x: Vec<f64> = z.iter().zip(u).map(|(a, b)| a - b).collect();
        for (&cell, &yv) in obs.iter().zip(&prob.y[k]) {
            x[cell] = (2.0 * yv + rho * x[cell]) / (2.0 + rho);
        }
        state.x[k].as_mut_slice().copy_from_slice(&x);
    }
}

#[derive(Debug, Clone)]
pub struct DapnpOutput {
    /// Unconstrained estimate in input units (may contain negative entries).
    pub estimate: Tensor3,
    pub state: DataState,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub scale: f64,
}

/// Data-domain plug-and-play ADMM with one denoiser call per band.
pub fn dapnp_solve<D: PlugDenoiser + ?Sized>(
    meas: &MeasurementSet,
    params: &SolverParams,
    denoiser: &mut D,
) -> Result<DapnpOutput> {
    params.validate()?;
    let prob = DataProblem::new(meas);
    let (m, n) = prob.mask.dims();
    let kk = prob.bins();
    let z = prob.y.iter().map(|band| nn_fill(band, &prob.mask)).collect::<Result<Vec<_>>>()?;
    let mut state = DataState { x: z.clone(), z, u: alloc::vec![Field::zeros(m, n); kk], rho: params.rho0 };
    let mut history = Vec::new();
    let mut prev_delta = None;
    let mut converged = false;
    for t in 1..=params.max_iter {
        let (x0, z0, u0) = (state.x.clone(), state.z.clone(), state.u.clone());
        let rho_t = state.rho;
        let sigma = params.sigma(rho_t);
        dapnp_x_update(&mut state, &prob);
        let mut bound: f64 = 0.0;
        for k in 0..kk {
            let input = add_fields(&state.x[k], &state.u[k]);
            let out = denoiser.denoise(k, t, &input, sigma)?;
            if out.dims() != (m, n) {
                return Err(crate::error::shape_err("denoiser changed the field size"));
            }
            if sigma > 0.0 {
                bound = bound.max(denoiser_bound_ratio(&input, &out, sigma));
            }
            state.z[k] = out;
        }
        for k in 0..kk {
            let upd: Vec<f64> = state.x[k].as_slice().iter().zip(state.z[k].as_slice()).map(|(a, b)| a - b).collect();
            for (u, d) in state.u[k].as_mut_slice().iter_mut().zip(upd) {
                *u += d;
            }
        }
        let delta = admm_residual([&x0, &z0, &u0], [&state.x, &state.z, &state.u]);
        if !delta.is_finite() || delta > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iteration: t, residual: delta });
        }
        state.rho = next_rho(params, rho_t, delta, prev_delta);
        prev_delta = Some(delta);
        let mut fit = 0.0;
        for (k, band) in prob.y.iter().enumerate() {
            for (&cell, &yv) in prob.mask.indices().iter().zip(band) {
                let d = yv - state.x[k].as_slice()[cell];
                fit += d * d;
            }
        }
        history.push(IterationRecord {
            iter: t,
            delta,
            rho: rho_t,
            objective: fit,
            denoiser_calls: kk,
            denoiser_bound: bound,
            grad_bound: 0.0,
            fixed_point_gap: gap_ratio(&state.x, &state.z),
        });
        if delta < params.tol {
            converged = true;
            break;
        }
    }
    let bands: Vec<Field> = state.x.iter().map(|f| f.map(|v| v * prob.scale)).collect();
    let estimate = Tensor3::from_bands(&bands)?;
    Ok(DapnpOutput { estimate, state, history, converged, scale: prob.scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{DenoiserKind, DenoiserSpec, KernelDenoiser};
    use crate::tensor::restrict;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Tensor3 {
        Tensor3::from_vec(m, n, k, (0..m * n * k).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn x_step_matches_scalar_argmin() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_tensor(&mut rng, 4, 3, 2);
        let mask = SamplingMask::new(4, 3, &[(0, 0), (2, 1)]).unwrap();
        let prob = DataProblem::new(&restrict(&x.matricize(), &mask).unwrap());
        let field = |rng: &mut ChaCha8Rng| Field::from_vec(4, 3, (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let mut st = DataState {
            x: (0..2).map(|_| field(&mut rng)).collect(),
            z: (0..2).map(|_| field(&mut rng)).collect(),
            u: (0..2).map(|_| field(&mut rng)).collect(),
            rho: 0.7,
        };
        let before = st.clone();
        dapnp_x_update(&mut st, &prob);
        for k in 0..2 {
            for cell in 0..12 {
                let target = before.z[k].as_slice()[cell] - before.u[k].as_slice()[cell];
                let obs = prob.mask.indices().iter().position(|&c| c == cell);
                // stationarity of the 1-D quadratic
                let xv = st.x[k].as_slice()[cell];
                let grad = match obs {
                    Some(j) => -2.0 * (prob.y[k][j] - xv) + 0.7 * (xv - target),
                    None => 0.7 * (xv - target),
                };
                assert!(grad.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_full_sampling_small_rho_returns_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, 5, 4, 3);
        let meas = restrict(&x.matricize(), &SamplingMask::full(5, 4)).unwrap();
        let params = SolverParams { rho0: 1e-9, lambda: 0.0, max_iter: 5, ..Default::default() };
        let mut d = KernelDenoiser::new(DenoiserSpec::new(DenoiserKind::Identity), (5, 4)).unwrap();
        let out = dapnp_solve(&meas, &params, &mut d).unwrap();
        for (a, b) in out.estimate.as_slice().iter().zip(x.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn k_calls_per_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, 6, 6, 4);
        let mask = crate::datagen::sample_mask((6, 6), 0.3, &mut rng).unwrap();
        let meas = restrict(&x.matricize(), &mask).unwrap();
        let mut d = KernelDenoiser::new(DenoiserSpec::new(DenoiserKind::DsgNlm), (6, 6)).unwrap();
        let out = dapnp_solve(&meas, &SolverParams { max_iter: 4, ..Default::default() }, &mut d).unwrap();
        assert!(out.history.iter().all(|h| h.denoiser_calls == 4));
        assert!(out.history.windows(2).all(|w| w[1].rho >= w[0].rho));
    }
}
