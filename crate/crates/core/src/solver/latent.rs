//! Latent-domain ADMM on the SLF factors.

use alloc::vec;
use alloc::vec::Vec;

use super::{add_fields, admm_residual, gap_ratio, next_rho, IterationRecord, SolverParams, DIVERGENCE_LIMIT};
use crate::denoise::{denoiser_bound_ratio, PlugDenoiser};
use crate::error::{arg_err, Error, Result};
use crate::init::{init_factors, nn_fill, InitialFactors};
use crate::linalg::dot;
use crate::tensor::{compose, ColMatrix, FactorModel, Field, MeasurementSet, RadioMap};

/// Normalized observations and their cell layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentProblem {
    /// `K x |Omega|`, divided by `scale`.
    pub y: ColMatrix,
    pub omega: Vec<usize>,
    pub unobserved: Vec<usize>,
    pub dims: (usize, usize),
    pub scale: f64,
}

impl LatentProblem {
    pub fn new(meas: &MeasurementSet) -> Self {
        Self {
            y: meas.normalized(),
            omega: meas.mask().indices().to_vec(),
            unobserved: meas.mask().complement(),
            dims: meas.mask().dims(),
            scale: meas.scale(),
        }
    }

    pub fn bins(&self) -> usize {
        self.y.rows()
    }

    pub fn cells(&self) -> usize {
        self.dims.0 * self.dims.1
    }
}

/// ADMM variables, all in normalized units.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub s: Vec<Field>,
    pub c: Vec<Vec<f64>>,
    pub z: Vec<Field>,
    pub psi: Vec<Field>,
    pub rho: f64,
}

impl LatentState {
    /// Initial state from SPA/NNLS factors: unobserved SLF cells by nearest neighbour, `Z = Psi = 0`.
    pub fn from_init(prob: &LatentProblem, init: &InitialFactors, rho0: f64) -> Result<Self> {
        let (m, n) = prob.dims;
        let mask = crate::tensor::SamplingMask::from_indices(m, n, &prob.omega)?;
        let s = init.s_obs.iter().map(|v| nn_fill(v, &mask)).collect::<Result<Vec<_>>>()?;
        let r = s.len();
        Ok(Self { s, c: init.psds.clone(), z: vec![Field::zeros(m, n); r], psi: vec![Field::zeros(m, n); r], rho: rho0 })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }
}

/// `Z_r = D_sigma(S_r + Psi_r)` for every component; returns the largest bound ratio.
pub fn z_update<D: PlugDenoiser + ?Sized>(
    state: &mut LatentState,
    denoiser: &mut D,
    iteration: usize,
    sigma: f64,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for r in 0..state.rank() {
        let input = add_fields(&state.s[r], &state.psi[r]);
        let out = denoiser.denoise(r, iteration, &input, sigma)?;
        if out.dims() != input.dims() {
            return Err(crate::error::shape_err("denoiser changed the field size"));
        }
        if sigma > 0.0 {
            worst = worst.max(denoiser_bound_ratio(&input, &out, sigma));
        }
        state.z[r] = out;
    }
    Ok(worst)
}

/// Exact block minimizer for `s_r` on the observed cells.
pub fn hals_s_obs(state: &mut LatentState, prob: &LatentProblem, r: usize) {
    let rho = state.rho;
    let cr = &state.c[r];
    let cross: Vec<f64> = state.c.iter().map(|c| dot(c, cr)).collect();
    let denom = cross[r] + 0.5 * rho;
    let mut out = Vec::with_capacity(prob.omega.len());
    for (j, &cell) in prob.omega.iter().enumerate() {
        let mut num = dot(prob.y.column(j), cr);
        for (q, s) in state.s.iter().enumerate() {
            if q != r {
                num -= cross[q] * s.as_slice()[cell];
            }
        }
        num += 0.5 * rho * (state.z[r].as_slice()[cell] - state.psi[r].as_slice()[cell]);
        out.push(if denom > 0.0 { (num / denom).max(0.0) } else { 0.0 });
    }
    let s = state.s[r].as_mut_slice();
    for (&cell, v) in prob.omega.iter().zip(out) {
        s[cell] = v;
    }
}

/// Exact block minimizer for `c_r`.
pub fn hals_c(state: &mut LatentState, prob: &LatentProblem, r: usize, zeta: f64) {
    let k = prob.bins();
    let sr: Vec<f64> = prob.omega.iter().map(|&cell| state.s[r].as_slice()[cell]).collect();
    let cross: Vec<f64> = state
        .s
        .iter()
        .map(|s| prob.omega.iter().zip(&sr).map(|(&cell, v)| s.as_slice()[cell] * v).sum())
        .collect();
    let mut num = vec![0.0; k];
    for (j, &w) in sr.iter().enumerate() {
        if w != 0.0 {
            for (acc, yv) in num.iter_mut().zip(prob.y.column(j)) {
                *acc += yv * w;
            }
        }
    }
    for (q, c) in state.c.iter().enumerate() {
        if q != r && cross[q] != 0.0 {
            for (acc, cv) in num.iter_mut().zip(c) {
                *acc -= cv * cross[q];
            }
        }
    }
    let denom = cross[r] + zeta;
    state.c[r] = num.iter().map(|v| if denom > 0.0 { (v / denom).max(0.0) } else { 0.0 }).collect();
}

/// `s_r = [z_r - psi_r]_+` on unobserved cells.
pub fn s_unobs(state: &mut LatentState, prob: &LatentProblem, r: usize) {
    let (z, psi) = (state.z[r].as_slice(), state.psi[r].as_slice());
    let updates: Vec<f64> = prob.unobserved.iter().map(|&cell| (z[cell] - psi[cell]).max(0.0)).collect();
    let s = state.s[r].as_mut_slice();
    for (&cell, v) in prob.unobserved.iter().zip(updates) {
        s[cell] = v;
    }
}

/// `Psi_r += S_r - Z_r`.
pub fn dual_update(state: &mut LatentState) {
    for r in 0..state.rank() {
        let (s, z) = (state.s[r].as_slice(), state.z[r].as_slice());
        let upd: Vec<f64> = s.iter().zip(z).map(|(a, b)| a - b).collect();
        for (p, d) in state.psi[r].as_mut_slice().iter_mut().zip(upd) {
            *p += d;
        }
    }
}

/// Residual `Y(:, Omega) - C S(Omega)^T`, column-major `K x |Omega|`.
fn fit_residual(state: &LatentState, prob: &LatentProblem) -> Vec<f64> {
    let k = prob.bins();
    let mut res = prob.y.as_slice().to_vec();
    for (j, &cell) in prob.omega.iter().enumerate() {
        for (c, s) in state.c.iter().zip(&state.s) {
            let w = s.as_slice()[cell];
            if w != 0.0 {
                for (e, cv) in res[j * k..(j + 1) * k].iter_mut().zip(c) {
                    *e -= cv * w;
                }
            }
        }
    }
    res
}

/// `|Y - C S^T|^2` on observed cells plus `zeta sum |c_r|^2`.
pub fn data_objective(state: &LatentState, prob: &LatentProblem, zeta: f64) -> f64 {
    let res = fit_residual(state, prob);
    dot(&res, &res) + zeta * state.c.iter().map(|c| dot(c, c)).sum::<f64>()
}

/// Objective minimized by the HALS blocks: data term plus `rho/2 sum |s_r - z_r + psi_r|^2`.
pub fn hals_objective(state: &LatentState, prob: &LatentProblem, zeta: f64) -> f64 {
    let mut prox = 0.0;
    for r in 0..state.rank() {
        for ((s, z), p) in state.s[r].as_slice().iter().zip(state.z[r].as_slice()).zip(state.psi[r].as_slice()) {
            prox += (s - z + p) * (s - z + p);
        }
    }
    data_objective(state, prob, zeta) + 0.5 * state.rho * prox
}

/// Gradient of the data term with respect to each full `s_r` (zero off `Omega`).
pub fn grad_s(state: &LatentState, prob: &LatentProblem) -> Vec<Field> {
    let k = prob.bins();
    let res = fit_residual(state, prob);
    let (m, n) = prob.dims;
    state
        .c
        .iter()
        .map(|c| {
            let mut g = Field::zeros(m, n);
            let gs = g.as_mut_slice();
            for (j, &cell) in prob.omega.iter().enumerate() {
                gs[cell] = -2.0 * dot(&res[j * k..(j + 1) * k], c);
            }
            g
        })
        .collect()
}

/// Gradient of the data term with respect to each `c_r`.
pub fn grad_c(state: &LatentState, prob: &LatentProblem) -> Vec<Vec<f64>> {
    let k = prob.bins();
    let res = fit_residual(state, prob);
    state
        .s
        .iter()
        .map(|s| {
            let mut g = vec![0.0; k];
            for (j, &cell) in prob.omega.iter().enumerate() {
                let w = s.as_slice()[cell];
                if w != 0.0 {
                    for (acc, e) in g.iter_mut().zip(&res[j * k..(j + 1) * k]) {
                        *acc -= 2.0 * e * w;
                    }
                }
            }
            g
        })
        .collect()
}

/// Result of a latent-domain solve.
#[derive(Debug, Clone)]
pub struct LapnpOutput {
    /// Factors in the units of the input (SLFs carry the scale).
    pub model: FactorModel,
    pub estimate: RadioMap,
    /// Final ADMM state in normalized units.
    pub state: LatentState,
    pub init: InitialFactors,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
    pub scale: f64,
}

impl LapnpOutput {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }
}

/// Latent-domain plug-and-play ADMM.
pub fn lapnp_solve<D: PlugDenoiser + ?Sized>(
    meas: &MeasurementSet,
    rank: usize,
    params: &SolverParams,
    denoiser: &mut D,
) -> Result<LapnpOutput> {
    params.validate()?;
    if rank == 0 {
        return Err(arg_err("rank must be at least 1"));
    }
    let prob = LatentProblem::new(meas);
    let init = init_factors(&prob.y, rank)?;
    let mut state = LatentState::from_init(&prob, &init, params.rho0)?;
    let cells = prob.cells() as f64;
    let mut history = Vec::new();
    let mut prev_delta = None;
    let mut converged = false;
    for t in 1..=params.max_iter {
        let (s0, z0, p0) = (state.s.clone(), state.z.clone(), state.psi.clone());
        let rho_t = state.rho;
        let bound = z_update(&mut state, denoiser, t, params.sigma(rho_t))?;
        for _ in 0..params.j_inner {
            for r in 0..rank {
                hals_s_obs(&mut state, &prob, r);
                hals_c(&mut state, &prob, r, params.zeta);
            }
        }
        for r in 0..rank {
            s_unobs(&mut state, &prob, r);
        }
        dual_update(&mut state);
        let delta = admm_residual([&s0, &z0, &p0], [&state.s, &state.z, &state.psi]);
        if !delta.is_finite() || delta > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iteration: t, residual: delta });
        }
        state.rho = next_rho(params, rho_t, delta, prev_delta);
        prev_delta = Some(delta);
        let grad_bound =
            grad_s(&state, &prob).iter().map(|g| g.norm() / libm::sqrt(cells)).fold(0.0, f64::max);
        history.push(IterationRecord {
            iter: t,
            delta,
            rho: rho_t,
            objective: data_objective(&state, &prob, params.zeta),
            denoiser_calls: rank,
            denoiser_bound: bound,
            grad_bound,
            fixed_point_gap: gap_ratio(&state.s, &state.z),
        });
        if delta < params.tol {
            converged = true;
            break;
        }
    }
    let scale = prob.scale;
    let slfs: Vec<Field> = state.s.iter().map(|s| s.map(|v| v * scale)).collect();
    let model = FactorModel::new(slfs, state.c.clone())?;
    let estimate = compose(&model);
    Ok(LapnpOutput { model, estimate, state, init, history, converged, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoise::{DenoiserKind, DenoiserSpec, KernelDenoiser};
    use crate::tensor::{restrict, SamplingMask, Tensor3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, r: usize, obs: usize) -> (LatentProblem, LatentState) {
        let cells = rand::seq::index::sample(rng, m * n, obs).into_vec();
        let mask = SamplingMask::from_indices(m, n, &cells).unwrap();
        let y = ColMatrix::from_vec(k, m * n, (0..k * m * n).map(|_| rng.gen::<f64>()).collect()).unwrap();
        let prob = LatentProblem::new(&restrict(&y, &mask).unwrap());
        let field = |rng: &mut ChaCha8Rng, lo: f64| Field::from_vec(m, n, (0..m * n).map(|_| rng.gen_range(lo..1.0)).collect()).unwrap();
        let state = LatentState {
            s: (0..r).map(|_| field(rng, 0.0)).collect(),
            c: (0..r).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect(),
            z: (0..r).map(|_| field(rng, 0.0)).collect(),
            psi: (0..r).map(|_| field(rng, -0.5)).collect(),
            rho: rng.gen_range(0.1..3.0),
        };
        (prob, state)
    }

    #[test]
    fn s_block_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (prob, mut st) = random_instance(&mut rng, 6, 8, 4, 3, 20);
        let before = st.clone();
        hals_s_obs(&mut st, &prob, 1);
        // each observed cell is an independent scalar quadratic
        for (j, &cell) in prob.omega.iter().enumerate() {
            let mut a = 0.0;
            let mut b = 0.0;
            for kk in 0..4 {
                let other: f64 = [0, 2].iter().map(|&q| before.c[q][kk] * before.s[q].as_slice()[cell]).sum();
                let res = prob.y.get(kk, j) - other;
                a += before.c[1][kk] * before.c[1][kk];
                b += res * before.c[1][kk];
            }
            let target = before.z[1].as_slice()[cell] - before.psi[1].as_slice()[cell];
            let x = ((b + 0.5 * before.rho * target) / (a + 0.5 * before.rho)).max(0.0);
            assert!((st.s[1].as_slice()[cell] - x).abs() < 1e-12);
        }
        for &cell in &prob.unobserved {
            assert_eq!(st.s[1].as_slice()[cell], before.s[1].as_slice()[cell]);
        }
    }

    #[test]
    fn s_block_grid_search_on_toy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (prob, mut st) = random_instance(&mut rng, 1, 3, 2, 1, 3);
        let before = st.clone();
        hals_s_obs(&mut st, &prob, 0);
        for cell in 0..3 {
            let f = |x: f64| {
                let mut st2 = before.clone();
                st2.s[0].as_mut_slice()[cell] = x;
                hals_objective(&st2, &prob, 0.0)
            };
            let mut best = (f64::INFINITY, 0.0);
            for i in 0..=3000 {
                let x = i as f64 * 1e-3;
                let v = f(x);
                if v < best.0 {
                    best = (v, x);
                }
            }
            assert!((st.s[0].as_slice()[cell] - best.1).abs() <= 1e-3);
        }
    }

    #[test]
    fn c_block_exact_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut prob, mut st) = random_instance(&mut rng, 3, 3, 5, 1, 9);
        let c_true = [0.3, 0.0, 1.2, 0.5, 0.9];
        let data: Vec<f64> = prob
            .omega
            .iter()
            .flat_map(|&cell| c_true.iter().map(move |c| (c, cell)))
            .map(|(c, cell)| c * st.s[0].as_slice()[cell])
            .collect();
        prob.y = ColMatrix::from_vec(5, 9, data).unwrap();
        hals_c(&mut st, &prob, 0, 0.0);
        for (a, b) in st.c[0].iter().zip(c_true) {
            assert!((a - b).abs() < 1e-12);
        }
        hals_c(&mut st, &prob, 0, 1e12);
        assert!(st.c[0].iter().all(|&v| v < 1e-9));
    }

    #[test]
    fn hals_blocks_never_increase_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (prob, mut st) = random_instance(&mut rng, 5, 4, 6, 3, 12);
            let mut prev = hals_objective(&st, &prob, 1e-3);
            for _ in 0..5 {
                for r in 0..3 {
                    hals_s_obs(&mut st, &prob, r);
                    let cur = hals_objective(&st, &prob, 1e-3);
                    assert!(cur <= prev + 1e-10 * prev.max(1.0));
                    prev = cur;
                    hals_c(&mut st, &prob, r, 1e-3);
                    let cur = hals_objective(&st, &prob, 1e-3);
                    assert!(cur <= prev + 1e-10 * prev.max(1.0));
                    prev = cur;
                }
            }
        }
    }

    #[test]
    fn unobserved_and_dual_rules() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (prob, mut st) = random_instance(&mut rng, 4, 4, 2, 2, 5);
        st.z[0].as_mut_slice()[prob.unobserved[0]] = 0.5;
        st.psi[0].as_mut_slice()[prob.unobserved[0]] = 0.2;
        st.z[0].as_mut_slice()[prob.unobserved[1]] = 0.1;
        st.psi[0].as_mut_slice()[prob.unobserved[1]] = 0.5;
        s_unobs(&mut st, &prob, 0);
        assert!((st.s[0].as_slice()[prob.unobserved[0]] - 0.3).abs() < 1e-15);
        assert_eq!(st.s[0].as_slice()[prob.unobserved[1]], 0.0);

        let mut st2 = st.clone();
        st2.psi = vec![Field::zeros(4, 4); 2];
        let mut running = vec![0.0; 16];
        for _ in 0..3 {
            dual_update(&mut st2);
            for (acc, (s, z)) in running.iter_mut().zip(st2.s[1].as_slice().iter().zip(st2.z[1].as_slice())) {
                *acc += s - z;
            }
        }
        for (a, b) in st2.psi[1].as_slice().iter().zip(&running) {
            assert!((a - b).abs() < 1e-14);
        }
        let mut eq = st.clone();
        eq.z = eq.s.clone();
        let psi = eq.psi.clone();
        dual_update(&mut eq);
        assert_eq!(eq.psi, psi);
    }

    #[test]
    fn identity_z_update_and_call_count() {
        struct Counting(usize);
        impl PlugDenoiser for Counting {
            fn denoise(&mut self, _: usize, _: usize, image: &Field, _: f64) -> Result<Field> {
                self.0 += 1;
                Ok(image.clone())
            }
            fn name(&self) -> alloc::string::String {
                "count".into()
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (_, mut st) = random_instance(&mut rng, 4, 5, 3, 3, 6);
        let expect: Vec<Field> = (0..3).map(|r| add_fields(&st.s[r], &st.psi[r])).collect();
        let mut d = Counting(0);
        z_update(&mut st, &mut d, 1, 0.1).unwrap();
        assert_eq!(d.0, 3);
        assert_eq!(st.z, expect);
    }

    /// Separable factors on a small grid.
    fn separable_map(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize, r: usize) -> Tensor3 {
        let mut slfs = Vec::new();
        for q in 0..r {
            let mut f = Field::from_vec(m, n, (0..m * n).map(|_| rng.gen::<f64>() * 0.3).collect()).unwrap();
            // pure pixel for each component
            for p in 0..r {
                f.set(p, 0, if p == q { 1.0 } else { 0.0 });
            }
            slfs.push(f);
        }
        let psds = (0..r).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        compose(&FactorModel::new(slfs, psds).unwrap()).into_tensor()
    }

    #[test]
    fn full_sampling_recovers_separable_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = separable_map(&mut rng, 6, 5, 8, 3);
        let meas = restrict(&x.matricize(), &SamplingMask::full(6, 5)).unwrap();
        let params = SolverParams { lambda: 0.0, max_iter: 200, ..Default::default() };
        let mut d = KernelDenoiser::new(DenoiserSpec::new(DenoiserKind::Identity), (6, 5)).unwrap();
        let out = lapnp_solve(&meas, 3, &params, &mut d).unwrap();
        let err: f64 = out.estimate.as_slice().iter().zip(x.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
        assert!(err / x.frobenius_sq() <= 1e-3);
        assert!(out.history.windows(2).all(|w| w[1].rho >= w[0].rho));
        assert!(out.history.iter().all(|h| h.denoiser_calls == 3));
        assert!(out.state.s.iter().all(|s| s.min() >= 0.0));
        assert!(out.state.c.iter().flatten().all(|&v| v >= 0.0));
    }

    #[test]
    fn deterministic_with_linear_denoiser() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = separable_map(&mut rng, 8, 8, 6, 2);
        let mask = crate::datagen::sample_mask((8, 8), 0.4, &mut rng).unwrap();
        let meas = restrict(&x.matricize(), &mask).unwrap();
        let run = || {
            let mut d = KernelDenoiser::new(DenoiserSpec::new(DenoiserKind::Gaussian), (8, 8)).unwrap();
            lapnp_solve(&meas, 2, &SolverParams { max_iter: 15, ..Default::default() }, &mut d).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.state, b.state);
        assert_eq!(a.history, b.history);
    }
}
