//! Numerical checks of the theory behind the latent solver with linear denoisers.
//!
//! Everything here works in the normalized units of the solver (observations
//! divided by the largest observed entry).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{arg_err, shape_err, Error, Result};
use crate::linalg::{norm, sym_eigen, CsrMatrix};
use crate::solver::{grad_c, grad_s, LatentProblem, LatentState};
use crate::tensor::{compose, FactorModel, Field, MeasurementSet};

/// Eigenvalues with magnitude at or below this count as zero.
pub const EIGEN_RANK_TOL: f64 = 1e-10;
/// Relative tolerance for membership in the range of `W`.
pub const RANGE_TOL: f64 = 1e-8;
/// Largest matrix handled by the dense eigensolver.
pub const MAX_EIGEN_CELLS: usize = 4096;
/// `lambda_min(G)` at or below this is reported as rank deficient.
pub const G_RANK_TOL: f64 = 1e-12;
pub const DEFAULT_DELTA: f64 = 0.05;
/// Default covering radius as a fraction of `sqrt(alpha beta)`.
pub const DEFAULT_EPS_FRACTION: f64 = 0.01;

const SYMMETRY_TOL: f64 = 1e-10;
const NONNEG_TOL: f64 = -1e-12;
const EIG_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub symmetric_err: f64,
    pub min_entry: f64,
    pub row_sum_dev: f64,
    pub col_sum_dev: f64,
    pub irreducible: bool,
    pub lambda_max: f64,
    pub lambda_min: f64,
    /// Largest non-principal eigenvalue (0 for a 1x1 matrix).
    pub lambda_second: f64,
    pub eigs_in_unit_interval: bool,
}

impl SpectralReport {
    pub fn passes(&self) -> bool {
        self.min_entry >= NONNEG_TOL
            && self.symmetric_err <= SYMMETRY_TOL
            && self.irreducible
            && self.eigs_in_unit_interval
            && self.lambda_second < 1.0
    }
}

fn check_eigen_size(w: &CsrMatrix) -> Result<()> {
    if w.dim() > MAX_EIGEN_CELLS {
        return Err(arg_err(alloc::format!(
            "dense eigendecomposition limited to {MAX_EIGEN_CELLS} cells, got {}",
            w.dim()
        )));
    }
    Ok(())
}

/// Non-negativity, symmetry, stochasticity, connectivity and spectrum of `W`.
pub fn verify_assumption1(w: &CsrMatrix) -> Result<SpectralReport> {
    check_eigen_size(w)?;
    let n = w.dim();
    let mut min_entry = w.min_entry();
    if w.nnz() < n * n {
        min_entry = min_entry.min(0.0);
    }
    let dev = |v: Vec<f64>| v.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max);
    let eig = sym_eigen(&w.to_dense())?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    let lambda_min = eig.values.last().copied().unwrap_or(0.0);
    Ok(SpectralReport {
        symmetric_err: w.asymmetry(),
        min_entry,
        row_sum_dev: dev(w.row_sums()),
        col_sum_dev: dev(w.col_sums()),
        irreducible: w.is_connected(),
        lambda_max,
        lambda_min,
        lambda_second: eig.values.get(1).copied().unwrap_or(0.0),
        eigs_in_unit_interval: lambda_max <= 1.0 + EIG_TOL && lambda_min >= -EIG_TOL,
    })
}

/// `W = Q~ Lambda~ Q~^T` restricted to the nonzero eigenvalues.
#[derive(Debug, Clone)]
pub struct EigenSplit {
    /// `n x L`, orthonormal columns.
    pub q: DMatrix<f64>,
    pub lambda: Vec<f64>,
}

impl EigenSplit {
    pub fn new(w: &CsrMatrix) -> Result<Self> {
        check_eigen_size(w)?;
        let eig = sym_eigen(&w.to_dense())?;
        let keep: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i].abs() > EIGEN_RANK_TOL).collect();
        let mut q = DMatrix::zeros(w.dim(), keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            q.set_column(dst, &eig.vectors.column(src));
        }
        Ok(Self { q, lambda: keep.iter().map(|&i| eig.values[i]).collect() })
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    /// `Q~^T z`.
    pub fn coords(&self, z: &[f64]) -> DVector<f64> {
        self.q.tr_mul(&DVector::from_column_slice(z))
    }

    /// `|(I - Q~ Q~^T) z|`.
    pub fn range_residual(&self, z: &[f64]) -> f64 {
        let zv = DVector::from_column_slice(z);
        (&zv - &self.q * self.q.tr_mul(&zv)).norm()
    }

    /// `z^T Q~ (Lambda~^-1 - I) Q~^T z`.
    pub fn quad(&self, z: &[f64]) -> f64 {
        let t = self.coords(z);
        t.iter().zip(&self.lambda).map(|(ti, l)| ti * ti * (1.0 / l - 1.0)).sum()
    }

    /// Value of the implicit regularizer at `z`; `+inf` outside the range of `W`.
    pub fn regularizer(&self, z: &[f64], rho: f64, lambda: f64) -> f64 {
        let zn = norm(z);
        if self.range_residual(z) > RANGE_TOL * zn {
            return f64::INFINITY;
        }
        let q = self.quad(z);
        if lambda == 0.0 {
            return if q == 0.0 { 0.0 } else { f64::INFINITY };
        }
        rho / (2.0 * lambda) * q
    }
}

/// Implicit regularizer of the linear denoiser `W` evaluated at `z`.
pub fn explicit_regularizer(w: &CsrMatrix, z: &Field, rho: f64, lambda: f64) -> Result<f64> {
    if z.len() != w.dim() {
        return Err(shape_err("field size differs from the denoiser dimension"));
    }
    Ok(EigenSplit::new(w)?.regularizer(z.as_slice(), rho, lambda))
}

/// Minimizes `|e - z|^2 + z^T Q~ (Lambda~^-1 - I) Q~^T z` subject to `z` in range(`W`)
/// by solving the equality-constrained KKT system directly.
///
/// The common factor `rho / (2 lambda)` does not move the minimizer.
pub fn prox_solve(w: &CsrMatrix, e: &[f64]) -> Result<Vec<f64>> {
    let n = w.dim();
    if e.len() != n {
        return Err(shape_err("vector length differs from the denoiser dimension"));
    }
    check_eigen_size(w)?;
    let eig = sym_eigen(&w.to_dense())?;
    let (keep, null): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| eig.values[i].abs() > EIGEN_RANK_TOL);
    let p = null.len();
    let mut a = DMatrix::zeros(n + p, n + p);
    for i in 0..n {
        a[(i, i)] = 2.0;
    }
    for &l in &keep {
        let col = eig.vectors.column(l);
        let wgt = 2.0 * (1.0 / eig.values[l] - 1.0);
        for j in 0..n {
            for i in 0..n {
                a[(i, j)] += wgt * col[i] * col[j];
            }
        }
    }
    for (c, &l) in null.iter().enumerate() {
        for i in 0..n {
            let v = eig.vectors[(i, l)];
            a[(i, n + c)] = v;
            a[(n + c, i)] = v;
        }
    }
    let mut rhs = DVector::zeros(n + p);
    for (i, &v) in e.iter().enumerate() {
        rhs[i] = 2.0 * v;
    }
    let sol = a.lu().solve(&rhs).ok_or_else(|| Error::Numerical("proximal KKT system is singular".into()))?;
    Ok(sol.iter().take(n).copied().collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub v_obj_natural: f64,
    pub alpha: f64,
    pub beta: f64,
    pub lambda_min_g: f64,
    pub theorem1_rhs: f64,
    pub gap_bound: f64,
    pub xi: f64,
    pub iota: f64,
    pub log10_covering: f64,
    /// `lambda_min(G)` was not positive; `beta` and the bound are then infinite.
    pub rank_deficient: bool,
}

fn eigen_splits(w_per_r: &[&CsrMatrix], rank: usize, cells: usize) -> Result<Vec<EigenSplit>> {
    if w_per_r.len() != rank {
        return Err(shape_err(alloc::format!("{} denoiser matrices for rank {rank}", w_per_r.len())));
    }
    w_per_r
        .iter()
        .map(|w| {
            if w.dim() != cells {
                return Err(shape_err("denoiser dimension differs from the grid"));
            }
            EigenSplit::new(w)
        })
        .collect()
}

/// Solution-norm bounds and the recovery bound for a synthetic instance.
///
/// `truth` is in input units; its SLFs are rescaled to normalized units and
/// each component is balanced between SLF and PSD to make the objective at
/// the truth as small as possible. `psds` (normalized solver output) enters
/// `G`; the balanced ground-truth PSDs are used when it is `None`.
/// `noise_fro` is the Frobenius norm of the full noise tensor in input units.
pub fn lemma2_bounds(
    truth: &FactorModel,
    meas: &MeasurementSet,
    w_per_r: &[&CsrMatrix],
    rho: f64,
    zeta: f64,
    noise_fro: f64,
    psds: Option<&[Vec<f64>]>,
) -> Result<BoundReport> {
    let (m, n, k) = truth.dims();
    if meas.mask().dims() != (m, n) || meas.bins() != k {
        return Err(shape_err("measurements and ground truth differ in size"));
    }
    if !(rho > 0.0) || zeta < 0.0 {
        return Err(arg_err("rho must be positive and zeta nonnegative"));
    }
    let cells = m * n;
    let rank = truth.rank();
    let splits = eigen_splits(w_per_r, rank, cells)?;
    let scale = meas.scale();
    let omega = meas.mask().indices();

    // balanced ground truth
    let mut slfs = Vec::with_capacity(rank);
    let mut cs = Vec::with_capacity(rank);
    let mut reg_total = 0.0;
    let mut ridge_total = 0.0;
    for ((s, c), split) in truth.slfs().iter().zip(truth.psds()).zip(&splits) {
        let sv: Vec<f64> = s.as_slice().iter().map(|v| v / scale).collect();
        let g = split.regularizer(&sv, rho, 1.0) * 2.0 / rho * 0.5 * rho;
        let h: f64 = c.iter().map(|v| v * v).sum();
        let a = if g > 0.0 && g.is_finite() && h > 0.0 && zeta > 0.0 { libm::sqrt(libm::sqrt(zeta * h / g)) } else { 1.0 };
        reg_total += a * a * g;
        ridge_total += zeta * h / (a * a);
        slfs.push(Field::from_vec(m, n, sv.iter().map(|v| v * a).collect())?);
        cs.push(c.iter().map(|v| v / a).collect::<Vec<f64>>());
    }
    let xnat = compose(&FactorModel::new(slfs, cs.clone())?).into_tensor();
    let y = meas.normalized();
    let mut fit = 0.0;
    let mut oy = 0.0;
    for (j, &cell) in omega.iter().enumerate() {
        for (kk, &yv) in y.column(j).iter().enumerate() {
            let d = yv - xnat.fiber(cell)[kk];
            fit += d * d;
            oy += yv * yv;
        }
    }
    let v = fit + reg_total + ridge_total;
    let alpha = if zeta > 0.0 { v / zeta } else { f64::INFINITY };

    let gc: &[Vec<f64>] = psds.unwrap_or(&cs);
    if gc.len() != rank || gc.iter().any(|c| c.len() != k) {
        return Err(shape_err("PSD list does not match the ground truth"));
    }
    let offsets: Vec<usize> = splits
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.rank();
            Some(o)
        })
        .collect();
    let total: usize = splits.iter().map(EigenSplit::rank).sum();
    let qo: Vec<DMatrix<f64>> = splits.iter().map(|s| s.q.select_rows(omega.iter())).collect();
    let mut g = DMatrix::zeros(total, total);
    for r in 0..rank {
        for q in r..rank {
            let cc: f64 = gc[r].iter().zip(&gc[q]).map(|(a, b)| a * b).sum();
            let block = qo[r].tr_mul(&qo[q]) * cc;
            for j in 0..block.ncols() {
                for i in 0..block.nrows() {
                    g[(offsets[r] + i, offsets[q] + j)] = block[(i, j)];
                    g[(offsets[q] + j, offsets[r] + i)] = block[(i, j)];
                }
            }
        }
        for (i, l) in splits[r].lambda.iter().enumerate() {
            g[(offsets[r] + i, offsets[r] + i)] += 0.5 * rho * (1.0 / l - 1.0);
        }
    }
    let lambda_min_g = if total == 0 { 0.0 } else { *sym_eigen(&g)?.values.last().expect("nonempty") };
    let rank_deficient = !(lambda_min_g > G_RANK_TOL);
    let beta = if rank_deficient {
        f64::INFINITY
    } else {
        let t = libm::sqrt(2.0 * v) + libm::sqrt(oy);
        t * t / lambda_min_g
    };
    let iota = y.max();
    let mut report = BoundReport {
        v_obj_natural: v,
        alpha,
        beta,
        lambda_min_g,
        theorem1_rhs: f64::INFINITY,
        gap_bound: f64::INFINITY,
        xi: f64::INFINITY,
        iota,
        log10_covering: f64::INFINITY,
        rank_deficient,
    };
    if alpha.is_finite() && beta.is_finite() && alpha > 0.0 && beta > 0.0 && iota > 0.0 {
        let t = theorem1_bound(&Theorem1Input {
            v_obj: v,
            noise_fro: noise_fro / scale,
            alpha,
            beta,
            iota,
            dims: (m, n, k),
            rank,
            omega_size: omega.len(),
            delta: DEFAULT_DELTA,
            eps: None,
        })?;
        report.theorem1_rhs = t.rhs;
        report.gap_bound = t.gap_bound;
        report.xi = t.xi;
        report.log10_covering = t.log10_covering;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Input {
    pub v_obj: f64,
    /// Frobenius norm of the noise tensor.
    pub noise_fro: f64,
    pub alpha: f64,
    pub beta: f64,
    pub iota: f64,
    pub dims: (usize, usize, usize),
    pub rank: usize,
    pub omega_size: usize,
    pub delta: f64,
    /// Covering radius; `DEFAULT_EPS_FRACTION * sqrt(alpha beta)` when `None`.
    pub eps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Bound {
    pub rhs: f64,
    pub gap_bound: f64,
    /// Hoeffding term `eps(Omega, delta, eps)`.
    pub eps_omega: f64,
    pub xi: f64,
    pub eps: f64,
    /// Natural log of the covering-number bound.
    pub ln_covering: f64,
    pub log10_covering: f64,
}

/// High-probability bound on the per-entry recovery error.
pub fn theorem1_bound(input: &Theorem1Input) -> Result<Theorem1Bound> {
    let (m, n, k) = input.dims;
    let mn = (m * n) as f64;
    let pos = |v: f64| v.is_finite() && v > 0.0;
    if !(pos(input.alpha) && pos(input.beta) && pos(input.iota)) {
        return Err(arg_err("alpha, beta and iota must be positive and finite"));
    }
    if !(input.v_obj >= 0.0) || !(input.noise_fro >= 0.0) {
        return Err(arg_err("objective and noise norm must be nonnegative"));
    }
    if m * n == 0 || k == 0 || input.rank == 0 {
        return Err(arg_err("dimensions and rank must be positive"));
    }
    if input.omega_size == 0 || input.omega_size > m * n {
        return Err(arg_err("sample count must lie in [1, MN]"));
    }
    if !(input.delta > 0.0 && input.delta < 1.0) {
        return Err(arg_err("delta must lie in (0, 1)"));
    }
    let eps = input.eps.unwrap_or(DEFAULT_EPS_FRACTION * libm::sqrt(input.alpha * input.beta));
    if !pos(eps) {
        return Err(arg_err("eps must be positive"));
    }
    let (kf, rf, om) = (k as f64, input.rank as f64, input.omega_size as f64);
    let ln_xi = libm::log(kf * input.iota * input.iota + input.alpha * input.beta) - libm::log(kf);
    let ln_covering = 0.5 * kf * rf * libm::log(input.alpha)
        + 0.5 * mn * rf * libm::log(input.beta)
        + rf * (kf + mn) * libm::log(3.0 * (libm::sqrt(input.alpha) + libm::sqrt(input.beta)) / eps);
    let factor = 1.0 / om - 1.0 / mn + 1.0 / (mn * om);
    let ln_tail = core::f64::consts::LN_2 + ln_covering - libm::log(input.delta);
    let eps_omega = if ln_tail > 0.0 {
        libm::exp(0.5 * (libm::log(factor) + 2.0 * ln_xi - core::f64::consts::LN_2 + libm::log(ln_tail)))
    } else {
        0.0
    };
    let gap_bound = libm::sqrt(eps * eps / om + eps * eps / mn + eps_omega);
    let rhs = libm::sqrt(input.v_obj / (om * kf)) + input.noise_fro / libm::sqrt(mn * kf) + gap_bound;
    Ok(Theorem1Bound {
        rhs,
        gap_bound,
        eps_omega,
        xi: libm::exp(ln_xi),
        eps,
        ln_covering,
        log10_covering: ln_covering / core::f64::consts::LN_10,
    })
}

/// Normalized violations of the first-order optimality conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct KktResidual {
    /// SLF stationarity projected on the range of `W`.
    pub stationarity: f64,
    /// Wrong-signed multipliers for `S >= 0` and `c >= 0`.
    pub sign: f64,
    pub complementarity: f64,
    /// Component of `s_r` outside the range of `W`, relative to `|s_r|`.
    pub range: f64,
    /// Gradient scale used for normalization.
    pub scale: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.sign).max(self.complementarity).max(self.range)
    }
}

/// KKT residual of a latent solver state for frozen linear denoisers `W_r`.
///
/// `rho` must be the penalty of the iteration that produced `state` (the
/// multipliers are recovered from its last `s`, `c` and dual updates).
pub fn kkt_residual(
    state: &LatentState,
    prob: &LatentProblem,
    w_per_r: &[&CsrMatrix],
    rho: f64,
    zeta: f64,
) -> Result<KktResidual> {
    let rank = state.rank();
    let splits = eigen_splits(w_per_r, rank, prob.cells())?;
    let gs = grad_s(state, prob);
    let gc = grad_c(state, prob);
    let mut scale: f64 = 0.0;
    for r in 0..rank {
        scale = scale
            .max(norm(gs[r].as_slice()))
            .max(rho * norm(state.psi[r].as_slice()))
            .max(norm(&gc[r]))
            .max(2.0 * zeta * norm(&state.c[r]));
    }
    let scale = 1.0 + scale;
    let (mut stat, mut sign, mut comp, mut range) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for r in 0..rank {
        let (s, psi) = (state.s[r].as_slice(), state.psi[r].as_slice());
        let mu: Vec<f64> = gs[r].as_slice().iter().zip(psi).map(|(g, p)| g + rho * p).collect();
        let split = &splits[r];
        let ts = split.coords(s);
        let tp = split.coords(psi);
        let mut acc = 0.0;
        for ((a, b), l) in ts.iter().zip(tp.iter()).zip(&split.lambda) {
            let d = rho * ((1.0 / l - 1.0) * a - b);
            acc += d * d;
        }
        stat = stat.max(libm::sqrt(acc) / scale);
        let nu: Vec<f64> = gc[r].iter().zip(&state.c[r]).map(|(g, c)| g + 2.0 * zeta * c).collect();
        let neg = |v: &[f64]| libm::sqrt(v.iter().map(|x| x.min(0.0) * x.min(0.0)).sum::<f64>());
        sign = sign.max(neg(&mu) / scale).max(neg(&nu) / scale);
        let smax = s.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let cmax = state.c[r].iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let cs = mu.iter().zip(s).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max) / (scale * smax);
        let cc = nu.iter().zip(&state.c[r]).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max) / (scale * cmax);
        comp = comp.max(cs).max(cc);
        range = range.max(split.range_residual(s) / norm(s).max(1.0));
    }
    Ok(KktResidual { stationarity: stat, sign, complementarity: comp, range, scale })
}

/// Frozen matrices of a linear plug-in denoiser, one per slot.
pub fn linear_operators<D: crate::denoise::PlugDenoiser + ?Sized>(denoiser: &D, slots: usize) -> Result<Vec<&CsrMatrix>> {
    (0..slots)
        .map(|r| {
            denoiser
                .linear_operator(r)
                .map(|l| l.matrix())
                .ok_or_else(|| Error::UnsupportedDenoiser(alloc::format!("{} has no explicit matrix for slot {r}", denoiser.name())))
        })
        .collect()
}

/// Dense `(1/n) 1 1^T`.
pub fn averaging_matrix(n: usize) -> CsrMatrix {
    let v = 1.0 / n as f64;
    CsrMatrix::from_rows(n, (0..n).map(|_| (0..n).map(|j| (j, v)).collect()).collect()).expect("dense pattern")
}
