//! SPA/NNLS initialization of the factor model on observed cells.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, Error, Result};
use crate::linalg::dot;
use crate::tensor::{ColMatrix, Field, SamplingMask};

/// HALS sweeps used for the initial nonnegative least-squares fit.
pub const INIT_SWEEPS: usize = 50;
/// Residual collapse threshold relative to the largest initial column norm.
pub const SPA_COLLAPSE: f64 = 1e-12;

/// Factors on the observed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialFactors {
    /// Selected anchor columns, in pick order.
    pub anchors: Vec<usize>,
    /// Unit-norm PSD estimates, one per component.
    pub psds: Vec<Vec<f64>>,
    /// `s_r(Omega)`, one value per observed column.
    pub s_obs: Vec<Vec<f64>>,
}

/// Successive projection algorithm over the columns of `y`.
pub fn spa_select(y: &ColMatrix, r: usize) -> Result<Vec<usize>> {
    let (k, cols) = (y.rows(), y.cols());
    if r == 0 || r > k.min(cols) {
        return Err(arg_err(alloc::format!("cannot select {r} anchors from a {k}x{cols} matrix")));
    }
    let mut res: Vec<Vec<f64>> = (0..cols).map(|j| y.column(j).to_vec()).collect();
    let mut norms: Vec<f64> = res.iter().map(|c| dot(c, c)).collect();
    let initial = norms.iter().cloned().fold(0.0, f64::max);
    let floor = (SPA_COLLAPSE * libm::sqrt(initial)).powi(2);
    let mut picks = Vec::with_capacity(r);
    while picks.len() < r {
        let mut best = 0;
        for (j, &nj) in norms.iter().enumerate() {
            if nj > norms[best] {
                best = j;
            }
        }
        if !(norms[best] > floor) || initial == 0.0 {
            return Err(Error::RankDeficient { requested: r, found: picks.len() });
        }
        picks.push(best);
        let scale = libm::sqrt(norms[best]);
        let u: Vec<f64> = res[best].iter().map(|v| v / scale).collect();
        for (col, nj) in res.iter_mut().zip(norms.iter_mut()) {
            let proj = dot(&u, col);
            for (c, ui) in col.iter_mut().zip(&u) {
                *c -= proj * ui;
            }
            *nj = dot(col, col);
        }
        norms[best] = 0.0;
    }
    Ok(picks)
}

/// `|Y - C S^T|_F^2` on the observed columns.
pub fn fit_objective(y: &ColMatrix, psds: &[Vec<f64>], s_obs: &[Vec<f64>]) -> f64 {
    let mut acc = 0.0;
    for j in 0..y.cols() {
        for (kk, &yv) in y.column(j).iter().enumerate() {
            let model: f64 = psds.iter().zip(s_obs).map(|(c, s)| c[kk] * s[j]).sum();
            acc += (yv - model) * (yv - model);
        }
    }
    acc
}

/// Nonnegative least squares of `y` against fixed `psds` by HALS sweeps, in place.
pub fn nnls_hals(y: &ColMatrix, psds: &[Vec<f64>], s_obs: &mut [Vec<f64>], sweeps: usize) {
    let r = psds.len();
    let gram: Vec<Vec<f64>> = psds.iter().map(|a| psds.iter().map(|b| dot(a, b)).collect()).collect();
    let ytc: Vec<Vec<f64>> = psds.iter().map(|c| (0..y.cols()).map(|j| dot(y.column(j), c)).collect()).collect();
    for _ in 0..sweeps {
        for i in 0..r {
            if !(gram[i][i] > 0.0) {
                continue;
            }
            for j in 0..y.cols() {
                let mut num = ytc[i][j];
                for q in (0..r).filter(|&q| q != i) {
                    num -= gram[q][i] * s_obs[q][j];
                }
                s_obs[i][j] = (num / gram[i][i]).max(0.0);
            }
        }
    }
}

/// SPA anchors, unit-normalized, then `S(Omega)` by HALS from zero.
pub fn init_factors(y: &ColMatrix, r: usize) -> Result<InitialFactors> {
    let anchors = spa_select(y, r)?;
    let psds: Vec<Vec<f64>> = anchors
        .iter()
        .map(|&j| {
            let col = y.column(j);
            let nrm = libm::sqrt(dot(col, col));
            col.iter().map(|v| (v / nrm).max(0.0)).collect()
        })
        .collect();
    let mut s_obs = vec![vec![0.0; y.cols()]; r];
    nnls_hals(y, &psds, &mut s_obs, INIT_SWEEPS);
    Ok(InitialFactors { anchors, psds, s_obs })
}

/// Fills unobserved cells from the Euclidean-nearest observed cell.
///
/// `values` are ordered like `mask.indices()`. Ties go to the smaller linear index.
pub fn nn_fill(values: &[f64], mask: &SamplingMask) -> Result<Field> {
    let (m, n) = mask.dims();
    let obs = mask.indices();
    if values.len() != obs.len() || obs.is_empty() {
        return Err(arg_err("nearest-neighbour fill needs one value per observed cell"));
    }
    let pos: Vec<(i64, i64)> = obs.iter().map(|&l| ((l % m) as i64, (l / m) as i64)).collect();
    let mut data = vec![0.0; m * n];
    let mut next = 0;
    for (l, slot) in data.iter_mut().enumerate() {
        if next < obs.len() && obs[next] == l {
            *slot = values[next];
            next += 1;
            continue;
        }
        let (i, j) = ((l % m) as i64, (l / m) as i64);
        let mut best = (i64::MAX, 0);
        for (q, &(pi, pj)) in pos.iter().enumerate() {
            let d = (pi - i).pow(2) + (pj - j).pow(2);
            if d < best.0 {
                best = (d, q);
            }
        }
        *slot = values[best.1];
    }
    Field::from_vec(m, n, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn from_columns(cols: &[Vec<f64>]) -> ColMatrix {
        let k = cols[0].len();
        ColMatrix::from_vec(k, cols.len(), cols.concat()).unwrap()
    }

    #[test]
    fn spa_first_pick_is_max_norm() {
        let y = from_columns(&[vec![1.0, 0.0], vec![0.0, 3.0], vec![1.0, 1.0]]);
        assert_eq!(spa_select(&y, 1).unwrap(), vec![1]);
    }

    #[test]
    fn spa_skips_interior_column() {
        let y = from_columns(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.45, 0.45]]);
        let mut picks = spa_select(&y, 2).unwrap();
        picks.sort();
        assert_eq!(picks, vec![0, 1]);
    }

    #[test]
    fn spa_equal_columns_rank_deficient() {
        let y = from_columns(&[vec![1.0, 2.0], vec![1.0, 2.0], vec![1.0, 2.0]]);
        assert_eq!(spa_select(&y, 2), Err(Error::RankDeficient { requested: 2, found: 1 }));
        assert!(init_factors(&y, 2).is_err());
        assert!(spa_select(&y, 3).is_err());
    }

    /// Separable `Y = C H` with `H` containing an identity block.
    fn separable(rng: &mut ChaCha8Rng, k: usize, r: usize, cols: usize) -> (ColMatrix, Vec<usize>) {
        let c: Vec<Vec<f64>> = (0..r).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        let mut anchors: Vec<usize> = rand::seq::index::sample(rng, cols, r).into_vec();
        let mut data = Vec::with_capacity(k * cols);
        for j in 0..cols {
            let h: Vec<f64> = if let Some(a) = anchors.iter().position(|&x| x == j) {
                let mut e = vec![0.0; r];
                e[a] = 1.0;
                e
            } else {
                let raw: Vec<f64> = (0..r).map(|_| rng.gen::<f64>() + 0.05).collect();
                let total: f64 = raw.iter().sum();
                // strictly inside the simplex so anchors dominate in norm
                raw.iter().map(|v| 0.9 * v / total).collect()
            };
            for kk in 0..k {
                data.push((0..r).map(|q| c[q][kk] * h[q]).sum());
            }
        }
        anchors.sort();
        (ColMatrix::from_vec(k, cols, data).unwrap(), anchors)
    }

    #[test]
    fn spa_recovers_separable_anchors() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (y, anchors) = separable(&mut rng, 8, 3, 20);
            let mut picks = spa_select(&y, 3).unwrap();
            picks.sort();
            assert_eq!(picks, anchors);
        }
    }

    #[test]
    fn init_fits_separable_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (y, _) = separable(&mut rng, 10, 3, 30);
        let f = init_factors(&y, 3).unwrap();
        let total: f64 = y.as_slice().iter().map(|v| v * v).sum();
        assert!(fit_objective(&y, &f.psds, &f.s_obs) / total <= 1e-6);
        assert!(f.s_obs.iter().flatten().all(|&v| v >= 0.0));
        for c in &f.psds {
            assert!((dot(c, c) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn init_rank_one_up_to_scale() {
        let c = [0.2, 1.0, 0.5];
        let s = [2.0, 0.5, 1.0, 3.0];
        let y = from_columns(&s.iter().map(|sv| c.iter().map(|cv| cv * sv).collect()).collect::<Vec<_>>());
        let f = init_factors(&y, 1).unwrap();
        let ratio = f.s_obs[0][0] / s[0];
        for (a, b) in f.s_obs[0].iter().zip(s) {
            assert!((a / b - ratio).abs() < 1e-12);
        }
        for (a, b) in f.psds[0].iter().zip(c) {
            assert!((a * ratio - b).abs() < 1e-12);
        }
    }

    #[test]
    fn init_beats_all_ones_and_hals_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let y = ColMatrix::from_vec(6, 15, (0..90).map(|_| rng.gen::<f64>()).collect()).unwrap();
            let f = init_factors(&y, 2).unwrap();
            let ones = vec![vec![1.0; 15]; 2];
            assert!(fit_objective(&y, &f.psds, &f.s_obs) <= fit_objective(&y, &f.psds, &ones));
            let mut s = vec![vec![0.0; 15]; 2];
            let mut prev = fit_objective(&y, &f.psds, &s);
            for _ in 0..20 {
                nnls_hals(&y, &f.psds, &mut s, 1);
                let cur = fit_objective(&y, &f.psds, &s);
                assert!(cur <= prev + 1e-12);
                prev = cur;
            }
        }
    }

    #[test]
    fn nn_fill_single_cell_is_constant() {
        let mask = SamplingMask::new(3, 4, &[(1, 2)]).unwrap();
        let f = nn_fill(&[0.7], &mask).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.7));
    }

    #[test]
    fn nn_fill_voronoi_on_4x4() {
        let mask = SamplingMask::new(4, 4, &[(0, 0), (3, 3)]).unwrap();
        let f = nn_fill(&[1.0, 2.0], &mask).unwrap();
        for i in 0..4i64 {
            for j in 0..4i64 {
                let da = i * i + j * j;
                let db = (3 - i).pow(2) + (3 - j).pow(2);
                // ties: (0,0) has the smaller linear index
                let expect = if da <= db { 1.0 } else { 2.0 };
                assert_eq!(f.get(i as usize, j as usize), expect, "({i},{j})");
            }
        }
    }

    #[test]
    fn nn_fill_tie_prefers_smaller_index() {
        // (1,0) is index 1, (0,1) is index 3 on a 3x3 grid; (1,1) is equidistant.
        let mask = SamplingMask::new(3, 3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(mask.indices(), &[1, 3]);
        let f = nn_fill(&[5.0, 9.0], &mask).unwrap();
        assert_eq!(f.get(1, 1), 5.0);
    }

    #[test]
    fn nn_fill_idempotent_on_full_mask() {
        let mask = SamplingMask::full(3, 2);
        let vals = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert_eq!(nn_fill(&vals, &mask).unwrap().as_slice(), &vals);
    }
}
