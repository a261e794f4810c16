//! Reconstruction quality metrics.

use alloc::vec::Vec;

use crate::error::{arg_err, shape_err, Result};
use crate::tensor::{Field, Tensor3};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;
/// Log floor relative to the peak of the two maps.
pub const LOG_FLOOR: f64 = 1e-12;

/// Relative squared error `|est - truth|^2 / |truth|^2`.
pub fn rse(estimate: &Tensor3, truth: &Tensor3) -> Result<f64> {
    if estimate.dims() != truth.dims() {
        return Err(shape_err("estimate and truth differ in size"));
    }
    let den = truth.frobenius_sq();
    if !(den > 0.0) {
        return Err(arg_err("RSE is undefined for an all-zero truth"));
    }
    let num: f64 = estimate.as_slice().iter().zip(truth.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(num / den)
}

/// Normalized 2-D Gaussian window, column-major.
fn gaussian_window(size: usize, sigma: f64) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size).map(|i| libm::exp(-((i as f64 - c).powi(2)) / (2.0 * sigma * sigma))).collect();
    let mut w = Vec::with_capacity(size * size);
    for gj in &g {
        for gi in &g {
            w.push(gi * gj);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Mean SSIM of two `[0, 1]` images over all fully contained Gaussian windows.
pub fn ssim(a: &Field, b: &Field) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(shape_err("SSIM inputs differ in size"));
    }
    let (m, n) = a.dims();
    let size = SSIM_WINDOW.min(m).min(n);
    let w = gaussian_window(size, SSIM_SIGMA);
    let (xa, xb) = (a.as_slice(), b.as_slice());
    let mut total = 0.0;
    let mut count = 0usize;
    for j0 in 0..=n - size {
        for i0 in 0..=m - size {
            let (mut mx, mut my, mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dj in 0..size {
                for di in 0..size {
                    let wt = w[dj * size + di];
                    let p = (j0 + dj) * m + i0 + di;
                    let (x, y) = (xa[p], xb[p]);
                    mx += wt * x;
                    my += wt * y;
                    sxx += wt * x * x;
                    syy += wt * y * y;
                    sxy += wt * x * y;
                }
            }
            let (vx, vy, cxy) = (sxx - mx * mx, syy - my * my, sxy - mx * my);
            total += ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Maps two slices to dB and rescales both with their joint range to `[0, 1]`.
fn joint_log_normalize(a: &Field, b: &Field, floor: f64) -> (Field, Field) {
    let to_db = |f: &Field| f.map(|v| 10.0 * libm::log10(v.max(0.0) + floor));
    let (da, db) = (to_db(a), to_db(b));
    let lo = da.min().min(db.min());
    let hi = da.max().max(db.max());
    if hi <= lo {
        return (da.map(|_| 0.0), db.map(|_| 0.0));
    }
    let span = hi - lo;
    (da.map(|v| (v - lo) / span), db.map(|v| (v - lo) / span))
}

/// Per-band SSIM of the log-domain maps, each clamped to `[0, 1]`.
pub fn band_ssim(estimate: &Tensor3, truth: &Tensor3) -> Result<Vec<f64>> {
    if estimate.dims() != truth.dims() {
        return Err(shape_err("estimate and truth differ in size"));
    }
    let peak = truth.max().max(estimate.max());
    let floor = if peak > 0.0 { LOG_FLOOR * peak } else { LOG_FLOOR };
    let k = truth.dims().2;
    (0..k)
        .map(|kk| {
            let (a, b) = joint_log_normalize(&estimate.band(kk), &truth.band(kk), floor);
            ssim(&a, &b).map(|v| v.clamp(0.0, 1.0))
        })
        .collect()
}

/// Log-domain mean SSIM over frequency bands.
pub fn mssim(estimate: &Tensor3, truth: &Tensor3) -> Result<f64> {
    let per = band_ssim(estimate, truth)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, m: usize, n: usize, k: usize) -> Tensor3 {
        Tensor3::from_vec(m, n, k, (0..m * n * k).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn rse_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random(&mut rng, 4, 5, 3);
        assert_eq!(rse(&x, &x).unwrap(), 0.0);
        assert!((rse(&x.scaled(2.0), &x).unwrap() - 1.0).abs() < 1e-14);
        let y = random(&mut rng, 4, 5, 3);
        assert!((rse(&y.scaled(3.0), &x.scaled(3.0)).unwrap() - rse(&y, &x).unwrap()).abs() < 1e-12);
        assert!(rse(&x, &Tensor3::zeros(4, 5, 3)).is_err());
        let (mut num, mut den) = (0.0, 0.0);
        for m in 0..4 {
            for n in 0..5 {
                for k in 0..3 {
                    num += (y.get(m, n, k) - x.get(m, n, k)).powi(2);
                    den += x.get(m, n, k).powi(2);
                }
            }
        }
        assert!((rse(&y, &x).unwrap() - num / den).abs() < 1e-14);
    }

    #[test]
    fn mssim_identity_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random(&mut rng, 16, 14, 3);
        assert_eq!(mssim(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn constant_slices_closed_form() {
        let a = Tensor3::from_vec(12, 12, 1, alloc::vec![1.0; 144]).unwrap();
        let b = Tensor3::from_vec(12, 12, 1, alloc::vec![10.0; 144]).unwrap();
        // normalized slices are all 0 and all 1: SSIM = C1 / (1 + C1)
        let expect = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((mssim(&a, &b).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn symmetric_bounded_and_order_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let (x, y) = (random(&mut rng, 13, 12, 3), random(&mut rng, 13, 12, 3));
            let v = mssim(&x, &y).unwrap();
            assert!((0.0..=1.0).contains(&v));
            assert!((v - mssim(&y, &x).unwrap()).abs() < 1e-12);
            let per = band_ssim(&x, &y).unwrap();
            let perm = |t: &Tensor3| Tensor3::from_bands(&[t.band(2), t.band(0), t.band(1)]).unwrap();
            let pv = mssim(&perm(&x), &perm(&y)).unwrap();
            assert!((pv - (per[2] + per[0] + per[1]) / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn small_images_shrink_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random(&mut rng, 4, 6, 2);
        assert_eq!(mssim(&x, &x).unwrap(), 1.0);
        let v = mssim(&x, &random(&mut rng, 4, 6, 2)).unwrap();
        assert!(v.is_finite() && v < 1.0);
    }

    #[test]
    fn negative_entries_are_floored() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random(&mut rng, 12, 12, 1);
        let y = x.scaled(-1.0);
        let v = mssim(&y, &x).unwrap();
        assert!(v.is_finite() && (0.0..=1.0).contains(&v));
    }
}
