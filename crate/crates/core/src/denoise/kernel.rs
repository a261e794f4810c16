//! Raw symmetric kernels over the image grid.

use alloc::vec::Vec;

use crate::error::{arg_err, Result};
use crate::linalg::CsrMatrix;
use crate::tensor::Field;

/// Smallest NLM weight. Keeps in-window entries structurally nonzero when
/// `exp(-d^2 / h^2)` underflows, so the kernel graph stays connected.
pub const NLM_WEIGHT_FLOOR: f64 = 1e-12;

/// Kernel family and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// Uniform weights over a `(2r+1)^2` square window.
    Box { radius: usize },
    /// `exp(-d^2 / (2 bw^2))` over a `(2r+1)^2` window.
    Gaussian { radius: usize, bandwidth: f64 },
    /// Non-local means: `max(exp(-|P_i - P_j|^2 / h^2), NLM_WEIGHT_FLOOR)` for `j` within the search window.
    Nlm { patch_radius: usize, search_radius: usize, h: f64 },
}

/// Builds the symmetric nonnegative kernel `K` for an image.
///
/// Rows cover only in-grid neighbours; no padding enters the weights of
/// box and Gaussian kernels. NLM patches that cross the border replicate the
/// nearest edge pixel.
pub fn build_kernel_matrix(image: &Field, spec: &KernelSpec) -> Result<CsrMatrix> {
    let (m, n) = image.dims();
    let radius = match *spec {
        KernelSpec::Box { radius } => radius,
        KernelSpec::Gaussian { radius, bandwidth } => {
            if !(bandwidth > 0.0) {
                return Err(arg_err("Gaussian bandwidth must be positive"));
            }
            radius
        }
        KernelSpec::Nlm { search_radius, h, .. } => {
            if !(h > 0.0) || !h.is_finite() {
                return Err(arg_err("NLM bandwidth h must be positive"));
            }
            search_radius
        }
    };
    let padded = match *spec {
        KernelSpec::Nlm { patch_radius, .. } => Some(Padded::new(image, patch_radius)),
        _ => None,
    };
    let r = radius as isize;
    let mut rows = Vec::with_capacity(m * n);
    for j in 0..n as isize {
        for i in 0..m as isize {
            let mut row = Vec::with_capacity((2 * radius + 1).pow(2));
            // column-major order: neighbour column outer, row inner
            for dj in -r..=r {
                let jj = j + dj;
                if jj < 0 || jj >= n as isize {
                    continue;
                }
                for di in -r..=r {
                    let ii = i + di;
                    if ii < 0 || ii >= m as isize {
                        continue;
                    }
                    let w = match *spec {
                        KernelSpec::Box { .. } => 1.0,
                        KernelSpec::Gaussian { bandwidth, .. } => {
                            let d2 = (di * di + dj * dj) as f64;
                            libm::exp(-d2 / (2.0 * bandwidth * bandwidth))
                        }
                        KernelSpec::Nlm { h, .. } => {
                            let p = padded.as_ref().expect("nlm padding");
                            let d2 = p.patch_distance_sq((i as usize, j as usize), (ii as usize, jj as usize));
                            libm::exp(-d2 / (h * h)).max(NLM_WEIGHT_FLOOR)
                        }
                    };
                    row.push((jj as usize * m + ii as usize, w));
                }
            }
            rows.push(row);
        }
    }
    CsrMatrix::from_rows(m * n, rows)
}

/// Edge-replicated copy of an image for patch extraction.
struct Padded {
    pad: usize,
    rows: usize,
    data: Vec<f64>,
}

impl Padded {
    fn new(image: &Field, pad: usize) -> Self {
        let (m, n) = image.dims();
        let rows = m + 2 * pad;
        let cols = n + 2 * pad;
        let mut data = Vec::with_capacity(rows * cols);
        for jj in 0..cols {
            let j = (jj as isize - pad as isize).clamp(0, n as isize - 1) as usize;
            for ii in 0..rows {
                let i = (ii as isize - pad as isize).clamp(0, m as isize - 1) as usize;
                data.push(image.get(i, j));
            }
        }
        Self { pad, rows, data }
    }

    fn patch_distance_sq(&self, a: (usize, usize), b: (usize, usize)) -> f64 {
        let width = 2 * self.pad + 1;
        let mut acc = 0.0;
        for dj in 0..width {
            let ca = (a.1 + dj) * self.rows + a.0;
            let cb = (b.1 + dj) * self.rows + b.0;
            let pa = &self.data[ca..ca + width];
            let pb = &self.data[cb..cb + width];
            for (x, y) in pa.iter().zip(pb) {
                let d = x - y;
                acc += d * d;
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, m: usize, n: usize) -> Field {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field::from_vec(m, n, (0..m * n).map(|_| rng.gen::<f64>()).collect()).unwrap()
    }

    #[test]
    fn box_radius_zero_is_identity() {
        let k = build_kernel_matrix(&random_image(1, 5, 4), &KernelSpec::Box { radius: 0 }).unwrap();
        assert_eq!(k, CsrMatrix::identity(20));
    }

    #[test]
    fn constant_image_nlm_weights_are_equal() {
        let img = Field::filled(6, 6, 0.3);
        let k = build_kernel_matrix(&img, &KernelSpec::Nlm { patch_radius: 2, search_radius: 5, h: 0.1 }).unwrap();
        for i in 0..36 {
            assert!(k.row(i).all(|(_, v)| v == 1.0));
        }
    }

    #[test]
    fn bad_bandwidth_rejected() {
        let img = Field::filled(3, 3, 1.0);
        assert!(build_kernel_matrix(&img, &KernelSpec::Nlm { patch_radius: 1, search_radius: 1, h: 0.0 }).is_err());
        assert!(build_kernel_matrix(&img, &KernelSpec::Gaussian { radius: 1, bandwidth: -1.0 }).is_err());
    }

    /// Independent double-loop construction with explicit clamped patches.
    fn brute_force_nlm(img: &Field, pr: isize, sr: isize, h: f64) -> Vec<Vec<f64>> {
        let (m, n) = img.dims();
        let px = |i: isize, j: isize| img.get(i.clamp(0, m as isize - 1) as usize, j.clamp(0, n as isize - 1) as usize);
        let mut dense = vec![vec![0.0; m * n]; m * n];
        for a in 0..m * n {
            let (ai, aj) = ((a % m) as isize, (a / m) as isize);
            for b in 0..m * n {
                let (bi, bj) = ((b % m) as isize, (b / m) as isize);
                if (ai - bi).abs() > sr || (aj - bj).abs() > sr {
                    continue;
                }
                let mut d2 = 0.0;
                for u in -pr..=pr {
                    for v in -pr..=pr {
                        let diff = px(ai + u, aj + v) - px(bi + u, bj + v);
                        d2 += diff * diff;
                    }
                }
                dense[a][b] = (-d2 / (h * h)).exp().max(1e-12);
            }
        }
        dense
    }

    #[test]
    fn tiny_h_keeps_window_graph_connected() {
        let img = random_image(4, 9, 7);
        let k = build_kernel_matrix(&img, &KernelSpec::Nlm { patch_radius: 1, search_radius: 1, h: 1e-6 }).unwrap();
        assert!(k.is_connected());
        assert_eq!(k.get(0, 1), 1e-12);
        assert_eq!(k.get(0, 0), 1.0);
    }

    #[test]
    fn nlm_matches_brute_force_on_8x8() {
        let img = random_image(3, 8, 8);
        let k = build_kernel_matrix(&img, &KernelSpec::Nlm { patch_radius: 2, search_radius: 3, h: 0.7 }).unwrap();
        let oracle = brute_force_nlm(&img, 2, 3, 0.7);
        for a in 0..64 {
            for b in 0..64 {
                assert!((k.get(a, b) - oracle[a][b]).abs() < 1e-14, "({a},{b})");
            }
        }
        assert!(k.asymmetry() < 1e-15);
        assert!(k.min_entry() >= 0.0);
    }

    #[test]
    fn spatial_kernels_depend_only_on_offset() {
        let k = build_kernel_matrix(&random_image(4, 7, 6), &KernelSpec::Gaussian { radius: 2, bandwidth: 1.2 }).unwrap();
        let oracle = |a: usize, b: usize| {
            let (ai, aj, bi, bj) = ((a % 7) as i64, (a / 7) as i64, (b % 7) as i64, (b / 7) as i64);
            if (ai - bi).abs() > 2 || (aj - bj).abs() > 2 {
                0.0
            } else {
                (-(((ai - bi).pow(2) + (aj - bj).pow(2)) as f64) / (2.0 * 1.44)).exp()
            }
        };
        for a in 0..42 {
            for b in 0..42 {
                assert!((k.get(a, b) - oracle(a, b)).abs() < 1e-15);
            }
        }
    }
}
