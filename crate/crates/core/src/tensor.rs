//! Tensor and factor data model.
//!
//! All grids use 0-based, column-major vectorization: cell `(m, n)` of an
//! `M x N` grid maps to linear index `n * M + m`. A radio map is stored cell
//! by cell with the frequency axis fastest, so the `K x MN` matricization is
//! the same buffer read column by column.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{arg_err, shape_err, Error, Result};

/// Linear index of grid cell `(m, n)` in an `M x N` grid.
pub fn vec_index(m: usize, n: usize, dims: (usize, usize)) -> Result<usize> {
    let (rows, cols) = dims;
    if m >= rows {
        return Err(Error::Range { what: "row", index: m, bound: rows });
    }
    if n >= cols {
        return Err(Error::Range { what: "column", index: n, bound: cols });
    }
    Ok(n * rows + m)
}

/// Inverse of [`vec_index`].
pub fn cell_of(index: usize, dims: (usize, usize)) -> Result<(usize, usize)> {
    let (rows, cols) = dims;
    if index >= rows * cols {
        return Err(Error::Range { what: "linear", index, bound: rows * cols });
    }
    Ok((index % rows, index / rows))
}

/// Real-valued `M x N` field stored in vectorized (column-major) order.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    m: usize,
    n: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, n, data: vec![0.0; m * n] }
    }

    pub fn filled(m: usize, n: usize, value: f64) -> Self {
        Self { m, n, data: vec![value; m * n] }
    }

    /// Wraps a vectorized buffer (`data[n * M + m]`).
    pub fn from_vec(m: usize, n: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(shape_err("field dimensions must be positive"));
        }
        if data.len() != m * n {
            return Err(shape_err(alloc::format!(
                "field buffer has {} entries, expected {}x{}",
                data.len(),
                m,
                n
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(arg_err("field entries must be finite"));
        }
        Ok(Self { m, n, data })
    }

    /// Builds a field from rows given top-down (`rows[m][n]`).
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(shape_err("ragged rows"));
        }
        let mut data = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * m + i] = v;
            }
        }
        Self::from_vec(m, n, data)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.data[n * self.m + m]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        self.data[n * self.m + m] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { m: self.m, n: self.n, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }
}

/// `K x C` matrix stored column by column.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(alloc::format!(
                "matrix buffer has {} entries, expected {}x{}",
                data.len(),
                rows,
                cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.rows + i]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[j * self.rows + i] = v;
    }

    #[inline]
    pub fn column(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn column_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn frobenius(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dense real `M x N x K` tensor (entries may be signed).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    m: usize,
    n: usize,
    k: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(m: usize, n: usize, k: usize) -> Self {
        Self { m, n, k, data: vec![0.0; m * n * k] }
    }

    /// Wraps a buffer in cell-major order (`data[(n * M + m) * K + k]`).
    pub fn from_vec(m: usize, n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || n == 0 || k == 0 {
            return Err(shape_err("tensor dimensions must be positive"));
        }
        if data.len() != m * n * k {
            return Err(shape_err(alloc::format!(
                "tensor buffer has {} entries, expected {}x{}x{}",
                data.len(),
                m,
                n,
                k
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(arg_err("tensor entries must be finite"));
        }
        Ok(Self { m, n, k, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.m, self.n, self.k)
    }

    #[inline]
    pub fn get(&self, m: usize, n: usize, k: usize) -> f64 {
        self.data[(n * self.m + m) * self.k + k]
    }

    #[inline]
    pub fn set(&mut self, m: usize, n: usize, k: usize, v: f64) {
        self.data[(n * self.m + m) * self.k + k] = v;
    }

    /// Spectrum at a cell given by linear index.
    #[inline]
    pub fn fiber(&self, cell: usize) -> &[f64] {
        &self.data[cell * self.k..(cell + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Frequency slice `X(:, :, k)`.
    pub fn band(&self, k: usize) -> Field {
        let data = (0..self.m * self.n).map(|c| self.data[c * self.k + k]).collect();
        Field { m: self.m, n: self.n, data }
    }

    pub fn set_band(&mut self, k: usize, field: &Field) {
        for (c, &v) in field.as_slice().iter().enumerate() {
            self.data[c * self.k + k] = v;
        }
    }

    /// Stacks `K` fields into a tensor.
    pub fn from_bands(bands: &[Field]) -> Result<Self> {
        let first = bands.first().ok_or_else(|| shape_err("no bands"))?;
        let (m, n) = first.dims();
        if bands.iter().any(|b| b.dims() != (m, n)) {
            return Err(shape_err("bands differ in size"));
        }
        let mut out = Self::zeros(m, n, bands.len());
        for (k, b) in bands.iter().enumerate() {
            out.set_band(k, b);
        }
        Ok(out)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, a: f64) -> Tensor3 {
        Tensor3 { m: self.m, n: self.n, k: self.k, data: self.data.iter().map(|v| a * v).collect() }
    }

    pub fn add(&self, other: &Tensor3) -> Result<Tensor3> {
        if self.dims() != other.dims() {
            return Err(shape_err("tensor sizes differ"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(Tensor3 { m: self.m, n: self.n, k: self.k, data })
    }

    /// `K x MN` matricization; column `vec_index(m, n)` holds `X(m, n, :)`.
    pub fn matricize(&self) -> ColMatrix {
        ColMatrix { rows: self.k, cols: self.m * self.n, data: self.data.clone() }
    }

    /// Inverse of [`Tensor3::matricize`].
    pub fn from_matricized(y: &ColMatrix, m: usize, n: usize) -> Result<Self> {
        if y.cols() != m * n {
            return Err(shape_err(alloc::format!(
                "matrix has {} columns, grid has {} cells",
                y.cols(),
                m * n
            )));
        }
        Self::from_vec(m, n, y.rows(), y.as_slice().to_vec())
    }
}

/// Nonnegative radio map in linear power units.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioMap(Tensor3);

impl RadioMap {
    pub fn new(tensor: Tensor3) -> Result<Self> {
        if tensor.data.iter().any(|&v| v < 0.0) {
            return Err(arg_err("radio map entries must be nonnegative"));
        }
        Ok(Self(tensor))
    }

    pub fn from_vec(m: usize, n: usize, k: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(Tensor3::from_vec(m, n, k, data)?)
    }

    pub fn tensor(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor3 {
        self.0
    }
}

impl core::ops::Deref for RadioMap {
    type Target = Tensor3;
    fn deref(&self) -> &Tensor3 {
        &self.0
    }
}

/// Observed grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMask {
    m: usize,
    n: usize,
    /// Linear indices of observed cells, ascending.
    indices: Vec<usize>,
    observed: Vec<bool>,
}

impl SamplingMask {
    /// Builds a mask from distinct 0-based `(m, n)` coordinates.
    pub fn new(m: usize, n: usize, cells: &[(usize, usize)]) -> Result<Self> {
        if cells.is_empty() {
            return Err(arg_err("sampling mask must contain at least one cell"));
        }
        let mut observed = vec![false; m * n];
        let mut indices = Vec::with_capacity(cells.len());
        for &(i, j) in cells {
            let idx = vec_index(i, j, (m, n))?;
            if observed[idx] {
                return Err(arg_err(alloc::format!("duplicate cell ({i}, {j}) in mask")));
            }
            observed[idx] = true;
            indices.push(idx);
        }
        indices.sort_unstable();
        Ok(Self { m, n, indices, observed })
    }

    /// Builds a mask from linear indices.
    pub fn from_indices(m: usize, n: usize, linear: &[usize]) -> Result<Self> {
        let cells = linear
            .iter()
            .map(|&idx| cell_of(idx, (m, n)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(m, n, &cells)
    }

    pub fn full(m: usize, n: usize) -> Self {
        Self { m, n, indices: (0..m * n).collect(), observed: vec![true; m * n] }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.m, self.n)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Sorted linear indices (the vectorized observation set).
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Observed `(m, n)` coordinates in ascending linear-index order.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.indices.iter().map(|&i| (i % self.m, i / self.m)).collect()
    }

    #[inline]
    pub fn is_observed(&self, linear: usize) -> bool {
        self.observed[linear]
    }

    /// Linear indices of unobserved cells, ascending.
    pub fn complement(&self) -> Vec<usize> {
        (0..self.m * self.n).filter(|&i| !self.observed[i]).collect()
    }
}

/// Per-emitter spatial loss fields and power spectral densities.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    slfs: Vec<Field>,
    psds: Vec<Vec<f64>>,
}

impl FactorModel {
    pub fn new(slfs: Vec<Field>, psds: Vec<Vec<f64>>) -> Result<Self> {
        if slfs.is_empty() || slfs.len() != psds.len() {
            return Err(shape_err(alloc::format!(
                "{} spatial fields but {} spectra",
                slfs.len(),
                psds.len()
            )));
        }
        let dims = slfs[0].dims();
        let k = psds[0].len();
        if k == 0 {
            return Err(shape_err("empty spectrum"));
        }
        for (s, c) in slfs.iter().zip(&psds) {
            if s.dims() != dims || c.len() != k {
                return Err(shape_err("factor dimensions are inconsistent across emitters"));
            }
            if s.as_slice().iter().any(|&v| v < 0.0) || c.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                return Err(arg_err("factors must be nonnegative"));
            }
        }
        Ok(Self { slfs, psds })
    }

    pub fn rank(&self) -> usize {
        self.slfs.len()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let (m, n) = self.slfs[0].dims();
        (m, n, self.psds[0].len())
    }

    pub fn slfs(&self) -> &[Field] {
        &self.slfs
    }

    pub fn psds(&self) -> &[Vec<f64>] {
        &self.psds
    }

    pub fn into_parts(self) -> (Vec<Field>, Vec<Vec<f64>>) {
        (self.slfs, self.psds)
    }
}

/// `X(m, n, k) = sum_r S_r(m, n) c_r(k)`.
pub fn compose(model: &FactorModel) -> RadioMap {
    let (m, n, k) = model.dims();
    let mut data = vec![0.0; m * n * k];
    for (s, c) in model.slfs().iter().zip(model.psds()) {
        for (cell, &sv) in s.as_slice().iter().enumerate() {
            if sv == 0.0 {
                continue;
            }
            let fiber = &mut data[cell * k..(cell + 1) * k];
            for (x, &cv) in fiber.iter_mut().zip(c) {
                *x += sv * cv;
            }
        }
    }
    RadioMap(Tensor3 { m, n, k, data })
}

/// Observed columns of a matricized map.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    ymat: ColMatrix,
    mask: SamplingMask,
    scale: f64,
}

impl MeasurementSet {
    /// Raw `K x |Omega|` observations, columns in ascending linear index.
    pub fn ymat(&self) -> &ColMatrix {
        &self.ymat
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    /// Normalization constant: the largest observed entry (1 when none is positive).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn bins(&self) -> usize {
        self.ymat.rows()
    }

    /// Observations divided by [`MeasurementSet::scale`].
    pub fn normalized(&self) -> ColMatrix {
        let inv = 1.0 / self.scale;
        ColMatrix {
            rows: self.ymat.rows,
            cols: self.ymat.cols,
            data: self.ymat.data.iter().map(|v| v * inv).collect(),
        }
    }
}

/// Gathers the observed columns of a `K x MN` matrix.
pub fn restrict(y: &ColMatrix, mask: &SamplingMask) -> Result<MeasurementSet> {
    if mask.is_empty() {
        return Err(arg_err("empty sampling mask"));
    }
    let (m, n) = mask.dims();
    if y.cols() != m * n {
        return Err(shape_err(alloc::format!(
            "matrix has {} columns, mask grid has {} cells",
            y.cols(),
            m * n
        )));
    }
    let k = y.rows();
    let mut data = Vec::with_capacity(k * mask.len());
    for &j in mask.indices() {
        data.extend_from_slice(y.column(j));
    }
    let ymat = ColMatrix { rows: k, cols: mask.len(), data };
    let peak = ymat.max();
    let scale = if peak > 0.0 && peak.is_finite() { peak } else { 1.0 };
    Ok(MeasurementSet { ymat, mask: mask.clone(), scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(rng: &mut ChaCha8Rng, r: usize, m: usize, n: usize, k: usize) -> FactorModel {
        let slfs = (0..r)
            .map(|_| Field::from_vec(m, n, (0..m * n).map(|_| rng.gen::<f64>()).collect()).unwrap())
            .collect();
        let psds = (0..r).map(|_| (0..k).map(|_| rng.gen::<f64>()).collect()).collect();
        FactorModel::new(slfs, psds).unwrap()
    }

    #[test]
    fn vec_index_examples() {
        assert_eq!(vec_index(0, 0, (4, 3)).unwrap(), 0);
        assert_eq!(vec_index(2, 1, (4, 3)).unwrap(), 6);
        assert!(matches!(vec_index(4, 0, (4, 3)), Err(Error::Range { .. })));
        assert!(matches!(vec_index(0, 3, (4, 3)), Err(Error::Range { .. })));
    }

    #[test]
    fn vec_index_is_bijective_on_grids_up_to_64() {
        for rows in [1usize, 2, 7, 51, 64] {
            for cols in [1usize, 3, 51, 64] {
                let mut seen = vec![false; rows * cols];
                for n in 0..cols {
                    for m in 0..rows {
                        let idx = vec_index(m, n, (rows, cols)).unwrap();
                        assert!(!seen[idx]);
                        seen[idx] = true;
                        assert_eq!(cell_of(idx, (rows, cols)).unwrap(), (m, n));
                    }
                }
                assert!(seen.iter().all(|&s| s));
            }
        }
    }

    #[test]
    fn compose_rank_one_by_hand() {
        let s = Field::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let model = FactorModel::new(vec![s.clone()], vec![vec![1.0, 10.0]]).unwrap();
        let x = compose(&model);
        assert_eq!(x.band(0), s);
        assert_eq!(x.band(1), s.map(|v| 10.0 * v));
    }

    #[test]
    fn compose_ignores_zero_spectra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base = random_model(&mut rng, 2, 3, 4, 5);
        let (mut slfs, mut psds) = base.clone().into_parts();
        slfs.push(Field::filled(3, 4, 7.0));
        psds.push(vec![0.0; 5]);
        let extended = FactorModel::new(slfs, psds).unwrap();
        assert_eq!(compose(&base), compose(&extended));
    }

    #[test]
    fn compose_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let model = random_model(&mut rng, 3, 5, 4, 6);
        let x = compose(&model);
        let mut worst = 0.0f64;
        for m in 0..5 {
            for n in 0..4 {
                for k in 0..6 {
                    let mut acc = 0.0;
                    for r in 0..3 {
                        acc += model.slfs()[r].get(m, n) * model.psds()[r][k];
                    }
                    worst = worst.max((acc - x.get(m, n, k)).abs());
                }
            }
        }
        assert!(worst <= 1e-14, "{worst}");
    }

    #[test]
    fn matricize_column_order() {
        let mut t = Tensor3::zeros(2, 2, 2);
        for m in 0..2 {
            for n in 0..2 {
                for k in 0..2 {
                    t.set(m, n, k, (100 * m + 10 * n + k) as f64);
                }
            }
        }
        let y = t.matricize();
        assert_eq!(y.column(0), &[0.0, 1.0]);
        assert_eq!(y.column(1), &[100.0, 101.0]);
        assert_eq!(y.column(2), &[10.0, 11.0]);
        assert_eq!(y.column(3), &[110.0, 111.0]);
    }

    #[test]
    fn matricized_factor_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = random_model(&mut rng, 1, 4, 3, 5);
        let y = compose(&model).matricize();
        let c = &model.psds()[0];
        let s = model.slfs()[0].as_slice();
        let mut diff = 0.0;
        let mut norm = 0.0;
        for j in 0..12 {
            for k in 0..5 {
                let outer = c[k] * s[j];
                diff += (y.get(k, j) - outer).powi(2);
                norm += outer * outer;
            }
        }
        assert!(diff.sqrt() <= 1e-12 * norm.sqrt());
    }

    #[test]
    fn restrict_full_and_single() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = compose(&random_model(&mut rng, 2, 3, 3, 4));
        let y = x.matricize();
        let full = restrict(&y, &SamplingMask::full(3, 3)).unwrap();
        assert_eq!(full.ymat(), &y);
        let one = restrict(&y, &SamplingMask::new(3, 3, &[(2, 1)]).unwrap()).unwrap();
        assert_eq!(one.ymat().column(0), x.fiber(vec_index(2, 1, (3, 3)).unwrap()));
        assert!(matches!(restrict(&y, &SamplingMask::new(2, 2, &[(0, 0)]).unwrap()), Err(Error::Shape(_))));
    }

    #[test]
    fn mask_rejects_bad_cells() {
        assert!(SamplingMask::new(3, 3, &[]).is_err());
        assert!(SamplingMask::new(3, 3, &[(0, 0), (0, 0)]).is_err());
        assert!(SamplingMask::new(3, 3, &[(3, 0)]).is_err());
    }

    proptest! {
        #[test]
        fn matricize_round_trip(m in 1usize..6, n in 1usize..6, k in 1usize..5, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = Tensor3::from_vec(m, n, k, (0..m * n * k).map(|_| rng.gen::<f64>() - 0.5).collect()).unwrap();
            let back = Tensor3::from_matricized(&t.matricize(), m, n).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn restrict_equals_naive_gather(seed in any::<u64>(), frac in 0.05f64..1.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, n, k) = (6, 5, 3);
            let t = Tensor3::from_vec(m, n, k, (0..m * n * k).map(|_| rng.gen::<f64>()).collect()).unwrap();
            let mut cells = Vec::new();
            for j in 0..n {
                for i in 0..m {
                    if rng.gen::<f64>() < frac {
                        cells.push((i, j));
                    }
                }
            }
            if cells.is_empty() {
                cells.push((0, 0));
            }
            let mask = SamplingMask::new(m, n, &cells).unwrap();
            let meas = restrict(&t.matricize(), &mask).unwrap();
            let mut sorted = cells.clone();
            sorted.sort_by_key(|&(i, j)| j * m + i);
            for (col, &(i, j)) in sorted.iter().enumerate() {
                for kk in 0..k {
                    // bit-exact: no arithmetic on the way
                    prop_assert_eq!(meas.ymat().get(kk, col).to_bits(), t.get(i, j, kk).to_bits());
                }
            }
        }
    }
}
