//! Frequency-domain front end: the normalized DFT, the blocked frequency grid,
//! averaged periodogram spectral estimates and the Whittle log-likelihood.

use std::f64::consts::PI;
use std::ops::{Add, Index, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};

/// A `T x p` real panel: one row per time point, one column per series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel {
    data: DMatrix<f64>,
}

impl TimeSeriesPanel {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::InvalidInput(format!(
                "panel needs at least 2 time points, got {}",
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::InvalidInput("panel has no series".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (t, k) = (pos % data.nrows(), pos / data.nrows());
            return Err(Error::InvalidInput(format!(
                "non-finite value at time {} series {}",
                t + 1,
                k + 1
            )));
        }
        Ok(Self { data })
    }

    /// Build from row-major samples.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let t = rows.len();
        let p = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidInput("ragged rows".into()));
        }
        Self::new(DMatrix::from_fn(t, p, |i, j| rows[i][j]))
    }

    pub fn len(&self) -> usize {
        self.data.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }

    /// Drops the first observation when the length is odd. Returns whether a
    /// row was dropped.
    pub fn truncate_to_even(self) -> (Self, bool) {
        let t = self.len();
        if t % 2 == 0 {
            return (self, false);
        }
        let data = self.data.rows(1, t - 1).into_owned();
        (Self { data }, true)
    }

    /// Subtracts each column's mean.
    pub fn centered(&self) -> Self {
        let mut data = self.data.clone();
        for mut col in data.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        Self { data }
    }

    /// Centers and scales each column to unit sample variance. Constant
    /// columns are only centered.
    pub fn standardized(&self) -> Self {
        let mut out = self.centered();
        let t = out.len() as f64;
        for mut col in out.data.column_iter_mut() {
            let sd = (col.norm_squared() / t).sqrt();
            if sd > 0.0 {
                col.scale_mut(1.0 / sd);
            }
        }
        out
    }

    /// Keeps the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            data: self.data.select_columns(cols),
        }
    }
}

/// Normalized DFT coefficients, one row per Fourier index.
///
/// Row `r` holds `d_x(omega_j)` for `j = r` when `r >= 1` and for `j = T`
/// when `r = 0` (`omega_T = 2 pi` aliases frequency zero).
#[derive(Debug, Clone)]
pub struct DftFrame {
    coeffs: CMatrix,
}

impl DftFrame {
    pub fn len(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Coefficient of series `k` (0-based) at Fourier index `j` in `1..=T`.
    pub fn coeff(&self, j: usize, k: usize) -> Complex64 {
        self.coeffs[(j % self.len(), k)]
    }

    /// The vector `d_x(omega_j)`, `j` in `1..=T`.
    pub fn at(&self, j: usize) -> nalgebra::DVector<Complex64> {
        self.coeffs.row(j % self.len()).transpose()
    }

    pub fn raw(&self) -> &CMatrix {
        &self.coeffs
    }
}

/// `d_x(omega_j) = T^{-1/2} sum_{t=1..T} x_t exp(-i omega_j t)`, `omega_j = 2 pi j / T`.
///
/// An odd-length panel loses its first observation first.
pub fn dft(panel: &TimeSeriesPanel) -> Result<DftFrame> {
    let (panel, dropped) = panel.clone().truncate_to_even();
    if dropped {
        log::warn!("odd series length: dropped the first observation before the DFT");
    }
    if panel.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in panel".into()));
    }
    let t = panel.len();
    let p = panel.dim();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t);
    let norm = 1.0 / (t as f64).sqrt();
    // The FFT sums over n = t - 1; shift the phase back to the t = 1..T convention.
    let phase: Vec<Complex64> = (0..t)
        .map(|j| Complex64::from_polar(norm, -2.0 * PI * j as f64 / t as f64))
        .collect();
    let mut coeffs = CMatrix::from_element(t, p, ZERO);
    let mut buf = vec![ZERO; t];
    for k in 0..p {
        for (b, &v) in buf.iter_mut().zip(panel.data.column(k).iter()) {
            *b = Complex64::new(v, 0.0);
        }
        fft.process(&mut buf);
        for j in 0..t {
            coeffs[(j, k)] = buf[j] * phase[j];
        }
    }
    Ok(DftFrame { coeffs })
}

/// Inverse of [`dft`]: `x_t = T^{-1/2} sum_j d_x(omega_j) exp(i omega_j t)`.
pub fn inverse_dft(frame: &DftFrame) -> DMatrix<f64> {
    let t = frame.len();
    let p = frame.dim();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(t);
    let norm = 1.0 / (t as f64).sqrt();
    let mut out = DMatrix::zeros(t, p);
    let mut buf = vec![ZERO; t];
    for k in 0..p {
        for j in 0..t {
            buf[j] = frame.coeffs[(j, k)] * Complex64::from_polar(1.0, 2.0 * PI * j as f64 / t as f64);
        }
        ifft.process(&mut buf);
        for n in 0..t {
            out[(n, k)] = buf[n].re * norm;
        }
    }
    out
}

/// Layout of the `M` frequency blocks of `2m + 1` consecutive Fourier
/// frequencies inside `1..=T/2 - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub t: usize,
    pub m: usize,
    pub blocks: usize,
    /// Fourier index `j(2m+1) - m` of each block center, `j = 1..=M`.
    pub central_indices: Vec<usize>,
    /// `2 pi * index / T`, in radians.
    pub central_freqs: Vec<f64>,
}

impl FrequencyGrid {
    /// Fourier indices `j(2m+1) - m + n`, `n = -m..=m`, of block `j` (0-based).
    pub fn block_indices(&self, block: usize) -> std::ops::RangeInclusive<usize> {
        let c = self.central_indices[block];
        (c - self.m)..=(c + self.m)
    }
}

/// `M = floor((T/2 - 1) / (2m + 1))` blocks centered at `j(2m+1) - m`.
pub fn make_grid(t: usize, m: usize) -> Result<FrequencyGrid> {
    if t < 4 || t % 2 != 0 {
        return Err(Error::Config(format!(
            "frequency grid needs an even series length >= 4, got T={t}"
        )));
    }
    let width = 2 * m + 1;
    let blocks = (t / 2 - 1) / width;
    if blocks == 0 {
        return Err(Error::Config(format!(
            "half-block size m={m} leaves no frequency block for T={t} (need 2m+1 <= T/2-1 = {})",
            t / 2 - 1
        )));
    }
    let central_indices: Vec<usize> = (1..=blocks).map(|j| j * width - m).collect();
    let central_freqs = central_indices
        .iter()
        .map(|&j| 2.0 * PI * j as f64 / t as f64)
        .collect();
    Ok(FrequencyGrid {
        t,
        m,
        blocks,
        central_indices,
        central_freqs,
    })
}

/// A sequence of `M` Hermitian `p x p` slices (a `p x p x M` tensor with
/// Hermitian mode-3 slices). Slices are symmetrized on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianStack {
    p: usize,
    slices: Vec<CMatrix>,
}

impl HermitianStack {
    pub fn new(slices: Vec<CMatrix>) -> Result<Self> {
        let p = slices.first().map_or(0, |s| s.nrows());
        for (j, s) in slices.iter().enumerate() {
            if s.nrows() != p || s.ncols() != p {
                return Err(Error::InvalidInput(format!(
                    "slice {j} is {}x{}, expected {p}x{p}",
                    s.nrows(),
                    s.ncols()
                )));
            }
            if s.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidInput(format!("slice {j} has non-finite entries")));
            }
        }
        let slices = slices.iter().map(linalg::hermitian_part).collect();
        Ok(Self { p, slices })
    }

    /// Wraps slices the caller guarantees to be exactly Hermitian.
    pub(crate) fn from_hermitian_unchecked(p: usize, slices: Vec<CMatrix>) -> Self {
        debug_assert!(slices.iter().all(|s| s.nrows() == p && s.ncols() == p));
        Self { p, slices }
    }

    pub fn zeros(p: usize, m: usize) -> Self {
        Self {
            p,
            slices: vec![CMatrix::from_element(p, p, ZERO); m],
        }
    }

    pub fn identity(p: usize, m: usize) -> Self {
        Self {
            p,
            slices: vec![linalg::identity(p); m],
        }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn slices(&self) -> &[CMatrix] {
        &self.slices
    }

    pub fn into_slices(self) -> Vec<CMatrix> {
        self.slices
    }

    pub fn slice(&self, j: usize) -> &CMatrix {
        &self.slices[j]
    }

    /// Applies `f` to every slice (in parallel) and symmetrizes the result.
    pub fn map<F>(&self, f: F) -> Self
    where
        F: Fn(usize, &CMatrix) -> CMatrix + Sync + Send,
    {
        let slices = self
            .slices
            .par_iter()
            .enumerate()
            .map(|(j, s)| linalg::hermitian_part(&f(j, s)))
            .collect();
        Self { p: self.p, slices }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            p: self.p,
            slices: self.slices.iter().map(|s| s * Complex64::new(a, 0.0)).collect(),
        }
    }

    /// Frobenius norm of the whole tensor.
    pub fn frobenius(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| s.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-slice Hermitian defect.
    pub fn hermitian_defect(&self) -> f64 {
        self.slices
            .iter()
            .map(linalg::hermitian_defect)
            .fold(0.0, f64::max)
    }

    /// Smallest eigenvalue over all slices.
    pub fn min_eigenvalue(&self) -> f64 {
        self.slices
            .par_iter()
            .map(|s| linalg::hermitian_eigenvalues(s)[0])
            .collect::<Vec<_>>()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    /// Conjugates every slice by the permutation `perm` (new index `i` takes
    /// old index `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let p = self.p;
        let slices = self
            .slices
            .iter()
            .map(|s| CMatrix::from_fn(p, p, |i, j| s[(perm[i], perm[j])]))
            .collect();
        Self { p, slices }
    }
}

impl Index<usize> for HermitianStack {
    type Output = CMatrix;
    fn index(&self, j: usize) -> &CMatrix {
        &self.slices[j]
    }
}

impl Add for &HermitianStack {
    type Output = HermitianStack;
    fn add(self, rhs: &HermitianStack) -> HermitianStack {
        assert_eq!(self.len(), rhs.len());
        HermitianStack {
            p: self.p,
            slices: self.slices.iter().zip(&rhs.slices).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &HermitianStack {
    type Output = HermitianStack;
    fn sub(self, rhs: &HermitianStack) -> HermitianStack {
        assert_eq!(self.len(), rhs.len());
        HermitianStack {
            p: self.p,
            slices: self.slices.iter().zip(&rhs.slices).map(|(a, b)| a - b).collect(),
        }
    }
}

/// `f_hat(omega_j) = (2 pi (2m+1))^{-1} sum_{n=-m..m} d(omega_{j,n}) d(omega_{j,n})^H`.
pub fn averaged_periodogram(frame: &DftFrame, grid: &FrequencyGrid) -> Result<HermitianStack> {
    if frame.len() != grid.t {
        return Err(Error::InvalidInput(format!(
            "grid built for T={} but the DFT has {} coefficients",
            grid.t,
            frame.len()
        )));
    }
    let p = frame.dim();
    let scale = Complex64::new(1.0 / (2.0 * PI * (2 * grid.m + 1) as f64), 0.0);
    let slices = (0..grid.blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = CMatrix::from_element(p, p, ZERO);
            for j in grid.block_indices(b) {
                let d = frame.at(j);
                acc += &d * d.adjoint();
            }
            linalg::hermitian_part(&(acc * scale))
        })
        .collect();
    Ok(HermitianStack::from_hermitian_unchecked(p, slices))
}

/// `sum_j [log det Theta_j - tr(Theta_j f_hat_j)]`.
pub fn whittle_loglik(theta: &HermitianStack, fhat: &HermitianStack) -> Result<f64> {
    if theta.len() != fhat.len() || theta.dim() != fhat.dim() {
        return Err(Error::InvalidInput(format!(
            "shape mismatch: Theta is {}x{}x{}, f_hat is {}x{}x{}",
            theta.dim(),
            theta.dim(),
            theta.len(),
            fhat.dim(),
            fhat.dim(),
            fhat.len()
        )));
    }
    let terms: Vec<Result<f64>> = theta
        .slices()
        .par_iter()
        .zip(fhat.slices().par_iter())
        .enumerate()
        .map(|(j, (th, f))| {
            let ld = linalg::hermitian_logdet(th).map_err(|e| match e {
                Error::Domain(msg) => Error::Domain(format!("Theta slice {j}: {msg}")),
                other => other,
            })?;
            Ok(ld - linalg::trace_product_re(th, f))
        })
        .collect();
    terms.into_iter().sum()
}
