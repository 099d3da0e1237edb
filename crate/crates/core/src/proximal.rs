//! Proximal and projection operators on Hermitian stacks.
//!
//! Every operator takes and returns stacks with exactly Hermitian slices.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, ZERO};
use crate::spectral::HermitianStack;

/// Relative singular-value cutoff used when reading ranks off `L` slices.
pub const RANK_REL_TOL: f64 = 1e-6;

/// An unordered off-diagonal position `(k, l)` with `k < l` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupIndex {
    pub k: usize,
    pub l: usize,
}

impl GroupIndex {
    /// Normalizes the pair so that `k < l`. Panics on a diagonal pair.
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "a group index needs two distinct nodes");
        Self {
            k: a.min(b),
            l: a.max(b),
        }
    }
}

fn group_norm(stack: &HermitianStack, k: usize, l: usize) -> f64 {
    stack
        .slices()
        .iter()
        .map(|s| s[(k, l)].norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(sum_j |X_kl(omega_j)|^2)` for every `k < l`.
pub fn group_norms(stack: &HermitianStack) -> BTreeMap<GroupIndex, f64> {
    let p = stack.dim();
    let mut out = BTreeMap::new();
    for k in 0..p {
        for l in (k + 1)..p {
            out.insert(GroupIndex { k, l }, group_norm(stack, k, l));
        }
    }
    out
}

/// Block soft-thresholding of each off-diagonal group across slices.
///
/// Groups whose norm is at most `threshold` become exact zeros; the rest are
/// shrunk by `1 - threshold / norm`. Diagonals pass through. The returned set
/// holds the surviving groups.
pub fn group_soft_threshold(
    stack: &HermitianStack,
    threshold: f64,
) -> Result<(HermitianStack, BTreeSet<GroupIndex>)> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "group threshold must be >= 0, got {threshold}"
        )));
    }
    let p = stack.dim();
    let mut slices: Vec<CMatrix> = stack.slices().to_vec();
    let mut support = BTreeSet::new();
    for k in 0..p {
        for l in (k + 1)..p {
            let g = group_norm(stack, k, l);
            if g > threshold {
                support.insert(GroupIndex { k, l });
                let shrink = 1.0 - threshold / g;
                for s in slices.iter_mut() {
                    let v = s[(k, l)] * shrink;
                    s[(k, l)] = v;
                    s[(l, k)] = v.conj();
                }
            } else {
                for s in slices.iter_mut() {
                    s[(k, l)] = ZERO;
                    s[(l, k)] = ZERO;
                }
            }
        }
    }
    Ok((HermitianStack::from_hermitian_unchecked(p, slices), support))
}

/// Which matricization of the `p x p x M` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    One,
    Two,
}

/// A `p x pM` matricization of a stack.
///
/// Mode 1 column `j*p + l` is column `l` of slice `j`; mode 2 column `j*p + k`
/// is row `k` of slice `j`, transposed.
#[derive(Debug, Clone)]
pub struct Unfolding {
    pub matrix: CMatrix,
    pub mode: Mode,
}

pub fn unfold(slices: &[CMatrix], mode: Mode) -> Unfolding {
    let p = slices.first().map_or(0, |s| s.nrows());
    let m = slices.len();
    let mut matrix = CMatrix::from_element(p, p * m, ZERO);
    for (j, s) in slices.iter().enumerate() {
        for a in 0..p {
            for i in 0..p {
                matrix[(i, j * p + a)] = match mode {
                    Mode::One => s[(i, a)],
                    Mode::Two => s[(a, i)],
                };
            }
        }
    }
    Unfolding { matrix, mode }
}

/// Inverse of the mode-1 unfolding.
pub fn fold_mode1(matrix: &CMatrix, p: usize) -> Vec<CMatrix> {
    let m = matrix.ncols() / p.max(1);
    (0..m)
        .map(|j| matrix.columns(j * p, p).into_owned())
        .collect()
}

/// `||X_(1)||_*` of a stack; for Hermitian slices this equals `||X_(2)||_*`.
pub fn unfolding_nuclear_norm(stack: &HermitianStack) -> f64 {
    linalg::nuclear_norm(&unfold(stack.slices(), Mode::One).matrix)
}

/// Singular-value soft thresholding of the mode-1 unfolding, refolded but not
/// symmetrized.
pub fn svt_mode1_raw(slices: &[CMatrix], threshold: f64) -> Result<Vec<CMatrix>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SVT threshold must be >= 0, got {threshold}"
        )));
    }
    let p = slices.first().map_or(0, |s| s.nrows());
    if p == 0 {
        return Ok(slices.to_vec());
    }
    let unf = unfold(slices, Mode::One).matrix;
    // X = U S V^H  =>  U diag(max(s - t, 0)) V^H = U diag(max(1 - t/s, 0)) U^H X,
    // with U, S^2 from the small p x p Gram matrix X X^H.
    let gram = linalg::hermitian_part(&(&unf * unf.adjoint()));
    let (eig, u) = linalg::hermitian_eig(&gram);
    let top = eig.iter().fold(0.0f64, |m, &v| m.max(v));
    if !top.is_finite() {
        return Err(Error::Numerical(format!(
            "non-finite mode-1 unfolding {}x{}",
            p,
            p * slices.len()
        )));
    }
    let mut scaled = u.clone();
    for (i, &e) in eig.iter().enumerate() {
        let s = e.max(0.0).sqrt();
        let w = if s > threshold && s > 0.0 { 1.0 - threshold / s } else { 0.0 };
        scaled.column_mut(i).scale_mut(w);
    }
    let proj = scaled * u.adjoint();
    Ok(fold_mode1(&(proj * unf), p))
}

/// SVT of the mode-1 unfolding at `threshold`, then `(X + X^H)/2` per slice.
pub fn svt_mode1(stack: &HermitianStack, threshold: f64) -> Result<HermitianStack> {
    let raw = svt_mode1_raw(stack.slices(), threshold)?;
    HermitianStack::new(raw)
}

/// `argmin_{Theta > 0} -log det Theta + tr(Theta F) + (rho/2) ||Theta - S||_F^2`.
///
/// With `rho S - F = V diag(mu) V^H` the minimizer is
/// `V diag((mu + sqrt(mu^2 + 4 rho)) / (2 rho)) V^H`.
pub fn logdet_prox(fhat: &CMatrix, s: &CMatrix, rho: f64) -> CMatrix {
    assert!(rho > 0.0, "rho must be positive");
    let target = linalg::hermitian_part(&(s * Complex64::new(rho, 0.0) - fhat));
    let (mu, v) = linalg::hermitian_eig(&target);
    let theta = mu.map(|m| {
        let r = (m * m + 4.0 * rho).sqrt();
        if m >= 0.0 {
            (m + r) / (2.0 * rho)
        } else {
            // same root, without cancellation for large negative mu
            2.0 / (r - m)
        }
    });
    linalg::from_eig(&theta, &v)
}

/// Frobenius projection onto `{X Hermitian : X >= floor I}`.
pub fn eig_clip(slice: &CMatrix, floor: f64) -> CMatrix {
    let (vals, vecs) = linalg::hermitian_eig(slice);
    if vals.len() == 0 || vals[0] >= floor {
        return linalg::hermitian_part(slice);
    }
    linalg::from_eig(&vals.map(|v| v.max(floor)), &vecs)
}

/// [`eig_clip`] on every slice.
pub fn eig_clip_stack(stack: &HermitianStack, floor: f64) -> HermitianStack {
    stack.map(|_, s| eig_clip(s, floor))
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(x: &CMatrix, rel_tol: f64) -> usize {
    let sv: DVector<f64> = x.clone().singular_values();
    let top = sv.max();
    if !(top > 0.0) {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * top).count()
}

pub fn slice_ranks(stack: &HermitianStack) -> Vec<usize> {
    stack
        .slices()
        .par_iter()
        .map(|s| numerical_rank(s, RANK_REL_TOL))
        .collect()
}
