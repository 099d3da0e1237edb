//! Small dense complex linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `(X + X^H) / 2`, with the diagonal forced exactly real.
pub fn hermitian_part(x: &CMatrix) -> CMatrix {
    let n = x.nrows();
    let mut out = CMatrix::from_element(n, n, ZERO);
    for i in 0..n {
        out[(i, i)] = c(x[(i, i)].re, 0.0);
        for j in (i + 1)..n {
            let v = (x[(i, j)] + x[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Largest entrywise modulus of `X - X^H`.
pub fn hermitian_defect(x: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((x[(i, j)] - x[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigendecomposition of a Hermitian matrix. Eigenvalues are returned in
/// ascending order with matching eigenvector columns.
pub fn hermitian_eig(x: &CMatrix) -> (DVector<f64>, CMatrix) {
    let eig = x.clone().symmetric_eigen();
    let n = x.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vecs = CMatrix::from_element(n, n, ZERO);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

pub fn hermitian_eigenvalues(x: &CMatrix) -> DVector<f64> {
    let mut v: Vec<f64> = x.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    DVector::from_vec(v)
}

/// `V diag(values) V^H`, symmetrized.
pub fn from_eig(values: &DVector<f64>, vectors: &CMatrix) -> CMatrix {
    let mut scaled = vectors.clone();
    for (k, &v) in values.iter().enumerate() {
        scaled.column_mut(k).scale_mut(v);
    }
    hermitian_part(&(scaled * vectors.adjoint()))
}

/// log det of a Hermitian positive definite matrix via its eigenvalues.
pub fn hermitian_logdet(x: &CMatrix) -> Result<f64> {
    let vals = hermitian_eigenvalues(x);
    let mut acc = 0.0;
    for &v in vals.iter() {
        if !(v > 0.0) {
            return Err(Error::Domain(format!(
                "log det of a matrix with eigenvalue {v:e} <= 0"
            )));
        }
        acc += v.ln();
    }
    Ok(acc)
}

/// Real part of `tr(X Y)` computed without forming the product.
pub fn trace_product_re(x: &CMatrix, y: &CMatrix) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..n {
            acc += (x[(i, k)] * y[(k, i)]).re;
        }
    }
    acc
}

/// Inverse of a Hermitian positive definite matrix through Cholesky.
pub fn hpd_inverse(x: &CMatrix) -> Option<CMatrix> {
    x.clone()
        .cholesky()
        .map(|ch| hermitian_part(&ch.inverse()))
}

/// Inverse of a Hermitian matrix through its eigendecomposition; fails if any
/// eigenvalue is within `tol * max|eig|` of zero.
pub fn hermitian_inverse(x: &CMatrix, tol: f64) -> Option<CMatrix> {
    let (vals, vecs) = hermitian_eig(x);
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vals.iter().any(|v| v.abs() <= tol * scale || !v.is_finite()) || scale == 0.0 {
        return None;
    }
    Some(from_eig(&vals.map(|v| 1.0 / v), &vecs))
}

pub fn frobenius(x: &CMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn nuclear_norm(x: &CMatrix) -> f64 {
    x.clone().singular_values().iter().sum()
}

pub fn identity(p: usize) -> CMatrix {
    CMatrix::identity(p, p)
}

pub fn to_complex(x: &DMatrix<f64>) -> CMatrix {
    x.map(|v| c(v, 0.0))
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(x: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return 0.0;
    }
    x.clone()
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()))
}
