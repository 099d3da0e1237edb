//! Shared helpers for the integration tests: a derivative-free minimizer,
//! random Hermitian matrices and real/complex packing.
#![allow(dead_code)]

pub mod prox;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type CMatrix = DMatrix<Complex64>;

/// Nelder–Mead with dimension-adapted coefficients (Gao & Han), restarted
/// from the incumbent until a restart no longer improves it.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], step: f64, max_evals: usize) -> (Vec<f64>, f64) {
    let n = start.len();
    let nf = n as f64;
    let (alpha, gamma, rho, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut best = start.to_vec();
    let mut best_val = f(&best);
    let mut evals = 1;
    let mut scale = step;
    loop {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
        simplex.push((best.clone(), best_val));
        for i in 0..n {
            let mut x = best.clone();
            x[i] += if x[i].abs() > 1e-3 { scale * x[i].abs().max(0.1) } else { scale };
            let v = f(&x);
            evals += 1;
            simplex.push((x, v));
        }
        let mut stall = 0;
        while evals < max_evals {
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[n].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread.abs() < 1e-15 && size < 1e-10 {
                break;
            }
            if size < 1e-12 {
                stall += 1;
                if stall > 3 {
                    break;
                }
            }
            let mut centroid = vec![0.0; n];
            for (x, _) in &simplex[..n] {
                for (c, v) in centroid.iter_mut().zip(x) {
                    *c += v / nf;
                }
            }
            let worst = simplex[n].clone();
            let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };
            let xr = along(alpha);
            let fr = f(&xr);
            evals += 1;
            if fr < simplex[0].1 {
                let xe = along(gamma);
                let fe = f(&xe);
                evals += 1;
                simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[n - 1].1 {
                simplex[n] = (xr, fr);
            } else {
                let (xc, fc) = if fr < worst.1 {
                    let x = along(alpha * rho);
                    let v = f(&x);
                    (x, v)
                } else {
                    let x = along(-rho);
                    let v = f(&x);
                    (x, v)
                };
                evals += 1;
                if fc < worst.1.min(fr) {
                    simplex[n] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for item in simplex.iter_mut().skip(1) {
                        let x: Vec<f64> = x0.iter().zip(&item.0).map(|(a, b)| a + sigma * (b - a)).collect();
                        let v = f(&x);
                        *item = (x, v);
                    }
                    evals += n;
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let improved = best_val - simplex[0].1;
        best = simplex[0].0.clone();
        best_val = simplex[0].1;
        if evals >= max_evals || improved < 1e-13 {
            if scale < 1e-6 {
                break;
            }
            scale *= 0.1;
            if evals >= max_evals {
                break;
            }
        }
    }
    (best, best_val)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

pub fn random_hermitian<R: Rng>(rng: &mut R, p: usize) -> CMatrix {
    let x = random_complex(rng, p, p);
    (&x + x.adjoint()) * c(0.5, 0.0)
}

/// `X X^H / p + shift I`.
pub fn random_hpd<R: Rng>(rng: &mut R, p: usize, shift: f64) -> CMatrix {
    let x = random_complex(rng, p, p);
    &x * x.adjoint() * c(1.0 / p as f64, 0.0) + CMatrix::identity(p, p) * c(shift, 0.0)
}

/// Real coordinates of a Hermitian matrix: the diagonal, then the real and
/// imaginary parts of the strict upper triangle.
pub fn pack_hermitian(x: &CMatrix) -> Vec<f64> {
    let p = x.nrows();
    let mut v: Vec<f64> = (0..p).map(|k| x[(k, k)].re).collect();
    for k in 0..p {
        for l in (k + 1)..p {
            v.push(x[(k, l)].re);
            v.push(x[(k, l)].im);
        }
    }
    v
}

pub fn unpack_hermitian(v: &[f64], p: usize) -> CMatrix {
    let mut x = CMatrix::zeros(p, p);
    for k in 0..p {
        x[(k, k)] = c(v[k], 0.0);
    }
    let mut i = p;
    for k in 0..p {
        for l in (k + 1)..p {
            x[(k, l)] = c(v[i], v[i + 1]);
            x[(l, k)] = c(v[i], -v[i + 1]);
            i += 2;
        }
    }
    x
}

pub fn pack_complex(x: &CMatrix) -> Vec<f64> {
    x.iter().flat_map(|z| [z.re, z.im]).collect()
}

pub fn unpack_complex(v: &[f64], rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_iterator(rows, cols, v.chunks(2).map(|ch| c(ch[0], ch[1])))
}

pub fn frob2(x: &CMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

pub fn nuclear(x: &CMatrix) -> f64 {
    x.clone().svd(false, false).singular_values.sum()
}

/// Smallest eigenvalue of a Hermitian matrix, or NaN when the input is not
/// numerically Hermitian.
pub fn min_eig(x: &CMatrix) -> f64 {
    let p = x.nrows();
    // Real 2p x 2p embedding [[Re, -Im], [Im, Re]] has the same eigenvalues,
    // each twice.
    let re = x.map(|z| z.re);
    let im = x.map(|z| z.im);
    let mut big = DMatrix::<f64>::zeros(2 * p, 2 * p);
    big.view_mut((0, 0), (p, p)).copy_from(&re);
    big.view_mut((p, p), (p, p)).copy_from(&re);
    big.view_mut((0, p), (p, p)).copy_from(&(-&im));
    big.view_mut((p, 0), (p, p)).copy_from(&im);
    big.symmetric_eigen().eigenvalues.min()
}

/// `log det` of a Hermitian positive definite matrix, `None` otherwise.
pub fn logdet(x: &CMatrix) -> Option<f64> {
    x.clone().cholesky().map(|ch| 2.0 * (0..x.nrows()).map(|k| ch.l()[(k, k)].re.ln()).sum::<f64>())
}

#[test]
fn nelder_mead_finds_a_quadratic_minimum() {
    let (x, v) = nelder_mead(
        |x| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2) + (x[2] - x[0]).powi(2),
        &[0.0, 0.0, 0.0],
        0.5,
        20_000,
    );
    assert!(v < 1e-12, "{v}");
    assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6 && (x[2] - 1.0).abs() < 1e-6);
}
