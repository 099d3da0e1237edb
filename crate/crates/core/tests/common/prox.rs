//! Gap between each proximal operator's objective value and a Nelder–Mead
//! minimum of the same objective, over seeded random instances.

use super::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tscg::proximal::{eig_clip, group_soft_threshold, logdet_prox, svt_mode1_raw};
use tscg::HermitianStack;

fn rng(tag: u64, i: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(tag);
    r.set_stream(i);
    r
}

fn logdet_objective(theta: &CMatrix, f: &CMatrix, s: &CMatrix, rho: f64) -> f64 {
    match logdet(theta) {
        Some(ld) => {
            let tr: f64 = (theta * f).trace().re;
            -ld + tr + 0.5 * rho * frob2(&(theta - s))
        }
        None => f64::INFINITY,
    }
}

/// `argmin -log det X + tr(X F) + (rho/2)||X - S||^2` over Hermitian X.
pub fn logdet_prox_gaps(instances: u64) -> Vec<f64> {
    (0..instances)
        .map(|i| {
            let mut r = rng(11, i);
            let p = r.random_range(2..=4);
            let rho = r.random_range(0.2..5.0);
            let f = random_hpd(&mut r, p, 0.1);
            let s = random_hermitian(&mut r, p);
            let ours = logdet_prox(&f, &s, rho);
            assert!(min_eig(&ours) > 0.0);
            let start = pack_hermitian(&CMatrix::identity(p, p));
            let (_, nm) = nelder_mead(|v| logdet_objective(&unpack_hermitian(v, p), &f, &s, rho), &start, 0.3, 200_000);
            logdet_objective(&ours, &f, &s, rho) - nm
        })
        .collect()
}

/// Per group: `argmin 1/2 ||x - v||^2 + t ||x||`; diagonals untouched.
pub fn group_threshold_gaps(instances: u64) -> Vec<f64> {
    let mut gaps = Vec::new();
    for i in 0..instances {
        let mut r = rng(12, i);
        let p = r.random_range(2..=4);
        let m = r.random_range(1..=3);
        let slices: Vec<CMatrix> = (0..m).map(|_| random_hermitian(&mut r, p)).collect();
        let stack = HermitianStack::new(slices.clone()).unwrap();
        // Thresholds around the typical group norm so both branches occur.
        let t = r.random_range(0.3..2.5);
        let (out, support) = group_soft_threshold(&stack, t).unwrap();
        let mut gap: f64 = 0.0;
        for k in 0..p {
            for j in 0..m {
                assert_eq!(out.slice(j)[(k, k)], stack.slice(j)[(k, k)]);
            }
            for l in (k + 1)..p {
                let v: Vec<f64> = slices.iter().flat_map(|s| [s[(k, l)].re, s[(k, l)].im]).collect();
                let obj = |x: &[f64]| {
                    let d: f64 = x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
                    0.5 * d + t * x.iter().map(|a| a * a).sum::<f64>().sqrt()
                };
                let ours: Vec<f64> = (0..m).flat_map(|j| [out.slice(j)[(k, l)].re, out.slice(j)[(k, l)].im]).collect();
                let (_, nm) = nelder_mead(obj, &v, 0.3, 100_000);
                gap += obj(&ours) - nm;
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                assert_eq!(support.iter().any(|g| g.k == k && g.l == l), norm > t);
            }
        }
        gaps.push(gap);
    }
    gaps
}

/// `argmin 1/2 ||X - Y||^2 + tau ||X||_*` on the mode-1 unfolding.
pub fn svt_gaps(instances: u64) -> Vec<f64> {
    (0..instances)
        .map(|i| {
            let mut r = rng(13, i);
            let p = r.random_range(2..=3);
            let m = if p == 3 { 1 } else { r.random_range(1..=3) };
            let slices: Vec<CMatrix> = (0..m).map(|_| random_hermitian(&mut r, p)).collect();
            let wide = CMatrix::from_fn(p, p * m, |a, b| slices[b / p][(a, b % p)]);
            let tau = r.random_range(0.2..2.0);
            let out = svt_mode1_raw(&slices, tau).unwrap();
            let ours = CMatrix::from_fn(p, p * m, |a, b| out[b / p][(a, b % p)]);
            let obj = |x: &CMatrix| 0.5 * frob2(&(x - &wide)) + tau * nuclear(x);
            let (_, nm) = nelder_mead(|v| obj(&unpack_complex(v, p, p * m)), &pack_complex(&wide), 0.3, 400_000);
            obj(&ours) - nm
        })
        .collect()
}

/// `argmin ||X - Y||^2` over `X >= floor I`, searched as `floor I + B B^H`.
pub fn eig_clip_gaps(instances: u64) -> Vec<f64> {
    (0..instances)
        .map(|i| {
            let mut r = rng(14, i);
            let p = r.random_range(2..=3);
            let floor = r.random_range(0.01..0.5);
            let x = random_hermitian(&mut r, p);
            let ours = eig_clip(&x, floor);
            assert!(min_eig(&ours) >= floor - 1e-12);
            let param = |v: &[f64]| {
                let b = unpack_complex(v, p, p);
                CMatrix::identity(p, p) * c(floor, 0.0) + &b * b.adjoint()
            };
            let start = pack_complex(&CMatrix::identity(p, p));
            let (_, nm) = nelder_mead(|v| frob2(&(param(v) - &x)), &start, 0.3, 200_000);
            frob2(&(&ours - &x)) - nm
        })
        .collect()
}
