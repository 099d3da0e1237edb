//! Stage 2 (top-down causal ordering of chain components) and Stage 3
//! (directed coefficients by regression and thresholding).

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CoefficientPair;
use crate::linalg::{self, CMatrix};
use crate::spectral::{HermitianStack, TimeSeriesPanel};

/// Diagonal regularizer, either fixed or relative to the mean diagonal of
/// the matrix being regularized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RidgeRule {
    Absolute(f64),
    Relative(f64),
}

impl RidgeRule {
    pub fn value(&self, mean_diag: f64) -> f64 {
        match *self {
            RidgeRule::Absolute(r) => r,
            RidgeRule::Relative(c) => c * mean_diag,
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            RidgeRule::Absolute(r) | RidgeRule::Relative(r) => r,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Config(format!("ridge must be >= 0, got {v}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingResult {
    pub components: Vec<Vec<usize>>,
    /// `ordering[s]` is the component placed at step `s`.
    pub ordering: Vec<usize>,
    /// At step `s`, the discrepancy of every component still unplaced.
    pub discrepancy_trace: Vec<Vec<(usize, f64)>>,
}

/// Diagonal of `Omega_j^{-1}` for every slice.
pub fn inverse_diagonals(omega: &HermitianStack) -> Result<Vec<Vec<f64>>> {
    omega
        .slices()
        .par_iter()
        .enumerate()
        .map(|(j, s)| {
            let inv = linalg::hpd_inverse(s)
                .or_else(|| linalg::hermitian_inverse(s, 1e-14))
                .ok_or_else(|| Error::Numerical(format!("Omega slice {j} is singular")))?;
            Ok((0..s.nrows()).map(|k| inv[(k, k)].re).collect())
        })
        .collect()
}

fn sub_matrix(x: &CMatrix, rows: &[usize], cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), cols.len(), |i, j| x[(rows[i], cols[j])])
}

fn discrepancy_with(
    fhat: &HermitianStack,
    inv_diag: &[Vec<f64>],
    component: &[usize],
    conditioning: &[usize],
    ridge: RidgeRule,
) -> Result<f64> {
    let per_slice: Vec<f64> = fhat
        .slices()
        .par_iter()
        .enumerate()
        .map(|(j, f)| -> Result<f64> {
            let mut schur = vec![0.0; component.len()];
            if !conditioning.is_empty() {
                let mut fmm = sub_matrix(f, conditioning, conditioning);
                let mean_diag = (0..fmm.nrows()).map(|i| fmm[(i, i)].re).sum::<f64>() / fmm.nrows() as f64;
                let r = ridge.value(mean_diag);
                for i in 0..fmm.nrows() {
                    fmm[(i, i)] += linalg::c(r, 0.0);
                }
                let fmk = sub_matrix(f, conditioning, component);
                let solved = fmm.clone().cholesky().map(|ch| ch.solve(&fmk));
                let solved = match solved {
                    Some(s) => s,
                    None => fmm.lu().solve(&fmk).ok_or_else(|| {
                        Error::Numerical(format!(
                            "conditioning block of slice {j} is singular; use a positive ridge"
                        ))
                    })?,
                };
                for (a, s) in schur.iter_mut().enumerate() {
                    *s = (0..conditioning.len())
                        .map(|i| (fmk[(i, a)].conj() * solved[(i, a)]).re)
                        .sum();
                }
            }
            Ok(component
                .iter()
                .zip(&schur)
                .map(|(&k, s)| (f[(k, k)].re - s - inv_diag[j][k]).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(per_slice.into_iter().fold(0.0, f64::max))
}

/// `max_{k, j} | f_kk - f_kM (f_MM + r I)^{-1} f_Mk - (Omega_j^{-1})_kk |`
/// over `k` in `component` and every slice `j`.
pub fn discrepancy(
    fhat: &HermitianStack,
    omega: &HermitianStack,
    component: &[usize],
    conditioning: &[usize],
    ridge: RidgeRule,
) -> Result<f64> {
    ridge.validate()?;
    if component.iter().any(|k| conditioning.contains(k)) {
        return Err(Error::InvalidArgument(
            "component and conditioning set overlap".into(),
        ));
    }
    let inv = inverse_diagonals(omega)?;
    discrepancy_with(fhat, &inv, component, conditioning, ridge)
}

/// Greedy top-down ordering: at each step place the unplaced component with
/// the smallest discrepancy given everything already placed. Exact ties go
/// to the smaller component label.
pub fn order_components(
    fhat: &HermitianStack,
    omega: &HermitianStack,
    components: &[Vec<usize>],
    ridge: RidgeRule,
) -> Result<OrderingResult> {
    ridge.validate()?;
    let inv = inverse_diagonals(omega)?;
    let mut remaining: Vec<usize> = (0..components.len()).collect();
    let mut placed_nodes: Vec<usize> = Vec::new();
    let mut ordering = Vec::with_capacity(components.len());
    let mut trace = Vec::with_capacity(components.len());
    while !remaining.is_empty() {
        let mut scored: Vec<(usize, f64)> = remaining
            .par_iter()
            .map(|&g| {
                discrepancy_with(fhat, &inv, &components[g], &placed_nodes, ridge).map(|d| (g, d))
            })
            .collect::<Result<_>>()?;
        scored.sort_by_key(|&(g, _)| g);
        let &(best, _) = scored
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .expect("non-empty");
        ordering.push(best);
        trace.push(scored);
        remaining.retain(|&g| g != best);
        placed_nodes.extend_from_slice(&components[best]);
        placed_nodes.sort_unstable();
    }
    Ok(OrderingResult {
        components: components.to_vec(),
        ordering,
        discrepancy_trace: trace,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage3Config {
    /// Singular values at or below `kappa` are dropped.
    pub kappa: f64,
    /// Entries at or below `nu` in magnitude are dropped.
    pub nu: f64,
    pub ridge: RidgeRule,
}

impl Default for Stage3Config {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            nu: 0.0,
            ridge: RidgeRule::Relative(1e-8),
        }
    }
}

/// Least-squares blocks of `A` and `B` before thresholding.
pub fn regression_coefficients(
    panel: &TimeSeriesPanel,
    ordering: &OrderingResult,
    ridge: RidgeRule,
) -> Result<CoefficientPair> {
    ridge.validate()?;
    let x = panel.data();
    let (t, p) = (x.nrows(), x.ncols());
    let mut out = CoefficientPair::zeros(p);
    let mut earlier: Vec<usize> = Vec::new();
    for (step, &g) in ordering.ordering.iter().enumerate() {
        let target = &ordering.components[g];
        if step > 0 {
            let q = earlier.len();
            let n = t - 1;
            let z = DMatrix::<f64>::from_fn(n, 2 * q, |r, c| {
                if c < q {
                    x[(r + 1, earlier[c])]
                } else {
                    x[(r, earlier[c - q])]
                }
            });
            let y = DMatrix::<f64>::from_fn(n, target.len(), |r, c| x[(r + 1, target[c])]);
            let mut gram = z.transpose() * &z;
            let mean_diag = gram.diagonal().mean();
            let r = ridge.value(mean_diag);
            for i in 0..2 * q {
                gram[(i, i)] += r;
            }
            let zty = z.transpose() * y;
            let coef = match gram.clone().cholesky() {
                Some(ch) => ch.solve(&zty),
                None => gram.lu().solve(&zty).ok_or_else(|| {
                    Error::Numerical(format!(
                        "singular Gram matrix at step {} ({} regressors, {} samples); use a positive ridge",
                        step + 1,
                        2 * q,
                        n
                    ))
                })?,
            };
            for (a, &k) in target.iter().enumerate() {
                for (i, &l) in earlier.iter().enumerate() {
                    out.a[(k, l)] = coef[(i, a)];
                    out.b[(k, l)] = coef[(q + i, a)];
                }
            }
        }
        earlier.extend_from_slice(target);
        earlier.sort_unstable();
    }
    Ok(out)
}

/// Keeps singular values strictly above `kappa`. `kappa = 0` returns the
/// input untouched.
pub fn svd_hard_threshold(x: &DMatrix<f64>, kappa: f64) -> Result<DMatrix<f64>> {
    if kappa == 0.0 || x.is_empty() {
        return Ok(x.clone());
    }
    let svd = nalgebra::SVD::try_new(x.clone(), true, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD of the regression coefficients failed".into()))?;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > kappa {
            out += u.column(i) * vt.row(i) * s;
        }
    }
    Ok(out)
}

/// Ordering mask: `mask[(k, l)]` is true when `l`'s component precedes `k`'s.
pub fn ordering_mask(p: usize, ordering: &OrderingResult) -> DMatrix<bool> {
    let mut pos = vec![usize::MAX; p];
    for (s, &g) in ordering.ordering.iter().enumerate() {
        for &k in &ordering.components[g] {
            pos[k] = s;
        }
    }
    DMatrix::from_fn(p, p, |k, l| pos[l] < pos[k])
}

/// Regression, SVD hard threshold at `kappa`, then masked entrywise
/// threshold at `nu`, for both `A` and `B`.
pub fn estimate_directed(
    panel: &TimeSeriesPanel,
    ordering: &OrderingResult,
    cfg: &Stage3Config,
) -> Result<CoefficientPair> {
    if !(cfg.kappa >= 0.0 && cfg.nu >= 0.0) {
        return Err(Error::Config("kappa and nu must be non-negative".into()));
    }
    let raw = regression_coefficients(panel, ordering, cfg.ridge)?;
    let mask = ordering_mask(panel.dim(), ordering);
    let finish = |m: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let svd = svd_hard_threshold(m, cfg.kappa)?;
        Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |k, l| {
            let v = svd[(k, l)];
            if mask[(k, l)] && v.abs() > cfg.nu {
                v
            } else {
                0.0
            }
        }))
    };
    Ok(CoefficientPair {
        a: finish(&raw.a)?,
        b: finish(&raw.b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn real_stack(slices: Vec<DMatrix<f64>>) -> HermitianStack {
        HermitianStack::new(slices.iter().map(linalg::to_complex).collect()).unwrap()
    }

    #[test]
    fn diagonal_case_is_zero() {
        let f = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 2.0, 0.5]));
        let fhat = real_stack(vec![f.clone(), f.clone() * 2.0]);
        let omega = real_stack(vec![f.clone().try_inverse().unwrap(), (f * 2.0).try_inverse().unwrap()]);
        let d = discrepancy(&fhat, &omega, &[0, 1, 2], &[], RidgeRule::Absolute(0.0)).unwrap();
        assert!(d < 1e-12);
    }

    #[test]
    fn schur_oracle_on_four_nodes() {
        // x1, x2 sources; x3 = x1 + e3, x4 = 0.5 x2 + e4, all unit noise
        let f = DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, 0.0, 1.0, 0.0, //
                0.0, 1.0, 0.0, 0.5, //
                1.0, 0.0, 2.0, 0.0, //
                0.0, 0.5, 0.0, 1.25,
            ],
        );
        // noise precision: identity
        let fhat = real_stack(vec![f]);
        let omega = real_stack(vec![DMatrix::identity(4, 4)]);
        let none = RidgeRule::Absolute(0.0);
        let src = discrepancy(&fhat, &omega, &[0, 1], &[], none).unwrap();
        let child = discrepancy(&fhat, &omega, &[2, 3], &[], none).unwrap();
        assert!(src.abs() < 1e-12);
        // max(|2 - 1|, |1.25 - 1|) = 1
        assert!((child - 1.0).abs() < 1e-12);
        // given the sources, the Schur complements are 2 - 1 = 1 and 1.25 - .25 = 1
        let given = discrepancy(&fhat, &omega, &[2, 3], &[0, 1], none).unwrap();
        assert!(given.abs() < 1e-12);

        let ord = order_components(&fhat, &omega, &[vec![0, 1], vec![2, 3]], none).unwrap();
        assert_eq!(ord.ordering, vec![0, 1]);
        assert_eq!(ord.discrepancy_trace.len(), 2);
    }

    #[test]
    fn full_conditioning_identity_on_random_spd() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let x = CMatrix::from_fn(4, 6, |_, _| {
                c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng))
            });
            let f = &x * x.adjoint() * c(0.25, 0.0) + linalg::identity(4) * c(0.1, 0.0);
            let fhat = HermitianStack::new(vec![f.clone()]).unwrap();
            let omega = HermitianStack::new(vec![linalg::hpd_inverse(&f).unwrap()]).unwrap();
            // with Omega = f^{-1} the model term is f_kk, so D = Schur term
            let inv = inverse_diagonals(&omega).unwrap();
            for k in 0..4 {
                let rest: Vec<usize> = (0..4).filter(|&i| i != k).collect();
                let d = discrepancy(&fhat, &omega, &[k], &rest, RidgeRule::Absolute(0.0)).unwrap();
                let fkk = f[(k, k)].re;
                let cond_var = 1.0 / linalg::hpd_inverse(&f).unwrap()[(k, k)].re;
                assert!((inv[0][k] - fkk).abs() < 1e-10);
                assert!((d - (fkk - cond_var)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn ties_go_to_the_smaller_label() {
        let fhat = real_stack(vec![DMatrix::identity(2, 2)]);
        let omega = real_stack(vec![DMatrix::identity(2, 2)]);
        let ord = order_components(&fhat, &omega, &[vec![0], vec![1]], RidgeRule::Relative(1e-6)).unwrap();
        assert_eq!(ord.ordering, vec![0, 1]);
        let single = order_components(&fhat, &omega, &[vec![0, 1]], RidgeRule::Relative(1e-6)).unwrap();
        assert_eq!(single.ordering, vec![0]);
        assert_eq!(single.discrepancy_trace.len(), 1);
    }

    #[test]
    fn overlap_is_rejected() {
        let s = real_stack(vec![DMatrix::identity(2, 2)]);
        assert!(discrepancy(&s, &s, &[0], &[0], RidgeRule::Absolute(0.0)).is_err());
    }

    fn two_node_panel(t: usize, seed: u64) -> TimeSeriesPanel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = DMatrix::zeros(t, 2);
        for s in 0..t {
            let x1: f64 = StandardNormal.sample(&mut rng);
            let e2: f64 = StandardNormal.sample(&mut rng);
            x[(s, 0)] = x1;
            let lag = if s > 0 { x[(s - 1, 0)] } else { 0.0 };
            x[(s, 1)] = 0.8 * x1 + 0.5 * lag + 0.01 * e2;
        }
        TimeSeriesPanel::new(x).unwrap()
    }

    fn oracle_order() -> OrderingResult {
        OrderingResult {
            components: vec![vec![0], vec![1]],
            ordering: vec![0, 1],
            discrepancy_trace: vec![],
        }
    }

    #[test]
    fn two_node_regression_recovers_coefficients() {
        let panel = two_node_panel(500, 1);
        let cfg = Stage3Config {
            kappa: 500f64.powf(-0.5),
            nu: 500f64.powf(-0.4),
            ..Default::default()
        };
        let est = estimate_directed(&panel, &oracle_order(), &cfg).unwrap();
        assert!((est.a[(1, 0)] - 0.8).abs() < 0.02);
        assert!((est.b[(1, 0)] - 0.5).abs() < 0.02);
        assert_eq!(est.a[(0, 1)], 0.0);
        assert_eq!(est.b[(0, 1)], 0.0);
    }

    #[test]
    fn zero_thresholds_keep_raw_blocks() {
        let panel = two_node_panel(200, 2);
        let raw = regression_coefficients(&panel, &oracle_order(), RidgeRule::Relative(1e-8)).unwrap();
        let est = estimate_directed(&panel, &oracle_order(), &Stage3Config::default()).unwrap();
        assert_eq!(raw, est);
    }

    #[test]
    fn single_component_gives_zero() {
        let panel = two_node_panel(100, 3);
        let ord = OrderingResult {
            components: vec![vec![0, 1]],
            ordering: vec![0],
            discrepancy_trace: vec![],
        };
        let est = estimate_directed(&panel, &ord, &Stage3Config::default()).unwrap();
        assert!(est.a.iter().chain(est.b.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn svd_threshold_drops_small_directions() {
        let x = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 0.5]));
        let y = svd_hard_threshold(&x, 1.0).unwrap();
        assert!((y[(0, 0)] - 3.0).abs() < 1e-12);
        assert!(y[(1, 1)].abs() < 1e-12);
    }
}
