//! Ground-truth chain graphs and simulated panels.
//!
//! Two random designs (two-layer and random-order), the seven-node fixture
//! with a VAR(1) component on nodes {1, 3, 5}, and arbitrary user-supplied
//! `(noise VAR, A, B)` triplets through [`GroundTruth::from_parts`].
//!
//! All randomness comes from ChaCha20 seeded with `seed_from_u64`; graph
//! generation, noise and the observation recursion use separate streams so
//! each can be regenerated independently.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, ChainGraph, CoefficientPair, UndirectedEdge};
use crate::linalg::{self, CMatrix};
use crate::spectral::TimeSeriesPanel;

const STREAM_GRAPH: u64 = 0;
const STREAM_NOISE: u64 = 1;

/// Spectral radius of `(I - A)^{-1} B` above which `B` is rescaled.
pub const STATIONARITY_CAP: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Design {
    TwoLayer,
    RandomOrder,
    Fixture,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignSpec {
    pub design: Design,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub seed: u64,
    pub within_edge_prob: f64,
    pub directed_edge_prob: f64,
    pub hub_prob: f64,
    pub layer1_frac: f64,
    pub burn_in: usize,
    /// Draw the A and B supports of each directed edge with independent
    /// Bernoulli(1/2) masks instead of filling both.
    pub independent_masks: bool,
    /// Divide entry `(i, j)` of each innovation covariance `(I - C)(I - C^T)`
    /// by `sqrt(S_ii S_jj)`, where `S` is the lag-0 noise covariance it
    /// implies. Single-node components then have unit noise variance; larger
    /// ones get close to it. The support of the inverse covariance is kept.
    pub unit_noise_variance: bool,
}

impl Default for DesignSpec {
    fn default() -> Self {
        Self {
            design: Design::TwoLayer,
            p: 30,
            t: 1000,
            seed: 0,
            within_edge_prob: 0.02,
            directed_edge_prob: 0.8,
            hub_prob: 0.1,
            layer1_frac: 0.1,
            burn_in: 200,
            independent_masks: false,
            unit_noise_variance: false,
        }
    }
}

impl DesignSpec {
    pub fn new(design: Design, p: usize, t: usize, seed: u64) -> Self {
        Self {
            design,
            p,
            t,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("within_edge_prob", self.within_edge_prob),
            ("directed_edge_prob", self.directed_edge_prob),
            ("hub_prob", self.hub_prob),
            ("layer1_frac", self.layer1_frac),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.design != Design::Fixture && self.p < 2 {
            return Err(Error::Config(format!("p must be at least 2, got {}", self.p)));
        }
        if self.t < 2 {
            return Err(Error::Config(format!("T must be at least 2, got {}", self.t)));
        }
        Ok(())
    }
}

/// VAR(1) noise process of one chain component:
/// `e_t = C e_{t-1} + eps_t`, `eps_t ~ N(0, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentNoise {
    pub nodes: Vec<usize>,
    pub c: DMatrix<f64>,
    pub sigma: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub graph: ChainGraph,
    pub coeffs: CoefficientPair,
    /// One entry per chain component, in the order of `graph.components`.
    pub noise: Vec<ComponentNoise>,
    pub spectral_radius_x: f64,
    pub rescale_applied: bool,
    /// First-layer nodes for the two-layer design.
    pub layer1: Option<Vec<usize>>,
    pub burn_in: usize,
}

fn signed_uniform<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let mag = rng.random_range(lo..=hi);
    if rng.random_bool(0.5) {
        mag
    } else {
        -mag
    }
}

/// Every pair inside each component.
pub fn complete_within(components: &[Vec<usize>]) -> BTreeSet<UndirectedEdge> {
    let mut out = BTreeSet::new();
    for comp in components {
        for (i, &a) in comp.iter().enumerate() {
            for &b in &comp[i + 1..] {
                out.insert(UndirectedEdge::new(a, b));
            }
        }
    }
    out
}

impl GroundTruth {
    /// Assembles and validates a ground truth from its parts. The noise list
    /// must cover every component of `graph` exactly once (any order).
    pub fn from_parts(
        graph: ChainGraph,
        coeffs: CoefficientPair,
        mut noise: Vec<ComponentNoise>,
        burn_in: usize,
    ) -> Result<Self> {
        let report = graph::is_feasible(&graph, &coeffs);
        if !report.feasible {
            return Err(Error::InvalidInput(format!(
                "ground truth is not TSCG-feasible: {:?}",
                report.violations
            )));
        }
        for n in &mut noise {
            let d = n.nodes.len();
            if n.c.shape() != (d, d) || n.sigma.shape() != (d, d) {
                return Err(Error::InvalidInput("noise block shape mismatch".into()));
            }
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by_key(|&i| n.nodes[i]);
            n.nodes = idx.iter().map(|&i| n.nodes[i]).collect();
            n.c = DMatrix::from_fn(d, d, |i, j| n.c[(idx[i], idx[j])]);
            n.sigma = DMatrix::from_fn(d, d, |i, j| n.sigma[(idx[i], idx[j])]);
        }
        noise.sort_by_key(|n| n.nodes.first().copied());
        let covered: Vec<Vec<usize>> = noise.iter().map(|n| n.nodes.clone()).collect();
        if covered != graph.components {
            return Err(Error::InvalidInput(
                "noise blocks do not match the chain components".into(),
            ));
        }
        for n in &noise {
            let r = linalg::spectral_radius(&n.c);
            if r >= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "noise VAR on {:?} is not stable (spectral radius {r})",
                    n.nodes.iter().map(|k| k + 1).collect::<Vec<_>>()
                )));
            }
        }
        let spectral_radius_x = linalg::spectral_radius(&coeffs.transition()?);
        Ok(Self {
            graph,
            coeffs,
            noise,
            spectral_radius_x,
            rescale_applied: false,
            layer1: None,
            burn_in,
        })
    }

    pub fn p(&self) -> usize {
        self.graph.p
    }

    /// `f_e(omega) = (2 pi)^{-1} (I - C e^{-i omega})^{-1} Sigma (I - C^T e^{i omega})^{-1}`,
    /// block diagonal over components.
    pub fn noise_spectrum(&self, omega: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.p(), self.p());
        for n in &self.noise {
            let d = n.nodes.len();
            let z = Complex64::from_polar(1.0, -omega);
            let phi = linalg::identity(d) - linalg::to_complex(&n.c) * z;
            let phi_inv = phi.try_inverse().expect("stable VAR has invertible transfer");
            let block = &phi_inv * linalg::to_complex(&n.sigma) * phi_inv.adjoint()
                * Complex64::new(1.0 / (2.0 * PI), 0.0);
            for (a, &ka) in n.nodes.iter().enumerate() {
                for (b, &kb) in n.nodes.iter().enumerate() {
                    out[(ka, kb)] = block[(a, b)];
                }
            }
        }
        linalg::hermitian_part(&out)
    }

    /// `Omega(omega) = f_e(omega)^{-1}`.
    pub fn noise_inverse_spectrum(&self, omega: f64) -> CMatrix {
        let mut out = CMatrix::zeros(self.p(), self.p());
        for n in &self.noise {
            let d = n.nodes.len();
            let z = Complex64::from_polar(1.0, -omega);
            let phi = linalg::identity(d) - linalg::to_complex(&n.c) * z;
            let sig_inv = n
                .sigma
                .clone()
                .try_inverse()
                .expect("innovation covariance must be invertible");
            let block = phi.adjoint() * linalg::to_complex(&sig_inv) * &phi
                * Complex64::new(2.0 * PI, 0.0);
            for (a, &ka) in n.nodes.iter().enumerate() {
                for (b, &kb) in n.nodes.iter().enumerate() {
                    out[(ka, kb)] = block[(a, b)];
                }
            }
        }
        linalg::hermitian_part(&out)
    }

    /// `f_x(omega) = Phi^{-1} f_e Phi^{-H}` with `Phi = I - A - B e^{-i omega}`.
    pub fn spectrum(&self, omega: f64) -> CMatrix {
        let z = Complex64::from_polar(1.0, -omega);
        let phi = linalg::identity(self.p())
            - linalg::to_complex(&self.coeffs.a)
            - linalg::to_complex(&self.coeffs.b) * z;
        let phi_inv = phi.try_inverse().expect("I - A - B z is invertible for a stationary model");
        linalg::hermitian_part(&(&phi_inv * self.noise_spectrum(omega) * phi_inv.adjoint()))
    }
}

/// Generates the ground truth described by `spec`.
pub fn generate_graph(spec: &DesignSpec) -> Result<GroundTruth> {
    spec.validate()?;
    if spec.design == Design::Fixture {
        return fixture();
    }
    let p = spec.p;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    rng.set_stream(STREAM_GRAPH);

    let mut sampled = BTreeSet::new();
    let n1 = ((spec.layer1_frac * p as f64).ceil() as usize).min(p);
    let same_block = |a: usize, b: usize| match spec.design {
        Design::TwoLayer => (a < n1) == (b < n1),
        _ => true,
    };
    for a in 0..p {
        for b in (a + 1)..p {
            if same_block(a, b) && rng.random_bool(spec.within_edge_prob) {
                sampled.insert(UndirectedEdge::new(a, b));
            }
        }
    }
    let components = graph::components_from_undirected(p, sampled.iter().copied())?;
    let comp_of = {
        let mut of = vec![0; p];
        for (g, c) in components.iter().enumerate() {
            for &k in c {
                of[k] = g;
            }
        }
        of
    };

    let mut directed_pairs: Vec<(usize, usize)> = Vec::new(); // (from, to)
    match spec.design {
        Design::TwoLayer => {
            for l in 0..n1 {
                for k in n1..p {
                    if rng.random_bool(spec.directed_edge_prob) {
                        directed_pairs.push((l, k));
                    }
                }
            }
        }
        Design::RandomOrder => {
            for l in 0..p {
                if !rng.random_bool(spec.hub_prob) {
                    continue;
                }
                for k in 0..p {
                    if comp_of[k] > comp_of[l] && rng.random_bool(spec.directed_edge_prob) {
                        directed_pairs.push((l, k));
                    }
                }
            }
        }
        Design::Fixture => unreachable!(),
    }

    let mut coeffs = CoefficientPair::zeros(p);
    for &(l, k) in &directed_pairs {
        let (use_a, use_b) = if spec.independent_masks {
            (rng.random_bool(0.5), rng.random_bool(0.5))
        } else {
            (true, true)
        };
        let va = signed_uniform(&mut rng, 0.5, 1.5);
        let vb = signed_uniform(&mut rng, 0.5, 1.5);
        if use_a {
            coeffs.a[(k, l)] = va;
        }
        if use_b {
            coeffs.b[(k, l)] = vb;
        }
    }

    let mut noise = Vec::with_capacity(components.len());
    for comp in &components {
        let d = comp.len();
        let check = DMatrix::from_fn(d, d, |_, _| signed_uniform(&mut rng, 0.5, 1.0));
        let iota: f64 = rng.random_range(0.5..=1.0);
        let r = linalg::spectral_radius(&check);
        let c = if r > 0.0 { check * (iota / r) } else { check };
        let i_minus_c = DMatrix::<f64>::identity(d, d) - &c;
        let mut sigma = &i_minus_c * i_minus_c.transpose();
        if spec.unit_noise_variance {
            let lag0 = var1_lyapunov(&c, &sigma);
            sigma = DMatrix::from_fn(d, d, |i, j| sigma[(i, j)] / (lag0[(i, i)] * lag0[(j, j)]).sqrt());
        }
        noise.push(ComponentNoise {
            nodes: comp.clone(),
            c,
            sigma,
        });
    }

    let truth_edges = complete_within(&components);
    let mut g = ChainGraph::from_undirected(p, truth_edges)?;
    g.ordering = Some((0..g.components.len()).collect());

    let mut radius = linalg::spectral_radius(&coeffs.transition()?);
    let mut rescaled = false;
    if radius >= STATIONARITY_CAP {
        coeffs.b *= STATIONARITY_CAP / radius;
        radius = linalg::spectral_radius(&coeffs.transition()?);
        rescaled = true;
    }
    g.set_directed_from(&coeffs);

    let mut truth = GroundTruth::from_parts(g, coeffs, noise, spec.burn_in)?;
    truth.spectral_radius_x = radius;
    truth.rescale_applied = rescaled;
    if spec.design == Design::TwoLayer {
        truth.layer1 = Some((0..n1).collect());
    }
    Ok(truth)
}

/// Seven-node toy system. Components (1-based) {1,3,5}, {2,4}, {6}, {7};
/// the first carries the VAR(1) noise with
/// `C = [[.6,.2,0],[0,.6,0],[0,0,.6]]`, `Sigma = [[1,0,0],[0,1,.5],[0,.5,1]]`,
/// so its inverse spectrum has edges 1-3 and 3-5 but `Omega_15 = 0`.
/// Directed edges: 3 -> 6 (A), 5 -> 2 (B), 4 -> 7 (A and B).
pub fn fixture() -> Result<GroundTruth> {
    let p = 7;
    let edges: BTreeSet<UndirectedEdge> = [(0, 2), (2, 4), (1, 3)]
        .into_iter()
        .map(|(a, b)| UndirectedEdge::new(a, b))
        .collect();
    let mut g = ChainGraph::from_undirected(p, edges)?;
    let mut coeffs = CoefficientPair::zeros(p);
    coeffs.a[(5, 2)] = 0.8;
    coeffs.b[(1, 4)] = 0.8;
    coeffs.a[(6, 3)] = -0.8;
    coeffs.b[(6, 3)] = 0.8;
    g.set_directed_from(&coeffs);
    g.ordering = Some((0..g.components.len()).collect());
    let noise = vec![
        ComponentNoise {
            nodes: vec![0, 2, 4],
            c: DMatrix::from_row_slice(3, 3, &[0.6, 0.2, 0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.6]),
            sigma: DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0, 0.5, 1.0]),
        },
        ComponentNoise {
            nodes: vec![1, 3],
            c: DMatrix::zeros(2, 2),
            sigma: DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        },
        ComponentNoise {
            nodes: vec![5],
            c: DMatrix::zeros(1, 1),
            sigma: DMatrix::identity(1, 1),
        },
        ComponentNoise {
            nodes: vec![6],
            c: DMatrix::zeros(1, 1),
            sigma: DMatrix::identity(1, 1),
        },
    ];
    GroundTruth::from_parts(g, coeffs, noise, 200)
}

/// Lower-triangular (or PSD square-root) factor `F` with `F F^T = sigma`.
fn covariance_factor(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = sigma.clone().cholesky() {
        return ch.l();
    }
    let eig = sigma.clone().symmetric_eigen();
    let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt) * eig.eigenvectors.transpose()
}

fn noise_with_burn_in(truth: &GroundTruth, len: usize, seed: u64) -> DMatrix<f64> {
    let p = truth.p();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_NOISE);
    let burn = truth.burn_in;
    let mut out = DMatrix::<f64>::zeros(len, p);
    for n in &truth.noise {
        let d = n.nodes.len();
        let factor = covariance_factor(&n.sigma);
        let mut state = nalgebra::DVector::<f64>::zeros(d);
        for t in 0..(burn + len) {
            let z = nalgebra::DVector::<f64>::from_fn(d, |_, _| rng.sample(StandardNormal));
            state = &n.c * &state + &factor * z;
            if t >= burn {
                for (a, &k) in n.nodes.iter().enumerate() {
                    out[(t - burn, k)] = state[a];
                }
            }
        }
    }
    out
}

/// `T x p` draw of the noise process `e_t` (component VARs run
/// independently, burn-in discarded).
pub fn simulate_noise(truth: &GroundTruth, t: usize, seed: u64) -> DMatrix<f64> {
    noise_with_burn_in(truth, t, seed)
}

/// `x_t = (I - A)^{-1} (B x_{t-1} + e_t)`, burn-in discarded.
pub fn simulate_panel(truth: &GroundTruth, t: usize, seed: u64) -> Result<TimeSeriesPanel> {
    if !(truth.spectral_radius_x < 1.0) {
        return Err(Error::InvalidInput(format!(
            "refusing to simulate a nonstationary system: spectral radius of (I-A)^-1 B is {}",
            truth.spectral_radius_x
        )));
    }
    let p = truth.p();
    let burn = truth.burn_in;
    let total = t + burn;
    let e = noise_with_burn_in(truth, total, seed);
    let zero_coeffs = truth.coeffs.a.iter().all(|&v| v == 0.0) && truth.coeffs.b.iter().all(|&v| v == 0.0);
    if zero_coeffs {
        let rows = e.rows(burn, t).into_owned();
        return TimeSeriesPanel::new(rows);
    }
    let ia = DMatrix::<f64>::identity(p, p) - &truth.coeffs.a;
    let ia_inv = ia
        .try_inverse()
        .ok_or_else(|| Error::Numerical("I - A is singular".into()))?;
    let phi = &ia_inv * &truth.coeffs.b;
    let mut out = DMatrix::<f64>::zeros(t, p);
    let mut x = nalgebra::DVector::<f64>::zeros(p);
    for s in 0..total {
        let es = e.row(s).transpose();
        x = &phi * &x + &ia_inv * es;
        if s >= burn {
            out.set_row(s - burn, &x.transpose());
        }
    }
    TimeSeriesPanel::new(out)
}

/// Generates the ground truth and a panel of length `spec.t` from one spec.
pub fn simulate(spec: &DesignSpec) -> Result<(GroundTruth, TimeSeriesPanel)> {
    let truth = generate_graph(spec)?;
    let panel = simulate_panel(&truth, spec.t, spec.seed)?;
    Ok((truth, panel))
}

/// Stationary lag-0 covariance of a VAR(1): solves `S = C S C^T + Sigma`.
pub fn var1_lyapunov(c: &DMatrix<f64>, sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let d = c.nrows();
    // vec(S) = (I - C (x) C)^{-1} vec(Sigma)
    let kron = c.kronecker(c);
    let lhs = DMatrix::<f64>::identity(d * d, d * d) - kron;
    let rhs = nalgebra::DVector::from_column_slice(sigma.as_slice());
    let sol = lhs.lu().solve(&rhs).expect("stable VAR gives a regular Lyapunov system");
    DMatrix::from_column_slice(d, d, sol.as_slice())
}
