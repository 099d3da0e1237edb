//! End-to-end estimation, rate-based tuning and the Monte Carlo bench.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use log::info;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::{self, AdmmConfig, AdmmSummary};
use crate::causal::{self, OrderingResult, RidgeRule, Stage3Config};
use crate::error::{Error, Result};
use crate::graph::{self, ChainGraph, CoefficientPair, EdgeMetrics, UndirectedEdge};
use crate::simgen::{self, Design, DesignSpec, GroundTruth};
use crate::spectral::{self, TimeSeriesPanel};

/// Estimation settings. Rate constants scale the theoretical orders:
///
/// * `m = min(round(m_const (ln T)^{1/3} T^{2/3}), m_max)`, where `m_max` is
///   the largest half-block size leaving at least `min_blocks` blocks;
/// * `lambda1 = lambda1_const T^{-1/3 + eta}`, `lambda2 = gamma lambda1`;
/// * `kappa = kappa_const T^{-1/2}`, `nu = nu_const T^{-1/2 + zeta}`.
///
/// The `lambda1`/`lambda2` fields of `admm` are overwritten by the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub m_const: f64,
    /// Fixed half-block size; bypasses the schedule when set.
    pub m: Option<usize>,
    pub min_blocks: usize,
    pub lambda1_const: f64,
    pub eta: f64,
    pub gamma: f64,
    pub kappa_const: f64,
    pub nu_const: f64,
    pub zeta: f64,
    pub admm: AdmmConfig,
    pub schur_ridge: RidgeRule,
    pub gram_ridge: RidgeRule,
    pub center: bool,
    pub standardize: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            m_const: 1.0,
            m: None,
            min_blocks: 5,
            lambda1_const: 0.3,
            eta: 1.0 / 16.0,
            gamma: 3.0,
            kappa_const: 60.0,
            nu_const: 10.0,
            zeta: 0.1,
            admm: AdmmConfig {
                adaptive_rho: true,
                ..AdmmConfig::default()
            },
            schur_ridge: RidgeRule::Relative(1e-6),
            gram_ridge: RidgeRule::Relative(1e-8),
            center: true,
            standardize: false,
        }
    }
}

impl EstimationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0 / 3.0) {
            return Err(Error::Config(format!("eta must lie in (0, 1/3), got {}", self.eta)));
        }
        if self.min_blocks == 0 {
            return Err(Error::Config("min_blocks must be at least 1".into()));
        }
        for (name, v) in [
            ("m_const", self.m_const),
            ("lambda1_const", self.lambda1_const),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("kappa_const", self.kappa_const), ("nu_const", self.nu_const)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.zeta >= 0.0 && self.zeta < 0.5) {
            return Err(Error::Config(format!("zeta must lie in [0, 1/2), got {}", self.zeta)));
        }
        Ok(())
    }
}

/// Concrete tuning values for one sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    #[serde(rename = "T")]
    pub t: usize,
    pub p: usize,
    pub m: usize,
    #[serde(rename = "M")]
    pub blocks: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub kappa: f64,
    pub nu: f64,
}

fn block_count(t: usize, m: usize) -> usize {
    (t / 2 - 1) / (2 * m + 1)
}

pub fn resolve_tuning(t: usize, p: usize, cfg: &EstimationConfig) -> Result<Tuning> {
    cfg.validate()?;
    if t < 20 || t % 2 != 0 {
        return Err(Error::Config(format!("T must be even and at least 20, got {t}")));
    }
    let tf = t as f64;
    let per_block = (t / 2 - 1) / cfg.min_blocks;
    if per_block == 0 {
        return Err(Error::Config(format!(
            "T={t} is too short for {} frequency blocks",
            cfg.min_blocks
        )));
    }
    let m_max = (per_block - 1) / 2;
    let m = match cfg.m {
        Some(m) => {
            if block_count(t, m) == 0 {
                return Err(Error::Config(format!("m={m} leaves no frequency block at T={t}")));
            }
            m
        }
        None => {
            let rate = (cfg.m_const * tf.ln().cbrt() * tf.powf(2.0 / 3.0)).round() as usize;
            rate.min(m_max)
        }
    };
    let lambda1 = cfg.lambda1_const * tf.powf(-1.0 / 3.0 + cfg.eta);
    Ok(Tuning {
        t,
        p,
        m,
        blocks: block_count(t, m),
        lambda1,
        lambda2: cfg.gamma * lambda1,
        kappa: cfg.kappa_const * tf.powf(-0.5),
        nu: cfg.nu_const * tf.powf(-0.5 + cfg.zeta),
    })
}

#[derive(Debug, Clone, Default)]
pub struct Timings {
    pub spectral: Duration,
    pub admm: Duration,
    pub ordering: Duration,
    pub directed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMetrics {
    pub undirected: EdgeMetrics,
    #[serde(rename = "A")]
    pub a: EdgeMetrics,
    #[serde(rename = "B")]
    pub b: EdgeMetrics,
    pub shd: usize,
}

/// Everything a fit produces. [`crate::io::ReportJson`] is its serialized
/// form, which leaves out the timings.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub estimated: ChainGraph,
    pub coeffs: CoefficientPair,
    pub tuning: Tuning,
    pub admm: AdmmSummary,
    pub ordering: OrderingResult,
    pub dropped_first_observation: bool,
    pub config: EstimationConfig,
    pub metrics: Option<FitMetrics>,
    pub timings: Timings,
}

fn prepare(panel: &TimeSeriesPanel, cfg: &EstimationConfig) -> (TimeSeriesPanel, bool) {
    let (even, dropped) = panel.clone().truncate_to_even();
    let mut x = if cfg.center { even.centered() } else { even };
    if cfg.standardize {
        x = x.standardized();
    }
    (x, dropped)
}

/// Runs all three stages on `panel`.
pub fn fit(panel: &TimeSeriesPanel, cfg: &EstimationConfig) -> Result<RunReport> {
    let (x, dropped) = prepare(panel, cfg);
    let p = x.dim();
    let tuning = resolve_tuning(x.len(), p, cfg).map_err(|e| e.in_stage("tuning"))?;
    let mut timings = Timings::default();

    let clock = Instant::now();
    let fhat = (|| {
        let frame = spectral::dft(&x)?;
        let grid = spectral::make_grid(x.len(), tuning.m)?;
        spectral::averaged_periodogram(&frame, &grid)
    })()
    .map_err(|e| e.in_stage("spectral"))?;
    timings.spectral = clock.elapsed();

    let clock = Instant::now();
    let admm_cfg = AdmmConfig {
        lambda1: tuning.lambda1,
        lambda2: tuning.lambda2,
        ..cfg.admm.clone()
    };
    let sol = admm::solve(&fhat, &admm_cfg).map_err(|e| e.in_stage("admm"))?;
    timings.admm = clock.elapsed();
    let undirected: BTreeSet<UndirectedEdge> = sol
        .support
        .iter()
        .map(|g| UndirectedEdge::new(g.k, g.l))
        .collect();
    let mut estimated = ChainGraph::from_undirected(p, undirected)?;

    let clock = Instant::now();
    let ordering = causal::order_components(&fhat, &sol.omega, &estimated.components, cfg.schur_ridge)
        .map_err(|e| e.in_stage("ordering"))?;
    timings.ordering = clock.elapsed();

    let clock = Instant::now();
    let stage3 = Stage3Config {
        kappa: tuning.kappa,
        nu: tuning.nu,
        ridge: cfg.gram_ridge,
    };
    let coeffs = causal::estimate_directed(&x, &ordering, &stage3).map_err(|e| e.in_stage("directed"))?;
    timings.directed = clock.elapsed();
    estimated.set_directed_from(&coeffs);
    estimated.ordering = Some(ordering.ordering.clone());

    info!(
        "fit: p={} T={} m={} M={} |E_u|={} |E_d|={} admm_iter={} ({:?} total)",
        p,
        x.len(),
        tuning.m,
        tuning.blocks,
        estimated.undirected.len(),
        estimated.directed.len(),
        sol.iterations,
        timings.spectral + timings.admm + timings.ordering + timings.directed
    );

    Ok(RunReport {
        admm: sol.summary(&admm_cfg, &fhat),
        estimated,
        coeffs,
        tuning,
        ordering,
        dropped_first_observation: dropped,
        config: cfg.clone(),
        metrics: None,
        timings,
    })
}

/// Recovery metrics of an estimate against the ground truth.
pub fn evaluate(
    estimated: &ChainGraph,
    coeffs: &CoefficientPair,
    truth_graph: &ChainGraph,
    truth_coeffs: &CoefficientPair,
) -> Result<FitMetrics> {
    Ok(FitMetrics {
        undirected: graph::undirected_metrics(estimated, truth_graph)?,
        a: graph::support_metrics(&coeffs.a, &truth_coeffs.a)?,
        b: graph::support_metrics(&coeffs.b, &truth_coeffs.b)?,
        shd: graph::shd(estimated, truth_graph)?,
    })
}

/// Simulates from `spec`, fits, and scores against the truth.
pub fn run_replication(spec: &DesignSpec, cfg: &EstimationConfig) -> Result<(GroundTruth, RunReport)> {
    let (truth, panel) = simgen::simulate(spec)?;
    let mut report = fit(&panel, cfg)?;
    report.metrics = Some(evaluate(&report.estimated, &report.coeffs, &truth.graph, &truth.coeffs)?);
    Ok((truth, report))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub design: Design,
    pub p: usize,
    #[serde(rename = "T")]
    pub t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchGrid {
    pub cells: Vec<BenchCell>,
    pub replications: usize,
    pub master_seed: u64,
    pub config: EstimationConfig,
}

impl Default for BenchGrid {
    fn default() -> Self {
        Self {
            cells: desk_grid(),
            replications: 20,
            master_seed: 2024,
            config: EstimationConfig::default(),
        }
    }
}

/// Design 1 and Design 2 at `(p, T) = (30, 1000)`.
pub fn desk_grid() -> Vec<BenchCell> {
    [Design::TwoLayer, Design::RandomOrder]
        .into_iter()
        .map(|design| BenchCell { design, p: 30, t: 1000 })
        .collect()
}

/// Every design with `p` in {30, 60} and `T` in {500, 1000}.
pub fn full_grid() -> Vec<BenchCell> {
    let mut out = Vec::new();
    for design in [Design::TwoLayer, Design::RandomOrder] {
        for p in [30, 60] {
            for t in [500, 1000] {
                out.push(BenchCell { design, p, t });
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self { mean: f64::NAN, se: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSummary {
    pub recall: MeanSe,
    pub precision: MeanSe,
    pub mcc: MeanSe,
}

impl RateSummary {
    fn of(ms: &[EdgeMetrics]) -> Self {
        let col = |f: fn(&EdgeMetrics) -> f64| MeanSe::of(&ms.iter().map(f).collect::<Vec<_>>());
        Self {
            recall: col(|m| m.recall),
            precision: col(|m| m.precision),
            mcc: col(|m| m.mcc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub cell: BenchCell,
    pub replications: usize,
    pub succeeded: usize,
    pub undirected: RateSummary,
    #[serde(rename = "A")]
    pub a: RateSummary,
    #[serde(rename = "B")]
    pub b: RateSummary,
    pub shd: MeanSe,
    pub failures: Vec<ReplicationFailure>,
    /// Per-replication metrics, in replication order.
    pub runs: Vec<FitMetrics>,
}

/// Replication seeds of one cell, drawn from the master seed on a stream
/// keyed by the cell's position in the grid.
pub fn replication_seeds(master_seed: u64, cell_index: usize, replications: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(cell_index as u64);
    (0..replications).map(|_| rng.next_u64()).collect()
}

pub fn bench(grid: &BenchGrid) -> Result<Vec<BenchRow>> {
    grid.config.validate()?;
    let mut rows = Vec::with_capacity(grid.cells.len());
    for (ci, cell) in grid.cells.iter().enumerate() {
        let seeds = replication_seeds(grid.master_seed, ci, grid.replications);
        let outcomes: Vec<(usize, u64, Result<FitMetrics>)> = seeds
            .par_iter()
            .enumerate()
            .map(|(r, &seed)| {
                let spec = DesignSpec::new(cell.design, cell.p, cell.t, seed);
                let out = run_replication(&spec, &grid.config).map(|(_, rep)| rep.metrics.expect("set"));
                (r, seed, out)
            })
            .collect();
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for (replication, seed, out) in outcomes {
            match out {
                Ok(m) => runs.push(m),
                Err(e) => failures.push(ReplicationFailure {
                    replication,
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        let pick = |f: fn(&FitMetrics) -> EdgeMetrics| runs.iter().map(f).collect::<Vec<_>>();
        let row = BenchRow {
            cell: cell.clone(),
            replications: grid.replications,
            succeeded: runs.len(),
            undirected: RateSummary::of(&pick(|m| m.undirected)),
            a: RateSummary::of(&pick(|m| m.a)),
            b: RateSummary::of(&pick(|m| m.b)),
            shd: MeanSe::of(&runs.iter().map(|m| m.shd as f64).collect::<Vec<_>>()),
            failures,
            runs,
        };
        info!(
            "bench {:?} p={} T={}: MCC(E_u)={:.3} MCC(A)={:.3} MCC(B)={:.3} SHD={:.2} ({} failed)",
            cell.design,
            cell.p,
            cell.t,
            row.undirected.mcc.mean,
            row.a.mcc.mean,
            row.b.mcc.mean,
            row.shd.mean,
            row.failures.len()
        );
        rows.push(row);
    }
    Ok(rows)
}

/// Fixed-width text table:
/// recall, precision and MCC for each edge type, then SHD.
pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "design        p     T  | E_u rec  prec   MCC    | A rec    prec   MCC    | B rec    prec   MCC    | SHD\n",
    );
    for r in rows {
        let f = |s: &RateSummary| {
            format!(
                "{:.3} {:.3} {:.3} ({:.3})",
                s.recall.mean, s.precision.mean, s.mcc.mean, s.mcc.se
            )
        };
        out.push_str(&format!(
            "{:<12} {:>3} {:>5}  | {} | {} | {} | {:.2} ({:.3})\n",
            format!("{:?}", r.cell.design),
            r.cell.p,
            r.cell.t,
            f(&r.undirected),
            f(&r.a),
            f(&r.b),
            r.shd.mean,
            r.shd.se
        ));
    }
    out
}
