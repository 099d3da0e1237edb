//! `tscg` command-line front end.
//!
//! Exit status: 0 on success, 1 for invalid input (bad files, arguments or
//! configuration), 2 when the numerics fail.
//!
//! The number of worker threads is taken from `--threads`, else from the
//! `TSCG_THREADS` environment variable, else rayon's default (one per core).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use tscg::io::{self, EstimateJson, ReportJson, TruthJson};
use tscg::pipeline::{self, BenchGrid, EstimationConfig};
use tscg::simgen::{self, Design, DesignSpec};
use tscg::Error;

const THREADS_ENV: &str = "TSCG_THREADS";

#[derive(Parser, Debug)]
#[command(name = "tscg", version, about = "Learn time series Gaussian chain graphs")]
struct Cli {
    /// Worker threads (overrides TSCG_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a ground-truth chain graph and a data panel.
    Simulate(SimulateArgs),
    /// Estimate a chain graph from a panel.
    Fit(FitArgs),
    /// Score an estimate against a ground truth.
    Eval(EvalArgs),
    /// Monte Carlo benchmark over a grid of designs.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DesignArg {
    TwoLayer,
    RandomOrder,
    Fixture,
}

impl From<DesignArg> for Design {
    fn from(d: DesignArg) -> Self {
        match d {
            DesignArg::TwoLayer => Design::TwoLayer,
            DesignArg::RandomOrder => Design::RandomOrder,
            DesignArg::Fixture => Design::Fixture,
        }
    }
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// DesignSpec JSON; the flags below override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    design: Option<DesignArg>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long = "T", visible_alias = "t")]
    t: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output panel CSV.
    #[arg(long)]
    panel: PathBuf,
    /// Output ground-truth JSON.
    #[arg(long)]
    truth: PathBuf,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Input panel CSV (header row, one row per time point).
    #[arg(long)]
    panel: PathBuf,
    /// EstimationConfig JSON; missing fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Standardize each column to unit variance before fitting.
    #[arg(long)]
    standardize: bool,
    /// Output report JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Output graph JSON.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Output Graphviz DOT.
    #[arg(long)]
    dot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Report or any JSON with `graph` and `coeffs`.
    #[arg(long)]
    estimate: PathBuf,
    /// Ground-truth JSON written by `simulate`.
    #[arg(long)]
    truth: PathBuf,
    /// Output metrics JSON (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// BenchGrid JSON; missing fields take their defaults.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Use every design with p in {30, 60} and T in {500, 1000}.
    #[arg(long)]
    full: bool,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// Output table CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Output rows as JSON, including per-replication metrics.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(cli.threads)? {
        // 0 lets rayon pick.
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
    })
}

fn read_optional<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T, Error> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(T::default()),
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Error> {
    let mut spec: DesignSpec = read_optional(a.spec.as_deref())?;
    if let Some(d) = a.design {
        spec.design = d.into();
    }
    if let Some(p) = a.p {
        spec.p = p;
    }
    if let Some(t) = a.t {
        spec.t = t;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let (truth, panel) = simgen::simulate(&spec)?;
    io::write_panel_csv_file(&a.panel, &panel, &io::default_names(panel.dim()))?;
    io::write_json(&a.truth, &TruthJson::from(&truth))?;
    if truth.rescale_applied {
        log::warn!(
            "B was rescaled to make the process stationary (spectral radius now {:.4})",
            truth.spectral_radius_x
        );
    }
    info!("simulated {} x {} panel", panel.len(), panel.dim());
    Ok(())
}

fn fit(a: FitArgs) -> Result<(), Error> {
    let (panel, names) = io::read_panel_csv_file(&a.panel)?;
    let mut cfg: EstimationConfig = read_optional(a.config.as_deref())?;
    if a.standardize {
        cfg.standardize = true;
    }
    let report = pipeline::fit(&panel, &cfg)?;
    let doc = ReportJson::from(&report);
    if let Some(p) = &a.report {
        io::write_json(p, &doc)?;
    }
    if let Some(p) = &a.graph {
        io::write_json(p, &doc.graph)?;
    }
    if let Some(p) = &a.dot {
        std::fs::write(p, io::to_dot(&report.estimated, Some(&report.coeffs), Some(&names)))?;
    }
    if a.report.is_none() && a.graph.is_none() && a.dot.is_none() {
        print!("{}", io::to_json_string(&doc.graph)?);
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Error> {
    let est: EstimateJson = io::read_json(&a.estimate)?;
    let truth: TruthJson = io::read_json(&a.truth)?;
    let (eg, ec) = (est.graph.to_graph()?, est.coeffs.to_coeffs()?);
    let (tg, tc) = (truth.graph.to_graph()?, truth.coeffs.to_coeffs()?);
    let metrics = pipeline::evaluate(&eg, &ec, &tg, &tc)?;
    match &a.out {
        Some(p) => io::write_json(p, &metrics),
        None => {
            print!("{}", io::to_json_string(&metrics)?);
            Ok(())
        }
    }
}

fn bench(a: BenchArgs) -> Result<(), Error> {
    let mut grid: BenchGrid = read_optional(a.grid.as_deref())?;
    if a.full {
        grid.cells = pipeline::full_grid();
    }
    if let Some(r) = a.replications {
        grid.replications = r;
    }
    if let Some(s) = a.master_seed {
        grid.master_seed = s;
    }
    let rows = pipeline::bench(&grid)?;
    let mut out = std::io::stdout().lock();
    out.write_all(pipeline::format_table(&rows).as_bytes())?;
    for r in &rows {
        for f in &r.failures {
            writeln!(out, "failed: {:?} replication {} (seed {}): {}", r.cell.design, f.replication, f.seed, f.error)?;
        }
    }
    if let Some(p) = &a.csv {
        io::write_bench_csv(std::fs::File::create(p)?, &rows)?;
    }
    if let Some(p) = &a.json {
        io::write_json(p, &rows)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;
    use tscg::io::GraphJson;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn graph_json_type_is_reexported() {
        // The `graph` output of `fit` is a GraphJson document.
        let g: GraphJson = serde_json::from_str(r#"{"p":2,"undirected":[],"directed":[],"components":[[1],[2]]}"#).unwrap();
        assert_eq!(g.to_graph().unwrap().components.len(), 2);
    }
}
