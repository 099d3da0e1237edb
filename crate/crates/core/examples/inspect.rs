//! Prints Stage-1 diagnostics of one replication.
//!
//! Usage: `cargo run --release -p tscg --example inspect -- DESIGN SEED 'CONFIG_JSON'`
//! with DESIGN one of `two-layer`, `random-order`, `fixture`.

use tscg::pipeline::{self, EstimationConfig};
use tscg::simgen::{Design, DesignSpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let design = match args.first().map(String::as_str) {
        Some("random-order") => Design::RandomOrder,
        Some("fixture") => Design::Fixture,
        _ => Design::TwoLayer,
    };
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let cfg: EstimationConfig = serde_json::from_str(args.get(2).map_or("{}", String::as_str)).expect("config");
    let t = if design == Design::Fixture { 4000 } else { 1000 };
    let p = if design == Design::Fixture { 7 } else { 30 };
    let spec = DesignSpec::new(design, p, t, seed);
    let start = std::time::Instant::now();
    let (truth, rep) = pipeline::run_replication(&spec, &cfg).expect("run");
    println!("elapsed {:?}; timings {:?}", start.elapsed(), rep.timings);
    println!("tuning {:?}", rep.tuning);
    println!("admm {:?}", rep.admm);
    println!("truth components {:?}", truth.graph.components);
    println!("est components   {:?}", rep.estimated.components);
    println!("est ordering {:?}", rep.ordering.ordering);
    let und: Vec<_> = rep.estimated.undirected.iter().map(|e| (e.a + 1, e.b + 1)).collect();
    println!("est undirected {und:?}");
    println!("metrics {:?}", rep.metrics);
    println!("rescaled {} radius {}", truth.rescale_applied, truth.spectral_radius_x);
}
