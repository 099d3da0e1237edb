//! Sweeps tuning constants on the desk-scale grid.
//!
//! Usage: `cargo run --release -p tscg --example calibrate -- REPS 'CONFIG_JSON' ['CONFIG_JSON' ...]`
//! where each CONFIG_JSON is a partial `EstimationConfig`.

use tscg::pipeline::{self, BenchGrid, EstimationConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(5);
    let configs: Vec<String> = args.collect();
    let configs = if configs.is_empty() { vec!["{}".to_string()] } else { configs };
    for raw in configs {
        let cfg: EstimationConfig = serde_json::from_str(&raw).expect("config JSON");
        let grid = BenchGrid {
            replications: reps,
            config: cfg,
            ..Default::default()
        };
        let start = std::time::Instant::now();
        let rows = pipeline::bench(&grid).expect("bench");
        println!("{raw}  ({:.1?})", start.elapsed());
        print!("{}", pipeline::format_table(&rows));
        for r in &rows {
            if !r.failures.is_empty() {
                println!("  failures: {:?}", r.failures);
            }
        }
    }
}
