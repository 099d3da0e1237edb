//! Stage-3 accuracy with the true components and ordering, over many seeds.
//!
//! Usage: `cargo run --release -p tscg --example ceiling -- DESIGN SEEDS`

use tscg::causal::{self, OrderingResult, RidgeRule, Stage3Config};
use tscg::graph;
use tscg::simgen::{self, Design, DesignSpec};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let design = match args.first().map(String::as_str) {
        Some("random-order") => Design::RandomOrder,
        _ => Design::TwoLayer,
    };
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let t = 1000usize;
    let tf = t as f64;
    let grid: Vec<(f64, f64)> = [0.0, 10.0, 30.0, 60.0, 100.0]
        .iter()
        .flat_map(|&k| [4.0, 6.0, 8.0, 10.0, 12.0].map(move |n| (k, n)))
        .collect();
    let mut acc = vec![(0.0, 0.0, 0.0); grid.len()];
    for seed in 1..=seeds {
        let (truth, panel) = simgen::simulate(&DesignSpec::new(design, 30, t, seed)).unwrap();
        let x = panel.centered();
        let comps = truth.graph.components.clone();
        let oracle = OrderingResult {
            ordering: (0..comps.len()).collect(),
            components: comps,
            discrepancy_trace: vec![],
        };
        for (i, &(kc, nc)) in grid.iter().enumerate() {
            let cfg = Stage3Config {
                kappa: kc * tf.powf(-0.5),
                nu: nc * tf.powf(-0.4),
                ridge: RidgeRule::Relative(1e-8),
            };
            let est = causal::estimate_directed(&x, &oracle, &cfg).unwrap();
            let ma = graph::support_metrics(&est.a, &truth.coeffs.a).unwrap();
            let mb = graph::support_metrics(&est.b, &truth.coeffs.b).unwrap();
            let mut g = truth.graph.clone();
            g.set_directed_from(&est);
            let shd = graph::shd(&g, &truth.graph).unwrap();
            acc[i].0 += ma.mcc;
            acc[i].1 += mb.mcc;
            acc[i].2 += shd as f64;
        }
    }
    let n = seeds as f64;
    for (&(kc, nc), (a, b, s)) in grid.iter().zip(acc) {
        println!("c_kappa {kc:>5} c_nu {nc:>4}: A {:.3} B {:.3} SHD {:.2}", a / n, b / n, s / n);
    }
}
