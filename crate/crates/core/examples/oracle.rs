//! Stage-by-stage diagnostics with oracle inputs on one replication.
//!
//! Usage: `cargo run --release -p tscg --example oracle -- DESIGN SEED LAMBDA1 GAMMA [NU]`

use tscg::admm::{self, AdmmConfig};
use tscg::causal::{self, OrderingResult, RidgeRule, Stage3Config};
use tscg::graph::{self, ChainGraph, UndirectedEdge};
use tscg::simgen::{self, Design, DesignSpec};
use tscg::spectral::{self, HermitianStack};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let design = match args.first().map(String::as_str) {
        Some("random-order") => Design::RandomOrder,
        _ => Design::TwoLayer,
    };
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let lambda1: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let gamma: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let nu: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(1000f64.powf(-0.4));
    let (t, p, m) = (1000, 30, 49);
    let spec = DesignSpec::new(design, p, t, seed);
    let (truth, panel) = simgen::simulate(&spec).unwrap();
    let grid = spectral::make_grid(t, m).unwrap();
    let fpop = HermitianStack::new(grid.central_freqs.iter().map(|&w| truth.spectrum(w)).collect()).unwrap();
    let omega_true =
        HermitianStack::new(grid.central_freqs.iter().map(|&w| truth.noise_inverse_spectrum(w)).collect()).unwrap();
    let mut x = panel.centered();
    let standardize = std::env::var("STD").is_ok_and(|v| v == "1");
    let fpop = if standardize {
        let sd: Vec<f64> = (0..p).map(|k| x.data().column(k).variance().sqrt()).collect();
        x = x.standardized();
        fpop.map(|_, s| {
            let mut s = s.clone();
            for a in 0..p {
                for b in 0..p {
                    s[(a, b)] /= sd[a] * sd[b];
                }
            }
            s
        })
    } else {
        fpop
    };
    let fhat = spectral::averaged_periodogram(&spectral::dft(&x).unwrap(), &grid).unwrap();

    println!("truth components {:?}", truth.graph.components);
    let diag: Vec<String> = (0..p).map(|k| format!("{:.2}", x.data().column(k).variance())).collect();
    println!("variances {}", diag.join(" "));

    let cfg = AdmmConfig {
        lambda1,
        lambda2: gamma * lambda1,
        adaptive_rho: true,
        tol_primal: 1e-5,
        tol_dual: 1e-5,
        max_iter: 20000,
        ..Default::default()
    };
    let skip1 = std::env::var("SKIP1").is_ok();
    for (name, f) in [("population", &fpop), ("estimated", &fhat)] {
        if skip1 {
            break;
        }
        let sol = admm::solve(f, &cfg).unwrap();
        let und = sol.support.iter().map(|g| UndirectedEdge::new(g.k, g.l)).collect();
        let est = ChainGraph::from_undirected(p, und).unwrap();
        let mt = graph::undirected_metrics(&est, &truth.graph).unwrap();
        println!(
            "stage1[{name}] iters={} conv={} rho={} ranks={:?} tp={} fp={} fn={} mcc={:.3}",
            sol.iterations, sol.converged, sol.rho, sol.ranks, mt.tp, mt.fp, mt.fn_, mt.mcc
        );
        let fps: Vec<_> = est
            .undirected
            .difference(&truth.graph.undirected)
            .map(|e| (e.a + 1, e.b + 1))
            .collect();
        println!("   false edges {:?}", fps);
    }

    let truth_comps = truth.graph.components.clone();
    for (name, f, om) in [("pop f, true Omega", &fpop, &omega_true), ("fhat, true Omega", &fhat, &omega_true)] {
        {
            let ord = causal::order_components(f, om, &truth_comps, RidgeRule::Relative(1e-6)).unwrap();
            let mask = causal::ordering_mask(p, &ord);
            let violations = truth
                .graph
                .directed
                .keys()
                .filter(|e| !mask[(e.to, e.from)])
                .count();
            println!("stage2[{name}] directed edges against ordering: {violations} / {}", truth.graph.directed.len());
        }
    }

    let oracle = OrderingResult {
        components: truth_comps.clone(),
        ordering: (0..truth_comps.len()).collect(),
        discrepancy_trace: vec![],
    };
    let tf = t as f64;
    for std_panel in [false] {
        let xx = if std_panel { x.standardized() } else { x.clone() };
        for kc in [0.0, 30.0, 100.0, 300.0] {
            let mut line = format!("stage3[std={std_panel}] c_kappa={kc:>5}:");
            for nc in [8.0, 12.0, 16.0, 24.0, 32.0] {
                let est = causal::estimate_directed(
                    &xx,
                    &oracle,
                    &Stage3Config {
                        kappa: kc * tf.powf(-0.5),
                        nu: nc * tf.powf(-0.4),
                        ridge: RidgeRule::Relative(1e-8),
                    },
                )
                .unwrap();
                let ma = graph::support_metrics(&est.a, &truth.coeffs.a).unwrap();
                let mb = graph::support_metrics(&est.b, &truth.coeffs.b).unwrap();
                line += &format!("  c_nu={nc}: A {:.3} B {:.3}", ma.mcc, mb.mcc);
            }
            println!("{line}");
        }
    }
    let _ = nu;
    let est = causal::estimate_directed(&x, &oracle, &Stage3Config { kappa: 30.0 * tf.powf(-0.5), nu: 8.0 * tf.powf(-0.4), ridge: RidgeRule::Relative(1e-8) }).unwrap();
    let sd: Vec<f64> = (0..p).map(|k| x.data().column(k).variance().sqrt()).collect();
    for (name, e, t0) in [("A", &est.a, &truth.coeffs.a), ("B", &est.b, &truth.coeffs.b)] {
        for k in 0..p { for l in 0..p {
            let (ev, tv) = (e[(k, l)], t0[(k, l)]);
            if (ev != 0.0) != (tv != 0.0) {
                println!("{name} {}<-{} est {ev:+.3} true {tv:+.3} sd_k {:.2} sd_l {:.2}", k + 1, l + 1, sd[k], sd[l]);
            }
        }}
    }
}
