use dispatch_lab::demand::pearson;
use dispatch_lab::graph::*;
use dispatch_lab::io::*;
use dispatch_lab::seed::derive_seed;
use dispatch_lab::sim::*;
use std::path::Path;
use std::time::Instant;

fn main() {
    let g = load_graph(
        Path::new("fixtures/tianhe_sample/nodes.csv"),
        Path::new("fixtures/tianhe_sample/edges.csv"),
    )
    .unwrap();
    let apsp = floyd_warshall(&build_adjacency(&g));
    let marginals = load_survey(Path::new("fixtures/survey.json")).unwrap();
    let sim = Simulation::new(&g, &apsp, &marginals);

    for &(c, p, m, sigma, horizon) in &[
        (150u32, 0.9, 50.0, Some(50.0), 180u32),
        (100, 0.9, 50.0, Some(50.0), 240),
        (80, 0.9, 50.0, Some(50.0), 300),
    ] {
        let mut ts = Vec::new();
        let mut share = 0.0;
        let t0 = Instant::now();
        for seed in 0..10u64 {
            let cfg = ScenarioConfig {
                courier_count: c,
                order_count: 2000,
                proportion: p,
                avg_tip: m,
                tip_sigma: sigma,
                horizon_min: horizon,
                seed: derive_seed(777, seed),
                ..ScenarioConfig::default()
            };
            let run = sim.run_scenario(&cfg).unwrap();
            let tipped: Vec<&LatencyRecord> = run
                .records
                .iter()
                .filter(|r| r.delivered() && r.tip > 0.0)
                .collect();
            share += run.records.iter().filter(|r| r.delivered()).count() as f64 / 2000.0 / 10.0;
            let tips: Vec<f64> = tipped.iter().map(|r| r.tip).collect();
            let lats: Vec<f64> = tipped.iter().map(|r| r.latency).collect();
            let r = pearson(&tips, &lats).unwrap();
            let n = tips.len() as f64;
            ts.push(r * ((n - 2.0) / (1.0 - r * r)).sqrt());
        }
        let worst = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!(
            "c={c} p={p} m={m} h={horizon}: worst(t)={worst:.2} delivered={share:.3} took {:.0}s\n  {:?}",
            t0.elapsed().as_secs_f64(),
            ts.iter().map(|t| (t * 100.0).round() / 100.0).collect::<Vec<_>>()
        );
    }
}
