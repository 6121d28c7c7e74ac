//! Tracking-mode RMSE and communication volume for ARNA and RNA at several
//! particle counts.
//!
//! cargo run --release --example tracking_accuracy

use arna::bench::{generate_scenes, median, run_on_scenes, AlgorithmKind, RunRecord, ScenarioConfig};

fn main() {
    let base = ScenarioConfig {
        pes: 24,
        frames: 50,
        replicates: 5,
        ..ScenarioConfig::default()
    };
    let scenes = generate_scenes(&base).unwrap();
    println!("{:>8} {:>6} {:>12} {:>12} {:>14}", "algo", "N_p", "median RMSE", "mean RMSE", "bytes/run");
    for n_p in [40, 100, 200] {
        for (algo, ratio) in [(AlgorithmKind::Arna, 0.0), (AlgorithmKind::Rna, 0.1), (AlgorithmKind::Rna, 0.5)] {
            let cfg = ScenarioConfig {
                algo,
                ratio,
                particles_per_pe: n_p,
                ..base
            };
            let records = run_on_scenes(&cfg, &scenes).unwrap();
            let rmse: Vec<f64> = records.iter().map(|r| r.rmse).collect();
            let bytes = records.iter().map(RunRecord::total_bytes).sum::<u64>() / records.len() as u64;
            println!(
                "{:>8} {:>6} {:>12.4} {:>12.4} {:>14}",
                cfg.label(),
                n_p,
                median(&rmse),
                rmse.iter().sum::<f64>() / rmse.len() as f64,
                bytes
            );
        }
    }
}
