//! Recovery of pe_eff/M after one PE has found the target, for ARNA and two
//! RNA ratios on paired scenes.
//!
//! cargo run --release --example information_sharing [-- PES]

use arna::bench::{generate_scenes, recovery_curve, run_on_scenes, AlgorithmKind, Mode, ScenarioConfig};
use arna::statemodel::ObservationParams;

fn main() {
    let pes = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(24);
    let base = {
        let mut cfg = ScenarioConfig {
            mode: Mode::InfoSharing,
            pes,
            particles_per_pe: 40,
            frames: 21,
            replicates: 5,
            ..ScenarioConfig::default()
        };
        cfg.scene.observation = ObservationParams::default().with_size(256, 256);
        cfg
    };
    let scenes = generate_scenes(&base).unwrap();
    let arms = [
        ScenarioConfig { algo: AlgorithmKind::Arna, ..base },
        ScenarioConfig { algo: AlgorithmKind::Rna, ratio: 0.5, ..base },
        ScenarioConfig { algo: AlgorithmKind::Rna, ratio: 0.1, ..base },
    ];
    let curves: Vec<(String, Vec<f64>)> = arms
        .iter()
        .map(|cfg| (cfg.label(), recovery_curve(&run_on_scenes(cfg, &scenes).unwrap())))
        .collect();

    println!("median pe_eff/M, M = {pes}, {} scenes", base.replicates);
    print!("{:>5}", "iter");
    for (label, _) in &curves {
        print!("{label:>9}");
    }
    println!();
    for k in 0..curves[0].1.len() {
        print!("{:>5}", k + 1);
        for (_, c) in &curves {
            print!("{:>9.3}", c[k]);
        }
        println!();
    }
}
