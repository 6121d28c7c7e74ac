//! The thread-per-PE backend reproduces the sequential reference run exactly.
//!
//! cargo run --release --example parallel_backend

use std::time::Instant;

use arna::bench::{init_tracking, ReplicateSeeds, ScenarioConfig};
use arna::dpf::{run_distributed, Backend, RunPlan};
use arna::synth::generate_scene;

fn main() {
    let cfg = ScenarioConfig {
        pes: 8,
        particles_per_pe: 200,
        ..ScenarioConfig::default()
    };
    let scene = generate_scene(&cfg.scene_config(), 42).unwrap();
    let seeds = ReplicateSeeds::new(42, 0);
    let plan = RunPlan {
        policy: cfg.policy().unwrap(),
        model: cfg.model(),
        initial: cfg.initial_reduction(),
        coordinator_seed: seeds.filter,
    };

    let mut runs = Vec::new();
    for backend in [Backend::Sequential, Backend::Parallel] {
        let t = Instant::now();
        let run = run_distributed(backend, init_tracking(&cfg, &scene, seeds.filter), &scene.frames[1..], &plan).unwrap();
        println!("{backend:?}: {} iterations in {:.2?}", run.iterations.len(), t.elapsed());
        runs.push(run);
    }
    let same = runs[0].iterations == runs[1].iterations
        && runs[0].pes.iter().zip(&runs[1].pes).all(|(a, b)| a.digest() == b.digest());
    println!("identical reductions and final PE states: {same}");
    let last = runs[0].iterations.last().unwrap();
    println!(
        "final estimate ({:.2}, {:.2}), truth ({:.2}, {:.2}), pe_eff {:.2}",
        last.reduction.global_estimate.x,
        last.reduction.global_estimate.y,
        scene.truth(scene.frames.len() - 1).x,
        scene.truth(scene.frames.len() - 1).y,
        last.reduction.pe_eff
    );
}
