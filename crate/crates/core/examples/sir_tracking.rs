//! A single SIR filter following one spot through a synthetic sequence.
//!
//! cargo run --release --example sir_tracking

use arna::resample::{sir_step, WeightedEnsemble};
use arna::rng::stream;
use arna::statemodel::{jitter, DynamicsParams, ObservationParams};
use arna::synth::{generate_scene, SceneConfig};

fn main() {
    let observation = ObservationParams::default().with_size(128, 128);
    let scene = generate_scene(
        &SceneConfig {
            frames: 30,
            observation,
            ..SceneConfig::default()
        },
        7,
    )
    .expect("valid scene");
    let dynamics = DynamicsParams {
        sigma_pos: 0.02,
        sigma_vel: 0.01,
        sigma_i: 0.2,
        dt: 1.0,
    };

    let n = 1000;
    let mut rng = stream(7, 0);
    let start = (0..n).map(|_| jitter(scene.truth(0), &dynamics, &mut rng)).collect();
    let mut ensemble = WeightedEnsemble::uniform(start);

    println!("frame   truth (x, y)        estimate (x, y)     error   ESS  resampled");
    for (k, frame) in scene.frames.iter().enumerate().skip(1) {
        let step = sir_step(&ensemble, frame, &dynamics, &observation, n as f64 / 2.0, &mut rng).expect("filter diverged");
        let truth = scene.truth(k);
        println!(
            "{k:>5}   ({:>7.2}, {:>7.2})   ({:>7.2}, {:>7.2})   {:.3}  {:>4.0}  {}",
            truth.x,
            truth.y,
            step.estimate.x,
            step.estimate.y,
            step.estimate.position_error(truth),
            step.ess,
            step.resampled
        );
        ensemble = step.ensemble;
    }
}
