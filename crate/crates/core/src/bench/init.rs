use rand::Rng;

use super::{BenchError, ScenarioConfig};
use crate::dpf::PeState;
use crate::rng::{pe_stream, stream, SimRng, INIT_STREAM};
use crate::statemodel::{jitter, StateVector};
use crate::synth::Scene;

fn log_uniform_weight(cfg: &ScenarioConfig) -> f64 {
    -(cfg.total_particles() as f64).ln()
}

fn at_truth(cfg: &ScenarioConfig, truth: &StateVector, rng: &mut SimRng) -> Vec<StateVector> {
    (0..cfg.particles_per_pe)
        .map(|_| if cfg.jitter { jitter(truth, &cfg.filter, rng) } else { *truth })
        .collect()
}

/// Every PE starts at the frame-0 ground truth (plus optional jitter) with
/// uniform weights summing to one over all PEs.
pub fn init_tracking(cfg: &ScenarioConfig, scene: &Scene, filter_seed: u64) -> Vec<PeState> {
    let truth = scene.truth(0);
    let mut rng = stream(filter_seed, INIT_STREAM);
    (0..cfg.pes)
        .map(|m| PeState::new(m, at_truth(cfg, truth, &mut rng), log_uniform_weight(cfg), pe_stream(filter_seed, m)))
        .collect()
}

/// PE 0 starts at the ground truth as in [`init_tracking`]; every other PE
/// samples position uniformly over the frame, velocity over
/// `[-v_max, v_max]²` and intensity over `[0, 2 i0]`.
pub fn init_info_sharing(cfg: &ScenarioConfig, scene: &Scene, filter_seed: u64) -> Result<Vec<PeState>, BenchError> {
    let truth = scene.truth(0);
    let (w, h) = (scene.width() as f64, scene.height() as f64);
    let i_max = 2.0 * truth.i0;
    let mut rng = stream(filter_seed, INIT_STREAM);
    let mut pes = Vec::with_capacity(cfg.pes);
    for m in 0..cfg.pes {
        let states = if m == 0 {
            at_truth(cfg, truth, &mut rng)
        } else {
            (0..cfg.particles_per_pe)
                .map(|_| {
                    StateVector::new(
                        rng.random_range(0.0..=w),
                        rng.random_range(0.0..=h),
                        rng.random_range(-cfg.v_max..=cfg.v_max),
                        rng.random_range(-cfg.v_max..=cfg.v_max),
                        rng.random_range(0.0..=i_max),
                    )
                })
                .collect()
        };
        pes.push(PeState::new(m, states, log_uniform_weight(cfg), pe_stream(filter_seed, m)));
    }
    Ok(pes)
}
