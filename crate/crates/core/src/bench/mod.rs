//! Scenario orchestration for the tracking and information-sharing
//! benchmarks, plus metrics and result files.

mod init;
mod io;
mod metrics;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dpf::{
    master_reduce_log, run_distributed, Backend, DpfError, ExchangePolicy, FilterModel, GlobalReduction, RunPlan,
};
use crate::resample::{sir_step, ResampleError, WeightedEnsemble};
use crate::rng::{derive_seed, pe_stream};
use crate::statemodel::{DynamicsParams, ModelError, ObservationParams, StateVector};
use crate::synth::{generate_scene, RenderMode, Scene, SceneConfig, SynthError};

pub use init::{init_info_sharing, init_tracking};
pub use io::{
    read_csv, read_csv_path, report, summarize, summary_path, write_csv, write_results, CsvRow, Report, RunReport,
    RunSummary, CSV_HEADER,
};
pub use metrics::{median, recovery_curve, rmse};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("length mismatch: {estimates} estimates vs {truth} truth states")]
    LengthMismatch { estimates: usize, truth: usize },
    #[error("no results to write")]
    EmptyResults,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dpf(#[from] DpfError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Every PE starts at the ground truth.
    #[default]
    Tracking,
    /// Only PE 0 starts at the ground truth; the rest sample the state space.
    InfoSharing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    /// Fixed-ratio exchange on the identity ring.
    Rna,
    /// Adaptive exchange on a shuffled ring.
    #[default]
    Arna,
    /// `M` independent SIR filters, resampling when `N_eff < N_p / 2`.
    SirIndependent,
}

/// Scene-generation settings that are not exposed as run flags.
///
/// The default filter noise matches the truth trajectories in position and
/// velocity; truth intensity stays fixed at the SNR value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneModel {
    pub dynamics: DynamicsParams,
    pub observation: ObservationParams,
    pub speed_min: f64,
    pub speed_max: f64,
    pub render: RenderMode,
}

impl Default for SceneModel {
    fn default() -> Self {
        let base = SceneConfig::default();
        Self {
            dynamics: base.dynamics,
            observation: base.observation,
            speed_min: base.speed_min,
            speed_max: base.speed_max,
            render: base.render,
        }
    }
}

/// One benchmark configuration. Field names mirror the `run` flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub algo: AlgorithmKind,
    /// Exchange ratio for [`AlgorithmKind::Rna`].
    pub ratio: f64,
    pub pes: usize,
    pub particles_per_pe: usize,
    pub frames: usize,
    pub snr: f64,
    pub seed: u64,
    pub replicates: usize,
    pub cutoff: f64,
    pub backend: Backend,
    /// Per-particle jitter of one dynamics-noise step at initialization.
    pub jitter: bool,
    /// Velocity bound for the uniform initialization in info-sharing mode.
    pub v_max: f64,
    /// Process noise assumed by the filter.
    pub filter: DynamicsParams,
    pub scene: SceneModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Tracking,
            algo: AlgorithmKind::Arna,
            ratio: 0.1,
            pes: 24,
            particles_per_pe: 40,
            frames: 50,
            snr: 2.0,
            seed: 0,
            replicates: 10,
            cutoff: ExchangePolicy::DEFAULT_CUTOFF,
            backend: Backend::Sequential,
            jitter: true,
            v_max: 2.0,
            filter: DynamicsParams {
                sigma_pos: 0.02,
                sigma_vel: 0.01,
                sigma_i: 0.2,
                dt: 1.0,
            },
            scene: SceneModel::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.pes == 0 {
            return Err(BenchError::Config("pes must be >= 1".into()));
        }
        if self.particles_per_pe == 0 {
            return Err(BenchError::Config("particles_per_pe must be >= 1".into()));
        }
        if self.frames < 2 {
            return Err(BenchError::Config("frames must be >= 2 (frame 0 initializes the filter)".into()));
        }
        if !(self.v_max.is_finite() && self.v_max >= 0.0) {
            return Err(BenchError::Config(format!("v_max must be >= 0, got {}", self.v_max)));
        }
        self.filter.validate()?;
        self.scene.dynamics.validate()?;
        self.scene.observation.validate()?;
        if let Some(policy) = self.policy() {
            policy.validate()?;
        }
        Ok(())
    }

    pub fn policy(&self) -> Option<ExchangePolicy> {
        match self.algo {
            AlgorithmKind::Rna => Some(ExchangePolicy::Fixed { ratio: self.ratio }),
            AlgorithmKind::Arna => Some(ExchangePolicy::Adaptive { cutoff: self.cutoff }),
            AlgorithmKind::SirIndependent => None,
        }
    }

    pub fn label(&self) -> String {
        match self.algo {
            AlgorithmKind::Rna => format!("rna{}", (self.ratio * 100.0).round() as i64),
            AlgorithmKind::Arna => "arna".into(),
            AlgorithmKind::SirIndependent => "sir".into(),
        }
    }

    pub fn scene_config(&self) -> SceneConfig {
        SceneConfig {
            frames: self.frames,
            snr: self.snr,
            speed_min: self.scene.speed_min,
            speed_max: self.scene.speed_max,
            dynamics: self.scene.dynamics,
            observation: self.scene.observation,
            render: self.scene.render,
        }
    }

    pub fn model(&self) -> FilterModel {
        FilterModel {
            dynamics: self.filter,
            observation: self.scene.observation,
        }
    }

    pub fn total_particles(&self) -> usize {
        self.pes * self.particles_per_pe
    }

    /// `pe_eff` assumed before the first iteration.
    pub fn initial_reduction(&self) -> GlobalReduction {
        match self.mode {
            Mode::Tracking => GlobalReduction::initial(self.pes as f64),
            Mode::InfoSharing => GlobalReduction::initial(1.0),
        }
    }
}

/// Seeds for one replicate: the scene seed depends only on the base seed and
/// replicate index, so every algorithm arm sees the same scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicateSeeds {
    pub replicate: usize,
    pub scene: u64,
    pub filter: u64,
}

impl ReplicateSeeds {
    pub fn new(base: u64, replicate: usize) -> Self {
        let scene = derive_seed(base, replicate as u64);
        Self {
            replicate,
            scene,
            filter: derive_seed(scene, u64::MAX),
        }
    }
}

/// One row per filter iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRow {
    /// Number of completed iterations; iteration `k` processed frame `k`.
    pub iteration: usize,
    pub pe_eff: f64,
    pub pe_eff_frac: f64,
    pub err_px: f64,
    pub exchanged: u64,
    pub messages: u64,
    pub bytes: u64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run_id: String,
    pub replicate: usize,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub rows: Vec<IterationRow>,
    /// Global estimate per processed frame (frames `1..K`).
    pub estimates: Vec<StateVector>,
    pub rmse: f64,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn total_exchanged(&self) -> u64 {
        self.rows.iter().map(|r| r.exchanged).sum()
    }

    pub fn total_messages(&self) -> u64 {
        self.rows.iter().map(|r| r.messages).sum()
    }

    pub fn total_bytes(&self) -> u64 {
        self.rows.iter().map(|r| r.bytes).sum()
    }

    pub fn diverged_iterations(&self) -> usize {
        self.rows.iter().filter(|r| r.diverged).count()
    }

    /// `pe_eff / M` after `iteration` completed iterations.
    pub fn pe_eff_frac_at(&self, iteration: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.iteration == iteration).map(|r| r.pe_eff_frac)
    }
}

/// Scenes for every replicate of `cfg`, generated in parallel.
pub fn generate_scenes(cfg: &ScenarioConfig) -> Result<Vec<Scene>, BenchError> {
    cfg.validate()?;
    let scene_cfg = cfg.scene_config();
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| Ok(generate_scene(&scene_cfg, ReplicateSeeds::new(cfg.seed, r).scene)?))
        .collect()
}

/// Generates the scenes and runs every replicate.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<RunRecord>, BenchError> {
    let scenes = generate_scenes(cfg)?;
    run_on_scenes(cfg, &scenes)
}

/// Runs `cfg` on pre-generated scenes (one per replicate), so several
/// algorithm arms can be compared on identical data.
pub fn run_on_scenes(cfg: &ScenarioConfig, scenes: &[Scene]) -> Result<Vec<RunRecord>, BenchError> {
    cfg.validate()?;
    if scenes.len() < cfg.replicates {
        return Err(BenchError::Config(format!(
            "{} scenes for {} replicates",
            scenes.len(),
            cfg.replicates
        )));
    }
    (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, &scenes[r], ReplicateSeeds::new(cfg.seed, r)))
        .collect()
}

/// Runs a single replicate of `cfg` on `scene`.
pub fn run_replicate(cfg: &ScenarioConfig, scene: &Scene, seeds: ReplicateSeeds) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    if scene.frames.len() < 2 {
        return Err(BenchError::Config("scene needs at least two frames".into()));
    }
    let started = Instant::now();
    let pes = match cfg.mode {
        Mode::Tracking => init_tracking(cfg, scene, seeds.filter),
        Mode::InfoSharing => init_info_sharing(cfg, scene, seeds.filter)?,
    };
    let frames = &scene.frames[1..];
    let m = cfg.pes as f64;
    let mut rows = Vec::with_capacity(frames.len());
    let mut estimates = Vec::with_capacity(frames.len());
    match cfg.policy() {
        Some(policy) => {
            let plan = RunPlan {
                policy,
                model: cfg.model(),
                initial: cfg.initial_reduction(),
                coordinator_seed: seeds.filter,
            };
            let run = run_distributed(cfg.backend, pes, frames, &plan)?;
            for (k, it) in run.iterations.iter().enumerate() {
                let estimate = it.reduction.global_estimate;
                rows.push(IterationRow {
                    iteration: k + 1,
                    pe_eff: it.reduction.pe_eff,
                    pe_eff_frac: it.reduction.pe_eff / m,
                    err_px: estimate.position_error(scene.truth(k + 1)),
                    exchanged: it.traffic.particles,
                    messages: it.traffic.messages,
                    bytes: it.traffic.bytes,
                    diverged: it.diverged,
                });
                estimates.push(estimate);
            }
        }
        None => {
            let ensembles = pes
                .into_iter()
                .map(|pe| WeightedEnsemble::uniform(pe.states().copied().collect()))
                .collect();
            run_independent_sir(cfg, ensembles, scene, seeds, &mut rows, &mut estimates)?;
        }
    }
    let rmse = rmse(&estimates, &scene.trajectory.states[1..])?;
    Ok(RunRecord {
        run_id: format!("{}-r{}", cfg.label(), seeds.replicate),
        replicate: seeds.replicate,
        seed: seeds.scene,
        config: *cfg,
        rows,
        estimates,
        rmse,
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

/// `M` SIR filters without communication. Each filter's accumulated evidence
/// plays the role of the PE weight sum in the reduction.
fn run_independent_sir(
    cfg: &ScenarioConfig,
    mut ensembles: Vec<WeightedEnsemble>,
    scene: &Scene,
    seeds: ReplicateSeeds,
    rows: &mut Vec<IterationRow>,
    estimates: &mut Vec<StateVector>,
) -> Result<(), BenchError> {
    let model = cfg.model();
    let n_thresh = cfg.particles_per_pe as f64 / 2.0;
    let mut rngs: Vec<_> = (0..cfg.pes).map(|m| pe_stream(seeds.filter, m)).collect();
    let mut log_sums = vec![-(cfg.total_particles() as f64).ln() + (cfg.particles_per_pe as f64).ln(); cfg.pes];
    let mut previous = cfg.initial_reduction();
    for (k, frame) in scene.frames.iter().enumerate().skip(1) {
        let mut local = Vec::with_capacity(cfg.pes);
        let mut diverged = false;
        for ((e, rng), log_sum) in ensembles.iter_mut().zip(rngs.iter_mut()).zip(log_sums.iter_mut()) {
            match sir_step(e, frame, &model.dynamics, &model.observation, n_thresh, rng) {
                Ok(step) => {
                    *log_sum += step.log_evidence - previous.log_total_weight;
                    local.push(step.estimate);
                    *e = step.ensemble;
                }
                Err(ResampleError::Divergence) => {
                    *log_sum = f64::NEG_INFINITY;
                    *e = WeightedEnsemble::uniform(e.states().to_vec());
                    local.push(crate::resample::estimate(e));
                    diverged = true;
                }
                Err(other) => return Err(other.into()),
            }
        }
        let reduction = match master_reduce_log(&local, &log_sums) {
            Ok(r) => r,
            Err(DpfError::Divergence) => {
                log_sums.iter_mut().for_each(|l| *l = 0.0);
                GlobalReduction {
                    global_estimate: crate::resample::weighted_mean(&local, &vec![1.0 / local.len() as f64; local.len()]),
                    log_total_weight: 0.0,
                    pe_eff: previous.pe_eff,
                }
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(IterationRow {
            iteration: k,
            pe_eff: reduction.pe_eff,
            pe_eff_frac: reduction.pe_eff / cfg.pes as f64,
            err_px: reduction.global_estimate.position_error(scene.truth(k)),
            exchanged: 0,
            messages: 0,
            bytes: 0,
            diverged,
        });
        estimates.push(reduction.global_estimate);
        previous = reduction;
    }
    Ok(())
}
