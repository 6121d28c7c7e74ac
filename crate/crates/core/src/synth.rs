//! Synthetic benchmark data: ground-truth trajectories under the
//! nearly-constant-velocity model and Poisson-noisy frames of a Gaussian spot.
//!
//! # Scene file layout
//!
//! Little-endian binary, written by [`write_scene`] and read by [`read_scene`]:
//!
//! ```text
//! offset  size        field
//! 0       8           magic "ARNASCN1"
//! 8       4  u32      width
//! 12      4  u32      height
//! 16      4  u32      frame count K
//! 20      8  f64      snr
//! 28      8  u64      seed
//! 36      K*5*8 f64   trajectory, per frame: x, y, vx, vy, i0
//! ...     K*W*H*8 f64 frames, per frame row-major pixel counts
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{derive_seed, stream, SimRng, SCENE_STREAM};
use crate::statemodel::{expected_intensity, propagate, DynamicsParams, Frame, ModelError, ObservationParams, StateVector};

pub const SCENE_MAGIC: &[u8; 8] = b"ARNASCN1";

/// Stream id used for per-frame rendering streams.
const FRAME_STREAM: u64 = SCENE_STREAM + 16;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("initial state ({x}, {y}) lies outside the allowed band [{lo}, {hi_x}] x [{lo}, {hi_y}]")]
    InitOutOfBounds { x: f64, y: f64, lo: f64, hi_x: f64, hi_y: f64 },
    #[error("frame count must be at least 1")]
    NoFrames,
    #[error("snr must be > 0, got {0}")]
    InvalidSnr(f64),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scene file: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<StateVector>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub trajectory: Trajectory,
    pub frames: Vec<Frame>,
    pub snr: f64,
    pub seed: u64,
}

impl Scene {
    pub fn width(&self) -> usize {
        self.frames.first().map_or(0, Frame::width)
    }

    pub fn height(&self) -> usize {
        self.frames.first().map_or(0, Frame::height)
    }

    pub fn truth(&self, k: usize) -> &StateVector {
        &self.trajectory.states[k]
    }
}

/// Whether frames carry Poisson noise or the exact expected counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderMode {
    #[default]
    Poisson,
    NoiseFree,
}

/// Border band for trajectories: spots stay `3 * sigma_psf` inside the frame.
pub fn margin(o: &ObservationParams) -> f64 {
    3.0 * o.sigma_psf
}

/// Generates `k` states starting at `init`, reflecting the velocity whenever a
/// position would leave `[margin, dim - margin]`.
pub fn generate_trajectory<R: Rng + ?Sized>(
    k: usize,
    init: StateVector,
    p: &DynamicsParams,
    o: &ObservationParams,
    rng: &mut R,
) -> Result<Trajectory, SynthError> {
    if k == 0 {
        return Err(SynthError::NoFrames);
    }
    p.validate()?;
    let lo = margin(o);
    let (hi_x, hi_y) = (o.width as f64 - lo, o.height as f64 - lo);
    if !(init.x >= lo && init.x <= hi_x && init.y >= lo && init.y <= hi_y) {
        return Err(SynthError::InitOutOfBounds {
            x: init.x,
            y: init.y,
            lo,
            hi_x,
            hi_y,
        });
    }
    let mut states = Vec::with_capacity(k);
    states.push(init);
    for _ in 1..k {
        let mut s = propagate(states.last().unwrap(), p, rng);
        reflect(&mut s.x, &mut s.vx, lo, hi_x);
        reflect(&mut s.y, &mut s.vy, lo, hi_y);
        states.push(s);
    }
    Ok(Trajectory { states })
}

fn reflect(pos: &mut f64, vel: &mut f64, lo: f64, hi: f64) {
    if *pos > hi {
        *pos = 2.0 * hi - *pos;
        *vel = -vel.abs();
    } else if *pos < lo {
        *pos = 2.0 * lo - *pos;
        *vel = vel.abs();
    }
    *pos = pos.clamp(lo, hi);
}

/// Peak intensity giving `snr = i0 / sqrt(i0 + background)`.
pub fn snr_to_intensity(snr: f64, background: f64) -> Result<f64, SynthError> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(SynthError::InvalidSnr(snr));
    }
    let s2 = snr * snr;
    Ok(0.5 * (s2 + (s2 * s2 + 4.0 * s2 * background).sqrt()))
}

/// Renders one frame of a single spot at `truth`.
pub fn render_frame<R: Rng + ?Sized>(
    truth: &StateVector,
    o: &ObservationParams,
    mode: RenderMode,
    rng: &mut R,
) -> Result<Frame, SynthError> {
    o.validate()?;
    // Away from the spot the mean is exactly the background, so the sampler is reused.
    let mut cached: Option<(f64, Poisson<f64>)> = None;
    let frame = Frame::from_fn(o.width, o.height, |u, v| {
        let mean = expected_intensity(truth, o, u as f64, v as f64);
        match mode {
            RenderMode::NoiseFree => mean,
            RenderMode::Poisson if mean > 0.0 => {
                if cached.as_ref().is_none_or(|(m, _)| *m != mean) {
                    cached = Poisson::new(mean).ok().map(|d| (mean, d));
                }
                cached.as_ref().map_or(0.0, |(_, d)| d.sample(rng))
            }
            RenderMode::Poisson => 0.0,
        }
    })?;
    Ok(frame)
}

/// Settings for a full synthetic sequence.
///
/// The defaults are the benchmark's choices for quantities the original
/// sequences leave unstated: objects move at 0.5 to 1.5 px/frame in a
/// uniformly random direction with small velocity diffusion, start far enough
/// from the border that the straight path stays inside the frame, and keep a
/// constant peak intensity set by the SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub frames: usize,
    pub snr: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub dynamics: DynamicsParams,
    pub observation: ObservationParams,
    pub render: RenderMode,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            frames: 50,
            snr: 2.0,
            speed_min: 0.5,
            speed_max: 1.5,
            dynamics: DynamicsParams {
                sigma_pos: 0.02,
                sigma_vel: 0.01,
                sigma_i: 0.0,
                dt: 1.0,
            },
            observation: ObservationParams::default(),
            render: RenderMode::Poisson,
        }
    }
}

/// Distance from each border inside which the start position is drawn. When
/// the frame allows it, the straight path at `speed_max` never reaches the
/// reflection margin, otherwise the start collapses towards the centre.
fn start_inset(cfg: &SceneConfig) -> (f64, f64) {
    let o = &cfg.observation;
    let want = margin(o) + cfg.speed_max * cfg.frames.saturating_sub(1) as f64;
    let fit = |dim: usize| want.max(margin(o)).min(dim as f64 / 2.0);
    (fit(o.width), fit(o.height))
}

/// Draws the initial object state for a scene.
pub fn initial_state(cfg: &SceneConfig, rng: &mut SimRng) -> Result<StateVector, SynthError> {
    let o = &cfg.observation;
    let lo = start_inset(cfg);
    let x = rng.random_range(lo.0..=o.width as f64 - lo.0);
    let y = rng.random_range(lo.1..=o.height as f64 - lo.1);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let speed = if cfg.speed_max > cfg.speed_min {
        rng.random_range(cfg.speed_min..cfg.speed_max)
    } else {
        cfg.speed_min
    };
    let i0 = snr_to_intensity(cfg.snr, o.background)?;
    Ok(StateVector::new(x, y, speed * angle.cos(), speed * angle.sin(), i0))
}

/// Generates a complete scene. Same `(cfg, seed)` gives a bitwise-identical scene.
pub fn generate_scene(cfg: &SceneConfig, seed: u64) -> Result<Scene, SynthError> {
    cfg.observation.validate()?;
    let mut rng = stream(seed, SCENE_STREAM);
    let init = initial_state(cfg, &mut rng)?;
    let trajectory = generate_trajectory(cfg.frames, init, &cfg.dynamics, &cfg.observation, &mut rng)?;
    let frames = trajectory
        .states
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            let mut frame_rng = stream(derive_seed(seed, k as u64), FRAME_STREAM);
            render_frame(s, &cfg.observation, cfg.render, &mut frame_rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Scene {
        trajectory,
        frames,
        snr: cfg.snr,
        seed,
    })
}

pub fn write_scene_to<W: Write>(scene: &Scene, mut w: W) -> std::io::Result<()> {
    w.write_all(SCENE_MAGIC)?;
    w.write_all(&(scene.width() as u32).to_le_bytes())?;
    w.write_all(&(scene.height() as u32).to_le_bytes())?;
    w.write_all(&(scene.frames.len() as u32).to_le_bytes())?;
    w.write_all(&scene.snr.to_le_bytes())?;
    w.write_all(&scene.seed.to_le_bytes())?;
    for s in &scene.trajectory.states {
        for c in s.to_array() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    for f in &scene.frames {
        for z in f.pixels() {
            w.write_all(&z.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn write_scene(scene: &Scene, path: &Path) -> Result<(), SynthError> {
    let io = |source| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = File::create(path).map_err(io)?;
    write_scene_to(scene, BufWriter::new(file)).map_err(io)
}

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N], SynthError> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)
        .map_err(|e| SynthError::Format(format!("truncated scene data: {e}")))?;
    Ok(buf)
}

pub fn read_scene_from<R: Read>(mut r: R) -> Result<Scene, SynthError> {
    let magic: [u8; 8] = read_array(&mut r)?;
    if &magic != SCENE_MAGIC {
        return Err(SynthError::Format("bad magic".into()));
    }
    let width = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let height = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let k = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let snr = f64::from_le_bytes(read_array(&mut r)?);
    let seed = u64::from_le_bytes(read_array(&mut r)?);
    let mut states = Vec::with_capacity(k);
    for _ in 0..k {
        let mut a = [0.0; 5];
        for c in a.iter_mut() {
            *c = f64::from_le_bytes(read_array(&mut r)?);
        }
        states.push(StateVector::from_array(a));
    }
    let mut frames = Vec::with_capacity(k);
    for _ in 0..k {
        let mut bytes = vec![0u8; width * height * 8];
        r.read_exact(&mut bytes)
            .map_err(|e| SynthError::Format(format!("truncated frame data: {e}")))?;
        let pixels = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        frames.push(Frame::new(width, height, pixels)?);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| SynthError::Format(e.to_string()))? != 0 {
        return Err(SynthError::Format("trailing bytes after last frame".into()));
    }
    Ok(Scene {
        trajectory: Trajectory { states },
        frames,
        snr,
        seed,
    })
}

pub fn read_scene(path: &Path) -> Result<Scene, SynthError> {
    let file = File::open(path).map_err(|source| SynthError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_scene_from(BufReader::new(file))
}
