//! Object state, nearly-constant-velocity dynamics and the Gaussian-spot
//! Poisson observation model.

use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Penalty (nats) applied below the all-background likelihood for a state
/// whose evaluation window misses the frame entirely.
pub const OUT_OF_FRAME_PENALTY: f64 = 50.0;

/// Smallest Poisson rate used inside the likelihood; keeps `ln λ` finite
/// for a zero background.
const MIN_RATE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid dynamics parameters: {0}")]
    Dynamics(String),
    #[error("invalid observation parameters: {0}")]
    Observation(String),
    #[error("invalid frame: {0}")]
    Frame(String),
}

/// Position (pixels), velocity (pixels/frame) and peak intensity above
/// background (photon counts).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
    pub i0: f64,
}

impl StateVector {
    pub const DIM: usize = 5;

    pub const fn new(x: f64, y: f64, vx: f64, vy: f64, i0: f64) -> Self {
        Self { x, y, vx, vy, i0 }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.y, self.vx, self.vy, self.i0]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    /// Euclidean distance between the positions of two states.
    pub fn position_error(&self, other: &StateVector) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DynamicsParams {
    pub sigma_pos: f64,
    pub sigma_vel: f64,
    pub sigma_i: f64,
    pub dt: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self {
            sigma_pos: 0.5,
            sigma_vel: 0.2,
            sigma_i: 2.0,
            dt: 1.0,
        }
    }
}

impl DynamicsParams {
    /// Noise-free constant-velocity advection.
    pub fn deterministic() -> Self {
        Self {
            sigma_pos: 0.0,
            sigma_vel: 0.0,
            sigma_i: 0.0,
            dt: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let sigmas = [self.sigma_pos, self.sigma_vel, self.sigma_i];
        if sigmas.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(ModelError::Dynamics(format!(
                "noise standard deviations must be finite and >= 0, got {sigmas:?}"
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(ModelError::Dynamics(format!("dt must be > 0, got {}", self.dt)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservationParams {
    pub sigma_psf: f64,
    pub background: f64,
    pub roi_radius: usize,
    pub width: usize,
    pub height: usize,
}

impl Default for ObservationParams {
    fn default() -> Self {
        Self {
            sigma_psf: 1.5,
            background: 10.0,
            roi_radius: 5,
            width: 512,
            height: 512,
        }
    }
}

impl ObservationParams {
    pub fn with_size(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.sigma_psf.is_finite() && self.sigma_psf > 0.0) {
            return Err(ModelError::Observation(format!(
                "sigma_psf must be > 0, got {}",
                self.sigma_psf
            )));
        }
        if !(self.background.is_finite() && self.background >= 0.0) {
            return Err(ModelError::Observation(format!(
                "background must be >= 0, got {}",
                self.background
            )));
        }
        if (self.roi_radius as f64) < 3.0 * self.sigma_psf {
            return Err(ModelError::Observation(format!(
                "roi_radius {} is smaller than 3 * sigma_psf = {}",
                self.roi_radius,
                3.0 * self.sigma_psf
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(ModelError::Observation("frame dimensions must be nonzero".into()));
        }
        Ok(())
    }
}

/// A row-major grid of nonnegative photon counts.
///
/// Construction caches the count total and `Σ ln Γ(z+1)` so the
/// whole-frame background likelihood is O(1) per evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
    total_counts: f64,
    total_log_factorial: f64,
}

const LN_FACTORIAL_TABLE: usize = 256;

/// `ln(z!)`, from a table for small integer counts.
fn ln_factorial(z: f64) -> f64 {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    if z.fract() == 0.0 && z < LN_FACTORIAL_TABLE as f64 {
        let table = TABLE.get_or_init(|| (0..LN_FACTORIAL_TABLE).map(|n| ln_gamma(n as f64 + 1.0)).collect());
        table[z as usize]
    } else {
        ln_gamma(z + 1.0)
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self, ModelError> {
        if pixels.len() != width * height {
            return Err(ModelError::Frame(format!(
                "expected {} pixels for {width}x{height}, got {}",
                width * height,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|z| !z.is_finite() || **z < 0.0) {
            return Err(ModelError::Frame(format!("pixel count {bad} is not a finite nonnegative value")));
        }
        let total_counts = pixels.iter().sum();
        let total_log_factorial = pixels.iter().map(|&z| ln_factorial(z)).sum();
        Ok(Self {
            width,
            height,
            pixels,
            total_counts,
            total_log_factorial,
        })
    }

    /// Frame with `value` at every pixel.
    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self, ModelError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self, ModelError> {
        let mut pixels = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                pixels.push(f(u, v));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.pixels[v * self.width + u]
    }

    pub fn mean(&self) -> f64 {
        self.total_counts / self.pixels.len() as f64
    }

    /// Poisson log-likelihood of the whole frame under a constant rate.
    pub fn background_log_likelihood(&self, rate: f64) -> f64 {
        let rate = rate.max(MIN_RATE);
        self.total_counts * rate.ln() - self.pixels.len() as f64 * rate - self.total_log_factorial
    }
}

/// Advances one step of the nearly-constant-velocity model.
///
/// Always consumes five normal draws, in the order x, y, vx, vy, i0.
pub fn propagate<R: Rng + ?Sized>(s: &StateVector, p: &DynamicsParams, rng: &mut R) -> StateVector {
    let mut noise = [0.0f64; 5];
    for n in noise.iter_mut() {
        *n = rng.sample(StandardNormal);
    }
    StateVector {
        x: s.x + s.vx * p.dt + p.sigma_pos * noise[0],
        y: s.y + s.vy * p.dt + p.sigma_pos * noise[1],
        vx: s.vx + p.sigma_vel * noise[2],
        vy: s.vy + p.sigma_vel * noise[3],
        i0: (s.i0 + p.sigma_i * noise[4]).max(0.0),
    }
}

/// Adds zero-mean Gaussian noise with the dynamics sigmas, without advection.
pub fn jitter<R: Rng + ?Sized>(s: &StateVector, p: &DynamicsParams, rng: &mut R) -> StateVector {
    let mut noise = [0.0f64; 5];
    for n in noise.iter_mut() {
        *n = rng.sample(StandardNormal);
    }
    StateVector {
        x: s.x + p.sigma_pos * noise[0],
        y: s.y + p.sigma_pos * noise[1],
        vx: s.vx + p.sigma_vel * noise[2],
        vy: s.vy + p.sigma_vel * noise[3],
        i0: (s.i0 + p.sigma_i * noise[4]).max(0.0),
    }
}

/// Mean photon count at pixel `(u, v)` for a spot in state `s`.
pub fn expected_intensity(s: &StateVector, o: &ObservationParams, u: f64, v: f64) -> f64 {
    let d2 = (u - s.x).powi(2) + (v - s.y).powi(2);
    o.background + s.i0 * (-d2 / (2.0 * o.sigma_psf * o.sigma_psf)).exp()
}

/// Clipped evaluation window `[u0, u1) x [v0, v1)` around the rounded
/// position, or `None` when it misses the frame.
fn roi(s: &StateVector, o: &ObservationParams, f: &Frame) -> Option<(usize, usize, usize, usize)> {
    if !(s.x.is_finite() && s.y.is_finite()) {
        return None;
    }
    let r = o.roi_radius as i64;
    let cx = s.x.round() as i64;
    let cy = s.y.round() as i64;
    let u0 = (cx.saturating_sub(r)).max(0);
    let u1 = (cx.saturating_add(r + 1)).min(f.width as i64);
    let v0 = (cy.saturating_sub(r)).max(0);
    let v1 = (cy.saturating_add(r + 1)).min(f.height as i64);
    if u0 >= u1 || v0 >= v1 {
        return None;
    }
    Some((u0 as usize, u1 as usize, v0 as usize, v1 as usize))
}

/// Poisson log-likelihood of frame `f` given a single spot in state `s`.
///
/// The model rate is `expected_intensity` inside the square window of
/// half-width `roi_radius` around the rounded position and `background`
/// everywhere else, so the value is the whole-frame log-likelihood:
/// a cached all-background term plus the window's deviation from it.
/// States whose window misses the frame get the all-background value minus
/// [`OUT_OF_FRAME_PENALTY`].
pub fn log_likelihood(s: &StateVector, f: &Frame, o: &ObservationParams) -> f64 {
    let b = o.background.max(MIN_RATE);
    let base = f.background_log_likelihood(b);
    let Some((u0, u1, v0, v1)) = roi(s, o, f) else {
        return base - OUT_OF_FRAME_PENALTY;
    };
    let i0 = if s.i0.is_finite() { s.i0.max(0.0) } else { 0.0 };
    let inv = 1.0 / (2.0 * o.sigma_psf * o.sigma_psf);
    let mut gx = [0.0f64; 64];
    let mut gx_heap;
    let gx: &mut [f64] = if u1 - u0 <= gx.len() {
        &mut gx[..u1 - u0]
    } else {
        gx_heap = vec![0.0; u1 - u0];
        &mut gx_heap
    };
    for (k, g) in gx.iter_mut().enumerate() {
        let du = (u0 + k) as f64 - s.x;
        *g = (-du * du * inv).exp();
    }
    let mut delta = 0.0;
    for v in v0..v1 {
        let dv = v as f64 - s.y;
        let gy = i0 * (-dv * dv * inv).exp();
        let row = &f.pixels[v * f.width + u0..v * f.width + u1];
        for (z, g) in row.iter().zip(gx.iter()) {
            let signal = gy * g;
            delta += z * (signal / b).ln_1p() - signal;
        }
    }
    base + delta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn obs(w: usize, h: usize) -> ObservationParams {
        ObservationParams::default().with_size(w, h)
    }

    #[test]
    fn noise_free_advection() {
        let mut rng = stream(1, 0);
        let p = DynamicsParams::deterministic();
        let s = propagate(&StateVector::new(10.0, 10.0, 1.0, 0.0, 100.0), &p, &mut rng);
        assert_eq!(s, StateVector::new(11.0, 10.0, 1.0, 0.0, 100.0));
        let s = propagate(&StateVector::new(10.0, 10.0, 0.0, 0.0, 100.0), &p, &mut rng);
        assert_eq!(s, StateVector::new(10.0, 10.0, 0.0, 0.0, 100.0));
    }

    #[test]
    fn position_noise_moments() {
        let mut rng = stream(2, 0);
        let p = DynamicsParams {
            sigma_pos: 0.5,
            ..DynamicsParams::deterministic()
        };
        let n = 100_000;
        let s0 = StateVector::new(0.0, 0.0, 0.0, 0.0, 100.0);
        let xs: Vec<f64> = (0..n).map(|_| propagate(&s0, &p, &mut rng).x).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!(mean.abs() < 3.0 * 0.5 / (n as f64).sqrt(), "mean {mean}");
        assert!((sd - 0.5).abs() < 0.02 * 0.5, "sd {sd}");
    }

    #[test]
    fn intensity_is_clamped() {
        let mut rng = stream(3, 0);
        let p = DynamicsParams {
            sigma_i: 50.0,
            ..DynamicsParams::deterministic()
        };
        for _ in 0..1000 {
            assert!(propagate(&StateVector::new(0.0, 0.0, 0.0, 0.0, 1.0), &p, &mut rng).i0 >= 0.0);
        }
    }

    #[test]
    fn expected_intensity_profile() {
        let o = obs(32, 32);
        let s = StateVector::new(16.0, 16.0, 0.0, 0.0, 100.0);
        assert_eq!(expected_intensity(&s, &o, 16.0, 16.0), 110.0);
        let at_sigma = expected_intensity(&s, &o, 16.0 + o.sigma_psf, 16.0);
        assert!((at_sigma - (10.0 + 100.0 * (-0.5f64).exp())).abs() < 1e-12);
        assert!((at_sigma - 70.65).abs() < 0.01);
        let far = expected_intensity(&s, &o, 16.0 + 6.0 * o.sigma_psf, 16.0);
        assert!((far - 10.0).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(DynamicsParams::default().validate().is_ok());
        assert!(DynamicsParams { sigma_pos: -1.0, ..Default::default() }.validate().is_err());
        assert!(DynamicsParams { dt: 0.0, ..Default::default() }.validate().is_err());
        assert!(ObservationParams::default().validate().is_ok());
        assert!(ObservationParams { roi_radius: 4, ..Default::default() }.validate().is_err());
        assert!(ObservationParams { sigma_psf: 0.0, ..Default::default() }.validate().is_err());
        assert!(Frame::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Frame::new(1, 1, vec![-1.0]).is_err());
    }

    #[test]
    fn grid_scan_argmax_at_truth() {
        let o = obs(32, 32);
        let truth = StateVector::new(15.3, 16.6, 0.0, 0.0, 100.0);
        let frame = Frame::from_fn(32, 32, |u, v| expected_intensity(&truth, &o, u as f64, v as f64)).unwrap();
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for dx in [-2.0, 0.0, 2.0] {
            for dy in [-2.0, 0.0, 2.0] {
                let s = StateVector { x: truth.x + dx, y: truth.y + dy, ..truth };
                let ll = log_likelihood(&s, &frame, &o);
                if ll > best.0 {
                    best = (ll, dx, dy);
                }
            }
        }
        assert_eq!((best.1, best.2), (0.0, 0.0));
    }

    #[test]
    fn uniform_frame_translation_symmetry() {
        let o = obs(64, 64);
        let frame = Frame::uniform(64, 64, o.background).unwrap();
        let a = StateVector::new(20.3, 22.7, 0.0, 0.0, 50.0);
        let b = StateVector::new(41.3, 30.7, 0.0, 0.0, 50.0);
        let (la, lb) = (log_likelihood(&a, &frame, &o), log_likelihood(&b, &frame, &o));
        assert!((la - lb).abs() < 1e-9, "{la} vs {lb}");
    }

    #[test]
    fn zero_frame_is_minus_total_rate() {
        let o = obs(24, 24);
        let frame = Frame::uniform(24, 24, 0.0).unwrap();
        let s = StateVector::new(12.2, 11.6, 0.0, 0.0, 30.0);
        let mut total = 0.0;
        for v in 0..24 {
            for u in 0..24 {
                let inside = (u as i64 - 12).abs() <= 5 && (v as i64 - 12).abs() <= 5;
                total += if inside { expected_intensity(&s, &o, u as f64, v as f64) } else { o.background };
            }
        }
        let ll = log_likelihood(&s, &frame, &o);
        assert!(ll.is_finite() && ll < 0.0);
        assert!((ll + total).abs() < 1e-9 * total, "{ll} vs {}", -total);
    }

    #[test]
    fn out_of_frame_floor() {
        let o = obs(32, 32);
        let frame = Frame::uniform(32, 32, 12.0).unwrap();
        let outside = StateVector::new(-40.0, 10.0, 0.0, 0.0, 100.0);
        let ll = log_likelihood(&outside, &frame, &o);
        let bg = frame.background_log_likelihood(o.background);
        assert_eq!(ll, bg - OUT_OF_FRAME_PENALTY);
        let nan = StateVector::new(f64::NAN, 10.0, 0.0, 0.0, 100.0);
        assert!(log_likelihood(&nan, &frame, &o).is_finite());
    }

    #[test]
    fn zero_background_stays_finite() {
        let o = ObservationParams { background: 0.0, ..obs(16, 16) };
        let frame = Frame::uniform(16, 16, 3.0).unwrap();
        let s = StateVector::new(8.0, 8.0, 0.0, 0.0, 5.0);
        let ll = log_likelihood(&s, &frame, &o);
        assert!(ll.is_finite());
    }
}
