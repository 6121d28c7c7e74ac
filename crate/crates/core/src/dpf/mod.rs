//! Distributed particle filtering over a ring of processing elements.
//!
//! Each PE owns `N_p` particles. One iteration:
//!
//! 1. agree on a ring and an exchange count `N_ex` (from the previous broadcast),
//! 2. send `N_ex` random particles to the ring successor, receive as many from
//!    the predecessor,
//! 3. divide the carried weights by the previous global weight `W_{k-1}`,
//!    propagate, weight by the frame likelihood, estimate, resample locally and
//!    set every particle weight to the PE's weight sum `W_k^(m)`,
//! 4. reduce estimates and weight sums at the coordinator and broadcast.
//!
//! RNA uses the identity ring and a fixed exchange ratio. ARNA draws a
//! Fisher-Yates ring per iteration and sets `N_ex` from the effective number
//! of PEs carrying weight mass ([`pe_eff`]).
//!
//! Weights are carried as natural logarithms: a whole-frame likelihood is far
//! below the smallest positive `f64`, so only log weights and max-shifted sums
//! are ever formed.

mod backend;
mod exchange;
mod iteration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::resample::ResampleError;
use crate::statemodel::{ModelError, StateVector};
use crate::topology::TopologyError;

pub use backend::{run_distributed, Backend, DistributedRun, RunPlan};
pub use exchange::{exchange_step, select_outgoing};
pub use iteration::{
    arna_iteration, iterate, rna_iteration, Directive, FilterModel, IterationOutcome, LocalReport,
};

/// Wire footprint of one particle: five state components and the weight as
/// 8-byte reals plus a 4-byte owner id.
pub const PARTICLE_WIRE_BYTES: u64 = 6 * 8 + 4;

/// Slack applied before flooring exchange counts so that products like
/// `0.1 * 40` that land a rounding error below an integer are not truncated.
const FLOOR_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DpfError {
    #[error("filter diverged: every PE reports zero weight")]
    Divergence,
    #[error("cannot send {requested} particles from an ensemble of {available}")]
    ExchangeTooLarge { requested: usize, available: usize },
    #[error("PE {pe} holds {actual} particles, expected {expected}")]
    Conservation { pe: usize, actual: usize, expected: usize },
    #[error("no PEs")]
    NoPes,
    #[error("invalid exchange policy: {0}")]
    Policy(String),
    #[error("local estimates ({estimates}) and weight sums ({sums}) differ in length")]
    LengthMismatch { estimates: usize, sums: usize },
    #[error("worker failure: {0}")]
    Worker(String),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
}

/// One particle as it travels between PEs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub state: StateVector,
    pub log_weight: f64,
    /// PE the particle was last resampled on.
    pub owner: u32,
}

/// Per-PE filter state. Owned exclusively by one worker.
#[derive(Debug, Clone)]
pub struct PeState {
    pub id: usize,
    pub particles: Vec<Particle>,
    /// `ln W_k^(m)`, the log of the PE's unnormalized weight sum.
    pub log_weight_sum: f64,
    pub local_estimate: StateVector,
    pub rng: crate::rng::SimRng,
}

impl PeState {
    /// A PE holding `states`, each with log weight `log_weight`.
    pub fn new(id: usize, states: Vec<StateVector>, log_weight: f64, rng: crate::rng::SimRng) -> Self {
        let n = states.len();
        let local_estimate = crate::resample::weighted_mean(&states, &vec![1.0 / n.max(1) as f64; n]);
        let particles = states
            .into_iter()
            .map(|state| Particle {
                state,
                log_weight,
                owner: id as u32,
            })
            .collect();
        Self {
            id,
            particles,
            log_weight_sum: log_weight + (n as f64).ln(),
            local_estimate,
            rng,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &StateVector> + '_ {
        self.particles.iter().map(|p| &p.state)
    }

    /// `W_k^(m)` in linear scale; underflows to zero for whole-frame likelihoods.
    pub fn local_weight_sum(&self) -> f64 {
        self.log_weight_sum.exp()
    }

    /// Hash of every particle's bits, for trajectory comparisons.
    pub fn digest(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for p in &self.particles {
            for c in p.state.to_array() {
                c.to_bits().hash(&mut h);
            }
            p.log_weight.to_bits().hash(&mut h);
            p.owner.hash(&mut h);
        }
        self.log_weight_sum.to_bits().hash(&mut h);
        h.finish()
    }
}

/// How many particles each PE ships per iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ExchangePolicy {
    /// RNA: `floor(ratio * N_p)` on the identity ring.
    Fixed { ratio: f64 },
    /// ARNA: count from the previous `pe_eff` on a shuffled ring; zero once
    /// `pe_eff / M` exceeds `cutoff`.
    Adaptive { cutoff: f64 },
}

impl ExchangePolicy {
    pub const DEFAULT_CUTOFF: f64 = 0.99;

    pub fn validate(&self) -> Result<(), DpfError> {
        match *self {
            ExchangePolicy::Fixed { ratio } if !(0.0..=0.5).contains(&ratio) => {
                Err(DpfError::Policy(format!("fixed ratio {ratio} outside [0, 0.5]")))
            }
            ExchangePolicy::Adaptive { cutoff } if !(cutoff > 0.0 && cutoff <= 1.0) => {
                Err(DpfError::Policy(format!("cutoff {cutoff} outside (0, 1]")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_adaptive(&self) -> bool {
        matches!(self, ExchangePolicy::Adaptive { .. })
    }

    /// Exchange count for the coming iteration given the last broadcast.
    pub fn exchange_count(&self, n_p: usize, m: usize, previous: &GlobalReduction) -> usize {
        match *self {
            ExchangePolicy::Fixed { ratio } => fixed_exchange_count(n_p, ratio),
            ExchangePolicy::Adaptive { cutoff } => adaptive_exchange_count(n_p, previous.pe_eff, m, cutoff),
        }
    }
}

/// What the coordinator broadcasts at the end of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalReduction {
    pub global_estimate: StateVector,
    /// `ln W_k`, the log of the summed PE weights.
    pub log_total_weight: f64,
    pub pe_eff: f64,
}

impl GlobalReduction {
    /// State before the first iteration: `W_0 = 1` and the given `pe_eff`.
    pub fn initial(pe_eff: f64) -> Self {
        Self {
            global_estimate: StateVector::default(),
            log_total_weight: 0.0,
            pe_eff,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.log_total_weight.exp()
    }
}

/// Payload accounting for particle messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Traffic {
    pub messages: u64,
    pub particles: u64,
    pub bytes: u64,
}

impl Traffic {
    pub fn record_message(&mut self, particles: usize) {
        self.messages += 1;
        self.particles += particles as u64;
        self.bytes += particles as u64 * PARTICLE_WIRE_BYTES;
    }
}

impl std::ops::AddAssign for Traffic {
    fn add_assign(&mut self, rhs: Self) {
        self.messages += rhs.messages;
        self.particles += rhs.particles;
        self.bytes += rhs.bytes;
    }
}

/// Effective number of PEs, `(Σ W_m)² / Σ W_m²`, from linear weight sums.
pub fn pe_eff(per_pe_weight_sums: &[f64]) -> Result<f64, DpfError> {
    let logs: Vec<f64> = per_pe_weight_sums.iter().map(|w| w.ln()).collect();
    pe_eff_from_log(&logs)
}

/// [`pe_eff`] from log weight sums; the result is clamped to `[1, M]`.
pub fn pe_eff_from_log(log_sums: &[f64]) -> Result<f64, DpfError> {
    let shifted = shifted_weights(log_sums).ok_or(DpfError::Divergence)?;
    let total: f64 = shifted.iter().sum();
    let squares: f64 = shifted.iter().map(|w| w * w).sum();
    Ok((total * total / squares).clamp(1.0, log_sums.len() as f64))
}

/// `exp(l - max l)`, or `None` when every entry is zero weight.
fn shifted_weights(log_sums: &[f64]) -> Option<Vec<f64>> {
    let max = log_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    Some(log_sums.iter().map(|l| (l - max).exp()).collect())
}

pub fn fixed_exchange_count(n_p: usize, ratio: f64) -> usize {
    ((n_p as f64 * ratio + FLOOR_SLACK).floor().max(0.0) as usize).min(n_p)
}

/// `floor(N_p [0.5 - 0.5 (pe_eff - 1) / (M - 1)])`, or zero when
/// `pe_eff / M > cutoff` or `M = 1`.
pub fn adaptive_exchange_count(n_p: usize, pe_eff: f64, m: usize, cutoff: f64) -> usize {
    if m <= 1 || pe_eff / m as f64 > cutoff {
        return 0;
    }
    let ratio = (0.5 - 0.5 * (pe_eff - 1.0) / (m as f64 - 1.0)).clamp(0.0, 0.5);
    fixed_exchange_count(n_p, ratio)
}

/// Coordinator reduction from linear weight sums.
pub fn master_reduce(local_estimates: &[StateVector], local_weight_sums: &[f64]) -> Result<GlobalReduction, DpfError> {
    let logs: Vec<f64> = local_weight_sums.iter().map(|w| w.ln()).collect();
    master_reduce_log(local_estimates, &logs)
}

/// Coordinator reduction: `W = Σ W_m`, `x̂ = Σ W_m x̂_m / W`, and `pe_eff`.
pub fn master_reduce_log(local_estimates: &[StateVector], log_weight_sums: &[f64]) -> Result<GlobalReduction, DpfError> {
    if local_estimates.len() != log_weight_sums.len() {
        return Err(DpfError::LengthMismatch {
            estimates: local_estimates.len(),
            sums: log_weight_sums.len(),
        });
    }
    if local_estimates.is_empty() {
        return Err(DpfError::NoPes);
    }
    let max = log_weight_sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted = shifted_weights(log_weight_sums).ok_or(DpfError::Divergence)?;
    let total: f64 = shifted.iter().sum();
    let normalized: Vec<f64> = shifted.iter().map(|w| w / total).collect();
    Ok(GlobalReduction {
        global_estimate: crate::resample::weighted_mean(local_estimates, &normalized),
        log_total_weight: max + total.ln(),
        pe_eff: pe_eff_from_log(log_weight_sums)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pe_eff_examples() {
        assert!((pe_eff(&[1.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!((pe_eff(&[1.0, 0.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((pe_eff(&[0.5, 0.5, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(pe_eff(&[0.0; 3]), Err(DpfError::Divergence));
        let logs = [-1e6, -1e6 + 2f64.ln()];
        let expected = 9.0 / 5.0;
        assert!((pe_eff_from_log(&logs).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn exchange_count_examples() {
        assert_eq!(adaptive_exchange_count(40, 1.0, 24, 0.99), 20);
        assert_eq!(adaptive_exchange_count(40, 24.0, 24, 0.99), 0);
        assert_eq!(adaptive_exchange_count(40, 12.5, 24, 0.99), 10);
        assert_eq!(adaptive_exchange_count(40, 1.0, 1, 0.99), 0);
        assert_eq!(adaptive_exchange_count(40, 24.0, 24, 1.0), 0);
        assert_eq!(fixed_exchange_count(40, 0.1), 4);
        assert_eq!(fixed_exchange_count(40, 0.5), 20);
        assert_eq!(fixed_exchange_count(40, 0.0), 0);
    }

    #[test]
    fn policy_validation() {
        assert!(ExchangePolicy::Fixed { ratio: 0.6 }.validate().is_err());
        assert!(ExchangePolicy::Fixed { ratio: 0.5 }.validate().is_ok());
        assert!(ExchangePolicy::Adaptive { cutoff: 0.0 }.validate().is_err());
        assert!(ExchangePolicy::Adaptive { cutoff: 1.0 }.validate().is_ok());
    }

    #[test]
    fn reduce_examples() {
        let xs = |v: &[f64]| v.iter().map(|&x| StateVector::new(x, 0.0, 0.0, 0.0, 0.0)).collect::<Vec<_>>();
        let r = master_reduce(&xs(&[7.0, 1.0, 2.0]), &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(r.global_estimate.x, 7.0);
        assert!((r.total_weight() - 2.0).abs() < 1e-12);
        assert!((r.pe_eff - 1.0).abs() < 1e-12);
        let r = master_reduce(&xs(&[1.0, 2.0, 6.0]), &[0.3, 0.3, 0.3]).unwrap();
        assert!((r.global_estimate.x - 3.0).abs() < 1e-12);
        let r = master_reduce(&xs(&[0.0, 4.0]), &[3.0, 1.0]).unwrap();
        assert!((r.global_estimate.x - 1.0).abs() < 1e-12);
        assert!((r.total_weight() - 4.0).abs() < 1e-12);
        assert_eq!(master_reduce(&xs(&[0.0]), &[0.0]), Err(DpfError::Divergence));
        assert!(master_reduce(&xs(&[0.0]), &[1.0, 2.0]).is_err());
    }

    #[test]
    fn traffic_accounting() {
        let mut t = Traffic::default();
        t.record_message(4);
        t.record_message(0);
        assert_eq!(t, Traffic { messages: 2, particles: 4, bytes: 208 });
        assert_eq!(PARTICLE_WIRE_BYTES, 52);
    }

    proptest! {
        #[test]
        fn pe_eff_in_range(w in prop::collection::vec(0.0f64..10.0, 1..50)) {
            prop_assume!(w.iter().any(|&x| x > 0.0));
            let p = pe_eff(&w).unwrap();
            prop_assert!(p >= 1.0 && p <= w.len() as f64);
        }

        #[test]
        fn pe_eff_scale_and_permutation_invariant(w in prop::collection::vec(0.01f64..10.0, 2..30), scale in 0.001f64..1000.0) {
            let base = pe_eff(&w).unwrap();
            let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
            let mut rev = w.clone();
            rev.reverse();
            prop_assert!((pe_eff(&scaled).unwrap() - base).abs() < 1e-9 * base);
            prop_assert!((pe_eff(&rev).unwrap() - base).abs() < 1e-9 * base);
        }

        #[test]
        fn pe_eff_full_iff_equal(v in 0.01f64..10.0, m in 1usize..40) {
            prop_assert_eq!(pe_eff(&vec![v; m]).unwrap(), m as f64);
        }

        #[test]
        fn adaptive_count_is_nonincreasing(n_p in 1usize..500, m in 2usize..400, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let to_pe = |f: f64| 1.0 + f * (m as f64 - 1.0);
            let c_lo = adaptive_exchange_count(n_p, to_pe(lo), m, 0.99);
            let c_hi = adaptive_exchange_count(n_p, to_pe(hi), m, 0.99);
            prop_assert!(c_hi <= c_lo);
            prop_assert!(2 * c_lo <= n_p);
        }
    }
}
