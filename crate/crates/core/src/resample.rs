//! Weighted-ensemble bookkeeping and the single-filter SIR step.

use rand::Rng;
use thiserror::Error;

use crate::statemodel::{log_likelihood, propagate, DynamicsParams, Frame, ObservationParams, StateVector};

#[derive(Debug, Error, PartialEq)]
pub enum ResampleError {
    #[error("filter diverged: total particle weight is zero")]
    Divergence,
    #[error("ensemble has {states} states but {weights} weights")]
    LengthMismatch { states: usize, weights: usize },
    #[error("weight {0} is not a finite nonnegative value")]
    InvalidWeight(f64),
}

/// Particles and their (not necessarily normalized) weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    states: Vec<StateVector>,
    weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn new(states: Vec<StateVector>, weights: Vec<f64>) -> Result<Self, ResampleError> {
        if states.len() != weights.len() {
            return Err(ResampleError::LengthMismatch {
                states: states.len(),
                weights: weights.len(),
            });
        }
        if let Some(&w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(ResampleError::InvalidWeight(w));
        }
        Ok(Self { states, weights })
    }

    /// Equal weights `1/N`.
    pub fn uniform(states: Vec<StateVector>) -> Self {
        let w = 1.0 / states.len().max(1) as f64;
        let weights = vec![w; states.len()];
        Self { states, weights }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateVector] {
        &self.states
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_parts(self) -> (Vec<StateVector>, Vec<f64>) {
        (self.states, self.weights)
    }
}

/// Rescales weights to sum to one.
pub fn normalize(e: &WeightedEnsemble) -> Result<WeightedEnsemble, ResampleError> {
    let total: f64 = e.weights.iter().sum();
    if total.is_nan() || total <= 0.0 || !total.is_finite() {
        return Err(ResampleError::Divergence);
    }
    Ok(WeightedEnsemble {
        states: e.states.clone(),
        weights: e.weights.iter().map(|w| w / total).collect(),
    })
}

/// `1 / Σ w²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Component-wise weighted mean of `states`.
pub fn weighted_mean(states: &[StateVector], weights: &[f64]) -> StateVector {
    let mut acc = [0.0f64; 5];
    for (s, w) in states.iter().zip(weights) {
        for (a, c) in acc.iter_mut().zip(s.to_array()) {
            *a += w * c;
        }
    }
    StateVector::from_array(acc)
}

pub fn estimate(e: &WeightedEnsemble) -> StateVector {
    weighted_mean(&e.states, &e.weights)
}

/// Ancestor indices from systematic resampling of normalized `weights`.
///
/// One offset `u0 ~ U[0, 1/N)` and strata `u0 + i/N` are matched against the
/// cumulative weights, so particle `i` gets `floor(N w_i)` or `ceil(N w_i)`
/// offspring. The output is sorted.
pub fn systematic_indices<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Vec<usize> {
    let n = weights.len();
    if n == 0 {
        return Vec::new();
    }
    let step = 1.0 / n as f64;
    let u0 = rng.random::<f64>() * step;
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0];
    let mut j = 0;
    for i in 0..n {
        let u = u0 + i as f64 * step;
        while u >= cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j];
        }
        out.push(j);
    }
    out
}

pub fn systematic_resample<R: Rng + ?Sized>(e: &WeightedEnsemble, rng: &mut R) -> WeightedEnsemble {
    let idx = systematic_indices(&e.weights, rng);
    let states = idx.iter().map(|&i| e.states[i]).collect();
    WeightedEnsemble::uniform(states)
}

/// Normalized weights after multiplying priors by likelihoods in log space.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Reweighted {
    pub weights: Vec<f64>,
    /// `ln Σ_i prior_i · lik_i`.
    pub log_total: f64,
}

/// Combines log prior weights with log-likelihoods.
///
/// Priors are first shifted by their own maximum (exactly zero for equal
/// priors), then the sum is shifted by its maximum before exponentiation.
/// Returns `None` when every combined weight is zero.
pub(crate) fn reweigh(log_prior: &[f64], log_lik: &[f64]) -> Option<Reweighted> {
    let prior_max = log_prior.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !prior_max.is_finite() {
        return None;
    }
    let combined: Vec<f64> = log_prior.iter().zip(log_lik).map(|(p, l)| (p - prior_max) + l).collect();
    let max = combined.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return None;
    }
    let mut weights: Vec<f64> = combined.iter().map(|c| (c - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
    Some(Reweighted {
        weights,
        log_total: prior_max + max + total.ln(),
    })
}

/// Result of one SIR iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct SirStep {
    pub ensemble: WeightedEnsemble,
    pub estimate: StateVector,
    /// `ln Σ w_{k-1} p(z_k | x_k)` before normalization.
    pub log_evidence: f64,
    pub ess: f64,
    pub resampled: bool,
}

/// Propagate, weight, normalize, estimate, and resample when the effective
/// sample size falls below `n_thresh`.
pub fn sir_step<R: Rng + ?Sized>(
    e: &WeightedEnsemble,
    frame: &Frame,
    dynamics: &DynamicsParams,
    observation: &ObservationParams,
    n_thresh: f64,
    rng: &mut R,
) -> Result<SirStep, ResampleError> {
    let states: Vec<StateVector> = e.states.iter().map(|s| propagate(s, dynamics, rng)).collect();
    let log_lik: Vec<f64> = states.iter().map(|s| log_likelihood(s, frame, observation)).collect();
    let log_prior: Vec<f64> = e.weights.iter().map(|w| w.ln()).collect();
    let Reweighted { weights, log_total } = reweigh(&log_prior, &log_lik).ok_or(ResampleError::Divergence)?;
    let estimate = weighted_mean(&states, &weights);
    let ess = effective_sample_size(&weights);
    let propagated = WeightedEnsemble { states, weights };
    let resampled = ess < n_thresh;
    let ensemble = if resampled {
        systematic_resample(&propagated, rng)
    } else {
        propagated
    };
    Ok(SirStep {
        ensemble,
        estimate,
        log_evidence: log_total,
        ess,
        resampled,
    })
}
