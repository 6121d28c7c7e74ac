use serde::{Deserialize, Serialize};

use super::{
    adaptive_exchange_count, exchange_step, fixed_exchange_count, master_reduce_log, DpfError, ExchangePolicy,
    GlobalReduction, Particle, PeState, Traffic,
};
use crate::resample::{reweigh, systematic_indices, weighted_mean, Reweighted};
use crate::statemodel::{log_likelihood, propagate, DynamicsParams, Frame, ObservationParams, StateVector};
use crate::topology::{identity_ring, RingPermutation, RingSource};

/// Dynamics and observation model shared by every PE.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FilterModel {
    pub dynamics: DynamicsParams,
    pub observation: ObservationParams,
}

impl FilterModel {
    pub fn validate(&self) -> Result<(), DpfError> {
        self.dynamics.validate()?;
        self.observation.validate()?;
        Ok(())
    }
}

/// Everything the PEs must agree on before an iteration starts.
#[derive(Debug, Clone, PartialEq)]
pub struct Directive {
    pub ring: RingPermutation,
    pub n_ex: usize,
    /// `ln W_{k-1}` from the previous broadcast.
    pub log_prev_total: f64,
    /// Reset every carried weight to uniform instead of renormalizing
    /// (used after a divergent iteration).
    pub reset_weights: bool,
}

impl Directive {
    /// Ring and exchange count for the next iteration. Adaptive policies draw
    /// a ring from `rings` every call, even when the count is zero.
    pub fn plan(
        policy: &ExchangePolicy,
        m: usize,
        n_p: usize,
        previous: &GlobalReduction,
        rings: &mut impl RingSource,
    ) -> Result<Self, DpfError> {
        policy.validate()?;
        let ring = match policy {
            ExchangePolicy::Fixed { .. } => identity_ring(m)?,
            ExchangePolicy::Adaptive { .. } => rings.next_ring(m)?,
        };
        Ok(Self {
            ring,
            n_ex: policy.exchange_count(n_p, m, previous),
            log_prev_total: previous.log_total_weight,
            reset_weights: false,
        })
    }
}

/// What one PE sends to the coordinator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalReport {
    pub pe: usize,
    pub estimate: StateVector,
    pub log_weight_sum: f64,
    /// Every particle weight was zero; the PE resampled uniformly.
    pub diverged: bool,
    /// [`PeState::digest`] after the update.
    pub digest: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    pub reduction: GlobalReduction,
    pub n_ex: usize,
    pub traffic: Traffic,
    pub reports: Vec<LocalReport>,
    /// Every PE reported zero weight; weights are reset on the next iteration.
    pub diverged: bool,
}

impl PeState {
    /// Renormalize, propagate, weight, estimate, resample, and reset weights
    /// to the local sum.
    pub fn local_update(&mut self, frame: &Frame, model: &FilterModel, log_prev_total: f64, reset: bool) -> LocalReport {
        for p in self.particles.iter_mut() {
            p.log_weight = if reset { 0.0 } else { p.log_weight - log_prev_total };
        }
        let states: Vec<StateVector> = self
            .particles
            .iter()
            .map(|p| propagate(&p.state, &model.dynamics, &mut self.rng))
            .collect();
        let log_lik: Vec<f64> = states
            .iter()
            .map(|s| log_likelihood(s, frame, &model.observation))
            .collect();
        let log_prior: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        let (weights, log_total, diverged) = match reweigh(&log_prior, &log_lik) {
            Some(Reweighted { weights, log_total }) => (weights, log_total, false),
            None => (vec![1.0 / states.len() as f64; states.len()], f64::NEG_INFINITY, true),
        };
        let estimate = weighted_mean(&states, &weights);
        let ancestors = systematic_indices(&weights, &mut self.rng);
        let owner = self.id as u32;
        self.particles = ancestors
            .into_iter()
            .map(|i| Particle {
                state: states[i],
                log_weight: log_total,
                owner,
            })
            .collect();
        self.log_weight_sum = log_total;
        self.local_estimate = estimate;
        LocalReport {
            pe: self.id,
            estimate,
            log_weight_sum: log_total,
            diverged,
            digest: self.digest(),
        }
    }
}

pub(crate) fn check_conservation(pes: &[PeState], n_p: usize) -> Result<(), DpfError> {
    match pes.iter().find(|pe| pe.len() != n_p) {
        Some(pe) => Err(DpfError::Conservation {
            pe: pe.id,
            actual: pe.len(),
            expected: n_p,
        }),
        None => Ok(()),
    }
}

/// Reduces reports ordered by PE id. All-zero weight yields `None`.
pub(crate) fn reduce_reports(reports: &[LocalReport]) -> Result<Option<GlobalReduction>, DpfError> {
    let estimates: Vec<StateVector> = reports.iter().map(|r| r.estimate).collect();
    let logs: Vec<f64> = reports.iter().map(|r| r.log_weight_sum).collect();
    match master_reduce_log(&estimates, &logs) {
        Ok(r) => Ok(Some(r)),
        Err(DpfError::Divergence) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Reduction used after a divergent iteration: equal-weight mean of the local
/// estimates, `W = 1`, and the previous `pe_eff`.
pub(crate) fn divergence_fallback(reports: &[LocalReport], previous: &GlobalReduction) -> GlobalReduction {
    let estimates: Vec<StateVector> = reports.iter().map(|r| r.estimate).collect();
    let w = vec![1.0 / estimates.len() as f64; estimates.len()];
    GlobalReduction {
        global_estimate: weighted_mean(&estimates, &w),
        log_total_weight: 0.0,
        pe_eff: previous.pe_eff,
    }
}

/// Exchange and local updates on all PEs in id order, without reduction.
pub(crate) fn exchange_and_update(
    pes: &mut [PeState],
    frame: &Frame,
    model: &FilterModel,
    directive: &Directive,
) -> Result<(Traffic, Vec<LocalReport>), DpfError> {
    let n_p = pes.first().ok_or(DpfError::NoPes)?.len();
    check_conservation(pes, n_p)?;
    let traffic = exchange_step(pes, &directive.ring, directive.n_ex)?;
    check_conservation(pes, n_p)?;
    let reports = pes
        .iter_mut()
        .map(|pe| pe.local_update(frame, model, directive.log_prev_total, directive.reset_weights))
        .collect();
    check_conservation(pes, n_p)?;
    Ok((traffic, reports))
}

/// One distributed iteration under an explicit directive.
///
/// Fails with [`DpfError::Divergence`] when every PE reports zero weight.
pub fn iterate(
    pes: &mut [PeState],
    frame: &Frame,
    model: &FilterModel,
    directive: &Directive,
) -> Result<IterationOutcome, DpfError> {
    let (traffic, reports) = exchange_and_update(pes, frame, model, directive)?;
    let reduction = reduce_reports(&reports)?.ok_or(DpfError::Divergence)?;
    Ok(IterationOutcome {
        reduction,
        n_ex: directive.n_ex,
        traffic,
        reports,
        diverged: false,
    })
}

/// RNA: fixed ratio on the identity ring.
pub fn rna_iteration(
    pes: &mut [PeState],
    frame: &Frame,
    model: &FilterModel,
    fixed_ratio: f64,
    previous: &GlobalReduction,
) -> Result<IterationOutcome, DpfError> {
    let policy = ExchangePolicy::Fixed { ratio: fixed_ratio };
    policy.validate()?;
    let m = pes.len();
    let n_p = pes.first().ok_or(DpfError::NoPes)?.len();
    let directive = Directive {
        ring: identity_ring(m)?,
        n_ex: fixed_exchange_count(n_p, fixed_ratio),
        log_prev_total: previous.log_total_weight,
        reset_weights: false,
    };
    iterate(pes, frame, model, &directive)
}

/// ARNA: a fresh ring from `rings` and an exchange count from the previous
/// iteration's `pe_eff`.
pub fn arna_iteration(
    pes: &mut [PeState],
    frame: &Frame,
    model: &FilterModel,
    cutoff: f64,
    previous: &GlobalReduction,
    rings: &mut impl RingSource,
) -> Result<IterationOutcome, DpfError> {
    let policy = ExchangePolicy::Adaptive { cutoff };
    policy.validate()?;
    let m = pes.len();
    let n_p = pes.first().ok_or(DpfError::NoPes)?.len();
    let directive = Directive {
        ring: rings.next_ring(m)?,
        n_ex: adaptive_exchange_count(n_p, previous.pe_eff, m, cutoff),
        log_prev_total: previous.log_total_weight,
        reset_weights: false,
    };
    iterate(pes, frame, model, &directive)
}
