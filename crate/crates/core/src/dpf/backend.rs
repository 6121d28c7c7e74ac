//! Drivers that run a distributed filter over a frame sequence.
//!
//! [`Backend::Sequential`] executes the PEs round-robin on the calling thread.
//! [`Backend::Parallel`] runs one worker thread per PE; workers exchange
//! particle payloads over channels and the calling thread acts as the
//! coordinator that plans each iteration, gathers the local reports, reduces
//! and broadcasts. Given the same PE streams both produce identical results.

use std::sync::Arc;
use std::thread;

use crossbeam_channel::{unbounded, Receiver, Sender};
use serde::{Deserialize, Serialize};

use super::iteration::{check_conservation, divergence_fallback, exchange_and_update, reduce_reports};
use super::{Directive, DpfError, ExchangePolicy, FilterModel, GlobalReduction, IterationOutcome, LocalReport, Particle, PeState, Traffic};
use crate::rng::{stream, COORDINATOR_STREAM};
use crate::statemodel::Frame;
use crate::topology::ShuffledRing;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Sequential,
    Parallel,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Backend::Sequential),
            "parallel" => Ok(Backend::Parallel),
            other => Err(format!("unknown backend '{other}' (expected sequential or parallel)")),
        }
    }
}

/// Policy, model and starting broadcast for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunPlan {
    pub policy: ExchangePolicy,
    pub model: FilterModel,
    pub initial: GlobalReduction,
    /// Seed of the coordinator stream that draws ARNA rings.
    pub coordinator_seed: u64,
}

#[derive(Debug, Clone)]
pub struct DistributedRun {
    pub iterations: Vec<IterationOutcome>,
    pub pes: Vec<PeState>,
}

/// Runs one iteration per frame in `frames`.
pub fn run_distributed(
    backend: Backend,
    pes: Vec<PeState>,
    frames: &[Frame],
    plan: &RunPlan,
) -> Result<DistributedRun, DpfError> {
    if pes.is_empty() {
        return Err(DpfError::NoPes);
    }
    if let Some((i, pe)) = pes.iter().enumerate().find(|(i, pe)| pe.id != *i) {
        return Err(DpfError::Worker(format!("PE at position {i} has id {}", pe.id)));
    }
    plan.policy.validate()?;
    plan.model.validate()?;
    match backend {
        Backend::Sequential => run_sequential(pes, frames, plan),
        Backend::Parallel => run_parallel(pes, frames, plan),
    }
}

fn finish(
    reports: Vec<LocalReport>,
    traffic: Traffic,
    n_ex: usize,
    previous: &GlobalReduction,
) -> Result<IterationOutcome, DpfError> {
    let (reduction, diverged) = match reduce_reports(&reports)? {
        Some(r) => (r, false),
        None => (divergence_fallback(&reports, previous), true),
    };
    Ok(IterationOutcome {
        reduction,
        n_ex,
        traffic,
        reports,
        diverged,
    })
}

fn run_sequential(mut pes: Vec<PeState>, frames: &[Frame], plan: &RunPlan) -> Result<DistributedRun, DpfError> {
    let (m, n_p) = (pes.len(), pes[0].len());
    let mut rings = ShuffledRing(stream(plan.coordinator_seed, COORDINATOR_STREAM));
    let mut previous = plan.initial;
    let mut reset = false;
    let mut iterations = Vec::with_capacity(frames.len());
    for frame in frames {
        let mut directive = Directive::plan(&plan.policy, m, n_p, &previous, &mut rings)?;
        directive.reset_weights = reset;
        let (traffic, reports) = exchange_and_update(&mut pes, frame, &plan.model, &directive)?;
        let outcome = finish(reports, traffic, directive.n_ex, &previous)?;
        previous = outcome.reduction;
        reset = outcome.diverged;
        iterations.push(outcome);
    }
    Ok(DistributedRun { iterations, pes })
}

enum Command {
    Step { frame: usize, directive: Arc<Directive> },
    Stop,
}

struct Reply {
    pe: usize,
    sent: usize,
    result: Result<LocalReport, DpfError>,
}

struct Worker<'a> {
    pe: PeState,
    n_p: usize,
    commands: Receiver<Command>,
    inbox: Receiver<Vec<Particle>>,
    peers: Vec<Sender<Vec<Particle>>>,
    replies: Sender<Reply>,
    frames: &'a [Frame],
    model: FilterModel,
}

impl Worker<'_> {
    fn run(mut self) -> PeState {
        while let Ok(Command::Step { frame, directive }) = self.commands.recv() {
            let (sent, result) = self.step(frame, &directive);
            let reply = Reply {
                pe: self.pe.id,
                sent,
                result,
            };
            if self.replies.send(reply).is_err() {
                break;
            }
        }
        self.pe
    }

    fn step(&mut self, frame: usize, d: &Directive) -> (usize, Result<LocalReport, DpfError>) {
        let mut sent = 0;
        if self.peers.len() > 1 && d.n_ex > 0 {
            // An empty payload still goes out on failure so the successor never blocks.
            let (outgoing, failure) = match self.pe.take_outgoing(d.n_ex) {
                Ok(out) => (out, None),
                Err(e) => (Vec::new(), Some(e)),
            };
            sent = outgoing.len();
            let delivered = d
                .ring
                .successor(self.pe.id)
                .map_err(DpfError::from)
                .and_then(|to| {
                    self.peers[to]
                        .send(outgoing)
                        .map_err(|_| DpfError::Worker(format!("PE {to} inbox closed")))
                });
            let received = self
                .inbox
                .recv()
                .map_err(|_| DpfError::Worker(format!("PE {} inbox disconnected", self.pe.id)));
            match (failure, delivered, received) {
                (None, Ok(()), Ok(incoming)) => self.pe.receive(incoming),
                (Some(e), _, _) | (None, Err(e), _) | (None, Ok(()), Err(e)) => return (sent, Err(e)),
            }
        }
        if let Err(e) = check_conservation(std::slice::from_ref(&self.pe), self.n_p) {
            return (sent, Err(e));
        }
        let report = self
            .pe
            .local_update(&self.frames[frame], &self.model, d.log_prev_total, d.reset_weights);
        (sent, Ok(report))
    }
}

fn run_parallel(pes: Vec<PeState>, frames: &[Frame], plan: &RunPlan) -> Result<DistributedRun, DpfError> {
    let (m, n_p) = (pes.len(), pes[0].len());
    check_conservation(&pes, n_p)?;
    let (inbox_tx, inbox_rx): (Vec<_>, Vec<_>) = (0..m).map(|_| unbounded::<Vec<Particle>>()).unzip();
    let (command_tx, command_rx): (Vec<_>, Vec<_>) = (0..m).map(|_| unbounded::<Command>()).unzip();
    let (reply_tx, reply_rx) = unbounded::<Reply>();

    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(m);
        for ((pe, commands), inbox) in pes.into_iter().zip(command_rx).zip(inbox_rx) {
            let worker = Worker {
                pe,
                n_p,
                commands,
                inbox,
                peers: inbox_tx.clone(),
                replies: reply_tx.clone(),
                frames,
                model: plan.model,
            };
            handles.push(scope.spawn(move || worker.run()));
        }
        drop(reply_tx);

        let coordinate = || -> Result<Vec<IterationOutcome>, DpfError> {
            let mut rings = ShuffledRing(stream(plan.coordinator_seed, COORDINATOR_STREAM));
            let mut previous = plan.initial;
            let mut reset = false;
            let mut iterations = Vec::with_capacity(frames.len());
            for k in 0..frames.len() {
                let mut directive = Directive::plan(&plan.policy, m, n_p, &previous, &mut rings)?;
                directive.reset_weights = reset;
                let directive = Arc::new(directive);
                for tx in &command_tx {
                    tx.send(Command::Step {
                        frame: k,
                        directive: Arc::clone(&directive),
                    })
                    .map_err(|_| DpfError::Worker("worker exited early".into()))?;
                }
                let mut reports: Vec<Option<LocalReport>> = vec![None; m];
                let mut traffic = Traffic::default();
                let mut failure = None;
                for _ in 0..m {
                    let reply = reply_rx
                        .recv()
                        .map_err(|_| DpfError::Worker("all workers exited".into()))?;
                    if reply.sent > 0 {
                        traffic.record_message(reply.sent);
                    }
                    match reply.result {
                        Ok(report) => reports[reply.pe] = Some(report),
                        Err(e) => failure = failure.or(Some(e)),
                    }
                }
                if let Some(e) = failure {
                    return Err(e);
                }
                let reports = reports.into_iter().map(|r| r.expect("one reply per PE")).collect();
                let outcome = finish(reports, traffic, directive.n_ex, &previous)?;
                previous = outcome.reduction;
                reset = outcome.diverged;
                iterations.push(outcome);
            }
            Ok(iterations)
        };
        let result = coordinate();
        for tx in &command_tx {
            let _ = tx.send(Command::Stop);
        }
        let mut pes = Vec::with_capacity(m);
        for h in handles {
            pes.push(h.join().map_err(|_| DpfError::Worker("worker panicked".into()))?);
        }
        pes.sort_by_key(|pe| pe.id);
        Ok(DistributedRun {
            iterations: result?,
            pes,
        })
    })
}
