use rand::Rng;

use super::{DpfError, Particle, PeState, Traffic};
use crate::topology::RingPermutation;

/// Splits off a uniformly random `n_ex`-subset (without replacement).
///
/// Returns `(outgoing, remaining)`. A partial Fisher-Yates pass draws exactly
/// `n_ex` indices, so `n_ex = 0` consumes no randomness and leaves the order
/// untouched.
pub fn select_outgoing<T, R: Rng + ?Sized>(
    mut items: Vec<T>,
    n_ex: usize,
    rng: &mut R,
) -> Result<(Vec<T>, Vec<T>), DpfError> {
    let n = items.len();
    if n_ex > n {
        return Err(DpfError::ExchangeTooLarge {
            requested: n_ex,
            available: n,
        });
    }
    for i in 0..n_ex {
        let j = rng.random_range(i..n);
        items.swap(i, j);
    }
    let remaining = items.split_off(n_ex);
    Ok((items, remaining))
}

impl PeState {
    /// Removes `n_ex` random particles for the ring successor.
    pub fn take_outgoing(&mut self, n_ex: usize) -> Result<Vec<Particle>, DpfError> {
        let particles = std::mem::take(&mut self.particles);
        match select_outgoing(particles, n_ex, &mut self.rng) {
            Ok((outgoing, remaining)) => {
                self.particles = remaining;
                Ok(outgoing)
            }
            Err(e) => Err(e),
        }
    }

    /// Appends particles received from the ring predecessor.
    pub fn receive(&mut self, incoming: Vec<Particle>) {
        self.particles.extend(incoming);
    }
}

/// Every PE sends `n_ex` random particles to its successor and receives
/// `n_ex` from its predecessor. No-op for a single PE or `n_ex = 0`.
pub fn exchange_step(pes: &mut [PeState], ring: &RingPermutation, n_ex: usize) -> Result<Traffic, DpfError> {
    let mut traffic = Traffic::default();
    if pes.len() < 2 || n_ex == 0 {
        return Ok(traffic);
    }
    if ring.len() != pes.len() {
        return Err(DpfError::Topology(crate::topology::TopologyError::NotPermutation(pes.len())));
    }
    let mut outgoing = Vec::with_capacity(pes.len());
    for pe in pes.iter_mut() {
        let out = pe.take_outgoing(n_ex)?;
        traffic.record_message(out.len());
        outgoing.push(Some(out));
    }
    for pe in pes.iter_mut() {
        let from = ring.predecessor(pe.id)?;
        let incoming = outgoing[from].take().expect("each PE has exactly one predecessor");
        pe.receive(incoming);
    }
    Ok(traffic)
}
