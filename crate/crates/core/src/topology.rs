//! Ring labelings of the processing elements.
//!
//! A ring is stored as a visiting order; each PE sends to its successor in
//! that order and receives from its predecessor.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopologyError {
    #[error("a ring needs at least one PE")]
    Empty,
    #[error("PE {pe} out of range for a ring of {m}")]
    OutOfRange { pe: usize, m: usize },
    #[error("order is not a permutation of 0..{0}")]
    NotPermutation(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RingPermutation {
    order: Vec<usize>,
    /// `position[pe]` is the index of `pe` in `order`.
    position: Vec<usize>,
}

impl RingPermutation {
    pub fn from_order(order: Vec<usize>) -> Result<Self, TopologyError> {
        let m = order.len();
        if m == 0 {
            return Err(TopologyError::Empty);
        }
        let mut position = vec![usize::MAX; m];
        for (i, &pe) in order.iter().enumerate() {
            if pe >= m || position[pe] != usize::MAX {
                return Err(TopologyError::NotPermutation(m));
            }
            position[pe] = i;
        }
        Ok(Self { order, position })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn successor(&self, pe: usize) -> Result<usize, TopologyError> {
        let i = self.index_of(pe)?;
        Ok(self.order[(i + 1) % self.len()])
    }

    pub fn predecessor(&self, pe: usize) -> Result<usize, TopologyError> {
        let i = self.index_of(pe)?;
        Ok(self.order[(i + self.len() - 1) % self.len()])
    }

    fn index_of(&self, pe: usize) -> Result<usize, TopologyError> {
        self.position
            .get(pe)
            .copied()
            .ok_or(TopologyError::OutOfRange { pe, m: self.len() })
    }
}

/// The fixed ring `0 -> 1 -> ... -> m-1 -> 0`.
pub fn identity_ring(m: usize) -> Result<RingPermutation, TopologyError> {
    RingPermutation::from_order((0..m).collect())
}

/// A uniformly random ring from a backward Fisher-Yates shuffle.
///
/// Draws exactly `m - 1` bounded integers from `rng`.
pub fn randomize_ring<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<RingPermutation, TopologyError> {
    let mut order: Vec<usize> = (0..m).collect();
    if m == 0 {
        return Err(TopologyError::Empty);
    }
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    RingPermutation::from_order(order)
}

/// Where a distributed iteration gets its ring from.
pub trait RingSource {
    fn next_ring(&mut self, m: usize) -> Result<RingPermutation, TopologyError>;
}

/// Always the identity ring.
#[derive(Debug, Clone, Copy, Default)]
pub struct FixedRing;

impl RingSource for FixedRing {
    fn next_ring(&mut self, m: usize) -> Result<RingPermutation, TopologyError> {
        identity_ring(m)
    }
}

/// A fresh Fisher-Yates ring per call, drawn from the wrapped stream.
#[derive(Debug, Clone)]
pub struct ShuffledRing<R>(pub R);

impl<R: Rng> RingSource for ShuffledRing<R> {
    fn next_ring(&mut self, m: usize) -> Result<RingPermutation, TopologyError> {
        randomize_ring(m, &mut self.0)
    }
}
