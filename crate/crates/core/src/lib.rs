//! Distributed particle filtering with ring-exchange resampling.
//!
//! The crate implements sequential importance resampling (SIR) for a single
//! fluorescent spot moving under a nearly-constant-velocity model, and two
//! distributed variants that spread the filter over `M` processing elements
//! (PEs) each holding `N_p` particles:
//!
//! - **RNA**: every PE resamples locally and ships a fixed fraction of its
//!   particles to its successor on a fixed ring.
//! - **ARNA**: the exchanged fraction follows the effective number of PEs
//!   carrying weight mass, and the ring is relabeled by a Fisher-Yates
//!   shuffle every iteration.
//!
//! Module map:
//!
//! - [`statemodel`]: state vector, dynamics and Poisson spot observation model
//! - [`synth`]: ground-truth trajectories, rendered noisy frames, scene files
//! - [`resample`]: normalization, effective sample size, systematic resampling, SIR
//! - [`topology`]: identity and randomized ring labelings
//! - [`dpf`]: per-PE state, particle exchange, RNA/ARNA iterations, reduction,
//!   sequential and threaded backends
//! - [`bench`]: scenarios, metrics, result files
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod bench;
pub mod dpf;
pub mod resample;
pub mod rng;
pub mod statemodel;
pub mod synth;
pub mod topology;

pub use dpf::{GlobalReduction, PeState};
pub use resample::WeightedEnsemble;
pub use statemodel::{DynamicsParams, Frame, ObservationParams, StateVector};
pub use topology::RingPermutation;
