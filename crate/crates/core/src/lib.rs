//! Finite-lifetime random walk systems on the integers.
//!
//! At time zero every site of `{1, 2, ...}` holds `N` sleeping particles; the
//! particles at site 1 are awake. An awake particle born at site `i` performs
//! exactly `L` nearest-neighbour steps, each to the left with probability `q_i`,
//! and wakes every particle on the sites it visits. The crate provides:
//!
//! * [`sequence`]: a small closed language for jump-probability sequences
//!   `(q_n)` together with their summability index `m`, monotonicity and the
//!   subsequence lifetime thresholds `L0`/`L1`;
//! * [`exact`]: exact reach and non-visit probabilities by dynamic programming,
//!   block quantities `a_n` and their two-sided bounds;
//! * [`classifier`]: a rule engine deciding survival or extinction;
//! * [`montecarlo`]: a reproducible simulator on a truncated interval.

pub mod classifier;
pub mod exact;
pub mod montecarlo;
pub mod rng;
pub mod sequence;

mod extended;

pub use classifier::{classify, Outcome, ProcessParams, Verdict};
pub use extended::ExtendedNat;
pub use sequence::{PrimitiveForm, SequenceSpec, SparseOverride};
