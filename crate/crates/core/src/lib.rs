//! Multi-objective EEG channel selection for motor-imagery brain-computer
//! interfaces.
//!
//! Channel subsets are scored on two objectives, Gaussian-kernel spatial
//! relevance to the sensorimotor references (C3/C4) and per-trial band-power
//! desynchronisation, and searched with NSGA-II, MOPSO and MOEA/D under a
//! cardinality bound. Candidate subsets are validated with a filter-bank CSP
//! plus statistical-feature pipeline, mRMR feature selection and a linear
//! hinge-loss classifier, and compared against an accuracy-driven greedy
//! baseline.
//!
//! Module map:
//!
//! * [`montage`] electrode geometry and spatial relevance
//! * [`signal`] filtering, Welch spectra and ITTRD
//! * [`objectives`] the objective vector, masks and the cardinality repair
//! * [`pareto`] dominance, non-dominated sorting, crowding and the archive
//! * [`optim`] NSGA-II, MOPSO, MOEA/D and shared variation operators
//! * [`greedy`] the forward-selection baseline
//! * [`features`] FBCSP, statistical features and mRMR
//! * [`classify`] stratified splits and the linear-margin classifier
//! * [`analysis`] final-subset rule, selection frequency, ANOVA
//! * [`pipeline`] trial files, synthetic data, run orchestration and reports

// range checks are written `!(x > 0.0)` so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod classify;
mod error;
pub mod features;
pub mod greedy;
pub mod montage;
pub mod objectives;
pub mod optim;
pub mod pareto;
pub mod pipeline;
pub mod signal;

pub use error::{Error, ErrorKind, Result};

/// The seeded generator used everywhere randomness appears.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Build the crate's generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}

/// Map over a slice, in parallel when the `parallel` feature is on. Output
/// order always matches input order.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}
