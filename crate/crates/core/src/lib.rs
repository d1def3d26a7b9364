//! Quantum teleportation over imperfect EPR sources.
//!
//! A real pair source does not emit a definite number of particles: some
//! emissions carry extra radiation, and in those Bob may receive nothing, or
//! a particle uncorrelated with Alice's. This crate models such a source as a
//! classical mixture of particle-number channels and measures what that does
//! to teleportation, both by Monte Carlo and in closed form.
//!
//! - [`qstate`]: pure and mixed states of up to three two-level particles.
//! - [`protocol`]: Bell measurement, the two-bit message and Bob's correction.
//! - [`source`]: channel tables, the built-in pion and cascade sources, and
//!   the JSON source-table format.
//! - [`experiment`]: reproducible parallel trials, analytic failure rates and
//!   post-selected fidelity.
//!
//! ```
//! use teleportsim::experiment::analytic_failure_rate;
//! use teleportsim::source::pion_source;
//!
//! let loss = analytic_failure_rate(&pion_source(), 0.99).unwrap();
//! assert!((loss - 0.011989).abs() < 1e-5);
//! ```

pub mod experiment;
pub mod protocol;
pub mod qstate;
pub mod source;

pub use experiment::{ExperimentConfig, ExperimentReport, QubitSampler, TrialRecord};
pub use protocol::{BellOutcome, ClassicalMessage};
pub use qstate::{DensityMatrix, PureState, Unitary2x2};
pub use source::{DeliveryKind, SourceChannel, SourceModel};

// The guide in `book/` is compiled and run as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/states.md")]
    mod states {}
    #[doc = include_str!("../../../book/src/protocol.md")]
    mod protocol {}
    #[doc = include_str!("../../../book/src/sources.md")]
    mod sources {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
