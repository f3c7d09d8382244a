//! Classical and differentially private false-discovery-rate control.
//!
//! The crate covers three layers:
//!
//! * the Benjamini–Hochberg step-up and step-down procedures together with
//!   FDP accounting and the adaptivity test for arbitrary rejection sets
//!   ([`model`], [`procedures`]);
//! * Laplace-noise selection mechanisms (Report Noisy Min, peeling and the
//!   one-shot top-k mechanism) and the private FDR pipeline built on them
//!   ([`mechanisms`], [`private_fdr`], [`pvalues`]);
//! * a verification harness that estimates FDR functionals by Monte Carlo,
//!   evaluates the adversarial FDP oracle and audits the privacy of the
//!   selection mechanisms exhaustively or by sampling ([`harness`]).
//!
//! The crate is `no_std` and only needs `alloc`. All randomness flows through
//! a seeded [`NoiseStream`], and simulations are driven by a
//! [`TrialExecutor`] so that a caller can fan trials out across threads
//! without changing any result.

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod error;
pub mod exec;
pub mod harness;
pub mod mechanisms;
pub mod model;
pub mod noise;
pub mod private_fdr;
pub mod procedures;
pub mod pvalues;

pub use error::{Error, Result};
pub use exec::{Sequential, TrialExecutor};
pub use model::{
    bhq_critical_values, fdp_accounting, is_adaptive, CriticalValues, Fdp, Label, PValueVector,
    PrivacyParams, RejectionReport,
};
pub use noise::NoiseStream;
