//! Prediction of unseen species from frequency data.
//!
//! Given the frequency profile of an observation window (how many species
//! appeared once, twice, ...), this crate predicts how many new species a
//! future window `r` times as long will reveal, for any `r > 0`:
//!
//! * [`estimators`] implements the alternating-series estimator, its
//!   smoothed variants, a rational-extrapolation variant, and a power-law
//!   index plug-in;
//! * [`ghopt`] evaluates the worst-case mean-squared-error functional of a
//!   linear estimator and optimizes it by projected subgradient descent,
//!   returning weights with a machine-checkable certificate;
//! * [`uncertainty`] provides variance proxies, Gaussian intervals,
//!   far-future conservative intervals, and dependence diagnostics for
//!   set-valued observations;
//! * [`sim`] contains a Poissonized simulator with closed-form moment
//!   oracles for validating all of the above;
//! * [`ingest`] and [`bench`] load real corpora and reproduce
//!   extrapolation benchmarks on them.
//!
//! The `unseen` binary exposes the same capabilities as subcommands; the
//! crate examples show typical library usage.

pub mod bench;
pub mod error;
pub mod estimators;
pub mod ghopt;
pub mod ingest;
pub mod manifest;
pub mod pade;
pub mod sim;
pub mod types;
pub mod uncertainty;

pub use error::{Error, Result};
pub use types::{FrequencyProfile, Horizon, LinearWeights};
