//! Energy/accuracy rating engine.
//!
//! Models measured on a benchmark are described by a total energy figure and an
//! accuracy figure. After min-max normalization each model becomes a point in the
//! unit square (`eff`, `acc`), where higher is better on both axes. Two raters map
//! those points onto an ordinal 1..=K scale:
//!
//! * [`circ`] rates by which of K equal-width distance bands around the ideal
//!   point (1, 1) a model falls into. Ratings never depend on other models.
//! * [`oter`] fits a strictly decreasing expectation curve to the cohort and rates
//!   each model by the ratio of its observed accuracy to the expected accuracy at
//!   its efficiency level.
//!
//! [`sensitivity`] holds the stability harness (hyperparameter sweeps,
//! leave-one-out, noise perturbation and size-bias tests) built on [`stats`].

// `!(x > 0.0)` style guards are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circ;
pub mod diagnostics;
pub mod error;
pub mod fixture;
pub mod measurements;
pub mod oter;
pub mod polyfit;
pub mod report;
pub mod robust;
pub mod sensitivity;
pub mod stats;

pub use circ::{circ_distance, circ_rating, CircResult, RatingScale};
pub use diagnostics::Diagnostic;
pub use error::{Error, Result};
pub use measurements::{Dataset, EnergyLog, Measurement, NormalizedPoint};
pub use oter::{oter_rate, OterConfig, OterResult};
pub use polyfit::{FitConfig, Polynomial};
