//! Length-of-stay estimation with a nonparametric mixture cure model, and a
//! Monte Carlo simulator of hospital ward / ICU demand driven by those
//! estimates.
//!
//! The pieces, bottom-up:
//!
//! - [`survival`]: Kaplan-Meier, empirical and known-cure product-limit
//!   estimators; event probability and latency curve.
//! - [`conditional`]: the same estimators with kernel weights in age and
//!   stratification by sex.
//! - [`weibull`]: Weibull laws fitted to latency curves.
//! - [`ingest`]: line-list parsing and the per-endpoint observation sets.
//! - [`sim`]: seeded patient-flow simulation, occupancy and capacity
//!   exceedance.
//! - [`pipeline`]: line list to simulator tables.
//! - [`synthetic`]: line lists with known ground truth.

pub mod conditional;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod sim;
pub mod survival;
pub mod synthetic;
pub mod weibull;

pub use error::{Error, Result};
pub use survival::{CureModelEstimate, Observation, Sex, SurvivalCurve};
pub use weibull::{FitReport, WeibullParams};
