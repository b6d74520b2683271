//! Turning-point dating of public debt and financial cycles on quarterly
//! panels, phase statistics, boom/bust association dummies, Weibull AFT
//! shared-frailty duration models, and fixed-effects amplitude regressions,
//! plus synthetic-data generators for closed-loop validation.

pub mod assoc;
pub mod covariates;
pub mod dating;
pub mod error;
pub mod fe;
pub mod optim;
pub mod panel;
pub mod report;
pub mod simulate;
pub mod stats;
pub mod survival;

pub use error::{Error, Result};
