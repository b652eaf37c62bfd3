//! ALPODS: explainable discovery of diagnostically relevant event
//! subpopulations in case-of-many-events data.
//!
//! The pipeline grows a Bayesian decision DAG over event populations,
//! simplifies each population's path into a per-variable interval rule with
//! plus/minus tokens and an effect size, selects the relevant few rules by
//! computed ABC analysis, classifies cases by fuzzy majority voting over
//! per-case population frequencies, and renders differential-density
//! visualization panels.

pub mod dag;
pub mod data;
pub mod density;
pub mod describe;
pub mod error;
pub mod eval;
pub mod fuzzy;
mod iris_data;
pub mod model;
pub mod vispanel;

pub use error::{AlpodsError, Result};
