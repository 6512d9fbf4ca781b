//! Experiment driver for the `fbm-blowup` command line tool: JSON run
//! configuration, Monte Carlo and convergence studies, CSV and SVG output.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
mod error;
pub mod experiments;
pub mod output;
pub mod plot;

pub use config::{Experiment, RunConfig};
pub use error::{HarnessError, Result};
pub use experiments::{execute, run, Report};
