//! Scenario files, validation reports and sweeps behind the `stokes` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod report;
pub mod scenario;

pub use report::{run_validation, sweep, SweepAxis, ValidationReport};
pub use scenario::{load_scenario, Scenario, ScenarioError};
