//! Independent checks for the spectral pipeline.
//!
//! None of these use the equal-entropy shortcut: CI is scanned from its
//! max-min definition on dense matrices, error exponents are measured by
//! simulation, and projections are drawn at random.

mod counterexample;
mod maxmin;
mod montecarlo;
mod projection;
mod sampling;

pub use counterexample::{search_dependent_counterexample, Counterexample, CounterexampleFilter, UNIT_TOL};
pub use maxmin::{ci_maxmin_scan, MIN_GRID};
pub use montecarlo::{mc_error_exponent, wilson_interval, PeCell, SimulationReport, MIN_TRIALS};
pub use projection::{random_projection_baseline, ProjectionBaseline};
pub use sampling::{random_equal_entropy_pair, random_graft, random_independent_chain};
