//! Selection of representative scenario sets for clinical trial sensitivity
//! analyses.
//!
//! A trial design is anything that can simulate one trial realization under a
//! concrete assignment of its unknown parameters and report per-trial
//! operating-characteristic (OC) contributions. Given a bounded parameter
//! space, the pipeline
//!
//! 1. draws Latin-hypercube training scenarios ([`sampling`]),
//! 2. estimates OCs per scenario by Monte Carlo ([`mc`]),
//! 3. fits and validates a regression surrogate for the scenario-to-OC map
//!    ([`surrogate`]),
//! 4. evaluates a minimax coverage loss over a diffuse finite cloud of the
//!    parameter space ([`loss`]), and
//! 5. minimizes that loss over K-tuples of scenarios with simulated annealing
//!    ([`anneal`]).
//!
//! The selected scenarios, their OCs and the achieved loss form a sensitivity
//! report ([`pipeline`]). Three reference designs ship in [`designs`]: a
//! two-arm RCT with closed-form power, a two-stage design with an auxiliary
//! interim outcome, and a biomarker-driven adaptive enrichment design.

pub mod anneal;
pub mod designs;
pub mod error;
pub mod loss;
pub mod mc;
pub mod model;
pub mod pipeline;
pub mod rng;
pub mod sampling;
pub mod surrogate;

pub use error::RosaError;
pub use model::{OcKind, OcSchema, OcVector, ParameterSpace, Scenario, ScenarioSet};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, RosaError>;
