//! Trial-design abstraction and the three reference designs.
//!
//! A design knows its parameter space, the schema of its operating
//! characteristics, and how to simulate one trial realization. OCs are
//! expectations of the per-trial contribution, so averaging `simulate_once`
//! over many reps estimates them.

mod aux_interim;
mod enrichment;
mod rct;
mod stats;

pub use aux_interim::{joint_cell, sample_bivariate_bernoulli, AuxInterimConfig, AuxInterimDesign};
pub use enrichment::{
    interim_branch, sample_correlated_exponentials, EnrichmentConfig, EnrichmentDesign,
    InterimBranch,
};
pub use rct::{rct_power_exact, rct_power_inverse, TwoArmRctConfig, TwoArmRctDesign};
pub use stats::{log_rank_z, std_normal_cdf, std_normal_quantile};

use rand_chacha::ChaCha8Rng;

use crate::model::{OcSchema, ParameterSpace, Scenario};
use crate::Result;

/// One realization of the per-trial OC contribution.
///
/// Probability-kind entries are 0/1 indicators per realization; count and
/// duration entries are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct OcContribution {
    pub values: Vec<f64>,
}

/// A simulatable clinical trial design.
///
/// `simulate_once` must be deterministic given the scenario and the rng
/// state, and the OC schema is constant for the lifetime of the design.
pub trait TrialDesign: Send + Sync {
    /// Stable registry name (`rct2arm`, `aux-interim`, `enrichment`).
    fn name(&self) -> &'static str;

    fn parameter_space(&self) -> ParameterSpace;

    fn oc_schema(&self) -> OcSchema;

    /// Simulate one trial under `theta` and return its OC contribution.
    fn simulate_once(&self, theta: &Scenario, rng: &mut ChaCha8Rng) -> Result<OcContribution>;
}
