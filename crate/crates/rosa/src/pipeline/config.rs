//! Run configuration: one TOML file describing the design, the space
//! restriction, the pipeline budgets and the optimizer, with a stable digest
//! embedded in every output for reproducibility checks.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::anneal::SaConfig;
use crate::designs::{
    AuxInterimConfig, AuxInterimDesign, EnrichmentConfig, EnrichmentDesign, TrialDesign,
    TwoArmRctConfig, TwoArmRctDesign,
};
use crate::error::RosaError;
use crate::loss::{default_scales, LossSpec, OcCache};
use crate::model::ParameterSpace;
use crate::surrogate::MlpConfig;
use crate::Result;

/// Monte Carlo and surrogate budgets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineParams {
    /// Training scenarios (Latin hypercube size J).
    pub training_points: usize,
    /// Monte Carlo reps per training scenario (M).
    pub training_reps: u32,
    /// Validation scenarios (J').
    pub validation_points: usize,
    /// Monte Carlo reps per validation scenario (M'); also used for the
    /// fresh re-estimation of the selected scenarios.
    pub validation_reps: u32,
    /// Size of the finite cloud the loss is evaluated over.
    pub cloud_size: usize,
    /// Minimum per-OC R-squared required to proceed past validation.
    pub r2_gate: f64,
    /// Replicate annealing chains.
    pub chains: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            training_points: 1000,
            training_reps: 200,
            validation_points: 200,
            validation_reps: 500,
            cloud_size: 100_000,
            r2_gate: 0.90,
            chains: 4,
        }
    }
}

/// Metric weights and scales; omitted entries fall back to uniform weights
/// and automatic scales (unit for probabilities, cloud range otherwise).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossParams {
    pub weights: Option<Vec<f64>>,
    pub scales: Option<Vec<f64>>,
}

/// Full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Design name: `rct2arm`, `aux-interim` or `enrichment`.
    pub design: String,
    pub seed: u64,
    /// Dimensions fixed to constants for the candidate space; the cloud is
    /// always drawn from the unrestricted space.
    pub restriction: BTreeMap<String, f64>,
    pub pipeline: PipelineParams,
    pub loss: LossParams,
    pub sa: SaConfig,
    pub mlp: MlpConfig,
    /// K values for sweeps and comparisons; `sa.k` is used for single runs.
    pub ks: Vec<usize>,
    pub rct2arm: Option<TwoArmRctConfig>,
    #[serde(rename = "aux-interim")]
    pub aux_interim: Option<AuxInterimConfig>,
    pub enrichment: Option<EnrichmentConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            design: "rct2arm".into(),
            seed: 1,
            restriction: BTreeMap::new(),
            pipeline: PipelineParams::default(),
            loss: LossParams::default(),
            sa: SaConfig::default(),
            mlp: MlpConfig::default(),
            ks: vec![],
            rct2arm: None,
            aux_interim: None,
            enrichment: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.build_design()?;
        self.sa.validate()?;
        let p = &self.pipeline;
        if p.training_points == 0
            || p.training_reps == 0
            || p.validation_points == 0
            || p.validation_reps == 0
            || p.cloud_size == 0
            || p.chains < 2
        {
            return Err(RosaError::InvalidConfig(
                "pipeline budgets must be positive and chains >= 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p.r2_gate) {
            return Err(RosaError::InvalidConfig(format!(
                "r2_gate must lie in [0, 1], got {}",
                p.r2_gate
            )));
        }
        if self.ks.iter().any(|&k| k == 0) {
            return Err(RosaError::InvalidConfig("K values must be >= 1".into()));
        }
        Ok(())
    }

    /// Instantiate the configured design.
    pub fn build_design(&self) -> Result<Box<dyn TrialDesign>> {
        match self.design.as_str() {
            "rct2arm" => {
                let cfg = self.rct2arm.clone().unwrap_or_default();
                Ok(Box::new(TwoArmRctDesign::new(cfg)?))
            }
            "aux-interim" => {
                let cfg = self.aux_interim.clone().unwrap_or_default();
                Ok(Box::new(AuxInterimDesign::new(cfg)?))
            }
            "enrichment" => {
                let cfg = self.enrichment.clone().unwrap_or_default();
                Ok(Box::new(EnrichmentDesign::new(cfg)?))
            }
            other => Err(RosaError::InvalidConfig(format!("unknown design `{other}`"))),
        }
    }

    /// Candidate space: the design space with the configured restriction.
    pub fn candidate_space(&self, design: &dyn TrialDesign) -> Result<ParameterSpace> {
        design.parameter_space().restrict(&self.restriction)
    }

    /// Resolve the metric spec against a built cache (for automatic scales).
    pub fn loss_spec(&self, design: &dyn TrialDesign, cache: &OcCache) -> Result<LossSpec> {
        let schema = design.oc_schema();
        let r = schema.r();
        let weights = match &self.loss.weights {
            Some(w) => w.clone(),
            None => vec![1.0 / r as f64; r],
        };
        let scales = match &self.loss.scales {
            Some(s) => s.clone(),
            None => default_scales(&schema, cache),
        };
        LossSpec::new(weights, scales)
    }

    /// Stable hash of the canonicalized configuration.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("serializable config");
        let mut hasher = Sha256::new();
        hasher.update(canonical);
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
