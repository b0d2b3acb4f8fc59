//! Two-arm RCT with a one-sided z-test: single unknown treatment effect,
//! single OC (rejection probability), available in closed form.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designs::stats::{draw_std_normal, std_normal_cdf, std_normal_quantile};
use crate::designs::{OcContribution, TrialDesign};
use crate::error::RosaError;
use crate::model::{OcKind, OcSchema, ParameterSpace, Scenario};
use crate::Result;

/// Configuration of the two-arm RCT design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwoArmRctConfig {
    /// Total sample size.
    pub n: u32,
    /// Outcome standard deviation.
    pub sigma: f64,
    /// One-sided significance level.
    pub alpha: f64,
}

impl Default for TwoArmRctConfig {
    fn default() -> Self {
        Self { n: 30, sigma: 30.0, alpha: 0.05 }
    }
}

impl TwoArmRctConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.n % 2 != 0 {
            return Err(RosaError::InvalidConfig(format!("n must be even and >= 2, got {}", self.n)));
        }
        if !(self.sigma > 0.0) {
            return Err(RosaError::InvalidConfig(format!("sigma must be > 0, got {}", self.sigma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(RosaError::InvalidConfig(format!("alpha must be in (0, 0.5), got {}", self.alpha)));
        }
        Ok(())
    }

    fn critical(&self) -> f64 {
        std_normal_quantile(1.0 - self.alpha)
    }

    fn drift(&self, theta: f64) -> f64 {
        theta * (self.n as f64).sqrt() / self.sigma
    }
}

/// Exact rejection probability at effect `theta`.
///
/// Convention: the z-statistic is standard normal shifted by
/// `theta * sqrt(n) / sigma`, tested one-sided against `z_{1-alpha}`, so
/// `power(0) = alpha` exactly and `power` is strictly increasing onto (0, 1).
pub fn rct_power_exact(theta: f64, cfg: &TwoArmRctConfig) -> f64 {
    std_normal_cdf(cfg.drift(theta) - cfg.critical())
}

/// Effect size at which the exact power equals `target_power`.
pub fn rct_power_inverse(target_power: f64, cfg: &TwoArmRctConfig) -> Result<f64> {
    if !(target_power > 0.0 && target_power < 1.0) {
        return Err(RosaError::InvalidConfig(format!(
            "target power must be in (0, 1), got {target_power}"
        )));
    }
    Ok(cfg.sigma * (std_normal_quantile(target_power) + cfg.critical()) / (cfg.n as f64).sqrt())
}

/// The two-arm RCT design over the effect space (-5, 25).
#[derive(Debug, Clone, Default)]
pub struct TwoArmRctDesign {
    pub cfg: TwoArmRctConfig,
}

impl TwoArmRctDesign {
    pub fn new(cfg: TwoArmRctConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl TrialDesign for TwoArmRctDesign {
    fn name(&self) -> &'static str {
        "rct2arm"
    }

    fn parameter_space(&self) -> ParameterSpace {
        ParameterSpace::new(vec!["theta".into()], vec![-5.0], vec![25.0]).expect("static bounds")
    }

    fn oc_schema(&self) -> OcSchema {
        OcSchema::new(vec!["reject_prob".into()], vec![OcKind::Probability])
    }

    fn simulate_once(&self, theta: &Scenario, rng: &mut ChaCha8Rng) -> Result<OcContribution> {
        let z = self.cfg.drift(theta.theta[0]) + draw_std_normal(rng);
        let reject = z > self.cfg.critical();
        Ok(OcContribution { values: vec![if reject { 1.0 } else { 0.0 }] })
    }
}
