//! Two-arm, two-stage design with a binary primary outcome and a binary
//! auxiliary outcome observed earlier. The interim analysis computes the
//! conditional power from the auxiliary z-statistic and stops for futility
//! below a cutoff. OCs: final rejection probability and realized sample size.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designs::stats::{draw_bernoulli, std_normal_cdf, std_normal_quantile};
use crate::designs::{OcContribution, TrialDesign};
use crate::error::RosaError;
use crate::model::{OcKind, OcSchema, ParameterSpace, Scenario};
use crate::Result;

/// Configuration of the auxiliary-outcome interim design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AuxInterimConfig {
    /// Planned final per-arm sample sizes (control, experimental).
    pub n_final: [u32; 2],
    /// Per-arm interim sample sizes (control, experimental).
    pub n_interim: [u32; 2],
    /// One-sided significance level of the final test.
    pub alpha: f64,
    /// Conditional-power futility threshold; the trial continues when
    /// CP >= cutoff.
    pub cp_cutoff: f64,
}

impl Default for AuxInterimConfig {
    fn default() -> Self {
        Self {
            n_final: [100, 100],
            n_interim: [50, 50],
            alpha: 0.05,
            cp_cutoff: 0.5,
        }
    }
}

impl AuxInterimConfig {
    pub fn validate(&self) -> Result<()> {
        for a in 0..2 {
            if self.n_interim[a] == 0 || self.n_interim[a] >= self.n_final[a] {
                return Err(RosaError::InvalidConfig(format!(
                    "arm {a}: need 0 < interim n ({}) < final N ({})",
                    self.n_interim[a], self.n_final[a]
                )));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(RosaError::InvalidConfig(format!("alpha must be in (0, 0.5), got {}", self.alpha)));
        }
        if !(self.cp_cutoff > 0.0 && self.cp_cutoff < 1.0) {
            return Err(RosaError::InvalidConfig(format!(
                "cp_cutoff must be in (0, 1), got {}",
                self.cp_cutoff
            )));
        }
        Ok(())
    }

    /// Information fraction t_S = (N1^-1 + N0^-1) / (n1^-1 + n0^-1).
    pub fn information_fraction(&self) -> f64 {
        let inv = |x: u32| 1.0 / x as f64;
        (inv(self.n_final[1]) + inv(self.n_final[0])) / (inv(self.n_interim[1]) + inv(self.n_interim[0]))
    }
}

/// Conditional power of the final test given the interim auxiliary
/// z-statistic `z_s` and information fraction `t_s`.
pub fn conditional_power(z_s: f64, t_s: f64, alpha: f64) -> f64 {
    let z_crit = std_normal_quantile(1.0 - alpha);
    1.0 - std_normal_cdf((z_crit - z_s * t_s.sqrt()) / (1.0 - t_s).sqrt())
}

/// Draw a pair of correlated Bernoullis with marginals `p`, `q` and Pearson
/// correlation `rho`, via the 2x2 table pinned down by those three values.
///
/// Errors when the implied joint cell P(Y=1, S=1) violates the Frechet
/// bounds max(0, p+q-1) <= P11 <= min(p, q).
pub fn sample_bivariate_bernoulli(
    p: f64,
    q: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(bool, bool)> {
    let p11 = joint_cell(p, q, rho)?;
    let p10 = p - p11;
    let u: f64 = rng.gen();
    // Cells in order (1,1), (1,0), (0,1), (0,0).
    if u < p11 {
        Ok((true, true))
    } else if u < p11 + p10 {
        Ok((true, false))
    } else if u < p + (q - p11) {
        Ok((false, true))
    } else {
        Ok((false, false))
    }
}

/// Closed-form joint cell P(Y=1, S=1) for the bivariate Bernoulli, checked
/// against the Frechet bounds.
pub fn joint_cell(p: f64, q: f64, rho: f64) -> Result<f64> {
    let p11 = p * q + rho * (p * (1.0 - p) * q * (1.0 - q)).sqrt();
    let lo = (p + q - 1.0).max(0.0);
    let hi = p.min(q);
    let eps = 1e-12;
    if p11 < lo - eps {
        return Err(RosaError::InfeasibleJoint {
            p,
            q,
            rho,
            p11,
            bound: format!("lower Frechet bound max(0, p+q-1) = {lo}"),
        });
    }
    if p11 > hi + eps {
        return Err(RosaError::InfeasibleJoint {
            p,
            q,
            rho,
            p11,
            bound: format!("upper Frechet bound min(p, q) = {hi}"),
        });
    }
    Ok(p11.clamp(lo, hi))
}

/// Pooled-proportion z-statistic for a two-arm difference in response rates.
/// Returns 0 when the pooled variance vanishes.
fn pooled_z(successes: [u32; 2], n: [u32; 2]) -> f64 {
    let rate = |a: usize| successes[a] as f64 / n[a] as f64;
    let pooled = (successes[0] + successes[1]) as f64 / (n[0] + n[1]) as f64;
    let var = pooled * (1.0 - pooled) * (1.0 / n[1] as f64 + 1.0 / n[0] as f64);
    if var > 0.0 {
        (rate(1) - rate(0)) / var.sqrt()
    } else {
        0.0
    }
}

/// The auxiliary-outcome interim design over the 7-dimensional space
/// (e, p0, p1, q0, q1, rho0, rho1).
#[derive(Debug, Clone, Default)]
pub struct AuxInterimDesign {
    pub cfg: AuxInterimConfig,
}

impl AuxInterimDesign {
    pub fn new(cfg: AuxInterimConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

const DIM_P: [usize; 2] = [1, 2];
const DIM_Q: [usize; 2] = [3, 4];
const DIM_RHO: [usize; 2] = [5, 6];

impl TrialDesign for AuxInterimDesign {
    fn name(&self) -> &'static str {
        "aux-interim"
    }

    fn parameter_space(&self) -> ParameterSpace {
        ParameterSpace::new(
            vec!["e", "p0", "p1", "q0", "q1", "rho0", "rho1"]
                .into_iter()
                .map(String::from)
                .collect(),
            vec![0.2, 0.2, 0.2, 0.2, 0.2, 0.0, 0.0],
            vec![1.0, 0.4, 0.4, 0.4, 0.4, 0.6, 0.6],
        )
        .expect("static bounds")
    }

    fn oc_schema(&self) -> OcSchema {
        OcSchema::new(
            vec!["reject_prob".into(), "sample_size".into()],
            vec![OcKind::Probability, OcKind::Count],
        )
    }

    fn simulate_once(&self, theta: &Scenario, rng: &mut ChaCha8Rng) -> Result<OcContribution> {
        let cfg = &self.cfg;
        let mut y_interim = [0u32; 2];
        let mut s_interim = [0u32; 2];
        // Interim cohort: paired (primary, auxiliary) outcomes per arm. The
        // enrollment rate (dimension 0) does not enter either OC of this
        // design; it is a deliberate nuisance dimension.
        for arm in 0..2 {
            let (p, q, rho) = (
                theta.theta[DIM_P[arm]],
                theta.theta[DIM_Q[arm]],
                theta.theta[DIM_RHO[arm]],
            );
            for _ in 0..cfg.n_interim[arm] {
                let (y, s) = sample_bivariate_bernoulli(p, q, rho, rng)?;
                y_interim[arm] += y as u32;
                s_interim[arm] += s as u32;
            }
        }

        let z_s = pooled_z(s_interim, cfg.n_interim);
        let cp = conditional_power(z_s, cfg.information_fraction(), cfg.alpha);
        let interim_total = (cfg.n_interim[0] + cfg.n_interim[1]) as f64;
        if cp < cfg.cp_cutoff {
            // Futility stop: no rejection, realized sample size is the
            // interim cohort only.
            return Ok(OcContribution { values: vec![0.0, interim_total] });
        }

        // Complete enrollment; only the primary outcome is needed for the
        // post-interim patients.
        let mut y_final = y_interim;
        for arm in 0..2 {
            let p = theta.theta[DIM_P[arm]];
            for _ in 0..(cfg.n_final[arm] - cfg.n_interim[arm]) {
                y_final[arm] += draw_bernoulli(p, rng) as u32;
            }
        }
        let z_y = pooled_z(y_final, cfg.n_final);
        let reject = z_y > std_normal_quantile(1.0 - cfg.alpha);
        let final_total = (cfg.n_final[0] + cfg.n_final[1]) as f64;
        Ok(OcContribution {
            values: vec![if reject { 1.0 } else { 0.0 }, final_total],
        })
    }
}
