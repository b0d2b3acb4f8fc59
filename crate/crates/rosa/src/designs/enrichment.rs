//! Biomarker-driven adaptive enrichment design with a single interim
//! analysis. PFS drives the interim enrichment decision; OS, analyzed with an
//! inverse-normal combination of stage-wise log-rank p-values, drives the
//! final test. OCs: probability of enriching to biomarker-positive patients,
//! probability of continuing with all patients, and probability of no
//! rejection.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::designs::stats::{
    draw_bernoulli, draw_exponential, log_rank_z, std_normal_cdf, std_normal_quantile, SurvObs,
};
use crate::designs::{OcContribution, TrialDesign};
use crate::error::RosaError;
use crate::model::{OcKind, OcSchema, ParameterSpace, Scenario};
use crate::Result;

const WEEKS_PER_MONTH: f64 = 365.25 / 12.0 / 7.0;

/// Configuration of the adaptive enrichment design.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnrichmentConfig {
    pub stage1_n: u32,
    pub stage2_n: u32,
    /// OS event count in the analysis population triggering the final
    /// analysis.
    pub os_events_final: u32,
    /// Enrich to biomarker-positive when the subgroup PFS HR estimate falls
    /// below this.
    pub hr_plus_threshold: f64,
    /// Overall PFS HR estimate threshold.
    pub hr_overall_threshold: f64,
    /// Stage-wise combination weights; must satisfy w1^2 + w2^2 = 1.
    pub omega1: f64,
    pub omega2: f64,
    pub control_median_pfs_months: f64,
    pub control_median_os_months: f64,
    /// Final critical value for the combined statistic.
    pub z_crit: f64,
    /// One-sided level per hypothesis when both are tested (interim branch
    /// with promising results in both populations).
    pub dual_test_alpha: f64,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        let w = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            stage1_n: 120,
            stage2_n: 70,
            os_events_final: 110,
            hr_plus_threshold: 0.6,
            hr_overall_threshold: 0.8,
            omega1: w,
            omega2: w,
            control_median_pfs_months: 4.0,
            control_median_os_months: 12.0,
            z_crit: 1.96,
            dual_test_alpha: 0.0125,
        }
    }
}

impl EnrichmentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_n == 0 || self.stage2_n == 0 || self.os_events_final == 0 {
            return Err(RosaError::InvalidConfig("counts must be positive".into()));
        }
        for (name, t) in [
            ("hr_plus_threshold", self.hr_plus_threshold),
            ("hr_overall_threshold", self.hr_overall_threshold),
        ] {
            if !(t > 0.0 && t < 1.5) {
                return Err(RosaError::InvalidConfig(format!("{name} must be in (0, 1.5), got {t}")));
            }
        }
        if !(self.omega1 > 0.0 && self.omega2 > 0.0) {
            return Err(RosaError::InvalidConfig("combination weights must be positive".into()));
        }
        if (self.omega1.powi(2) + self.omega2.powi(2) - 1.0).abs() > 1e-9 {
            return Err(RosaError::InvalidConfig(format!(
                "combination weights must satisfy w1^2 + w2^2 = 1, got {} and {}",
                self.omega1, self.omega2
            )));
        }
        if !(self.control_median_pfs_months > 0.0 && self.control_median_os_months > 0.0) {
            return Err(RosaError::InvalidConfig("control medians must be positive".into()));
        }
        if !(self.dual_test_alpha > 0.0 && self.dual_test_alpha < 0.5) {
            return Err(RosaError::InvalidConfig("dual_test_alpha must be in (0, 0.5)".into()));
        }
        Ok(())
    }
}

/// Outcome of the interim enrichment decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterimBranch {
    /// Promising in the biomarker-positive subgroup only: enrich.
    EnrichPositive,
    /// Promising overall only: continue with all patients.
    ContinueOverall,
    /// Unpromising everywhere: stop for futility.
    FutilityStop,
    /// Promising in both: continue with all patients, test both hypotheses.
    ContinueBoth,
}

/// Branch classification as a pure function of the interim HR estimates.
pub fn interim_branch(hr_plus: f64, hr_overall: f64, cfg: &EnrichmentConfig) -> InterimBranch {
    let plus_promising = hr_plus < cfg.hr_plus_threshold;
    let overall_promising = hr_overall < cfg.hr_overall_threshold;
    match (plus_promising, overall_promising) {
        (true, false) => InterimBranch::EnrichPositive,
        (false, true) => InterimBranch::ContinueOverall,
        (false, false) => InterimBranch::FutilityStop,
        (true, true) => InterimBranch::ContinueBoth,
    }
}

/// Draw a correlated pair of exponentials with the given rates and Pearson
/// correlation `rho` in [0, 1), via a comonotone mixture: with probability
/// `rho` the second time is the matching-quantile transform of the first
/// (exactly `t1 * rate1 / rate2` for exponential marginals, which has
/// correlation 1), otherwise an independent draw.
pub fn sample_correlated_exponentials(
    rate1: f64,
    rate2: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&rho) {
        return Err(RosaError::InvalidCorrelation(rho));
    }
    let t1 = draw_exponential(rate1, rng);
    let comonotone = draw_bernoulli(rho, rng);
    let t2 = if comonotone {
        t1 * rate1 / rate2
    } else {
        draw_exponential(rate2, rng)
    };
    Ok((t1, t2))
}

#[derive(Debug, Clone, Copy)]
struct Patient {
    /// Calendar enrollment time in months.
    arrival: f64,
    treated: bool,
    positive: bool,
    /// Months from randomization.
    pfs: f64,
    os: f64,
    stage2: bool,
}

/// HR estimate from the log-rank statistic via exp(Z * sqrt(4 / events)).
/// Returns 1 when there are no events to estimate from.
fn hr_from_log_rank(obs: &[SurvObs]) -> f64 {
    let events = obs.iter().filter(|o| o.event).count();
    if events == 0 {
        return 1.0;
    }
    (log_rank_z(obs) * (4.0 / events as f64).sqrt()).exp()
}

/// One-sided log-rank p-value for treatment benefit (small when treatment
/// has fewer events than expected).
fn log_rank_p(obs: &[SurvObs]) -> f64 {
    std_normal_cdf(log_rank_z(obs))
}

/// The adaptive enrichment design over its 8-dimensional space.
#[derive(Debug, Clone, Default)]
pub struct EnrichmentDesign {
    pub cfg: EnrichmentConfig,
}

impl EnrichmentDesign {
    pub fn new(cfg: EnrichmentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    fn draw_patient(
        &self,
        theta: &Scenario,
        arrival: f64,
        positive: bool,
        rng: &mut ChaCha8Rng,
        stage2: bool,
    ) -> Result<Patient> {
        let [_, _, hr_pfs_pos, hr_pfs_neg, hr_os_pos, hr_os_neg, corr_pos, corr_neg] =
            theta.theta[..8].try_into().expect("8 dims");
        let treated = draw_bernoulli(0.5, rng);
        let (hr_pfs, hr_os, corr) = if positive {
            (hr_pfs_pos, hr_os_pos, corr_pos)
        } else {
            (hr_pfs_neg, hr_os_neg, corr_neg)
        };
        let base_pfs = std::f64::consts::LN_2 / self.cfg.control_median_pfs_months;
        let base_os = std::f64::consts::LN_2 / self.cfg.control_median_os_months;
        let (rate_pfs, rate_os) = if treated {
            (base_pfs * hr_pfs, base_os * hr_os)
        } else {
            (base_pfs, base_os)
        };
        let (pfs, os) = sample_correlated_exponentials(rate_pfs, rate_os, corr, rng)?;
        Ok(Patient { arrival, treated, positive, pfs, os, stage2 })
    }
}

/// Observations of `pick`ed patients with OS administratively censored at
/// calendar time `cutoff`.
fn os_obs(patients: &[Patient], cutoff: f64, pick: impl Fn(&Patient) -> bool) -> Vec<SurvObs> {
    patients
        .iter()
        .filter(|p| pick(p))
        .map(|p| {
            let follow = (cutoff - p.arrival).max(0.0);
            SurvObs {
                time: p.os.min(follow),
                event: p.os <= follow,
                treated: p.treated,
            }
        })
        .collect()
}

impl TrialDesign for EnrichmentDesign {
    fn name(&self) -> &'static str {
        "enrichment"
    }

    fn parameter_space(&self) -> ParameterSpace {
        ParameterSpace::new(
            vec![
                "rec_rate", "prevalence", "hr_pfs_pos", "hr_pfs_neg", "hr_os_pos", "hr_os_neg",
                "corr_pos", "corr_neg",
            ]
            .into_iter()
            .map(String::from)
            .collect(),
            vec![0.5, 0.15, 0.5, 0.6, 0.7, 0.8, 0.3, 0.2],
            vec![1.0, 0.25, 1.2, 1.2, 1.2, 1.2, 0.6, 0.7],
        )
        .expect("static bounds")
    }

    fn oc_schema(&self) -> OcSchema {
        OcSchema::new(
            vec![
                "enrich_positive_prob".into(),
                "continue_all_prob".into(),
                "no_rejection_prob".into(),
            ],
            vec![OcKind::Probability, OcKind::Probability, OcKind::Probability],
        )
    }

    fn simulate_once(&self, theta: &Scenario, rng: &mut ChaCha8Rng) -> Result<OcContribution> {
        let cfg = &self.cfg;
        let rec_rate_per_week = theta.theta[0];
        let prevalence = theta.theta[1];

        // Stage 1 accrual: Poisson arrivals at the recruitment rate.
        let mut patients = Vec::with_capacity((cfg.stage1_n + cfg.stage2_n) as usize);
        let mut clock = 0.0;
        for _ in 0..cfg.stage1_n {
            clock += draw_exponential(rec_rate_per_week, rng) / WEEKS_PER_MONTH;
            let positive = draw_bernoulli(prevalence, rng);
            patients.push(self.draw_patient(theta, clock, positive, rng, false)?);
        }
        let interim_time = clock;

        // Interim PFS log-rank HR estimates, censored at the interim.
        let pfs_obs = |pick: &dyn Fn(&Patient) -> bool| -> Vec<SurvObs> {
            patients
                .iter()
                .filter(|p| pick(p))
                .map(|p| {
                    let follow = (interim_time - p.arrival).max(0.0);
                    SurvObs {
                        time: p.pfs.min(follow),
                        event: p.pfs <= follow,
                        treated: p.treated,
                    }
                })
                .collect()
        };
        let hr_overall = hr_from_log_rank(&pfs_obs(&|_| true));
        let hr_plus = hr_from_log_rank(&pfs_obs(&|p: &Patient| p.positive));
        let branch = interim_branch(hr_plus, hr_overall, cfg);

        let (f1, f2) = match branch {
            InterimBranch::EnrichPositive => (1.0, 0.0),
            InterimBranch::ContinueOverall | InterimBranch::ContinueBoth => (0.0, 1.0),
            InterimBranch::FutilityStop => (0.0, 0.0),
        };
        if branch == InterimBranch::FutilityStop {
            return Ok(OcContribution { values: vec![f1, f2, 1.0] });
        }

        // Stage 2 accrual. When enriching, only biomarker-positive patients
        // are enrolled; screening out negatives thins the arrival process by
        // the prevalence.
        let enrich = branch == InterimBranch::EnrichPositive;
        let stage2_rate = if enrich {
            rec_rate_per_week * prevalence
        } else {
            rec_rate_per_week
        };
        let mut clock = interim_time;
        for _ in 0..cfg.stage2_n {
            clock += draw_exponential(stage2_rate, rng) / WEEKS_PER_MONTH;
            let positive = enrich || draw_bernoulli(prevalence, rng);
            patients.push(self.draw_patient(theta, clock, positive, rng, true)?);
        }

        // Final analysis fires when the analysis population reaches the
        // target OS event count (or at the last event if fewer are possible).
        let in_population = |p: &Patient| !enrich || p.positive;
        let mut event_times: Vec<f64> = patients
            .iter()
            .filter(|p| in_population(p))
            .map(|p| p.arrival + p.os)
            .collect();
        event_times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = (cfg.os_events_final as usize).min(event_times.len());
        let final_time = event_times[idx - 1];

        // Inverse-normal combination of stage-wise OS log-rank p-values.
        let combined = |pick: &dyn Fn(&Patient) -> bool| -> f64 {
            let p1 = log_rank_p(&os_obs(&patients, final_time, |p| !p.stage2 && pick(p)));
            let p2 = log_rank_p(&os_obs(&patients, final_time, |p| p.stage2 && pick(p)));
            cfg.omega1 * std_normal_quantile(1.0 - p1) + cfg.omega2 * std_normal_quantile(1.0 - p2)
        };

        let any_rejection = match branch {
            InterimBranch::EnrichPositive => combined(&|p: &Patient| p.positive) > cfg.z_crit,
            InterimBranch::ContinueOverall => combined(&|_| true) > cfg.z_crit,
            InterimBranch::ContinueBoth => {
                // Both hypotheses tested, each at the split one-sided level.
                let z_dual = std_normal_quantile(1.0 - cfg.dual_test_alpha);
                combined(&|p: &Patient| p.positive) > z_dual || combined(&|_| true) > z_dual
            }
            InterimBranch::FutilityStop => unreachable!(),
        };

        Ok(OcContribution {
            values: vec![f1, f2, if any_rejection { 0.0 } else { 1.0 }],
        })
    }
}
