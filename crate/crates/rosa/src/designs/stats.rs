//! Small statistical helpers shared by the designs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn std_normal_cdf(z: f64) -> f64 {
    standard_normal().cdf(z)
}

pub fn std_normal_quantile(p: f64) -> f64 {
    // statrs' inverse CDF is only ~1e-9 accurate; one Newton step in the
    // well-conditioned region pushes the round trip to machine precision.
    let x = standard_normal().inverse_cdf(p);
    if x.abs() < 8.0 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        x - (std_normal_cdf(x) - p) / pdf
    } else {
        x
    }
}

/// Standard normal draw via inverse-CDF of a single uniform, so each draw
/// consumes exactly one value from the stream.
pub fn draw_std_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    std_normal_quantile(u.clamp(1e-300, 1.0 - 1e-16))
}

/// Exponential draw with the given rate.
pub fn draw_exponential(rate: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    -(1.0 - u).ln() / rate
}

pub fn draw_bernoulli(p: f64, rng: &mut ChaCha8Rng) -> bool {
    rng.gen::<f64>() < p
}

/// One observation for a two-group log-rank test.
#[derive(Debug, Clone, Copy)]
pub struct SurvObs {
    pub time: f64,
    pub event: bool,
    /// true = treatment group.
    pub treated: bool,
}

/// Standardized log-rank statistic (O - E)/sqrt(V) for the treatment group.
///
/// Negative values mean fewer treatment events than expected, i.e. treatment
/// benefit. Returns 0 when there is no variance (no events, or one group
/// empty at every event time).
pub fn log_rank_z(obs: &[SurvObs]) -> f64 {
    let mut sorted: Vec<&SurvObs> = obs.iter().collect();
    sorted.sort_by(|a, b| a.time.partial_cmp(&b.time).unwrap());

    let mut at_risk_total = sorted.len() as f64;
    let mut at_risk_treated = sorted.iter().filter(|o| o.treated).count() as f64;
    let mut observed_minus_expected = 0.0;
    let mut variance = 0.0;

    let mut i = 0;
    while i < sorted.len() {
        let t = sorted[i].time;
        // Gather all observations tied at this time.
        let mut deaths_total = 0.0;
        let mut deaths_treated = 0.0;
        let mut leaving_total = 0.0;
        let mut leaving_treated = 0.0;
        while i < sorted.len() && sorted[i].time == t {
            leaving_total += 1.0;
            if sorted[i].treated {
                leaving_treated += 1.0;
            }
            if sorted[i].event {
                deaths_total += 1.0;
                if sorted[i].treated {
                    deaths_treated += 1.0;
                }
            }
            i += 1;
        }
        if deaths_total > 0.0 && at_risk_total > 1.0 {
            let expected = deaths_total * at_risk_treated / at_risk_total;
            observed_minus_expected += deaths_treated - expected;
            variance += deaths_total
                * (at_risk_treated / at_risk_total)
                * (1.0 - at_risk_treated / at_risk_total)
                * (at_risk_total - deaths_total)
                / (at_risk_total - 1.0);
        }
        at_risk_total -= leaving_total;
        at_risk_treated -= leaving_treated;
    }

    if variance > 0.0 {
        observed_minus_expected / variance.sqrt()
    } else {
        0.0
    }
}
