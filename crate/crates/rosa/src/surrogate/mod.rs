//! Regression surrogates for the scenario-to-OC map, fitted on Monte Carlo
//! training estimates, plus the independent validation machinery.

mod mlp;
mod nearest;

pub use mlp::{gradient_check, Mlp, MlpConfig, TrainingRecord};
pub use nearest::NearestNeighborSurrogate;

use serde::{Deserialize, Serialize};

use crate::mc::TrainingSet;
use crate::model::{OcSchema, OcVector, ParameterSpace, Scenario};
use crate::Result;

/// A fitted, immutable scenario-to-OC regression.
pub trait Surrogate: Send + Sync {
    fn space(&self) -> &ParameterSpace;

    fn schema(&self) -> &OcSchema;

    /// Batch prediction; must be a pure function of the inputs, and equal to
    /// mapping single-point calls.
    fn predict_batch(&self, thetas: &[Scenario]) -> Result<Vec<OcVector>>;

    fn predict(&self, theta: &Scenario) -> Result<OcVector> {
        Ok(self.predict_batch(std::slice::from_ref(theta))?.pop().expect("one output"))
    }

    /// Stable identifier of the fitted state, used to pair caches with the
    /// model that produced them.
    fn digest(&self) -> String;
}

/// Per-OC comparison of surrogate predictions against independent MC
/// estimates, with the paired points retained for scatter export.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub oc_names: Vec<String>,
    /// Coefficient of determination per OC; NaN when the MC estimates are
    /// constant (degenerate target, flagged instead of computed).
    pub r_squared: Vec<f64>,
    pub rmse: Vec<f64>,
    pub max_abs_diff: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub mc_estimates: Vec<OcVector>,
    pub predictions: Vec<OcVector>,
}

impl ValidationReport {
    /// Smallest defined R^2 across OCs; NaN if every OC is degenerate.
    pub fn min_r_squared(&self) -> f64 {
        self.r_squared
            .iter()
            .copied()
            .filter(|r| !r.is_nan())
            .fold(f64::NAN, |acc, r| if acc.is_nan() || r < acc { r } else { acc })
    }

    pub fn has_degenerate_oc(&self) -> bool {
        self.r_squared.iter().any(|r| r.is_nan())
    }
}

/// Compare surrogate predictions with independent MC estimates at the
/// validation scenarios.
pub fn validate(model: &dyn Surrogate, val: &TrainingSet) -> Result<ValidationReport> {
    let predictions = model.predict_batch(&val.scenarios)?;
    let r = model.schema().r();
    let n = val.len() as f64;
    let mut r_squared = Vec::with_capacity(r);
    let mut rmse = Vec::with_capacity(r);
    let mut max_abs_diff = Vec::with_capacity(r);
    for oc in 0..r {
        let mean_bar = val.oc_means.iter().map(|v| v.values[oc]).sum::<f64>() / n;
        let ss_tot: f64 = val.oc_means.iter().map(|v| (v.values[oc] - mean_bar).powi(2)).sum();
        let ss_res: f64 = val
            .oc_means
            .iter()
            .zip(&predictions)
            .map(|(bar, hat)| (hat.values[oc] - bar.values[oc]).powi(2))
            .sum();
        r_squared.push(if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { f64::NAN });
        rmse.push((ss_res / n).sqrt());
        max_abs_diff.push(
            val.oc_means
                .iter()
                .zip(&predictions)
                .map(|(bar, hat)| (hat.values[oc] - bar.values[oc]).abs())
                .fold(0.0, f64::max),
        );
    }
    Ok(ValidationReport {
        oc_names: model.schema().names.clone(),
        r_squared,
        rmse,
        max_abs_diff,
        scenarios: val.scenarios.clone(),
        mc_estimates: val.oc_means.clone(),
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OcKind;

    /// Surrogate that replays fixed values; used to exercise `validate`.
    struct Fixed {
        space: ParameterSpace,
        schema: OcSchema,
        values: Vec<OcVector>,
    }

    impl Surrogate for Fixed {
        fn space(&self) -> &ParameterSpace {
            &self.space
        }
        fn schema(&self) -> &OcSchema {
            &self.schema
        }
        fn predict_batch(&self, thetas: &[Scenario]) -> Result<Vec<OcVector>> {
            Ok(thetas
                .iter()
                .map(|s| self.values[s.theta[0] as usize].clone())
                .collect())
        }
        fn digest(&self) -> String {
            "fixed".into()
        }
    }

    fn fixture(values: Vec<f64>) -> (Fixed, TrainingSet) {
        let space = ParameterSpace::new(vec!["i".into()], vec![0.0], vec![100.0]).unwrap();
        let schema = OcSchema::new(vec!["oc".into()], vec![OcKind::Other]);
        let scenarios: Vec<Scenario> =
            (0..values.len()).map(|i| Scenario::new(vec![i as f64])).collect();
        let oc_means: Vec<OcVector> = values.iter().map(|&v| OcVector::new(vec![v])).collect();
        let model = Fixed { space, schema, values: oc_means.clone() };
        let set = TrainingSet {
            scenarios,
            oc_means,
            reps: 1,
            mc_se: vec![vec![0.0]; values.len()],
        };
        (model, set)
    }

    #[test]
    fn perfect_surrogate_scores_one() {
        let (model, set) = fixture(vec![1.0, 2.0, 5.0, -1.0]);
        let report = validate(&model, &set).unwrap();
        assert_eq!(report.r_squared, vec![1.0]);
        assert_eq!(report.rmse, vec![0.0]);
        assert_eq!(report.max_abs_diff, vec![0.0]);
    }

    #[test]
    fn constant_target_is_flagged() {
        let (model, set) = fixture(vec![3.0, 3.0, 3.0]);
        let report = validate(&model, &set).unwrap();
        assert!(report.r_squared[0].is_nan());
        assert!(report.has_degenerate_oc());
        assert!(report.min_r_squared().is_nan());
    }

    #[test]
    fn r_squared_matches_naive_two_pass_reference() {
        let (model, mut set) = fixture(vec![0.1, 0.9, 0.4, 0.7, 0.25]);
        // Perturb the MC estimates so the fit is imperfect.
        for (i, oc) in set.oc_means.iter_mut().enumerate() {
            oc.values[0] += 0.03 * (i as f64 - 2.0);
        }
        let report = validate(&model, &set).unwrap();

        // Naive reference: explicit two-pass computation.
        let bars: Vec<f64> = set.oc_means.iter().map(|v| v.values[0]).collect();
        let hats: Vec<f64> = report.predictions.iter().map(|v| v.values[0]).collect();
        let mean = bars.iter().sum::<f64>() / bars.len() as f64;
        let mut ss_tot = 0.0;
        let mut ss_res = 0.0;
        for (b, h) in bars.iter().zip(&hats) {
            ss_tot += (b - mean) * (b - mean);
            ss_res += (h - b) * (h - b);
        }
        let reference = 1.0 - ss_res / ss_tot;
        assert!((report.r_squared[0] - reference).abs() < 1e-12);
        assert!(report.r_squared[0] < 1.0);
    }
}
