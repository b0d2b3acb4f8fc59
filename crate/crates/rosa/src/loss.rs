//! Coverage loss: how badly the worst-covered point of the reachable OC
//! surface is represented by the selected scenarios.
//!
//! The distance between two OC vectors is a weighted, scaled L1 metric. The
//! loss of a candidate set is the maximum over a finite cloud of reference
//! scenarios of the distance to the nearest candidate, i.e. a k-center
//! objective on the OC surface.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RosaError;
use crate::model::{OcVector, Scenario};
use crate::surrogate::Surrogate;
use crate::Result;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Weights and scales of the OC metric. Weights are non-negative and sum to
/// one; scales are strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    weights: Vec<f64>,
    scales: Vec<f64>,
}

impl LossSpec {
    pub fn new(weights: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != scales.len() {
            return Err(RosaError::InvalidConfig(format!(
                "loss spec needs matching nonempty weights/scales, got {}/{}",
                weights.len(),
                scales.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RosaError::InvalidConfig("weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(RosaError::InvalidConfig(format!(
                "weights must sum to 1, got {total}"
            )));
        }
        if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(RosaError::InvalidConfig("scales must be positive".into()));
        }
        Ok(Self { weights, scales })
    }

    /// Equal weights 1/R, unit scales.
    pub fn uniform(r: usize) -> Result<Self> {
        Self::new(vec![1.0 / r as f64; r], vec![1.0; r])
    }

    /// Indicator weight on OC `oc`, unit scales: the marginal metric D_r.
    pub fn marginal(r: usize, oc: usize) -> Result<Self> {
        if oc >= r {
            return Err(RosaError::OcIndexOutOfRange { index: oc, r });
        }
        let mut weights = vec![0.0; r];
        weights[oc] = 1.0;
        Self::new(weights, vec![1.0; r])
    }

    pub fn r(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }
}

/// D(a, b) = sum_r w_r |a_r - b_r| / s_r.
pub fn metric_d(a: &OcVector, b: &OcVector, spec: &LossSpec) -> Result<f64> {
    if a.r() != spec.r() || b.r() != spec.r() {
        return Err(RosaError::DimensionMismatch {
            expected: spec.r(),
            got: if a.r() != spec.r() { a.r() } else { b.r() },
        });
    }
    Ok(a.values
        .iter()
        .zip(&b.values)
        .zip(spec.weights.iter().zip(&spec.scales))
        .map(|((x, y), (w, s))| w * (x - y).abs() / s)
        .sum())
}

/// Fixed reference cloud with its OC predictions precomputed once, so each
/// loss evaluation during search is pure arithmetic.
#[derive(Debug, Clone)]
pub struct OcCache {
    pub points: Vec<Scenario>,
    pub ocs: Vec<OcVector>,
    /// Digest of the surrogate that produced the predictions.
    pub model_digest: String,
}

impl OcCache {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Evaluate the surrogate over the cloud once.
pub fn build_cache(model: &dyn Surrogate, cloud: &[Scenario]) -> Result<OcCache> {
    if cloud.is_empty() {
        return Err(RosaError::InvalidConfig("reference cloud must be nonempty".into()));
    }
    Ok(OcCache {
        points: cloud.to_vec(),
        ocs: model.predict_batch(cloud)?,
        model_digest: model.digest(),
    })
}

/// Achieved loss with the cloud point attaining the maximum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    pub loss: f64,
    /// Index into the cache of the worst-covered cloud point.
    pub witness: usize,
}

/// L-hat = max over the cloud of the distance to the nearest candidate.
///
/// Invariant under permutation of the candidates. Ties in the maximum are
/// broken toward the lowest cloud index so the witness is deterministic.
pub fn loss_hat(candidate_ocs: &[OcVector], cache: &OcCache, spec: &LossSpec) -> Result<LossValue> {
    if candidate_ocs.is_empty() {
        return Err(RosaError::InvalidConfig("need at least one candidate".into()));
    }
    for oc in candidate_ocs.iter().chain(cache.ocs.iter()) {
        if oc.r() != spec.r() {
            return Err(RosaError::DimensionMismatch { expected: spec.r(), got: oc.r() });
        }
    }
    let best = cache
        .ocs
        .par_iter()
        .enumerate()
        .map(|(i, cloud_oc)| {
            let nearest = candidate_ocs
                .iter()
                .map(|cand| {
                    cand.values
                        .iter()
                        .zip(&cloud_oc.values)
                        .zip(spec.weights.iter().zip(&spec.scales))
                        .map(|((x, y), (w, s))| w * (x - y).abs() / s)
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min);
            (i, nearest)
        })
        .reduce(
            || (usize::MAX, f64::NEG_INFINITY),
            |a, b| {
                // Strict max with lowest-index tie break; witness is stable
                // regardless of rayon's reduction tree shape.
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(LossValue { loss: best.1, witness: best.0 })
}

/// Loss of a scenario set: predicts the K candidate OCs once, then scans the
/// cloud. Returns the loss, the witness, and the candidate predictions.
pub fn loss_hat_set(
    set: &crate::model::ScenarioSet,
    cache: &OcCache,
    model: &dyn Surrogate,
    spec: &LossSpec,
) -> Result<(LossValue, Vec<OcVector>)> {
    let ocs = model.predict_batch(&set.scenarios)?;
    let value = loss_hat(&ocs, cache, spec)?;
    Ok((value, ocs))
}

/// Marginal loss L_r of a scenario set: loss under the indicator metric D_r.
pub fn marginal_loss_set(
    set: &crate::model::ScenarioSet,
    cache: &OcCache,
    model: &dyn Surrogate,
    oc: usize,
) -> Result<LossValue> {
    let r = cache.ocs.first().map_or(0, OcVector::r);
    let ocs = model.predict_batch(&set.scenarios)?;
    loss_hat(&ocs, cache, &LossSpec::marginal(r, oc)?)
}

/// Default per-OC scales: probability OCs keep unit scale, everything else
/// is divided by its range over the cloud so no OC dominates the metric.
pub fn default_scales(schema: &crate::model::OcSchema, cache: &OcCache) -> Vec<f64> {
    (0..schema.r())
        .map(|oc| match schema.kinds[oc] {
            crate::model::OcKind::Probability => 1.0,
            _ => {
                let lo = cache.ocs.iter().map(|v| v.values[oc]).fold(f64::INFINITY, f64::min);
                let hi =
                    cache.ocs.iter().map(|v| v.values[oc]).fold(f64::NEG_INFINITY, f64::max);
                if hi - lo > 0.0 {
                    hi - lo
                } else {
                    1.0
                }
            }
        })
        .collect()
}

/// Marginal loss per OC: the loss under the indicator metric D_r.
pub fn marginal_losses(candidate_ocs: &[OcVector], cache: &OcCache) -> Result<Vec<f64>> {
    let r = cache.ocs.first().map_or(0, OcVector::r);
    (0..r)
        .map(|oc| Ok(loss_hat(candidate_ocs, cache, &LossSpec::marginal(r, oc)?)?.loss))
        .collect()
}

/// Utility = negative loss; the quantity simulated annealing maximizes.
pub fn utility(candidate_ocs: &[OcVector], cache: &OcCache, spec: &LossSpec) -> Result<f64> {
    Ok(-loss_hat(candidate_ocs, cache, spec)?.loss)
}
