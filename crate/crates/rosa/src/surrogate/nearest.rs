//! Nearest-neighbor surrogate: predicts the training OC estimate of the
//! closest training scenario in bound-scaled coordinates. Serves as a cheap
//! cross-check on the MLP; it cannot extrapolate, so it stays honest about
//! the training coverage.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::RosaError;
use crate::mc::TrainingSet;
use crate::model::{OcSchema, OcVector, ParameterSpace, Scenario};
use crate::surrogate::Surrogate;
use crate::Result;

pub struct NearestNeighborSurrogate {
    space: ParameterSpace,
    schema: OcSchema,
    /// Training thetas in bound-scaled coordinates.
    scaled: Vec<Vec<f64>>,
    oc_means: Vec<OcVector>,
}

impl NearestNeighborSurrogate {
    pub fn fit(train: &TrainingSet, space: &ParameterSpace, schema: &OcSchema) -> Result<Self> {
        if train.is_empty() {
            return Err(RosaError::Training("empty training set".into()));
        }
        let scaled = train
            .scenarios
            .iter()
            .map(|s| {
                if s.dim() != space.dim() {
                    return Err(RosaError::DimensionMismatch {
                        expected: space.dim(),
                        got: s.dim(),
                    });
                }
                Ok(scale(&s.theta, space))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space: space.clone(),
            schema: schema.clone(),
            scaled,
            oc_means: train.oc_means.clone(),
        })
    }
}

fn scale(theta: &[f64], space: &ParameterSpace) -> Vec<f64> {
    theta
        .iter()
        .enumerate()
        .map(|(i, v)| (v - space.lower()[i]) / space.range(i))
        .collect()
}

impl Surrogate for NearestNeighborSurrogate {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn schema(&self) -> &OcSchema {
        &self.schema
    }

    fn predict_batch(&self, thetas: &[Scenario]) -> Result<Vec<OcVector>> {
        for s in thetas {
            if s.dim() != self.space.dim() {
                return Err(RosaError::DimensionMismatch {
                    expected: self.space.dim(),
                    got: s.dim(),
                });
            }
        }
        Ok(thetas
            .par_iter()
            .map(|s| {
                let x = scale(&s.theta, &self.space);
                // Ties broken by the first (lowest-index) training row.
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, t) in self.scaled.iter().enumerate() {
                    let d: f64 = x.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum();
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                self.oc_means[best].clone()
            })
            .collect())
    }

    fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(&self.scaled).expect("serializable"));
        hasher.update(serde_json::to_string(&self.oc_means).expect("serializable"));
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
