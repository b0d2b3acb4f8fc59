//! Core data model: parameter spaces, scenarios, OC vectors and the
//! sensitivity report record.
//!
//! All types are immutable values after construction and safe to share
//! across parallel workers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::RosaError;
use crate::Result;

/// Bounded box of unknown parameters, optionally with some dimensions fixed
/// to constants (a restriction of the space).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    dim_names: Vec<String>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Map from dimension index to its fixed value. Ordered so that
    /// serialization and digests are stable.
    fixed: BTreeMap<usize, f64>,
}

impl ParameterSpace {
    pub fn new(dim_names: Vec<String>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if dim_names.is_empty() {
            return Err(RosaError::InvalidSpace("need at least one dimension".into()));
        }
        if dim_names.len() != lower.len() || dim_names.len() != upper.len() {
            return Err(RosaError::InvalidSpace(format!(
                "names/bounds length mismatch: {} names, {} lower, {} upper",
                dim_names.len(),
                lower.len(),
                upper.len()
            )));
        }
        for i in 0..dim_names.len() {
            if !(lower[i] < upper[i]) {
                return Err(RosaError::InvalidSpace(format!(
                    "dimension `{}`: lower {} must be < upper {}",
                    dim_names[i], lower[i], upper[i]
                )));
            }
            if dim_names.iter().filter(|n| **n == dim_names[i]).count() > 1 {
                return Err(RosaError::InvalidSpace(format!(
                    "duplicate dimension name `{}`",
                    dim_names[i]
                )));
            }
        }
        Ok(Self {
            dim_names,
            lower,
            upper,
            fixed: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim_names.len()
    }

    /// Number of dimensions that are not fixed.
    pub fn free_dim(&self) -> usize {
        self.dim() - self.fixed.len()
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn range(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    pub fn fixed_value(&self, i: usize) -> Option<f64> {
        self.fixed.get(&i).copied()
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed.contains_key(&i)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.dim_names.iter().position(|n| n == name)
    }

    /// Return a copy of this space with additional dimensions fixed.
    ///
    /// The box bounds are unchanged: a restricted space keeps the full
    /// coordinate system so its scenarios stay comparable with scenarios of
    /// the unrestricted space.
    pub fn restrict(&self, assignments: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = self.clone();
        for (name, &value) in assignments {
            let i = self
                .index_of(name)
                .ok_or_else(|| RosaError::UnknownDimension(name.clone()))?;
            if value < self.lower[i] || value > self.upper[i] {
                return Err(RosaError::OutOfBounds {
                    name: name.clone(),
                    value,
                    lower: self.lower[i],
                    upper: self.upper[i],
                });
            }
            out.fixed.insert(i, value);
        }
        Ok(out)
    }

    /// Drop all fixed assignments, recovering the unrestricted space.
    pub fn unrestricted(&self) -> Self {
        let mut out = self.clone();
        out.fixed.clear();
        out
    }

    /// Clamp a raw vector into the space: free coordinates projected onto
    /// their bounds, fixed coordinates overwritten with their fixed values.
    pub fn clamp(&self, theta: &[f64]) -> Result<Scenario> {
        if theta.len() != self.dim() {
            return Err(RosaError::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        let values = theta
            .iter()
            .enumerate()
            .map(|(i, &v)| match self.fixed.get(&i) {
                Some(&f) => f,
                None => v.clamp(self.lower[i], self.upper[i]),
            })
            .collect();
        Ok(Scenario { theta: values })
    }

    /// Check that a scenario satisfies the space invariants.
    pub fn contains(&self, s: &Scenario) -> bool {
        s.theta.len() == self.dim()
            && s.theta.iter().enumerate().all(|(i, &v)| match self.fixed.get(&i) {
                Some(&f) => v == f,
                None => v >= self.lower[i] && v <= self.upper[i],
            })
    }
}

/// One concrete assignment of all unknown parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub theta: Vec<f64>,
}

impl Scenario {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }
}

/// An unordered set of K scenarios. Loss evaluation is invariant under
/// permutation of the members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    pub fn new(scenarios: Vec<Scenario>) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(RosaError::InvalidConfig("scenario set must be nonempty".into()));
        }
        Ok(Self { scenarios })
    }

    pub fn k(&self) -> usize {
        self.scenarios.len()
    }
}

/// Kind tag of an operating characteristic, with its implied range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcKind {
    /// Lies in [0, 1]; per-trial contributions are 0/1 indicators.
    Probability,
    /// Non-negative count (e.g. realized sample size).
    Count,
    /// Non-negative duration.
    Duration,
    Other,
}

/// Names and kinds of the R operating characteristics of a design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcSchema {
    pub names: Vec<String>,
    pub kinds: Vec<OcKind>,
}

impl OcSchema {
    pub fn new(names: Vec<String>, kinds: Vec<OcKind>) -> Self {
        assert_eq!(names.len(), kinds.len());
        Self { names, kinds }
    }

    pub fn r(&self) -> usize {
        self.names.len()
    }
}

/// The R operating-characteristic values at one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcVector {
    pub values: Vec<f64>,
}

impl OcVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn r(&self) -> usize {
        self.values.len()
    }

    /// Range check against a schema: probability entries in [0,1], counts
    /// and durations non-negative and finite.
    pub fn conforms(&self, schema: &OcSchema) -> bool {
        self.values.len() == schema.r()
            && self.values.iter().zip(&schema.kinds).all(|(&v, kind)| match kind {
                OcKind::Probability => (0.0..=1.0).contains(&v),
                OcKind::Count | OcKind::Duration => v.is_finite() && v >= 0.0,
                OcKind::Other => v.is_finite(),
            })
    }
}

/// Final product of a run: the selected scenarios, their OCs, the achieved
/// loss and enough metadata to reproduce the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub design: String,
    pub dim_names: Vec<String>,
    pub oc_names: Vec<String>,
    pub scenario_set: ScenarioSet,
    /// Surrogate predictions at the selected scenarios.
    pub oc_surrogate: Vec<OcVector>,
    /// Fresh Monte Carlo re-estimates at the selected scenarios, if run.
    pub oc_fresh_mc: Option<Vec<OcVector>>,
    pub achieved_loss: f64,
    pub per_oc_marginal_losses: Vec<f64>,
    /// Cloud point attaining the max in the achieved loss.
    pub witness: Scenario,
    pub seed: u64,
    pub config_digest: String,
}
