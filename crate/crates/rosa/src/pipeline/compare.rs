//! Comparison studies: selection from a restricted candidate space versus
//! the full space, and per-OC marginal selection versus joint selection.
//!
//! Both studies always measure losses against the same full-space cloud
//! cache, so the numbers are directly comparable.

use serde::{Deserialize, Serialize};

use crate::anneal::{k_sweep, sa_replicates, SaConfig};
use crate::error::RosaError;
use crate::loss::{loss_hat, LossSpec, OcCache};
use crate::model::ParameterSpace;
use crate::surrogate::Surrogate;
use crate::Result;

/// Best loss per K under both candidate spaces.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestrictionRow {
    pub k: usize,
    pub loss_full: f64,
    pub loss_restricted: f64,
}

/// For each K, run monotone-cleaned sweeps over the full and the restricted
/// candidate space against one shared cache.
#[allow(clippy::too_many_arguments)]
pub fn compare_restriction(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    full_space: &ParameterSpace,
    restricted_space: &ParameterSpace,
    cfg_template: &SaConfig,
    ks: &[usize],
    n_chains: usize,
    seed: u64,
) -> Result<Vec<RestrictionRow>> {
    let full = k_sweep(model, cache, spec, full_space, cfg_template, ks, n_chains, seed)?;
    let restricted =
        k_sweep(model, cache, spec, restricted_space, cfg_template, ks, n_chains, seed)?;
    Ok(full
        .into_iter()
        .zip(restricted)
        .map(|(f, r)| RestrictionRow {
            k: f.k,
            loss_full: f.best_loss,
            loss_restricted: r.best_loss,
        })
        .collect())
}

/// Marginal loss L_r of the jointly selected set S versus the set S_r
/// selected under L_r alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarginalRow {
    pub k: usize,
    pub oc: usize,
    /// L_r(S_r): best marginal loss when optimizing for this OC only.
    pub loss_sr: f64,
    /// L_r(S): marginal loss of the joint selection.
    pub loss_s: f64,
    /// (loss_s - loss_sr) / loss_sr.
    pub relative_diff: f64,
    /// True when the relative difference is below 10%.
    pub small: bool,
}

const SMALL_DIFF: f64 = 0.10;

/// Run joint and per-OC marginal selection for each K.
#[allow(clippy::too_many_arguments)]
pub fn compare_marginals(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    candidate_space: &ParameterSpace,
    cfg_template: &SaConfig,
    ks: &[usize],
    n_chains: usize,
    seed: u64,
) -> Result<Vec<MarginalRow>> {
    let r = model.schema().r();
    if r < 2 {
        return Err(RosaError::InvalidConfig(
            "marginal comparison needs at least two OCs".into(),
        ));
    }
    if ks.is_empty() {
        return Err(RosaError::InvalidConfig("K list must be nonempty".into()));
    }
    let mut rows = Vec::new();
    for &k in ks {
        let cfg = SaConfig { k, ..cfg_template.clone() };
        // Joint selection S under the weighted metric.
        let (traces, summary) =
            sa_replicates(model, cache, spec, candidate_space, &cfg, n_chains, seed)?;
        let s_ocs = model.predict_batch(&traces[summary.best_chain].best_set.scenarios)?;
        for oc in 0..r {
            let marginal = LossSpec::marginal(r, oc)?;
            let (m_traces, m_summary) = sa_replicates(
                model,
                cache,
                &marginal,
                candidate_space,
                &cfg,
                n_chains,
                seed.wrapping_add(1 + oc as u64),
            )?;
            let loss_sr = m_traces[m_summary.best_chain].best_loss;
            let loss_s = loss_hat(&s_ocs, cache, &marginal)?.loss;
            let relative_diff = if loss_sr > 0.0 {
                (loss_s - loss_sr) / loss_sr
            } else {
                loss_s - loss_sr
            };
            rows.push(MarginalRow {
                k,
                oc,
                loss_sr,
                loss_s,
                relative_diff,
                small: relative_diff < SMALL_DIFF,
            });
        }
    }
    Ok(rows)
}
