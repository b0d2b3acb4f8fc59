//! Simulated annealing over K-tuples of scenarios, replicate-chain
//! convergence diagnostics, K-sweeps and a small-scale exhaustive oracle.
//!
//! The annealer searches the candidate space (possibly a restriction) while
//! the loss is always measured against a fixed precomputed cloud cache.

use itertools::Itertools;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RosaError;
use crate::loss::{loss_hat, LossSpec, LossValue, OcCache};
use crate::model::{ParameterSpace, Scenario, ScenarioSet};
use crate::rng::substream;
use crate::surrogate::Surrogate;
use crate::Result;

const STREAM_SA: u64 = 0x5341;

/// Cooling schedule shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Schedule {
    /// T multiplied by r every iteration.
    Geometric,
    /// T held for a fixed number of steps, then multiplied by r.
    PiecewiseConstant,
}

/// Annealer configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SaConfig {
    pub k: usize,
    pub t0: f64,
    pub r: f64,
    pub t_min: f64,
    pub schedule: Schedule,
    pub steps_per_temp: usize,
    /// Proposal standard deviation as a fraction of each dimension's range.
    pub sd_frac: f64,
    /// Optional final sd fraction; when set, the proposal sd decays
    /// geometrically from `sd_frac` to this value across temperature levels,
    /// refining the search as the chain cools. `None` keeps sd constant.
    pub sd_frac_final: Option<f64>,
    /// Optional hard cap on total iterations.
    pub max_iterations: Option<usize>,
}

impl Default for SaConfig {
    fn default() -> Self {
        Self {
            k: 1,
            t0: 1000.0,
            r: 0.8,
            t_min: 0.1,
            schedule: Schedule::PiecewiseConstant,
            steps_per_temp: 50,
            sd_frac: 0.05,
            sd_frac_final: None,
            max_iterations: None,
        }
    }
}

impl SaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(RosaError::InvalidConfig("K must be at least 1".into()));
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(RosaError::InvalidConfig(format!(
                "reduction factor r must lie in (0, 1), got {}",
                self.r
            )));
        }
        if !(self.t_min > 0.0 && self.t_min < self.t0) {
            return Err(RosaError::InvalidConfig(format!(
                "need 0 < t_min < t0, got t_min {} t0 {}",
                self.t_min, self.t0
            )));
        }
        if self.sd_frac <= 0.0 || self.sd_frac_final.is_some_and(|s| s <= 0.0) {
            return Err(RosaError::InvalidConfig("proposal sd fractions must be > 0".into()));
        }
        if self.schedule == Schedule::PiecewiseConstant && self.steps_per_temp == 0 {
            return Err(RosaError::InvalidConfig("steps_per_temp must be > 0".into()));
        }
        Ok(())
    }

    /// Temperature ladder: (temperature, steps at it, proposal sd fraction).
    pub fn ladder(&self) -> Vec<(f64, usize, f64)> {
        let mut temps = Vec::new();
        let mut t = self.t0;
        while t >= self.t_min {
            temps.push(t);
            t *= self.r;
        }
        if temps.is_empty() {
            temps.push(self.t0);
        }
        let levels = temps.len();
        let steps = match self.schedule {
            Schedule::Geometric => 1,
            Schedule::PiecewiseConstant => self.steps_per_temp,
        };
        temps
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let sd = match self.sd_frac_final {
                    Some(sf) if levels > 1 => {
                        self.sd_frac * (sf / self.sd_frac).powf(i as f64 / (levels - 1) as f64)
                    }
                    _ => self.sd_frac,
                };
                (t, steps, sd)
            })
            .collect()
    }
}

/// Gaussian proposal: independent noise on every free coordinate of every
/// scenario (sd = `sd_frac` x dimension range), then clamp into the space.
/// Fixed dimensions are untouched by the clamp contract.
pub fn perturb(
    set: &ScenarioSet,
    space: &ParameterSpace,
    sd_frac: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ScenarioSet> {
    let scenarios = set
        .scenarios
        .iter()
        .map(|s| {
            let raw: Vec<f64> = s
                .theta
                .iter()
                .enumerate()
                .map(|(i, &v)| {
                    if space.is_fixed(i) {
                        v
                    } else {
                        let u: f64 = rng.gen();
                        let z = crate::designs::std_normal_quantile(u.clamp(1e-300, 1.0 - 1e-16));
                        v + z * sd_frac * space.range(i)
                    }
                })
                .collect();
            space.clamp(&raw)
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioSet::new(scenarios)
}

/// 1 when the proposal does not worsen the loss, exp((current - proposal)/T)
/// otherwise.
pub fn accept_probability(current_loss: f64, proposal_loss: f64, temperature: f64) -> Result<f64> {
    if temperature <= 0.0 {
        return Err(RosaError::InvalidConfig(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if proposal_loss <= current_loss {
        Ok(1.0)
    } else {
        Ok(((current_loss - proposal_loss) / temperature).exp().min(1.0))
    }
}

/// One iteration of the chain's trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub temperature: f64,
    pub current_loss: f64,
    pub proposal_loss: f64,
    pub accepted: bool,
}

/// Full chain output: the paper-faithful final state plus the best-ever set
/// (SA can accept uphill moves late, so reports use the best-ever set).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SaTrace {
    pub records: Vec<TraceRecord>,
    pub final_set: ScenarioSet,
    pub final_loss: f64,
    pub best_set: ScenarioSet,
    pub best_loss: f64,
    /// Cloud index of the worst-covered point under the best set.
    pub best_witness: usize,
    pub seed: u64,
    pub chain: u64,
}

/// Run one annealing chain.
pub fn sa_run(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    candidate_space: &ParameterSpace,
    cfg: &SaConfig,
    seed: u64,
    chain: u64,
) -> Result<SaTrace> {
    cfg.validate()?;
    let mut rng = substream(seed, &[STREAM_SA, chain]);

    let init: Vec<Scenario> = (0..cfg.k)
        .map(|_| {
            Scenario::new(
                (0..candidate_space.dim())
                    .map(|i| match candidate_space.fixed_value(i) {
                        Some(v) => v,
                        None => {
                            let u: f64 = rng.gen();
                            candidate_space.lower()[i] + u * candidate_space.range(i)
                        }
                    })
                    .collect(),
            )
        })
        .collect();
    let mut current_set = ScenarioSet::new(init)?;
    let mut current = evaluate(model, cache, spec, &current_set)?;

    let mut best_set = current_set.clone();
    let mut best = current;

    let mut records = Vec::new();
    let mut iteration = 0usize;
    'outer: for (temperature, steps, sd) in cfg.ladder() {
        for _ in 0..steps {
            if cfg.max_iterations.is_some_and(|cap| iteration >= cap) {
                break 'outer;
            }
            let proposal_set = perturb(&current_set, candidate_space, sd, &mut rng)?;
            let proposal = evaluate(model, cache, spec, &proposal_set)?;
            let p = accept_probability(current.loss, proposal.loss, temperature)?;
            // u in [0, 1) so p = 1 always accepts; one draw per iteration
            // keeps the stream position independent of acceptance history.
            let accepted = rng.gen::<f64>() < p;
            records.push(TraceRecord {
                iteration,
                temperature,
                current_loss: current.loss,
                proposal_loss: proposal.loss,
                accepted,
            });
            if accepted {
                current_set = proposal_set;
                current = proposal;
            }
            if current.loss < best.loss {
                best = current;
                best_set = current_set.clone();
            }
            iteration += 1;
        }
    }

    Ok(SaTrace {
        records,
        final_set: current_set,
        final_loss: current.loss,
        best_set,
        best_loss: best.loss,
        best_witness: best.witness,
        seed,
        chain,
    })
}

fn evaluate(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    set: &ScenarioSet,
) -> Result<LossValue> {
    let ocs = model.predict_batch(&set.scenarios)?;
    loss_hat(&ocs, cache, spec)
}

/// Replicate-chain convergence diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub min_loss: f64,
    pub median_loss: f64,
    pub max_loss: f64,
    /// (max - min) / min of the per-chain best losses.
    pub relative_spread: f64,
    /// Raised when the relative spread exceeds 10%.
    pub flagged: bool,
    pub best_chain: usize,
}

const SPREAD_FLAG: f64 = 0.10;

/// Run `n_chains` independent chains in parallel and summarize convergence.
pub fn sa_replicates(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    candidate_space: &ParameterSpace,
    cfg: &SaConfig,
    n_chains: usize,
    seed: u64,
) -> Result<(Vec<SaTrace>, ConvergenceSummary)> {
    if n_chains < 2 {
        return Err(RosaError::InvalidConfig("need at least 2 replicate chains".into()));
    }
    let traces: Vec<SaTrace> = (0..n_chains as u64)
        .into_par_iter()
        .map(|chain| sa_run(model, cache, spec, candidate_space, cfg, seed, chain))
        .collect::<Result<Vec<_>>>()?;

    let mut losses: Vec<f64> = traces.iter().map(|t| t.best_loss).collect();
    let best_chain = losses
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite losses"))
        .map(|(i, _)| i)
        .expect("nonempty");
    losses.sort_by(|a, b| a.partial_cmp(b).expect("finite losses"));
    let min_loss = losses[0];
    let max_loss = *losses.last().unwrap();
    let median_loss = if losses.len() % 2 == 1 {
        losses[losses.len() / 2]
    } else {
        0.5 * (losses[losses.len() / 2 - 1] + losses[losses.len() / 2])
    };
    let relative_spread = if min_loss > 0.0 {
        (max_loss - min_loss) / min_loss
    } else {
        max_loss - min_loss
    };
    Ok((
        traces,
        ConvergenceSummary {
            min_loss,
            median_loss,
            max_loss,
            relative_spread,
            flagged: relative_spread > SPREAD_FLAG,
            best_chain,
        },
    ))
}

const BRUTE_FORCE_BUDGET: u128 = 10_000_000;

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    c
}

/// Exhaustive discrete optimum over K-subsets of the candidate list. Exact
/// but only viable at tiny scale; serves as the optimizer oracle.
///
/// Ties break toward the lexicographically first index subset.
pub fn brute_force_select(
    model: &dyn Surrogate,
    candidates: &[Scenario],
    k: usize,
    cache: &OcCache,
    spec: &LossSpec,
) -> Result<(ScenarioSet, LossValue)> {
    if k == 0 || k > candidates.len() {
        return Err(RosaError::InvalidConfig(format!(
            "K = {k} must lie in 1..={}",
            candidates.len()
        )));
    }
    let count = binomial(candidates.len(), k);
    if count > BRUTE_FORCE_BUDGET {
        return Err(RosaError::BudgetExceeded {
            n: candidates.len(),
            k,
            count,
            budget: BRUTE_FORCE_BUDGET,
        });
    }
    let ocs = model.predict_batch(candidates)?;
    let mut best: Option<(Vec<usize>, LossValue)> = None;
    for combo in (0..candidates.len()).combinations(k) {
        let subset: Vec<_> = combo.iter().map(|&i| ocs[i].clone()).collect();
        let value = loss_hat(&subset, cache, spec)?;
        if best.as_ref().is_none_or(|(_, b)| value.loss < b.loss) {
            best = Some((combo, value));
        }
    }
    let (indices, value) = best.expect("at least one subset");
    Ok((
        ScenarioSet::new(indices.into_iter().map(|i| candidates[i].clone()).collect())?,
        value,
    ))
}

/// One row of a K-sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub best_loss: f64,
    pub chain_spread: f64,
    pub flagged: bool,
    /// True when a larger K did worse than a smaller one and was replaced by
    /// the smaller solution padded with a duplicate (monotone cleaning).
    pub cleaned: bool,
    pub best_set: ScenarioSet,
}

/// Run replicate chains for each K and emit a monotone-cleaned table: since
/// a superset can always reuse a smaller solution with duplicated members,
/// the reported best loss is non-increasing in K.
pub fn k_sweep(
    model: &dyn Surrogate,
    cache: &OcCache,
    spec: &LossSpec,
    candidate_space: &ParameterSpace,
    cfg_template: &SaConfig,
    ks: &[usize],
    n_chains: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if ks.is_empty() {
        return Err(RosaError::InvalidConfig("K list must be nonempty".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let mut rows: Vec<SweepRow> = Vec::with_capacity(ks.len());
    for &k in &ks {
        let cfg = SaConfig { k, ..cfg_template.clone() };
        let (traces, summary) =
            sa_replicates(model, cache, spec, candidate_space, &cfg, n_chains, seed)?;
        let mut best_loss = summary.min_loss;
        let mut best_set = traces[summary.best_chain].best_set.clone();
        let mut cleaned = false;
        if let Some(prev) = rows.last() {
            if prev.best_loss < best_loss {
                // Pad the smaller solution with duplicates of its first
                // member; duplication leaves the loss unchanged.
                let mut scenarios = prev.best_set.scenarios.clone();
                while scenarios.len() < k {
                    scenarios.push(scenarios[0].clone());
                }
                best_set = ScenarioSet::new(scenarios)?;
                best_loss = prev.best_loss;
                cleaned = true;
            }
        }
        rows.push(SweepRow {
            k,
            best_loss,
            chain_spread: summary.relative_spread,
            flagged: summary.flagged,
            cleaned,
            best_set,
        });
    }
    Ok(rows)
}

/// Smallest K in the sweep achieving loss at or below `tau`, if any.
pub fn min_k_at_threshold(rows: &[SweepRow], tau: f64) -> Option<usize> {
    rows.iter().find(|row| row.best_loss <= tau).map(|row| row.k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{OcKind, OcSchema, OcVector};

    /// Identity surrogate on [0, 1]: OC equals the parameter. Makes the
    /// optimum analytically known (k-center on an interval).
    struct Line {
        space: ParameterSpace,
        schema: OcSchema,
    }

    impl Line {
        fn new() -> Self {
            Self {
                space: ParameterSpace::new(vec!["x".into()], vec![0.0], vec![1.0]).unwrap(),
                schema: OcSchema::new(vec!["oc".into()], vec![OcKind::Probability]),
            }
        }
    }

    impl Surrogate for Line {
        fn space(&self) -> &ParameterSpace {
            &self.space
        }
        fn schema(&self) -> &OcSchema {
            &self.schema
        }
        fn predict_batch(&self, thetas: &[Scenario]) -> Result<Vec<OcVector>> {
            Ok(thetas.iter().map(|s| OcVector::new(vec![s.theta[0]])).collect())
        }
        fn digest(&self) -> String {
            "line".into()
        }
    }

    fn grid_cache(model: &Line, n: usize) -> OcCache {
        let cloud: Vec<Scenario> = (0..n)
            .map(|i| Scenario::new(vec![i as f64 / (n - 1) as f64]))
            .collect();
        crate::loss::build_cache(model, &cloud).unwrap()
    }

    fn toy_cfg(k: usize) -> SaConfig {
        SaConfig {
            k,
            t0: 0.2,
            r: 0.7,
            t_min: 1e-4,
            schedule: Schedule::PiecewiseConstant,
            steps_per_temp: 100,
            sd_frac: 0.2,
            sd_frac_final: Some(0.003),
            max_iterations: None,
        }
    }

    #[test]
    fn acceptance_probability_formula() {
        assert_eq!(accept_probability(0.2, 0.1, 1.0).unwrap(), 1.0);
        assert_eq!(accept_probability(0.2, 0.2, 1.0).unwrap(), 1.0);
        let p = accept_probability(0.10, 0.15, 0.05).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-12);
        assert!(accept_probability(0.1, 0.2, 0.0).is_err());
        assert!(accept_probability(0.1, 0.2, -1.0).is_err());
    }

    #[test]
    fn empirical_acceptance_matches_formula() {
        // Accept/reject with the same draw rule the chain uses.
        let p = accept_probability(0.10, 0.15, 0.10).unwrap();
        let mut rng = substream(3, &[99]);
        let n = 10_000;
        let hits = (0..n).filter(|_| rng.gen::<f64>() < p).count();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * se, "freq {freq} vs p {p}");
    }

    #[test]
    fn geometric_ladder_is_exact() {
        let cfg = SaConfig {
            schedule: Schedule::Geometric,
            t0: 1000.0,
            r: 0.8,
            t_min: 0.1,
            ..SaConfig::default()
        };
        let ladder = cfg.ladder();
        for pair in ladder.windows(2) {
            assert_eq!(pair[1].0, pair[0].0 * 0.8);
            assert_eq!(pair[0].1, 1);
        }
        assert!(ladder.last().unwrap().0 >= 0.1);
        assert!(ladder.last().unwrap().0 * 0.8 < 0.1);
    }

    #[test]
    fn piecewise_ladder_holds_then_multiplies() {
        let cfg = SaConfig { steps_per_temp: 7, ..SaConfig::default() };
        let ladder = cfg.ladder();
        assert!(ladder.iter().all(|&(_, steps, _)| steps == 7));
        for pair in ladder.windows(2) {
            assert_eq!(pair[1].0, pair[0].0 * cfg.r);
        }
    }

    #[test]
    fn config_validation() {
        assert!(SaConfig::default().validate().is_ok());
        assert!(SaConfig { k: 0, ..SaConfig::default() }.validate().is_err());
        assert!(SaConfig { r: 1.0, ..SaConfig::default() }.validate().is_err());
        assert!(SaConfig { t_min: 2000.0, ..SaConfig::default() }.validate().is_err());
        assert!(SaConfig { sd_frac: 0.0, ..SaConfig::default() }.validate().is_err());
        assert!(
            SaConfig { steps_per_temp: 0, ..SaConfig::default() }.validate().is_err()
        );
    }

    #[test]
    fn perturb_stays_in_space_and_respects_fixed() {
        let space = ParameterSpace::new(
            vec!["a".into(), "b".into()],
            vec![0.0, -1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
        .restrict(&[("b".to_string(), 0.5)].into_iter().collect())
        .unwrap();
        let set = ScenarioSet::new(vec![Scenario::new(vec![0.5, 0.5])]).unwrap();
        let mut rng = substream(1, &[0]);
        for _ in 0..200 {
            let p = perturb(&set, &space, 0.5, &mut rng).unwrap();
            assert!(space.contains(&p.scenarios[0]));
            assert_eq!(p.scenarios[0].theta[1], 0.5);
        }
    }

    #[test]
    fn perturb_noise_sd_matches_config() {
        // Wide box so clamping never bites from the midpoint.
        let space = ParameterSpace::new(vec!["a".into()], vec![-100.0], vec![100.0]).unwrap();
        let set = ScenarioSet::new(vec![Scenario::new(vec![0.0])]).unwrap();
        let sd_frac = 0.01; // sd = 2.0 in raw units
        let mut rng = substream(2, &[0]);
        let n = 10_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| perturb(&set, &space, sd_frac, &mut rng).unwrap().scenarios[0].theta[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 2.0).abs() < 0.06, "empirical sd {sd}");
        assert!(mean.abs() < 0.06, "empirical mean {mean}");
    }

    #[test]
    fn zero_iterations_returns_initial_state() {
        let model = Line::new();
        let cache = grid_cache(&model, 101);
        let spec = LossSpec::uniform(1).unwrap();
        let cfg = SaConfig { max_iterations: Some(0), ..toy_cfg(2) };
        let trace = sa_run(&model, &cache, &spec, &model.space.clone(), &cfg, 4, 0).unwrap();
        assert!(trace.records.is_empty());
        assert_eq!(trace.best_loss, trace.final_loss);
    }

    #[test]
    fn sa_finds_near_optimal_interval_cover() {
        let model = Line::new();
        let cache = grid_cache(&model, 201);
        let spec = LossSpec::uniform(1).unwrap();
        let space = model.space.clone();
        let trace = sa_run(&model, &cache, &spec, &space, &toy_cfg(3), 7, 0).unwrap();
        // Exact continuous optimum is 1/6.
        assert!(trace.best_loss < 1.0 / 6.0 + 0.02, "best loss {}", trace.best_loss);
        assert!(trace.best_loss <= trace.records[0].current_loss);
        assert!(trace.best_loss <= trace.final_loss + 1e-15);
    }

    #[test]
    fn trace_honors_acceptance_invariants() {
        let model = Line::new();
        let cache = grid_cache(&model, 101);
        let spec = LossSpec::uniform(1).unwrap();
        let trace = sa_run(&model, &cache, &spec, &model.space.clone(), &toy_cfg(2), 5, 0).unwrap();
        assert!(!trace.records.is_empty());
        for rec in &trace.records {
            if rec.proposal_loss <= rec.current_loss {
                assert!(rec.accepted, "downhill move rejected at {}", rec.iteration);
            }
        }
        // Temperatures never increase along the trace.
        for pair in trace.records.windows(2) {
            assert!(pair[1].temperature <= pair[0].temperature);
        }
    }

    #[test]
    fn chains_are_reproducible_and_distinct() {
        let model = Line::new();
        let cache = grid_cache(&model, 101);
        let spec = LossSpec::uniform(1).unwrap();
        let space = model.space.clone();
        let cfg = SaConfig { max_iterations: Some(50), ..toy_cfg(2) };
        let a = sa_run(&model, &cache, &spec, &space, &cfg, 11, 0).unwrap();
        let b = sa_run(&model, &cache, &spec, &space, &cfg, 11, 0).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.best_set, b.best_set);
        let c = sa_run(&model, &cache, &spec, &space, &cfg, 11, 1).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn replicates_summarize_and_flag() {
        let model = Line::new();
        let cache = grid_cache(&model, 101);
        let spec = LossSpec::uniform(1).unwrap();
        let space = model.space.clone();
        let (traces, summary) =
            sa_replicates(&model, &cache, &spec, &space, &toy_cfg(2), 4, 13).unwrap();
        assert_eq!(traces.len(), 4);
        let best = traces.iter().map(|t| t.best_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(summary.min_loss, best);
        assert_eq!(traces[summary.best_chain].best_loss, best);
        assert!(summary.min_loss <= summary.median_loss);
        assert!(summary.median_loss <= summary.max_loss);
        assert!(sa_replicates(&model, &cache, &spec, &space, &toy_cfg(2), 1, 13).is_err());
    }

    #[test]
    fn brute_force_matches_naive_enumeration() {
        let model = Line::new();
        let cache = grid_cache(&model, 41);
        let spec = LossSpec::uniform(1).unwrap();
        let candidates: Vec<Scenario> =
            (0..12).map(|i| Scenario::new(vec![i as f64 / 11.0])).collect();
        let (set, value) = brute_force_select(&model, &candidates, 2, &cache, &spec).unwrap();

        // Independent naive enumeration.
        let ocs = model.predict_batch(&candidates).unwrap();
        let mut naive_best = f64::INFINITY;
        let mut naive_pair = (0, 0);
        for i in 0..candidates.len() {
            for j in (i + 1)..candidates.len() {
                let l = loss_hat(&[ocs[i].clone(), ocs[j].clone()], &cache, &spec)
                    .unwrap()
                    .loss;
                if l < naive_best {
                    naive_best = l;
                    naive_pair = (i, j);
                }
            }
        }
        assert_eq!(value.loss, naive_best);
        assert_eq!(set.scenarios[0], candidates[naive_pair.0]);
        assert_eq!(set.scenarios[1], candidates[naive_pair.1]);
    }

    #[test]
    fn brute_force_full_set_is_single_subset() {
        let model = Line::new();
        let cache = grid_cache(&model, 41);
        let spec = LossSpec::uniform(1).unwrap();
        let candidates: Vec<Scenario> =
            (0..5).map(|i| Scenario::new(vec![i as f64 / 4.0])).collect();
        let (set, value) =
            brute_force_select(&model, &candidates, 5, &cache, &spec).unwrap();
        assert_eq!(set.scenarios, candidates);
        let ocs = model.predict_batch(&candidates).unwrap();
        assert_eq!(value.loss, loss_hat(&ocs, &cache, &spec).unwrap().loss);
    }

    #[test]
    fn brute_force_budget_guard() {
        let model = Line::new();
        let cache = grid_cache(&model, 11);
        let spec = LossSpec::uniform(1).unwrap();
        let candidates: Vec<Scenario> =
            (0..60).map(|i| Scenario::new(vec![i as f64 / 59.0])).collect();
        assert!(matches!(
            brute_force_select(&model, &candidates, 20, &cache, &spec),
            Err(RosaError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn sweep_is_monotone_after_cleaning() {
        let model = Line::new();
        let cache = grid_cache(&model, 101);
        let spec = LossSpec::uniform(1).unwrap();
        let space = model.space.clone();
        let cfg = SaConfig { max_iterations: Some(300), ..toy_cfg(1) };
        let rows = k_sweep(&model, &cache, &spec, &space, &cfg, &[1, 2, 3, 4], 2, 17).unwrap();
        assert_eq!(rows.len(), 4);
        for pair in rows.windows(2) {
            assert!(pair[1].best_loss <= pair[0].best_loss);
            assert_eq!(pair[1].best_set.k(), pair[1].k);
        }
        let expected_k = rows
            .iter()
            .find(|r| r.best_loss <= rows[2].best_loss)
            .map(|r| r.k);
        assert_eq!(min_k_at_threshold(&rows, rows[2].best_loss), expected_k);
        assert_eq!(min_k_at_threshold(&rows, -1.0), None);
    }
}
