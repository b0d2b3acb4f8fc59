//! Pipeline stages and artifact emission.
//!
//! Stages persist their intermediates under the output directory and reload
//! them when the stored config digest and seed match, so expensive Monte
//! Carlo runs are never repeated. Every emitted file embeds the config
//! digest and seed in leading comment lines; all numeric output is formatted
//! deterministically, making reruns byte-identical.

use std::fs::File;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::anneal::{k_sweep, sa_replicates, ConvergenceSummary, SaTrace, SweepRow};
use crate::error::RosaError;
use crate::loss::{build_cache, loss_hat, marginal_losses, LossSpec, OcCache};
use crate::mc::{estimate_ocs, load_training_set, save_training_set, validation_estimates, TrainingSet};
use crate::model::{ScenarioSet, SensitivityReport};
use crate::pipeline::compare::{
    compare_marginals, compare_restriction, MarginalRow, RestrictionRow,
};
use crate::pipeline::config::RunConfig;
use crate::sampling::{lhs_sample, uniform_sample, CloudSpec, LhsPlan};
use crate::surrogate::{validate, Mlp, Surrogate, ValidationReport};
use crate::Result;

// Stage seeds are decorrelated from the training streams by fixed offsets.
const VALIDATION_SEED_XOR: u64 = 0x56414c_49444154;
const REPORT_SEED_XOR: u64 = 0x5245_504f5254;

fn stage_err(stage: &'static str) -> impl Fn(RosaError) -> RosaError {
    move |e| match e {
        // The gate failure carries its own meaning (and exit code).
        RosaError::ValidationGate { .. } => e,
        other => RosaError::Stage { stage, source: Box::new(other) },
    }
}

/// File names of the persisted intermediates and outputs.
pub struct OutPaths {
    pub dir: PathBuf,
}

impl OutPaths {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }
    pub fn train_scenarios(&self) -> PathBuf {
        self.dir.join("train_scenarios.csv")
    }
    pub fn train_ocs(&self) -> PathBuf {
        self.dir.join("train_ocs.csv")
    }
    pub fn train_meta(&self) -> PathBuf {
        self.dir.join("train_meta.json")
    }
    pub fn model(&self) -> PathBuf {
        self.dir.join("model.json")
    }
    pub fn model_meta(&self) -> PathBuf {
        self.dir.join("model_meta.json")
    }
    pub fn validation(&self) -> PathBuf {
        self.dir.join("validation.csv")
    }
    pub fn validation_meta(&self) -> PathBuf {
        self.dir.join("validation_meta.json")
    }
    pub fn trace(&self, chain: usize) -> PathBuf {
        self.dir.join(format!("trace-{chain}.csv"))
    }
    pub fn report_csv(&self) -> PathBuf {
        self.dir.join("report.csv")
    }
    pub fn report_json(&self) -> PathBuf {
        self.dir.join("report.json")
    }
    pub fn sweep(&self) -> PathBuf {
        self.dir.join("sweep.csv")
    }
    pub fn restriction(&self) -> PathBuf {
        self.dir.join("restriction.csv")
    }
    pub fn marginals(&self) -> PathBuf {
        self.dir.join("marginals.csv")
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.17e}")
}

/// Open an output file with the digest/seed provenance header.
fn create_with_header(path: &Path, digest: &str, seed: u64) -> Result<File> {
    let mut f = File::create(path)?;
    writeln!(f, "# config_digest={digest}")?;
    writeln!(f, "# seed={seed}")?;
    Ok(f)
}

/// Train: Latin hypercube scenarios over the full space, Monte Carlo OC
/// estimates. Reloaded from disk when digest and seed match.
pub fn stage_train(cfg: &RunConfig, out: &OutPaths) -> Result<TrainingSet> {
    let design = cfg.build_design()?;
    let digest = cfg.digest();
    if out.train_meta().exists() {
        if let Ok((set, meta)) =
            load_training_set(&out.train_scenarios(), &out.train_ocs(), &out.train_meta())
        {
            if meta.config_digest == digest && meta.seed == cfg.seed {
                return Ok(set);
            }
        }
    }
    std::fs::create_dir_all(&out.dir)?;
    let space = design.parameter_space();
    let plan = LhsPlan {
        points: cfg.pipeline.training_points,
        space: space.clone(),
        seed: cfg.seed,
    };
    let scenarios = lhs_sample(&plan);
    let set = estimate_ocs(design.as_ref(), &scenarios, cfg.pipeline.training_reps, cfg.seed)
        .map_err(stage_err("train"))?;
    save_training_set(
        &set,
        space.dim_names(),
        &design.oc_schema().names,
        design.name(),
        cfg.seed,
        &digest,
        &out.train_scenarios(),
        &out.train_ocs(),
        &out.train_meta(),
    )?;
    Ok(set)
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    config_digest: String,
    seed: u64,
}

/// Fit: MLP surrogate on the training set. Reloaded when digest matches.
pub fn stage_fit(cfg: &RunConfig, out: &OutPaths) -> Result<Mlp> {
    let digest = cfg.digest();
    if out.model().exists() && out.model_meta().exists() {
        let meta: Result<ModelMeta> = std::fs::read_to_string(out.model_meta())
            .map_err(RosaError::from)
            .and_then(|s| serde_json::from_str(&s).map_err(RosaError::from));
        if let Ok(meta) = meta {
            if meta.config_digest == digest && meta.seed == cfg.seed {
                return Mlp::from_json(&std::fs::read_to_string(out.model())?);
            }
        }
    }
    let train = stage_train(cfg, out)?;
    let design = cfg.build_design()?;
    let model = Mlp::fit(
        &train,
        &design.parameter_space(),
        &design.oc_schema(),
        &cfg.mlp,
        cfg.seed,
    )
    .map_err(stage_err("fit"))?;
    std::fs::write(out.model(), model.to_json()?)?;
    std::fs::write(
        out.model_meta(),
        serde_json::to_string_pretty(&ModelMeta { config_digest: digest, seed: cfg.seed })?,
    )?;
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct ValidationMeta {
    config_digest: String,
    seed: u64,
    oc_names: Vec<String>,
    r_squared: Vec<f64>,
    rmse: Vec<f64>,
    max_abs_diff: Vec<f64>,
    gate: f64,
    passed: bool,
}

/// Validate: independent MC estimates at fresh uniform scenarios compared
/// with surrogate predictions. Errors when min R-squared misses the gate,
/// unless `force`.
pub fn stage_validate(cfg: &RunConfig, out: &OutPaths, force: bool) -> Result<ValidationReport> {
    let model = stage_fit(cfg, out)?;
    let design = cfg.build_design()?;
    let space = design.parameter_space();
    let val = validation_estimates(
        design.as_ref(),
        cfg.pipeline.validation_points,
        cfg.pipeline.validation_reps,
        &space,
        cfg.seed ^ VALIDATION_SEED_XOR,
    )
    .map_err(stage_err("validate"))?;
    let report = validate(&model, &val).map_err(stage_err("validate"))?;

    let digest = cfg.digest();
    let file = create_with_header(&out.validation(), &digest, cfg.seed)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header: Vec<String> = space.dim_names().to_vec();
    for name in &report.oc_names {
        header.push(format!("{name}_mc"));
        header.push(format!("{name}_pred"));
    }
    w.write_record(&header)?;
    for i in 0..report.scenarios.len() {
        let mut rec: Vec<String> = report.scenarios[i].theta.iter().map(|&v| fmt(v)).collect();
        for oc in 0..report.oc_names.len() {
            rec.push(fmt(report.mc_estimates[i].values[oc]));
            rec.push(fmt(report.predictions[i].values[oc]));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let min_r2 = report.min_r_squared();
    let passed = !report.has_degenerate_oc() && min_r2 >= cfg.pipeline.r2_gate;
    std::fs::write(
        out.validation_meta(),
        serde_json::to_string_pretty(&ValidationMeta {
            config_digest: digest,
            seed: cfg.seed,
            oc_names: report.oc_names.clone(),
            r_squared: report.r_squared.clone(),
            rmse: report.rmse.clone(),
            max_abs_diff: report.max_abs_diff.clone(),
            gate: cfg.pipeline.r2_gate,
            passed,
        })?,
    )?;
    if !passed && !force {
        return Err(RosaError::ValidationGate { r2: min_r2, gate: cfg.pipeline.r2_gate });
    }
    Ok(report)
}

/// The cloud is always drawn from the unrestricted space, even when the
/// candidate space is restricted, so losses stay comparable.
pub fn build_cloud_cache(cfg: &RunConfig, model: &Mlp) -> Result<OcCache> {
    let design = cfg.build_design()?;
    let cloud = uniform_sample(&CloudSpec {
        size: cfg.pipeline.cloud_size,
        space: design.parameter_space().unrestricted(),
        seed: cfg.seed,
    });
    build_cache(model, &cloud).map_err(stage_err("cache"))
}

fn write_traces(cfg: &RunConfig, out: &OutPaths, traces: &[SaTrace]) -> Result<()> {
    let digest = cfg.digest();
    for (chain, trace) in traces.iter().enumerate() {
        let file = create_with_header(&out.trace(chain), &digest, cfg.seed)?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(["iteration", "temperature", "current_loss", "proposal_loss", "accepted"])?;
        for rec in &trace.records {
            w.write_record([
                rec.iteration.to_string(),
                fmt(rec.temperature),
                fmt(rec.current_loss),
                fmt(rec.proposal_loss),
                rec.accepted.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Select: replicate annealing chains over the candidate space; emits one
/// trace CSV per chain.
pub fn stage_select(
    cfg: &RunConfig,
    out: &OutPaths,
    model: &Mlp,
    cache: &OcCache,
) -> Result<(Vec<SaTrace>, ConvergenceSummary, LossSpec)> {
    let design = cfg.build_design()?;
    let spec = cfg.loss_spec(design.as_ref(), cache)?;
    let candidate_space = cfg.candidate_space(design.as_ref())?;
    let (traces, summary) = sa_replicates(
        model,
        cache,
        &spec,
        &candidate_space,
        &cfg.sa,
        cfg.pipeline.chains,
        cfg.seed,
    )
    .map_err(stage_err("select"))?;
    write_traces(cfg, out, &traces)?;
    Ok((traces, summary, spec))
}

/// Full pipeline: train, fit, validate (gated), cache, select, report.
///
/// The published OC table re-estimates the selected scenarios with fresh
/// Monte Carlo so it does not rest on the surrogate alone.
pub fn run_pipeline(cfg: &RunConfig, out_dir: &Path, force: bool) -> Result<SensitivityReport> {
    cfg.validate()?;
    let out = OutPaths::new(out_dir);
    std::fs::create_dir_all(out_dir)?;
    stage_validate(cfg, &out, force)?;
    let model = stage_fit(cfg, &out)?;
    let cache = build_cloud_cache(cfg, &model)?;
    let (traces, summary, spec) = stage_select(cfg, &out, &model, &cache)?;

    let design = cfg.build_design()?;
    let best = &traces[summary.best_chain];
    let scenario_set: ScenarioSet = best.best_set.clone();
    let oc_surrogate = model.predict_batch(&scenario_set.scenarios)?;
    let achieved = loss_hat(&oc_surrogate, &cache, &spec).map_err(stage_err("report"))?;
    let per_oc = marginal_losses(&oc_surrogate, &cache).map_err(stage_err("report"))?;
    let fresh = estimate_ocs(
        design.as_ref(),
        &scenario_set.scenarios,
        cfg.pipeline.validation_reps,
        cfg.seed ^ REPORT_SEED_XOR,
    )
    .map_err(stage_err("report"))?;

    let report = SensitivityReport {
        design: design.name().to_string(),
        dim_names: design.parameter_space().dim_names().to_vec(),
        oc_names: design.oc_schema().names.clone(),
        scenario_set,
        oc_surrogate,
        oc_fresh_mc: Some(fresh.oc_means.clone()),
        achieved_loss: achieved.loss,
        per_oc_marginal_losses: per_oc,
        witness: cache.points[achieved.witness].clone(),
        seed: cfg.seed,
        config_digest: cfg.digest(),
    };
    write_report(cfg, &out, &report)?;
    Ok(report)
}

fn write_report(cfg: &RunConfig, out: &OutPaths, report: &SensitivityReport) -> Result<()> {
    let file = create_with_header(&out.report_csv(), &report.config_digest, cfg.seed)?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec!["scenario".to_string()];
    header.extend(report.dim_names.iter().cloned());
    for name in &report.oc_names {
        header.push(format!("{name}_surrogate"));
        header.push(format!("{name}_mc"));
    }
    w.write_record(&header)?;
    for (i, s) in report.scenario_set.scenarios.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(s.theta.iter().map(|&v| fmt(v)));
        for oc in 0..report.oc_names.len() {
            rec.push(fmt(report.oc_surrogate[i].values[oc]));
            rec.push(fmt(
                report.oc_fresh_mc.as_ref().expect("fresh MC present")[i].values[oc],
            ));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(out.report_json(), json)?;
    Ok(())
}

/// K-sweep over `cfg.ks`; emits sweep.csv.
pub fn run_sweep(cfg: &RunConfig, out_dir: &Path, force: bool) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    if cfg.ks.is_empty() {
        return Err(RosaError::InvalidConfig("sweep requires a nonempty `ks` list".into()));
    }
    let out = OutPaths::new(out_dir);
    std::fs::create_dir_all(out_dir)?;
    stage_validate(cfg, &out, force)?;
    let model = stage_fit(cfg, &out)?;
    let cache = build_cloud_cache(cfg, &model)?;
    let design = cfg.build_design()?;
    let spec = cfg.loss_spec(design.as_ref(), &cache)?;
    let candidate_space = cfg.candidate_space(design.as_ref())?;
    let rows = k_sweep(
        &model,
        &cache,
        &spec,
        &candidate_space,
        &cfg.sa,
        &cfg.ks,
        cfg.pipeline.chains,
        cfg.seed,
    )
    .map_err(stage_err("sweep"))?;

    let file = create_with_header(&out.sweep(), &cfg.digest(), cfg.seed)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "best_loss", "chain_spread", "flagged", "cleaned"])?;
    for row in &rows {
        w.write_record([
            row.k.to_string(),
            fmt(row.best_loss),
            fmt(row.chain_spread),
            row.flagged.to_string(),
            row.cleaned.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Restriction study over `cfg.ks`; emits restriction.csv.
pub fn run_compare_restriction(
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
) -> Result<Vec<RestrictionRow>> {
    cfg.validate()?;
    if cfg.restriction.is_empty() {
        return Err(RosaError::InvalidConfig(
            "restriction comparison requires a nonempty `restriction` table".into(),
        ));
    }
    if cfg.ks.is_empty() {
        return Err(RosaError::InvalidConfig("comparison requires a nonempty `ks` list".into()));
    }
    let out = OutPaths::new(out_dir);
    std::fs::create_dir_all(out_dir)?;
    stage_validate(cfg, &out, force)?;
    let model = stage_fit(cfg, &out)?;
    let cache = build_cloud_cache(cfg, &model)?;
    let design = cfg.build_design()?;
    let spec = cfg.loss_spec(design.as_ref(), &cache)?;
    let full = design.parameter_space();
    let restricted = cfg.candidate_space(design.as_ref())?;
    let rows = compare_restriction(
        &model,
        &cache,
        &spec,
        &full,
        &restricted,
        &cfg.sa,
        &cfg.ks,
        cfg.pipeline.chains,
        cfg.seed,
    )
    .map_err(stage_err("compare-restriction"))?;

    let file = create_with_header(&out.restriction(), &cfg.digest(), cfg.seed)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "loss_full", "loss_restricted"])?;
    for row in &rows {
        w.write_record([row.k.to_string(), fmt(row.loss_full), fmt(row.loss_restricted)])?;
    }
    w.flush()?;
    Ok(rows)
}

/// Marginal study over `cfg.ks`; emits marginals.csv.
pub fn run_compare_marginals(
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
) -> Result<Vec<MarginalRow>> {
    cfg.validate()?;
    if cfg.ks.is_empty() {
        return Err(RosaError::InvalidConfig("comparison requires a nonempty `ks` list".into()));
    }
    let out = OutPaths::new(out_dir);
    std::fs::create_dir_all(out_dir)?;
    stage_validate(cfg, &out, force)?;
    let model = stage_fit(cfg, &out)?;
    let cache = build_cloud_cache(cfg, &model)?;
    let design = cfg.build_design()?;
    let spec = cfg.loss_spec(design.as_ref(), &cache)?;
    let candidate_space = cfg.candidate_space(design.as_ref())?;
    let rows = compare_marginals(
        &model,
        &cache,
        &spec,
        &candidate_space,
        &cfg.sa,
        &cfg.ks,
        cfg.pipeline.chains,
        cfg.seed,
    )
    .map_err(stage_err("compare-marginals"))?;

    let oc_names = design.oc_schema().names;
    let file = create_with_header(&out.marginals(), &cfg.digest(), cfg.seed)?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["k", "oc", "oc_name", "loss_sr", "loss_s", "relative_diff", "small"])?;
    for row in &rows {
        w.write_record([
            row.k.to_string(),
            row.oc.to_string(),
            oc_names[row.oc].clone(),
            fmt(row.loss_sr),
            fmt(row.loss_s),
            fmt(row.relative_diff),
            row.small.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anneal::Schedule;

    /// Small-budget App 1 configuration that still clears the default gate.
    fn desk_cfg() -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.seed = 21;
        cfg.pipeline.training_points = 80;
        cfg.pipeline.training_reps = 100;
        cfg.pipeline.validation_points = 40;
        cfg.pipeline.validation_reps = 400;
        cfg.pipeline.cloud_size = 2000;
        cfg.pipeline.r2_gate = 0.85;
        cfg.pipeline.chains = 2;
        cfg.mlp.max_epochs = 600;
        cfg.mlp.patience = 80;
        cfg.sa = crate::anneal::SaConfig {
            k: 3,
            t0: 0.2,
            r: 0.7,
            t_min: 1e-3,
            schedule: Schedule::PiecewiseConstant,
            steps_per_temp: 40,
            sd_frac: 0.1,
            sd_frac_final: Some(0.01),
            max_iterations: Some(600),
        };
        cfg
    }

    #[test]
    fn end_to_end_report_and_resume() {
        let cfg = desk_cfg();
        let dir = tempfile::tempdir().unwrap();
        let report = run_pipeline(&cfg, dir.path(), false).unwrap();
        assert_eq!(report.scenario_set.k(), 3);
        assert_eq!(report.oc_names, vec!["reject_prob"]);
        assert!(report.achieved_loss > 0.0 && report.achieved_loss < 0.5);
        // Power OCs should span low to high for a 3-scenario cover.
        let mut powers: Vec<f64> =
            report.oc_surrogate.iter().map(|v| v.values[0]).collect();
        powers.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(powers[0] < 0.45 && powers[2] > 0.55, "{powers:?}");

        let out = OutPaths::new(dir.path());
        for p in [
            out.train_scenarios(),
            out.train_ocs(),
            out.train_meta(),
            out.model(),
            out.validation(),
            out.validation_meta(),
            out.trace(0),
            out.trace(1),
            out.report_csv(),
            out.report_json(),
        ] {
            assert!(p.exists(), "{p:?} missing");
        }

        // Rerun: resumable stages reload, outputs byte-identical.
        let before = std::fs::read(out.report_csv()).unwrap();
        let before_json = std::fs::read(out.report_json()).unwrap();
        let report2 = run_pipeline(&cfg, dir.path(), false).unwrap();
        assert_eq!(report.config_digest, report2.config_digest);
        assert_eq!(before, std::fs::read(out.report_csv()).unwrap());
        assert_eq!(before_json, std::fs::read(out.report_json()).unwrap());

        // Fresh MC re-estimates track the surrogate closely.
        let fresh = report.oc_fresh_mc.as_ref().unwrap();
        for (s, m) in report.oc_surrogate.iter().zip(fresh) {
            assert!((s.values[0] - m.values[0]).abs() < 0.12);
        }
    }

    #[test]
    fn gate_failure_and_force() {
        let mut cfg = desk_cfg();
        cfg.pipeline.r2_gate = 0.999999;
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&cfg, dir.path(), false).unwrap_err();
        assert!(matches!(err, RosaError::ValidationGate { .. }), "{err}");
        // Force bypasses the gate but the metadata still records failure.
        run_pipeline(&cfg, dir.path(), true).unwrap();
        let meta = std::fs::read_to_string(OutPaths::new(dir.path()).validation_meta()).unwrap();
        assert!(meta.contains("\"passed\": false"));
    }

    #[test]
    fn stale_intermediates_are_recomputed() {
        let cfg = desk_cfg();
        let dir = tempfile::tempdir().unwrap();
        let out = OutPaths::new(dir.path());
        let a = stage_train(&cfg, &out).unwrap();
        let mut changed = cfg.clone();
        changed.seed = 22;
        let b = stage_train(&changed, &out).unwrap();
        assert_ne!(a.scenarios, b.scenarios);
        // And the meta now belongs to the new config.
        let c = stage_train(&changed, &out).unwrap();
        assert_eq!(b, c);
    }

    #[test]
    fn sweep_rows_and_csv() {
        let mut cfg = desk_cfg();
        cfg.ks = vec![1, 2, 3];
        cfg.sa.max_iterations = Some(300);
        let dir = tempfile::tempdir().unwrap();
        let rows = run_sweep(&cfg, dir.path(), false).unwrap();
        assert_eq!(rows.len(), 3);
        for pair in rows.windows(2) {
            assert!(pair[1].best_loss <= pair[0].best_loss);
        }
        let text = std::fs::read_to_string(OutPaths::new(dir.path()).sweep()).unwrap();
        assert!(text.starts_with("# config_digest="));
        assert!(text.contains("k,best_loss,chain_spread,flagged,cleaned"));
    }

    #[test]
    fn comparison_runs_require_configuration() {
        let cfg = desk_cfg();
        let dir = tempfile::tempdir().unwrap();
        // No ks configured.
        assert!(run_sweep(&cfg, dir.path(), false).is_err());
        // No restriction configured.
        let mut with_ks = cfg.clone();
        with_ks.ks = vec![2];
        assert!(run_compare_restriction(&with_ks, dir.path(), false).is_err());
        // Single-OC design cannot run the marginal study.
        assert!(run_compare_marginals(&with_ks, dir.path(), false).is_err());
    }
}
