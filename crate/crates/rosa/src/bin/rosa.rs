//! Thin command-line front end over the pipeline stages.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rosa::pipeline::{
    exact_app1, run_compare_marginals, run_compare_restriction, run_pipeline, run_sweep,
    stage_fit, stage_select, stage_train, stage_validate, OutPaths, RunConfig,
};
use rosa::{pipeline::build_cloud_cache, RosaError};

#[derive(Parser)]
#[command(name = "rosa", version, about = "Representative scenario selection for trial sensitivity analyses")]
struct Cli {
    /// Path to the TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Bound the worker thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory for intermediates and reports.
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,

    /// Proceed past a failed surrogate validation gate.
    #[arg(long, global = true)]
    force: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample training scenarios and estimate their OCs by Monte Carlo.
    Train,
    /// Fit the surrogate on the persisted training set.
    Fit,
    /// Validate the surrogate against independent MC estimates.
    Validate,
    /// Run annealing chains and report the selected scenario set.
    Select,
    /// Sweep the configured K values and emit sweep.csv.
    Sweep,
    /// Compare selection from the restricted vs the full candidate space.
    CompareRestriction,
    /// Compare per-OC marginal selection with joint selection.
    CompareMarginals,
    /// Print the closed-form optimal solution for the two-arm RCT design.
    OracleApp1 {
        /// Number of scenarios.
        #[arg(long, default_value_t = 3)]
        k: usize,
    },
    /// Run the full pipeline and emit report.csv / report.json.
    Report,
}

fn load_config(cli: &Cli) -> Result<RunConfig, RosaError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<(), RosaError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| RosaError::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let out = OutPaths::new(&cli.out_dir);

    match &cli.command {
        Command::Train => {
            let cfg = load_config(cli)?;
            let set = stage_train(&cfg, &out)?;
            println!(
                "trained {} scenarios x {} reps -> {}",
                set.len(),
                set.reps,
                out.train_ocs().display()
            );
        }
        Command::Fit => {
            let cfg = load_config(cli)?;
            let model = stage_fit(&cfg, &out)?;
            println!(
                "fitted surrogate ({} epochs, best holdout loss {:.6e}) -> {}",
                model.record.epochs_run,
                model.record.best_holdout_loss,
                out.model().display()
            );
        }
        Command::Validate => {
            let cfg = load_config(cli)?;
            let report = stage_validate(&cfg, &out, cli.force)?;
            for (name, r2) in report.oc_names.iter().zip(&report.r_squared) {
                println!("{name}: R^2 = {r2:.4}");
            }
            println!("scatter -> {}", out.validation().display());
        }
        Command::Select => {
            let cfg = load_config(cli)?;
            stage_validate(&cfg, &out, cli.force)?;
            let model = stage_fit(&cfg, &out)?;
            let cache = build_cloud_cache(&cfg, &model)?;
            let (traces, summary, _) = stage_select(&cfg, &out, &model, &cache)?;
            println!(
                "best loss {:.6} over {} chains (spread {:.2}%{})",
                summary.min_loss,
                traces.len(),
                100.0 * summary.relative_spread,
                if summary.flagged { ", CONVERGENCE FLAG" } else { "" }
            );
            for s in &traces[summary.best_chain].best_set.scenarios {
                println!("{:?}", s.theta);
            }
        }
        Command::Sweep => {
            let cfg = load_config(cli)?;
            let rows = run_sweep(&cfg, &cli.out_dir, cli.force)?;
            println!("k,best_loss");
            for row in &rows {
                println!("{},{:.6}", row.k, row.best_loss);
            }
        }
        Command::CompareRestriction => {
            let cfg = load_config(cli)?;
            let rows = run_compare_restriction(&cfg, &cli.out_dir, cli.force)?;
            println!("k,loss_full,loss_restricted");
            for row in &rows {
                println!("{},{:.6},{:.6}", row.k, row.loss_full, row.loss_restricted);
            }
        }
        Command::CompareMarginals => {
            let cfg = load_config(cli)?;
            let rows = run_compare_marginals(&cfg, &cli.out_dir, cli.force)?;
            println!("k,oc,loss_sr,loss_s,relative_diff");
            for row in &rows {
                println!(
                    "{},{},{:.6},{:.6},{:.4}",
                    row.k, row.oc, row.loss_sr, row.loss_s, row.relative_diff
                );
            }
        }
        Command::OracleApp1 { k } => {
            let cfg = load_config(cli)?;
            let rct = cfg.rct2arm.clone().unwrap_or_default();
            let sol = exact_app1(*k, &rct)?;
            println!("K = {}, exact loss = {:.6}", sol.k, sol.exact_loss);
            println!("target_power,theta");
            for (t, theta) in sol.targets.iter().zip(&sol.thetas) {
                println!("{t:.6},{theta:.6}");
            }
        }
        Command::Report => {
            let cfg = load_config(cli)?;
            let report = run_pipeline(&cfg, &cli.out_dir, cli.force)?;
            println!(
                "selected {} scenarios, achieved loss {:.6}",
                report.scenario_set.k(),
                report.achieved_loss
            );
            println!("report -> {}", out.report_csv().display());
        }
    }
    Ok(())
}

fn gate_failure(err: &RosaError) -> bool {
    match err {
        RosaError::ValidationGate { .. } => true,
        RosaError::Stage { source, .. } | RosaError::Simulation { source, .. } => {
            gate_failure(source)
        }
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            if gate_failure(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
