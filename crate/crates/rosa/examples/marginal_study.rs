//! One joint scenario set versus per-OC sets.
//!
//! The auxiliary-outcome interim design has two operating characteristics
//! (rejection probability and expected sample size). Selecting a dedicated
//! set S_r for each OC minimizes that OC's marginal loss; selecting one
//! joint set S under the weighted metric trades them off. This prints
//! L_r(S_r), L_r(S) and their relative difference — when the difference is
//! small, the single joint set is an adequate summary of both OCs.

use std::path::Path;

use rosa::anneal::{SaConfig, Schedule};
use rosa::pipeline::{run_compare_marginals, RunConfig};

fn main() -> rosa::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.design = "aux-interim".into();
    cfg.seed = 13;
    cfg.pipeline.training_points = 500;
    cfg.pipeline.training_reps = 200;
    cfg.pipeline.validation_points = 100;
    cfg.pipeline.validation_reps = 5000;
    cfg.pipeline.cloud_size = 10_000;
    cfg.pipeline.chains = 2;
    cfg.mlp.learning_rate = 0.002;
    cfg.mlp.batch_size = 64;
    cfg.mlp.max_epochs = 6000;
    cfg.mlp.patience = 300;
    cfg.mlp.ensemble = 5;
    cfg.ks = vec![2, 5];
    cfg.sa = SaConfig {
        k: 5,
        t0: 0.2,
        r: 0.7,
        t_min: 1e-3,
        schedule: Schedule::PiecewiseConstant,
        steps_per_temp: 40,
        sd_frac: 0.1,
        sd_frac_final: Some(0.01),
        max_iterations: Some(800),
    };

    let out_dir = Path::new("out/marginal_study");
    let rows = run_compare_marginals(&cfg, out_dir, false)?;

    println!(
        "{:>3} {:>14} {:>12} {:>12} {:>10} {:>6}",
        "K", "oc", "L_r(S_r)", "L_r(S)", "rel diff", "small"
    );
    for row in &rows {
        println!(
            "{:>3} {:>14} {:>12.5} {:>12.5} {:>10.4} {:>6}",
            row.k, row.oc, row.loss_sr, row.loss_s, row.relative_diff, row.small
        );
    }
    println!("\nmarginals.csv written to {}", out_dir.display());
    Ok(())
}
