//! Restricted versus unrestricted candidate spaces.
//!
//! For the auxiliary-outcome interim design, fixes the nuisance dimensions
//! (enrollment rate and the control-arm rates) and compares the achievable
//! loss when candidates are confined to that slice against the full
//! seven-dimensional space. The cloud the loss is measured over is always
//! the full space, so the two columns are directly comparable: the gap is
//! the price of the restriction.

use std::path::Path;

use rosa::anneal::{SaConfig, Schedule};
use rosa::pipeline::{run_compare_restriction, RunConfig};

fn main() -> rosa::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.design = "aux-interim".into();
    cfg.seed = 11;
    cfg.restriction.insert("e".into(), 0.5);
    cfg.restriction.insert("p0".into(), 0.3);
    cfg.restriction.insert("q0".into(), 0.3);
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
    cfg.ks = vec![2, 5, 10];
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

    let out_dir = Path::new("out/restriction_study");
    let rows = run_compare_restriction(&cfg, out_dir, false)?;

    println!("{:>3} {:>12} {:>12} {:>10}", "K", "full", "restricted", "gap");
    for row in &rows {
        println!(
            "{:>3} {:>12.5} {:>12.5} {:>10.5}",
            row.k,
            row.loss_full,
            row.loss_restricted,
            row.loss_restricted - row.loss_full
        );
    }
    println!("\nrestriction.csv written to {}", out_dir.display());
    Ok(())
}
