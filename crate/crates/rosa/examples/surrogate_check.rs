//! Surrogate quality on a problem with a known answer.
//!
//! Fits the MLP to Monte Carlo power estimates for the two-arm RCT, then
//! scores the predictions against the closed-form power curve on a fine
//! grid — a sharper check than the usual held-out MC validation, since the
//! reference is exact. Also runs the finite-difference gradient check that
//! guards the backpropagation code.

use rosa::designs::{rct_power_exact, TrialDesign, TwoArmRctConfig, TwoArmRctDesign};
use rosa::mc::estimate_ocs;
use rosa::model::{OcVector, Scenario};
use rosa::sampling::{lhs_sample, LhsPlan};
use rosa::surrogate::{gradient_check, Mlp, MlpConfig, Surrogate};

fn main() -> rosa::Result<()> {
    let design = TwoArmRctDesign::new(TwoArmRctConfig::default())?;
    let space = design.parameter_space();
    let seed = 7;

    let plan = LhsPlan { points: 300, space: space.clone(), seed };
    let scenarios = lhs_sample(&plan);
    println!("estimating {} training scenarios at 200 reps each...", scenarios.len());
    let train = estimate_ocs(&design, &scenarios, 200, seed)?;

    let cfg = MlpConfig::default();
    let model = Mlp::fit(&train, &space, &design.oc_schema(), &cfg, seed)?;
    println!(
        "trained: best epoch {} of {}, holdout loss {:.2e}",
        model.record.best_epoch,
        model.record.epochs_run,
        model.record.best_holdout_loss
    );

    // Score against the exact curve on a 400-point grid.
    let grid: Vec<Scenario> = (0..400)
        .map(|i| {
            let t = space.lower()[0] + space.range(0) * (i as f64 + 0.5) / 400.0;
            Scenario::new(vec![t])
        })
        .collect();
    let preds = model.predict_batch(&grid)?;
    let exact: Vec<f64> = grid.iter().map(|s| rct_power_exact(s.theta[0], &design.cfg)).collect();
    let mean = exact.iter().sum::<f64>() / exact.len() as f64;
    let ss_tot: f64 = exact.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 =
        exact.iter().zip(&preds).map(|(y, p)| (y - p.values[0]).powi(2)).sum();
    let max_err = exact
        .iter()
        .zip(&preds)
        .map(|(y, p)| (y - p.values[0]).abs())
        .fold(0.0f64, f64::max);
    println!("R^2 vs exact power curve: {:.5}", 1.0 - ss_res / ss_tot);
    println!("max abs error:            {max_err:.5}");

    let probes: Vec<(Scenario, OcVector)> = train
        .scenarios
        .iter()
        .take(16)
        .zip(&train.oc_means)
        .map(|(s, y)| (s.clone(), y.clone()))
        .collect();
    let grad_err = gradient_check(&model, &probes, 200, seed);
    println!("max relative gradient error (central differences): {grad_err:.2e}");
    Ok(())
}
