//! Closed-form scenario selection for the two-arm RCT.
//!
//! With a single power operating characteristic the optimal K scenarios are
//! known exactly: their powers sit at the odd multiples of 1/(2K) and the
//! minimax loss is 1/(2K). This prints the solution for a few K, which the
//! other examples use as ground truth.

use rosa::designs::{rct_power_exact, TwoArmRctConfig};
use rosa::pipeline::exact_app1;

fn main() -> rosa::Result<()> {
    let cfg = TwoArmRctConfig::default();
    println!(
        "two-arm RCT: n = {} per arm, sigma = {}, alpha = {}",
        cfg.n, cfg.sigma, cfg.alpha
    );
    for k in [1, 3, 5, 10, 30] {
        let sol = exact_app1(k, &cfg)?;
        println!("\nK = {k}: exact loss = {:.6}", sol.exact_loss);
        for (theta, target) in sol.thetas.iter().zip(&sol.targets) {
            println!(
                "  theta = {theta:>8.4}  target power = {target:.4}  check = {:.6}",
                rct_power_exact(*theta, &cfg)
            );
        }
    }
    Ok(())
}
