//! Closed-form oracle for the two-arm RCT with a single power OC: the
//! optimal K scenarios place their power values at the odd multiples of
//! 1/(2K), giving loss exactly 1/(2K).

use serde::{Deserialize, Serialize};

use crate::designs::{rct_power_inverse, TwoArmRctConfig};
use crate::error::RosaError;
use crate::Result;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactApp1Solution {
    pub k: usize,
    /// Optimal power targets (2k - 1)/(2K), strictly increasing in (0, 1).
    pub targets: Vec<f64>,
    /// Effect sizes whose exact power equals the targets.
    pub thetas: Vec<f64>,
    /// 1/(2K).
    pub exact_loss: f64,
}

pub fn exact_app1(k: usize, cfg: &TwoArmRctConfig) -> Result<ExactApp1Solution> {
    if k == 0 {
        return Err(RosaError::InvalidConfig("K must be at least 1".into()));
    }
    let targets: Vec<f64> = (1..=k).map(|i| (2 * i - 1) as f64 / (2 * k) as f64).collect();
    let thetas = targets
        .iter()
        .map(|&t| rct_power_inverse(t, cfg))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ExactApp1Solution {
        k,
        targets,
        thetas,
        exact_loss: 1.0 / (2 * k) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::rct_power_exact;

    #[test]
    fn k3_targets_are_sixths() {
        let sol = exact_app1(3, &TwoArmRctConfig::default()).unwrap();
        assert_eq!(sol.targets, vec![1.0 / 6.0, 0.5, 5.0 / 6.0]);
        assert_eq!(sol.exact_loss, 1.0 / 6.0);
    }

    #[test]
    fn table_losses() {
        let cfg = TwoArmRctConfig::default();
        assert_eq!(exact_app1(10, &cfg).unwrap().exact_loss, 0.050);
        let l30 = exact_app1(30, &cfg).unwrap().exact_loss;
        assert!((l30 - 0.0167).abs() < 5e-5);
    }

    #[test]
    fn forward_evaluation_round_trips() {
        let cfg = TwoArmRctConfig::default();
        for k in [1, 3, 10, 30] {
            let sol = exact_app1(k, &cfg).unwrap();
            for (theta, target) in sol.thetas.iter().zip(&sol.targets) {
                assert!((rct_power_exact(*theta, &cfg) - target).abs() < 1e-10);
            }
            for pair in sol.targets.windows(2) {
                assert!(pair[0] < pair[1]);
            }
            assert!(sol.targets[0] > 0.0 && *sol.targets.last().unwrap() < 1.0);
        }
    }

    #[test]
    fn k_zero_rejected() {
        assert!(exact_app1(0, &TwoArmRctConfig::default()).is_err());
    }
}
