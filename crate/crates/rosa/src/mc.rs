//! Monte Carlo estimation of OCs: run M simulated trials per scenario and
//! average the per-trial contributions.
//!
//! Random streams are derived per (scenario, rep), never per worker, so the
//! estimates are bit-identical regardless of thread count.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::TrialDesign;
use crate::error::RosaError;
use crate::model::{OcVector, Scenario};
use crate::rng::substream;
use crate::sampling::sample_uniform_in;
use crate::Result;

const STREAM_MC: u64 = 0x4d43;
const STREAM_VALIDATION_POINTS: u64 = 0x56504f494e5453;

/// Scenario-level OC estimates: means of M per-trial contributions, with
/// per-scenario per-OC Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub scenarios: Vec<Scenario>,
    pub oc_means: Vec<OcVector>,
    pub reps: u32,
    pub mc_se: Vec<Vec<f64>>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Estimate the OCs of `design` at each scenario by averaging `reps`
/// independent simulations.
pub fn estimate_ocs(
    design: &dyn TrialDesign,
    scenarios: &[Scenario],
    reps: u32,
    seed: u64,
) -> Result<TrainingSet> {
    assert!(reps >= 1);
    let r = design.oc_schema().r();
    let per_scenario: Result<Vec<(OcVector, Vec<f64>)>> = scenarios
        .par_iter()
        .enumerate()
        .map(|(j, scenario)| {
            let mut sums = vec![0.0f64; r];
            let mut sum_squares = vec![0.0f64; r];
            for m in 0..reps {
                let mut rng = substream(seed, &[STREAM_MC, j as u64, m as u64]);
                let contribution =
                    design
                        .simulate_once(scenario, &mut rng)
                        .map_err(|e| RosaError::Simulation {
                            index: j,
                            source: Box::new(e),
                        })?;
                for (i, v) in contribution.values.iter().enumerate() {
                    sums[i] += v;
                    sum_squares[i] += v * v;
                }
            }
            let m = reps as f64;
            let means: Vec<f64> = sums.iter().map(|s| s / m).collect();
            let se: Vec<f64> = sums
                .iter()
                .zip(&sum_squares)
                .map(|(&s, &ss)| {
                    if reps < 2 {
                        0.0
                    } else {
                        let var = ((ss - s * s / m) / (m - 1.0)).max(0.0);
                        (var / m).sqrt()
                    }
                })
                .collect();
            Ok((OcVector::new(means), se))
        })
        .collect();
    let per_scenario = per_scenario?;
    let (oc_means, mc_se) = per_scenario.into_iter().unzip();
    Ok(TrainingSet {
        scenarios: scenarios.to_vec(),
        oc_means,
        reps,
        mc_se,
    })
}

/// Validation estimates per Algorithm 2: J' uniform scenarios, M' reps each,
/// independent of the training computations (use a distinct seed).
pub fn validation_estimates(
    design: &dyn TrialDesign,
    j_prime: usize,
    m_prime: u32,
    space: &crate::model::ParameterSpace,
    seed: u64,
) -> Result<TrainingSet> {
    let scenarios = sample_uniform_in(space, j_prime, seed, STREAM_VALIDATION_POINTS);
    estimate_ocs(design, &scenarios, m_prime, seed)
}

/// Persist a training set as a CSV pair plus a JSON sidecar, so fit and
/// validate can run as separate invocations.
pub fn save_training_set(
    set: &TrainingSet,
    dim_names: &[String],
    oc_names: &[String],
    design_name: &str,
    seed: u64,
    config_digest: &str,
    scenarios_path: &Path,
    ocs_path: &Path,
    meta_path: &Path,
) -> Result<()> {
    let mut w = csv::Writer::from_path(scenarios_path)?;
    w.write_record(dim_names)?;
    for s in &set.scenarios {
        w.write_record(s.theta.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(ocs_path)?;
    let header: Vec<String> = oc_names
        .iter()
        .cloned()
        .chain(oc_names.iter().map(|n| format!("{n}_se")))
        .collect();
    w.write_record(&header)?;
    for (oc, se) in set.oc_means.iter().zip(&set.mc_se) {
        w.write_record(oc.values.iter().chain(se.iter()).map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;

    let meta = TrainingMeta {
        design: design_name.to_string(),
        reps: set.reps,
        seed,
        config_digest: config_digest.to_string(),
        count: set.len(),
    };
    std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub design: String,
    pub reps: u32,
    pub seed: u64,
    pub config_digest: String,
    pub count: usize,
}

/// Load a training set saved with [`save_training_set`].
pub fn load_training_set(
    scenarios_path: &Path,
    ocs_path: &Path,
    meta_path: &Path,
) -> Result<(TrainingSet, TrainingMeta)> {
    let meta: TrainingMeta = serde_json::from_str(&std::fs::read_to_string(meta_path)?)?;
    let parse_rows = |path: &Path| -> Result<Vec<Vec<f64>>> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            rows.push(
                rec.iter()
                    .map(|f| {
                        f.parse::<f64>().map_err(|e| {
                            RosaError::InvalidConfig(format!("bad float `{f}` in {path:?}: {e}"))
                        })
                    })
                    .collect::<Result<Vec<f64>>>()?,
            );
        }
        Ok(rows)
    };
    let scen_rows = parse_rows(scenarios_path)?;
    let oc_rows = parse_rows(ocs_path)?;
    if scen_rows.len() != oc_rows.len() {
        return Err(RosaError::InvalidConfig(format!(
            "scenario rows ({}) and OC rows ({}) disagree",
            scen_rows.len(),
            oc_rows.len()
        )));
    }
    let r = oc_rows.first().map_or(0, |row| row.len() / 2);
    let set = TrainingSet {
        scenarios: scen_rows.into_iter().map(Scenario::new).collect(),
        oc_means: oc_rows.iter().map(|row| OcVector::new(row[..r].to_vec())).collect(),
        reps: meta.reps,
        mc_se: oc_rows.iter().map(|row| row[r..].to_vec()).collect(),
    };
    Ok((set, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{rct_power_exact, TwoArmRctDesign};

    #[test]
    fn rct_training_mean_near_anchor() {
        let design = TwoArmRctDesign::default();
        let set = estimate_ocs(&design, &[Scenario::new(vec![13.5])], 200, 101).unwrap();
        let mean = set.oc_means[0].values[0];
        let exact = rct_power_exact(13.5, &design.cfg);
        let band = 3.0 * (exact * (1.0 - exact) / 200.0).sqrt();
        assert!((mean - exact).abs() < band, "mean {mean}, exact {exact}");
        assert!(set.mc_se[0][0] > 0.0);
    }

    #[test]
    fn single_rep_mean_is_the_contribution() {
        let design = TwoArmRctDesign::default();
        let set = estimate_ocs(&design, &[Scenario::new(vec![10.0])], 1, 5).unwrap();
        assert!(set.oc_means[0].values[0] == 0.0 || set.oc_means[0].values[0] == 1.0);
        assert_eq!(set.mc_se[0][0], 0.0);
    }

    #[test]
    fn doubling_reps_shrinks_variance() {
        let design = TwoArmRctDesign::default();
        let theta = vec![Scenario::new(vec![9.0])];
        let spread = |reps: u32| {
            let means: Vec<f64> = (0..100)
                .map(|seed| estimate_ocs(&design, &theta, reps, seed).unwrap().oc_means[0].values[0])
                .collect();
            let m = means.iter().sum::<f64>() / means.len() as f64;
            means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / means.len() as f64
        };
        let v100 = spread(100);
        let v400 = spread(400);
        assert!(v400 < v100 * 0.6, "v100 {v100}, v400 {v400}");
    }

    #[test]
    fn reproducible_independent_of_thread_count() {
        let design = TwoArmRctDesign::default();
        let scenarios: Vec<Scenario> = (0..20).map(|i| Scenario::new(vec![i as f64])).collect();
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| estimate_ocs(&design, &scenarios, 50, 7).unwrap());
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| estimate_ocs(&design, &scenarios, 50, 7).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn validation_points_lie_in_space() {
        let design = TwoArmRctDesign::default();
        let space = design.parameter_space();
        let set = validation_estimates(&design, 50, 10, &space, 9).unwrap();
        assert_eq!(set.len(), 50);
        assert!(set.scenarios.iter().all(|s| space.contains(s)));
        assert!(set.oc_means.iter().all(|oc| (0.0..=1.0).contains(&oc.values[0])));
    }

    #[test]
    fn training_set_round_trips_through_disk() {
        let design = TwoArmRctDesign::default();
        let scenarios: Vec<Scenario> = (0..5).map(|i| Scenario::new(vec![i as f64 * 3.0])).collect();
        let set = estimate_ocs(&design, &scenarios, 40, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (sp, op, mp) = (
            dir.path().join("scen.csv"),
            dir.path().join("ocs.csv"),
            dir.path().join("meta.json"),
        );
        save_training_set(
            &set,
            &["theta".to_string()],
            &["reject_prob".to_string()],
            "rct2arm",
            3,
            "digest",
            &sp,
            &op,
            &mp,
        )
        .unwrap();
        let (loaded, meta) = load_training_set(&sp, &op, &mp).unwrap();
        assert_eq!(loaded, set);
        assert_eq!(meta.design, "rct2arm");
    }
}
