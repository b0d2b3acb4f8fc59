//! Scenario generation: Latin hypercube training designs and the diffuse
//! uniform cloud over which the coverage loss is evaluated.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ParameterSpace, Scenario};
use crate::rng::substream;

/// Latin hypercube plan: J points stratified per free dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LhsPlan {
    pub points: usize,
    pub space: ParameterSpace,
    pub seed: u64,
}

/// Uniform cloud spec for the finite loss approximation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CloudSpec {
    pub size: usize,
    pub space: ParameterSpace,
    pub seed: u64,
}

// Stream tags keeping LHS, cloud and other consumers of the same run seed
// independent.
const STREAM_LHS: u64 = 0x4c48_53;
const STREAM_CLOUD: u64 = 0x434c_4f55_44;

/// Latin hypercube sample: for each free dimension the J points occupy the J
/// equal-width strata exactly once, jittered uniformly within each stratum,
/// with stratum orderings permuted independently per dimension. Fixed
/// dimensions are emitted at their fixed value.
///
/// Each dimension draws from its own substream, so adding a dimension does
/// not perturb the values of the others.
pub fn lhs_sample(plan: &LhsPlan) -> Vec<Scenario> {
    let d = plan.space.dim();
    let j = plan.points;
    let mut columns = vec![vec![0.0f64; j]; d];
    for (i, col) in columns.iter_mut().enumerate() {
        if let Some(v) = plan.space.fixed_value(i) {
            col.fill(v);
            continue;
        }
        let mut rng = substream(plan.seed, &[STREAM_LHS, i as u64]);
        let mut order: Vec<usize> = (0..j).collect();
        order.shuffle(&mut rng);
        let lo = plan.space.lower()[i];
        let width = plan.space.range(i) / j as f64;
        for (row, &stratum) in order.iter().enumerate() {
            let u: f64 = rng.gen();
            col[row] = lo + (stratum as f64 + u) * width;
        }
    }
    (0..j)
        .map(|row| Scenario::new((0..d).map(|i| columns[i][row]).collect()))
        .collect()
}

/// Independent uniforms per free dimension; fixed dimensions at their fixed
/// values.
pub fn uniform_sample(spec: &CloudSpec) -> Vec<Scenario> {
    sample_uniform_in(&spec.space, spec.size, spec.seed, STREAM_CLOUD)
}

/// Uniform draws with an explicit stream tag; used by the annealer for
/// initial sets and by the validation stage.
pub fn sample_uniform_in(
    space: &ParameterSpace,
    n: usize,
    seed: u64,
    stream: u64,
) -> Vec<Scenario> {
    let d = space.dim();
    let mut rng = substream(seed, &[stream]);
    (0..n)
        .map(|_| {
            Scenario::new(
                (0..d)
                    .map(|i| match space.fixed_value(i) {
                        Some(v) => v,
                        None => {
                            let u: f64 = rng.gen();
                            space.lower()[i] + u * space.range(i)
                        }
                    })
                    .collect(),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParameterSpace;
    use std::collections::BTreeMap;

    fn space2() -> ParameterSpace {
        ParameterSpace::new(
            vec!["x".into(), "y".into()],
            vec![0.0, 10.0],
            vec![1.0, 20.0],
        )
        .unwrap()
    }

    fn stratum(v: f64, lo: f64, hi: f64, j: usize) -> usize {
        (((v - lo) / (hi - lo) * j as f64).floor() as usize).min(j - 1)
    }

    #[test]
    fn lhs_one_point_per_stratum() {
        let plan = LhsPlan { points: 4, space: space2(), seed: 11 };
        let pts = lhs_sample(&plan);
        assert_eq!(pts.len(), 4);
        for dim in 0..2 {
            let (lo, hi) = (plan.space.lower()[dim], plan.space.upper()[dim]);
            let mut seen: Vec<usize> = pts.iter().map(|s| stratum(s.theta[dim], lo, hi, 4)).collect();
            seen.sort_unstable();
            assert_eq!(seen, vec![0, 1, 2, 3]);
        }
    }

    #[test]
    fn lhs_flat_histogram_many_points() {
        let plan = LhsPlan { points: 64, space: space2(), seed: 3 };
        let pts = lhs_sample(&plan);
        for dim in 0..2 {
            let (lo, hi) = (plan.space.lower()[dim], plan.space.upper()[dim]);
            let mut counts = vec![0usize; 64];
            for s in &pts {
                counts[stratum(s.theta[dim], lo, hi, 64)] += 1;
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn lhs_single_point_in_box() {
        let plan = LhsPlan { points: 1, space: space2(), seed: 5 };
        let pts = lhs_sample(&plan);
        assert_eq!(pts.len(), 1);
        assert!(plan.space.contains(&pts[0]));
    }

    #[test]
    fn lhs_fixed_dimension_constant() {
        let space = space2()
            .restrict(&[("x".to_string(), 0.5)].into_iter().collect::<BTreeMap<_, _>>())
            .unwrap();
        let plan = LhsPlan { points: 8, space, seed: 5 };
        let pts = lhs_sample(&plan);
        assert!(pts.iter().all(|s| s.theta[0] == 0.5));
    }

    #[test]
    fn lhs_reproducible() {
        let plan = LhsPlan { points: 16, space: space2(), seed: 42 };
        assert_eq!(lhs_sample(&plan), lhs_sample(&plan));
    }

    #[test]
    fn adding_dimension_preserves_existing_columns() {
        let plan2 = LhsPlan { points: 16, space: space2(), seed: 42 };
        let space3 = ParameterSpace::new(
            vec!["x".into(), "y".into(), "z".into()],
            vec![0.0, 10.0, -1.0],
            vec![1.0, 20.0, 1.0],
        )
        .unwrap();
        let plan3 = LhsPlan { points: 16, space: space3, seed: 42 };
        let a = lhs_sample(&plan2);
        let b = lhs_sample(&plan3);
        for (s2, s3) in a.iter().zip(&b) {
            assert_eq!(s2.theta[0], s3.theta[0]);
            assert_eq!(s2.theta[1], s3.theta[1]);
        }
    }

    #[test]
    fn uniform_cloud_moments_and_determinism() {
        let spec = CloudSpec { size: 20_000, space: space2(), seed: 9 };
        let pts = uniform_sample(&spec);
        assert_eq!(pts, uniform_sample(&spec));
        for dim in 0..2 {
            let mid = 0.5 * (spec.space.lower()[dim] + spec.space.upper()[dim]);
            let range = spec.space.range(dim);
            let mean = pts.iter().map(|s| s.theta[dim]).sum::<f64>() / pts.len() as f64;
            let tol = 3.0 * (range * range / 12.0 / pts.len() as f64).sqrt();
            assert!((mean - mid).abs() < tol, "dim {dim}: mean {mean} vs {mid}");
        }
    }

    #[test]
    fn uniform_respects_fixed_dims() {
        let space = space2()
            .restrict(&[("y".to_string(), 15.0)].into_iter().collect::<BTreeMap<_, _>>())
            .unwrap();
        let spec = CloudSpec { size: 50, space, seed: 1 };
        let pts = uniform_sample(&spec);
        assert!(pts.iter().all(|s| s.theta[1] == 15.0));
    }
}
