//! Two knapsacks sharing a pool of items with correlated Gaussian profits.

use super::{random_psd, stream, AppError, Stream};
use crate::gaussian::GaussianVector;
use crate::model::{FeasibleRegion, InstanceMeta, LinearConstraint, ProblemInstance, Relation, Sense};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const CAPACITY: f64 = 40.0;
pub const WEIGHT_RANGE: (u32, u32) = (1, 19);
pub const MEAN_RANGE: (f64, f64) = (15.0, 25.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnapsackSpec {
    pub n: usize,
    /// Covariance multiplier.
    pub alpha: f64,
    pub seed: u64,
    pub sense: Sense,
}

impl KnapsackSpec {
    pub fn new(n: usize, alpha: f64, seed: u64) -> Self {
        Self { n, alpha, seed, sense: Sense::Maximize }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.n == 0 {
            return Err(AppError::Spec("n must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(AppError::Spec(format!("alpha must be positive, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Item weights for `spec`.
pub fn knapsack_weights(spec: &KnapsackSpec) -> Vec<u32> {
    let mut rng = stream(spec.seed, Stream::Weights);
    (0..spec.n).map(|_| rng.random_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1)).collect()
}

/// Knapsack rows `sum_j a_j x_ij <= 40` for both rows and disjointness
/// `x_1j + x_2j <= 1`.
pub fn knapsack_region(weights: &[u32], capacity: f64) -> FeasibleRegion {
    let n = weights.len();
    let mut rows = Vec::with_capacity(n + 2);
    for i in 0..2 {
        rows.push(LinearConstraint::new((0..n).map(|j| (i, j, f64::from(weights[j]))), Relation::Le, capacity));
    }
    for j in 0..n {
        rows.push(LinearConstraint::new([(0, j, 1.0), (1, j, 1.0)], Relation::Le, 1.0));
    }
    FeasibleRegion::new(n, rows).expect("indices in range")
}

pub fn gen_knapsack(spec: &KnapsackSpec) -> Result<ProblemInstance, AppError> {
    spec.validate()?;
    let n = spec.n;
    let weights = knapsack_weights(spec);
    let mut rng = stream(spec.seed, Stream::Means);
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(MEAN_RANGE.0..MEAN_RANGE.1)).collect();
    let cov: Vec<f64> = random_psd(n, &mut stream(spec.seed, Stream::Covariance)).into_iter().map(|v| spec.alpha * v).collect();
    let g = GaussianVector::from_flat(mu, cov)?;
    let label = format!("kp-n{}-a{}-s{}", n, spec.alpha, spec.seed);
    Ok(ProblemInstance::new(g, knapsack_region(&weights, CAPACITY), spec.sense, label)?.with_meta(InstanceMeta {
        family: Some("kp".into()),
        param: Some(spec.alpha),
        seed: Some(spec.seed),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_in_range() {
        let spec = KnapsackSpec::new(12, 50.0, 9);
        let a = gen_knapsack(&spec).unwrap();
        let b = gen_knapsack(&spec).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert!(knapsack_weights(&spec).iter().all(|w| (1..=19).contains(w)));
        assert!(a.gaussian.mu().iter().all(|m| (15.0..25.0).contains(m)));
        assert_eq!(a.region.constraints().len(), 14);
        assert!(a.region.constraints()[..2].iter().all(|c| c.rhs == 40.0));
        assert!(a.region.is_swap_symmetric());
        assert_eq!(a.sense, Sense::Maximize);
    }

    #[test]
    fn alpha_scales_covariance() {
        let one = gen_knapsack(&KnapsackSpec::new(5, 1.0, 2)).unwrap();
        let many = gen_knapsack(&KnapsackSpec::new(5, 250.0, 2)).unwrap();
        for (a, b) in one.gaussian.cov_flat().iter().zip(many.gaussian.cov_flat()) {
            assert!((250.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn invalid_alpha() {
        assert!(gen_knapsack(&KnapsackSpec::new(5, 0.0, 2)).is_err());
        assert!(gen_knapsack(&KnapsackSpec::new(0, 1.0, 2)).is_err());
    }
}
