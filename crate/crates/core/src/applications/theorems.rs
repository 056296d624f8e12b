//! Numerical checks of the structural results for uncorrelated makespan
//! instances: the stochastic and deterministic problems share optimal
//! splits, and minimizing the enhanced bound is a constant-factor
//! approximation.

use super::makespan::{deterministic_makespan_opt, makespan_of, MakespanMode};
use super::AppError;
use crate::bounding::enhanced_bound;
use crate::gaussian::{expected_max, pair_moments, GaussianVector, SelectionPair};
use crate::model::{ProblemInstance, Relation, Sense};
use crate::oracle::brute_force;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Largest job count the checks enumerate.
pub const MAX_JOBS: usize = 20;
/// Pinned approximation threshold.
pub const THEOREM3_FACTOR: f64 = 2.005;

/// `1 + 1/sqrt(e) + 1/sqrt(2 pi)`, the unrounded approximation factor.
pub fn theorem3_constant() -> f64 {
    1.0 + 1.0 / E.sqrt() + 1.0 / (2.0 * PI).sqrt()
}

fn check_preconditions(instance: &ProblemInstance) -> Result<(), AppError> {
    let n = instance.n();
    if !instance.gaussian.is_uncorrelated() {
        return Err(AppError::Precondition("covariance has nonzero off-diagonal entries".into()));
    }
    if instance.sense != Sense::Minimize {
        return Err(AppError::Precondition("makespan instances are minimized".into()));
    }
    if n > MAX_JOBS {
        return Err(AppError::Precondition(format!("{n} jobs, at most {MAX_JOBS} enumerated")));
    }
    if instance.gaussian.mu().iter().any(|&m| !(m > 0.0)) {
        return Err(AppError::Precondition("job means must be positive".into()));
    }
    let has_partition_row = |j: usize| {
        instance.region.constraints().iter().any(|c| c.rel == Relation::Eq && c.rhs == 1.0 && c.terms == [(0, j, 1.0), (1, j, 1.0)])
    };
    if !(0..n).all(has_partition_row) {
        return Err(AppError::Precondition("region lacks a partition row for some job".into()));
    }
    Ok(())
}

/// Every split of the jobs, row 1 taking the jobs set in `mask`.
fn partitions(n: usize) -> impl Iterator<Item = SelectionPair> {
    (0u32..1 << n).map(move |mask| {
        let row: Vec<bool> = (0..n).map(|j| mask >> j & 1 == 1).collect();
        let other = row.iter().map(|b| !b).collect();
        SelectionPair::new(row, other).expect("equal lengths")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub n: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub theta_constant: bool,
    pub stochastic_value: f64,
    /// Deterministic makespan of the stochastic optimum's split.
    pub stochastic_makespan: f64,
    pub optimal_makespan: f64,
    pub partition_optimal: bool,
    /// `E[makespan]` strictly increases with the deterministic makespan.
    pub monotone: bool,
}

impl Theorem2Report {
    pub fn passed(&self) -> bool {
        self.theta_constant && self.partition_optimal && self.monotone
    }
}

const REL_TOL: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn check_theorem2(instance: &ProblemInstance) -> Result<Theorem2Report, AppError> {
    check_preconditions(instance)?;
    let n = instance.n();
    let mu = instance.gaussian.mu();
    let mut points = Vec::with_capacity(1 << n);
    let (mut theta_min, mut theta_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in partitions(n) {
        let m = pair_moments(&instance.gaussian, &x)?;
        theta_min = theta_min.min(m.theta);
        theta_max = theta_max.max(m.theta);
        points.push((makespan_of(mu, x.row(0)), expected_max(&m)));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let monotone = points.windows(2).all(|w| if close(w[0].0, w[1].0) { close(w[0].1, w[1].1) } else { w[1].1 > w[0].1 });
    let best = brute_force(instance, 1 << (n + 1))?;
    let stochastic_makespan = makespan_of(mu, best.best_x.row(0));
    let (_, optimal_makespan) = deterministic_makespan_opt(mu, MakespanMode::Exact)?;
    Ok(Theorem2Report {
        n,
        theta_min,
        theta_max,
        theta_constant: close(theta_min, theta_max),
        stochastic_value: best.best_value,
        stochastic_makespan,
        optimal_makespan,
        partition_optimal: close(stochastic_makespan, optimal_makespan),
        monotone,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem3Report {
    pub n: usize,
    pub l: usize,
    /// Common `delta` interval length, equal to the rescaled `theta`.
    pub interval: f64,
    /// Largest `g(x) / E[max]` over all splits.
    pub max_ratio: f64,
    /// Splits where `g(x) < E[max]`, which would make `g` invalid.
    pub bound_violations: usize,
    /// `min_x g(x)`.
    pub rmp_optimum: f64,
    pub true_optimum: f64,
}

impl Theorem3Report {
    pub fn passed(&self) -> bool {
        self.bound_violations == 0 && self.max_ratio <= THEOREM3_FACTOR && self.rmp_optimum <= THEOREM3_FACTOR * self.true_optimum
    }
}

/// Rescales the variances so `theta` equals the length of `l` equal `delta`
/// intervals on `[0, sum mu]`, then compares the enhanced bound `g(x)`, with
/// `theta` known exactly, against `E[max]` on every split. Where `delta` sits
/// on a breakpoint the larger of the two interval bounds is used.
pub fn check_theorem3(instance: &ProblemInstance, l: usize) -> Result<Theorem3Report, AppError> {
    check_preconditions(instance)?;
    if l == 0 {
        return Err(AppError::Spec("need at least one delta interval".into()));
    }
    let n = instance.n();
    let mu = instance.gaussian.mu().to_vec();
    let var: Vec<f64> = (0..n).map(|j| instance.gaussian.variance(j)).collect();
    let theta2: f64 = var.iter().sum();
    if !(theta2 > 0.0) {
        return Err(AppError::Precondition("all variances are zero, so theta cannot be rescaled".into()));
    }
    let delta_top: f64 = mu.iter().sum();
    let interval = delta_top / l as f64;
    let c = interval * interval / theta2;
    let scaled = GaussianVector::independent(mu, &var.iter().map(|v| v * c).collect::<Vec<_>>())?;
    let breaks: Vec<f64> = (0..=l).map(|h| if h == l { delta_top } else { h as f64 * interval }).collect();
    let tol = 1e-9 * delta_top.max(1.0);
    let mut report = Theorem3Report {
        n,
        l,
        interval,
        max_ratio: 0.0,
        bound_violations: 0,
        rmp_optimum: f64::INFINITY,
        true_optimum: f64::INFINITY,
    };
    for x in partitions(n) {
        let m = pair_moments(&scaled, &x)?;
        let e = expected_max(&m);
        let mut g = f64::NEG_INFINITY;
        for h in 0..l {
            if breaks[h] <= m.delta + tol && m.delta <= breaks[h + 1] + tol {
                let lo = breaks[h].min(m.delta);
                let hi = breaks[h + 1].max(m.delta);
                g = g.max(enhanced_bound(&m, m.theta, m.theta, lo, hi).expect("ordered by construction"));
            }
        }
        if g < e - REL_TOL * e.abs().max(1.0) {
            report.bound_violations += 1;
        }
        report.max_ratio = report.max_ratio.max(g / e);
        report.rmp_optimum = report.rmp_optimum.min(g);
        report.true_optimum = report.true_optimum.min(e);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::makespan::{gen_makespan, partition_region, MakespanSpec};

    fn uncorrelated(mu: Vec<f64>, var: &[f64]) -> ProblemInstance {
        let n = mu.len();
        ProblemInstance::new(GaussianVector::independent(mu, var).unwrap(), partition_region(n), Sense::Minimize, "").unwrap()
    }

    #[test]
    fn constant_value() {
        assert!((theorem3_constant() - 2.005_473).abs() < 1e-6);
    }

    #[test]
    fn theorem2_on_generated_instance() {
        let inst = gen_makespan(&MakespanSpec::uncorrelated(10, 0.5, 4)).unwrap();
        let r = check_theorem2(&inst).unwrap();
        assert!(r.passed(), "{r:?}");
        let total: f64 = (0..10).map(|j| inst.gaussian.variance(j)).sum();
        assert!((r.theta_max - total.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn theorem2_two_equal_jobs() {
        let r = check_theorem2(&uncorrelated(vec![5.0, 5.0], &[1.0, 2.0])).unwrap();
        assert!(r.passed());
        assert_eq!(r.optimal_makespan, 5.0);
    }

    #[test]
    fn correlated_input_is_rejected() {
        let inst = gen_makespan(&MakespanSpec::new(6, 0.5, 1)).unwrap();
        if !inst.gaussian.is_uncorrelated() {
            assert!(check_theorem2(&inst).is_err());
            assert!(check_theorem3(&inst, 5).is_err());
        }
    }

    #[test]
    fn theorem3_on_generated_instance() {
        let inst = gen_makespan(&MakespanSpec::uncorrelated(10, 0.25, 7)).unwrap();
        let r = check_theorem3(&inst, 20).unwrap();
        assert!(r.passed(), "{r:?}");
        assert!(r.max_ratio >= 1.0 - 1e-12);
    }

    #[test]
    fn theorem3_rejects_zero_variance() {
        assert!(check_theorem3(&uncorrelated(vec![1.0, 2.0], &[0.0, 0.0]), 4).is_err());
    }
}
