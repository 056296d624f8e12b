//! Bounding functions, discretization grids, relaxed master problems and the
//! data they share.

pub mod bounds;
pub mod grid;
pub mod heuristic;
pub mod rmp;
pub mod svi;

pub use bounds::{baseline_bound, delta_gap_bound, enhanced_bound, enhanced_lower_bound, BoundError};
pub use grid::{build_grid, DiscretizationGrid};
pub use heuristic::{primal_heuristic, HeuristicResult};
pub use rmp::{PsiObjective, Rmp, RmpKind, RmpSolution};
pub use svi::{attach_svis, svi_theta_floor, theta_floors};

use crate::gaussian::INV_SQRT_2PI;
use crate::milp::{Backend, MilpError, MilpStatus};
use crate::model::{ProblemInstance, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BoundingError {
    #[error("the feasible region is empty")]
    RegionInfeasible,
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Grid plus the constants the RMP rows depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    pub grid: DiscretizationGrid,
    /// Deactivation constant for the `U` rows.
    pub big_m_u: f64,
    /// Deactivation constant for the `U'` rows.
    pub big_m_uprime: f64,
    pub z_lb: Option<f64>,
    /// Upper bound on `max E[Z1(x)]` over the region.
    pub u_bar: f64,
    /// `theta` floors per `delta` interval.
    pub theta_floors: Option<Vec<f64>>,
}

impl BoundContext {
    /// Context without SVIs. `big_m_u` is raised to the grid's `delta` top if
    /// smaller, which keeps deactivated rows slack.
    pub fn from_grid(grid: DiscretizationGrid, big_m_u: f64, u_bar: f64) -> Self {
        let big_m_uprime = big_m_uprime(&grid);
        Self { big_m_u: big_m_u.max(grid.delta_top()), big_m_uprime, grid, z_lb: None, u_bar, theta_floors: None }
    }

    /// Installs a lower bound and the floors derived from it.
    pub fn with_svis(mut self, z_lb: f64) -> Self {
        self.theta_floors = Some(theta_floors(&self.grid, z_lb, self.u_bar));
        self.z_lb = Some(z_lb);
        self
    }
}

/// `theta2_top / sqrt(2 pi)`.
pub fn big_m_uprime(grid: &DiscretizationGrid) -> f64 {
    grid.theta2_top() * INV_SQRT_2PI
}

fn psi_bound(instance: &ProblemInstance, objective: PsiObjective, backend: Backend, time_limit: f64) -> Result<f64, BoundingError> {
    let sol = Rmp::psi(instance, objective).solve(backend, time_limit)?;
    match sol.outcome.status {
        MilpStatus::Infeasible => Err(BoundingError::RegionInfeasible),
        _ => Ok(sol.outcome.dual_bound.expect("bound present unless infeasible")),
    }
}

/// Upper bound on `theta(x)^2` over the region.
pub fn compute_theta2_upper(instance: &ProblemInstance, backend: Backend, time_limit: f64) -> Result<f64, BoundingError> {
    psi_bound(instance, PsiObjective::Theta2, backend, time_limit)
}

/// Upper bound on `delta(x)` over the region.
pub fn compute_delta_upper(instance: &ProblemInstance, backend: Backend, time_limit: f64) -> Result<f64, BoundingError> {
    psi_bound(instance, PsiObjective::Delta, backend, time_limit).map(|d| d.max(0.0))
}

/// Upper bound on `max E[Z1(x)]` over the region.
pub fn compute_u1_upper(instance: &ProblemInstance, backend: Backend, time_limit: f64) -> Result<f64, BoundingError> {
    psi_bound(instance, PsiObjective::U1, backend, time_limit)
}

/// `(big_m_u, big_m_uprime)`: the sum of all means for makespan instances,
/// otherwise the single-row bound `u_bar`; never below the `delta` top.
pub fn compute_big_m(instance: &ProblemInstance, grid: &DiscretizationGrid, u_bar: f64) -> (f64, f64) {
    let base = if instance.meta.family.as_deref() == Some("ms") { instance.gaussian.mu().iter().sum() } else { u_bar };
    (base.max(grid.delta_top()), big_m_uprime(grid))
}

/// Settings for building a [`BoundContext`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundingConfig {
    pub d: usize,
    pub l: usize,
    pub backend: Backend,
    pub bound_time_limit: f64,
    pub heuristic_time_limit: f64,
    pub svi: bool,
    pub heuristic: bool,
}

/// Everything computed before the first cutting-plane iteration.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ctx: BoundContext,
    pub theta2_max: f64,
    pub delta_max: f64,
    pub heuristic: Option<HeuristicResult>,
}

/// Computes the bounds, grid, big-M values, heuristic lower bound and SVI
/// floors. `time_cap` caps each individual solve.
pub fn prepare(instance: &ProblemInstance, cfg: &BoundingConfig, time_cap: f64) -> Result<Prepared, BoundingError> {
    let limit = cfg.bound_time_limit.min(time_cap).max(1e-3);
    let theta2_max = compute_theta2_upper(instance, cfg.backend, limit)?;
    let delta_max = compute_delta_upper(instance, cfg.backend, limit)?;
    let u_bar = compute_u1_upper(instance, cfg.backend, limit)?;
    let grid = build_grid(theta2_max, delta_max, cfg.d, cfg.l);
    let (big_m_u, _) = compute_big_m(instance, &grid, u_bar);
    let mut ctx = BoundContext::from_grid(grid, big_m_u, u_bar);
    let mut heuristic = None;
    if cfg.heuristic && instance.sense == Sense::Maximize {
        let hl = cfg.heuristic_time_limit.min(time_cap).max(1e-3);
        heuristic = primal_heuristic(instance, &ctx, cfg.backend, hl)?;
        if cfg.svi {
            if let Some(h) = &heuristic {
                ctx = ctx.with_svis(h.z_lb);
            }
        }
    }
    Ok(Prepared { ctx, theta2_max, delta_max, heuristic })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianVector;
    use crate::model::{FeasibleRegion, InstanceMeta, LinearConstraint, Relation};

    #[test]
    fn theta2_bound_examples() {
        let one = GaussianVector::independent(vec![1.0], &[1.0]).unwrap();
        let inst = ProblemInstance::new(one, FeasibleRegion::unconstrained(1), Sense::Maximize, "").unwrap();
        assert_eq!(compute_theta2_upper(&inst, Backend::Fallback, 10.0).unwrap(), 1.0);

        let zero = GaussianVector::from_flat(vec![1.0, 2.0], vec![0.0; 4]).unwrap();
        let inst = ProblemInstance::new(zero, FeasibleRegion::unconstrained(2), Sense::Maximize, "").unwrap();
        assert_eq!(compute_theta2_upper(&inst, Backend::Fallback, 10.0).unwrap(), 0.0);
        assert_eq!(compute_delta_upper(&inst, Backend::Fallback, 10.0).unwrap(), 3.0);
    }

    #[test]
    fn infeasible_region_is_reported() {
        let g = GaussianVector::independent(vec![1.0], &[1.0]).unwrap();
        let region = FeasibleRegion::new(
            1,
            vec![
                LinearConstraint::new([(0, 0, 1.0)], Relation::Ge, 1.0),
                LinearConstraint::new([(0, 0, 1.0)], Relation::Le, 0.0),
            ],
        )
        .unwrap();
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        assert!(matches!(compute_theta2_upper(&inst, Backend::Fallback, 10.0), Err(BoundingError::RegionInfeasible)));
    }

    #[test]
    fn big_m_values() {
        let mu = vec![3.0, 3.0, 2.0, 2.0, 2.0];
        let g = GaussianVector::independent(mu, &[1.0; 5]).unwrap();
        let inst = ProblemInstance::new(g, FeasibleRegion::unconstrained(5), Sense::Minimize, "")
            .unwrap()
            .with_meta(InstanceMeta { family: Some("ms".into()), ..Default::default() });
        let grid = build_grid(10.0, 12.0, 3, 2);
        let (m, mp) = compute_big_m(&inst, &grid, 0.0);
        assert_eq!(m, 12.0);
        assert!((mp - 3.989_422_8).abs() < 1e-6);
    }

    #[test]
    fn knapsack_big_m_covers_single_row_optimum() {
        let g = GaussianVector::independent(vec![4.0, 3.0, 5.0], &[1.0; 3]).unwrap();
        let w = [3.0, 2.0, 4.0];
        let mut region = FeasibleRegion::unconstrained(3);
        for i in 0..2 {
            region.push(LinearConstraint::new((0..3).map(|j| (i, j, w[j])), Relation::Le, 5.0)).unwrap();
        }
        for j in 0..3 {
            region.push(LinearConstraint::new([(0, j, 1.0), (1, j, 1.0)], Relation::Le, 1.0)).unwrap();
        }
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        let u_bar = compute_u1_upper(&inst, Backend::Fallback, 10.0).unwrap();
        assert_eq!(u_bar, 7.0);
        let grid = build_grid(2.0, 7.0, 2, 2);
        assert!(compute_big_m(&inst, &grid, u_bar).0 >= 7.0);
    }
}
