//! Cutting-plane driver: solve the RMP, score its selection exactly, cut it
//! off with a no-good inequality, and repeat until the bounds meet.

use crate::bounding::{prepare, BoundingConfig, BoundingError, Rmp};
use crate::gaussian::{expected_max, pair_moments, GaussianError, SelectionPair};
use crate::milp::{Backend, MilpError, MilpStatus};
use crate::model::{LinearConstraint, ProblemInstance, Relation, Sense};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::time::Instant;
use thiserror::Error;

/// Default relative stopping tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("the cutting-plane models assume the region is unchanged by swapping the two rows")]
    AsymmetricRegion,
    #[error("RMP returned an already explored selection {0}")]
    RepeatedSelection(String),
    #[error("RMP returned a selection outside the region: {0}")]
    InfeasibleSelection(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Milp(#[from] MilpError),
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
}

/// `sum_{x_hat = 1} x - sum_{x_hat = 0} x <= |x_hat| - 1`, violated by
/// `x_hat` alone among binary points.
pub fn no_good_cut(x_hat: &SelectionPair) -> LinearConstraint {
    let n = x_hat.n();
    let mut terms = Vec::with_capacity(2 * n);
    for i in 0..2 {
        for j in 0..n {
            terms.push((i, j, if x_hat.get(i, j) { 1.0 } else { -1.0 }));
        }
    }
    LinearConstraint::new(terms, Relation::Le, x_hat.count_ones() as f64 - 1.0)
}

/// Explored selections and the cuts that exclude them.
#[derive(Debug, Clone, Default)]
pub struct CutPool {
    cuts: Vec<LinearConstraint>,
    explored: HashSet<String>,
}

impl CutPool {
    /// Records `x` and returns its cut, or `None` if it was already explored.
    pub fn add(&mut self, x: &SelectionPair) -> Option<&LinearConstraint> {
        if !self.explored.insert(x.fingerprint()) {
            return None;
        }
        self.cuts.push(no_good_cut(x));
        self.cuts.last()
    }

    pub fn contains(&self, x: &SelectionPair) -> bool {
        self.explored.contains(&x.fingerprint())
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[LinearConstraint] {
        &self.cuts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Enhanced,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub d: usize,
    pub l: usize,
    pub tolerance: f64,
    pub rmp_time_limit: f64,
    pub bound_time_limit: f64,
    pub heuristic_time_limit: f64,
    pub total_time_limit: f64,
    pub backend: Backend,
    pub model: ModelChoice,
    pub svi: bool,
    pub heuristic: bool,
    /// Stop with `gap_limit` after this many cuts.
    pub max_cuts: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            d: 25,
            l: 15,
            tolerance: DEFAULT_TOLERANCE,
            rmp_time_limit: 600.0,
            bound_time_limit: 120.0,
            heuristic_time_limit: 60.0,
            total_time_limit: 600.0,
            backend: Backend::Fallback,
            model: ModelChoice::Enhanced,
            svi: true,
            heuristic: true,
            max_cuts: None,
        }
    }
}

impl SolverConfig {
    /// Defaults for an instance family tag: `kp`, `ms` or `dfs`.
    pub fn for_family(family: Option<&str>) -> Self {
        let mut c = Self::default();
        let (d, l) = default_intervals(family);
        c.d = d;
        c.l = l;
        if family == Some("ms") {
            c.svi = false;
        }
        c
    }

    fn validate(&self) -> Result<(), SolverError> {
        let limits = [self.rmp_time_limit, self.bound_time_limit, self.heuristic_time_limit, self.total_time_limit];
        if limits.iter().any(|&t| !(t > 0.0)) {
            return Err(SolverError::Config("time limits must be positive".into()));
        }
        if self.d < 2 || self.l < 1 {
            return Err(SolverError::Config("need d >= 2 and l >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(SolverError::Config("tolerance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `(d, l)` per family: 25/15 for knapsack, 50/50 for makespan, 50/10 for
/// fantasy sports.
pub fn default_intervals(family: Option<&str>) -> (usize, usize) {
    match family {
        Some("ms") => (50, 50),
        Some("dfs") => (50, 10),
        _ => (25, 15),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    GapLimit,
    TimeLimit,
    Infeasible,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapLimit => "gap_limit",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::Infeasible => "infeasible",
        }
    }
}

/// One RMP solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iteration: usize,
    /// RMP bound at this iteration before clamping.
    pub rmp_value: f64,
    /// Exact objective of the RMP's selection.
    pub exact_value: f64,
    pub lb: f64,
    pub ub: f64,
    pub explored: String,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub incumbent: Option<SelectionPair>,
    /// Exact objective of the incumbent.
    pub objective: Option<f64>,
    pub lb: f64,
    pub ub: f64,
    pub gap: f64,
    pub iterations: usize,
    pub cuts_added: usize,
    pub trace: Vec<TraceEntry>,
    pub theta2_max: Option<f64>,
    pub delta_max: Option<f64>,
    pub heuristic_value: Option<f64>,
    pub wall_time: f64,
}

impl SolveResult {
    /// The trace with wall-clock times removed.
    pub fn timeless_trace(&self) -> Vec<TraceEntry> {
        self.trace.iter().map(|e| TraceEntry { wall_time: 0.0, ..e.clone() }).collect()
    }
}

/// Relative gap: over `UB` when maximizing and over `LB` when minimizing,
/// absolute when that denominator is not positive.
pub fn relative_gap(lb: f64, ub: f64, sense: Sense) -> f64 {
    if !(lb.is_finite() && ub.is_finite()) {
        return f64::INFINITY;
    }
    let diff = (ub - lb).max(0.0);
    let denom = match sense {
        Sense::Maximize => ub,
        Sense::Minimize => lb,
    };
    if denom > 0.0 {
        diff / denom
    } else {
        diff
    }
}

struct Bounds {
    sense: Sense,
    lb: f64,
    ub: f64,
    incumbent: Option<(SelectionPair, f64)>,
}

impl Bounds {
    /// Feeds an exact objective value.
    fn offer(&mut self, x: &SelectionPair, value: f64) {
        let better = self.incumbent.as_ref().is_none_or(|(_, v)| self.sense.better(value, *v));
        if better {
            self.incumbent = Some((x.clone(), value));
            match self.sense {
                Sense::Maximize => self.lb = value,
                Sense::Minimize => self.ub = value,
            }
        }
    }

    /// Feeds an RMP bound, keeping the running best and `lb <= ub`.
    fn relax(&mut self, g: f64) {
        match self.sense {
            Sense::Maximize => self.ub = self.ub.min(g).max(self.lb),
            Sense::Minimize => self.lb = self.lb.max(g).min(self.ub),
        }
    }

    fn close(&mut self) {
        match self.sense {
            Sense::Maximize => self.ub = self.lb,
            Sense::Minimize => self.lb = self.ub,
        }
    }

    fn gap(&self) -> f64 {
        relative_gap(self.lb, self.ub, self.sense)
    }
}

/// Runs the cutting-plane algorithm.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    config.validate()?;
    if !instance.region.is_swap_symmetric() {
        return Err(SolverError::AsymmetricRegion);
    }
    let start = Instant::now();
    let remaining = |start: &Instant| config.total_time_limit - start.elapsed().as_secs_f64();
    let sense = instance.sense;
    let mut bounds = Bounds { sense, lb: f64::NEG_INFINITY, ub: f64::INFINITY, incumbent: None };
    let mut result = SolveResult {
        status: SolveStatus::Infeasible,
        incumbent: None,
        objective: None,
        lb: f64::NEG_INFINITY,
        ub: f64::INFINITY,
        gap: f64::INFINITY,
        iterations: 0,
        cuts_added: 0,
        trace: Vec::new(),
        theta2_max: None,
        delta_max: None,
        heuristic_value: None,
        wall_time: 0.0,
    };

    let bcfg = BoundingConfig {
        d: config.d,
        l: config.l,
        backend: config.backend,
        bound_time_limit: config.bound_time_limit,
        heuristic_time_limit: config.heuristic_time_limit,
        svi: config.svi && config.model == ModelChoice::Enhanced,
        heuristic: config.heuristic,
    };
    let prepared = match prepare(instance, &bcfg, remaining(&start).max(1e-3)) {
        Ok(p) => p,
        Err(BoundingError::RegionInfeasible) => {
            result.wall_time = start.elapsed().as_secs_f64();
            return Ok(result);
        }
        Err(BoundingError::Milp(e)) => return Err(e.into()),
    };
    result.theta2_max = Some(prepared.theta2_max);
    result.delta_max = Some(prepared.delta_max);
    if let Some(h) = &prepared.heuristic {
        result.heuristic_value = Some(h.z_lb);
        bounds.offer(&h.x, h.z_lb);
    }
    let mut rmp = match config.model {
        ModelChoice::Enhanced => Rmp::enhanced(instance, &prepared.ctx),
        ModelChoice::Baseline => Rmp::baseline(instance, &prepared.ctx),
    };
    let mut pool = CutPool::default();

    let status = loop {
        if bounds.incumbent.is_some() && bounds.gap() < config.tolerance {
            break SolveStatus::Optimal;
        }
        let left = remaining(&start);
        if left <= 0.0 {
            break SolveStatus::TimeLimit;
        }
        if config.max_cuts.is_some_and(|m| pool.len() >= m) {
            break SolveStatus::GapLimit;
        }
        let sol = rmp.solve(config.backend, config.rmp_time_limit.min(left))?;
        match sol.outcome.status {
            MilpStatus::Infeasible => {
                if bounds.incumbent.is_some() {
                    bounds.close();
                    break SolveStatus::Optimal;
                }
                break SolveStatus::Infeasible;
            }
            MilpStatus::TimeLimitNoIncumbent => {
                if let Some(g) = sol.outcome.dual_bound {
                    bounds.relax(g);
                }
                break SolveStatus::TimeLimit;
            }
            MilpStatus::Optimal | MilpStatus::FeasibleWithBound => {}
        }
        let x = sol.selection.expect("incumbent present");
        let g = sol.outcome.dual_bound.expect("bound present");
        if !instance.is_feasible(&x) {
            return Err(SolverError::InfeasibleSelection(x.fingerprint()));
        }
        let exact = expected_max(&pair_moments(&instance.gaussian, &x)?);
        bounds.offer(&x, exact);
        bounds.relax(g);
        let cut = pool.add(&x).cloned().ok_or_else(|| SolverError::RepeatedSelection(x.fingerprint()))?;
        result.trace.push(TraceEntry {
            iteration: result.trace.len() + 1,
            rmp_value: g,
            exact_value: exact,
            lb: bounds.lb,
            ub: bounds.ub,
            explored: x.fingerprint(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        if bounds.gap() < config.tolerance {
            break SolveStatus::Optimal;
        }
        rmp.add_cut(&cut);
    };

    result.status = status;
    result.cuts_added = rmp.cuts();
    result.iterations = rmp.cuts();
    result.lb = bounds.lb;
    result.ub = bounds.ub;
    result.gap = bounds.gap();
    if let Some((x, v)) = bounds.incumbent {
        result.incumbent = Some(x);
        result.objective = Some(v);
    }
    result.wall_time = start.elapsed().as_secs_f64();
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{std_normal_cdf, std_normal_pdf, GaussianVector};
    use crate::model::FeasibleRegion;

    fn all_points(n: usize) -> Vec<SelectionPair> {
        (0u64..(1 << (2 * n)))
            .map(|m| SelectionPair::from_flat(&(0..2 * n).map(|p| m >> p & 1 == 1).collect::<Vec<_>>()))
            .collect()
    }

    #[test]
    fn no_good_examples() {
        let zero = SelectionPair::empty(2);
        let c = no_good_cut(&zero);
        assert_eq!(c.rhs, -1.0);
        assert!(c.terms.iter().all(|t| t.2 == -1.0));
        let ones = SelectionPair::new(vec![true; 2], vec![true; 2]).unwrap();
        let c = no_good_cut(&ones);
        assert_eq!(c.rhs, 3.0);
        assert!(c.terms.iter().all(|t| t.2 == 1.0));
    }

    #[test]
    fn no_good_cuts_exactly_one_point() {
        let pts = all_points(3);
        assert_eq!(pts.len(), 64);
        for p in &pts {
            let cut = no_good_cut(p);
            let violators: Vec<_> = pts.iter().filter(|q| !cut.is_satisfied(q)).collect();
            assert_eq!(violators, vec![p]);
        }
    }

    #[test]
    fn cut_pool_rejects_repeats() {
        let mut pool = CutPool::default();
        let x = SelectionPair::empty(2);
        assert!(pool.add(&x).is_some());
        assert!(pool.add(&x).is_none());
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn single_item_instance() {
        let g = GaussianVector::independent(vec![1.0], &[1.0]).unwrap();
        let inst = ProblemInstance::new(g, FeasibleRegion::unconstrained(1), Sense::Maximize, "").unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        let want = std_normal_cdf(1.0) + std_normal_pdf(1.0);
        assert!((r.objective.unwrap() - want).abs() < 1e-12);
        assert!((want - 1.083_315_5).abs() < 1e-7);
        let x = r.incumbent.unwrap();
        assert!(x.get(0, 0) ^ x.get(1, 0));
        assert_eq!(r.iterations, r.cuts_added);
    }

    #[test]
    fn empty_region_is_infeasible() {
        let g = GaussianVector::independent(vec![1.0, 2.0], &[1.0, 1.0]).unwrap();
        let mut region = FeasibleRegion::unconstrained(2);
        for i in 0..2 {
            region.push(LinearConstraint::new([(i, 0, 1.0)], Relation::Ge, 1.0)).unwrap();
            region.push(LinearConstraint::new([(i, 0, 1.0)], Relation::Le, 0.0)).unwrap();
        }
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        let r = solve(&inst, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert_eq!(r.cuts_added, 0);
        assert!(r.incumbent.is_none());
    }

    #[test]
    fn asymmetric_region_is_rejected() {
        let g = GaussianVector::independent(vec![1.0], &[1.0]).unwrap();
        let region = FeasibleRegion::new(1, vec![LinearConstraint::new([(0, 0, 1.0)], Relation::Le, 0.0)]).unwrap();
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        assert!(matches!(solve(&inst, &SolverConfig::default()), Err(SolverError::AsymmetricRegion)));
    }

    #[test]
    fn gap_definitions() {
        assert_eq!(relative_gap(9.0, 10.0, Sense::Maximize), 0.1);
        assert_eq!(relative_gap(10.0, 11.0, Sense::Minimize), 0.1);
        assert_eq!(relative_gap(-2.0, -1.0, Sense::Maximize), 1.0);
        assert_eq!(relative_gap(f64::NEG_INFINITY, 1.0, Sense::Maximize), f64::INFINITY);
    }

    #[test]
    fn cut_budget_stops_with_gap_limit() {
        let g = GaussianVector::independent(vec![1.0, 2.0, 3.0], &[1.0, 2.0, 0.5]).unwrap();
        let inst = ProblemInstance::new(g, FeasibleRegion::unconstrained(3), Sense::Maximize, "").unwrap();
        let cfg = SolverConfig { max_cuts: Some(0), heuristic: false, ..SolverConfig::default() };
        let r = solve(&inst, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::GapLimit);
    }
}
