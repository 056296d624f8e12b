use super::rmp::Rmp;
use super::BoundContext;
use crate::gaussian::{expected_max, pair_moments, SelectionPair};
use crate::milp::{Backend, MilpError};
use crate::model::ProblemInstance;

/// Share of components (by descending mean) the heuristic may use.
pub const TOP_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicResult {
    pub x: SelectionPair,
    /// Exact objective of `x`.
    pub z_lb: f64,
    /// Components allowed in the restricted model.
    pub kept: usize,
}

/// Components whose mean is at least the mean ranked `ceil(0.9 n)` in
/// descending order. Ties at the threshold are all kept.
pub fn top_items(mu: &[f64]) -> Vec<bool> {
    if mu.is_empty() {
        return Vec::new();
    }
    let mut sorted = mu.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rank = ((TOP_SHARE * mu.len() as f64).ceil() as usize).clamp(1, mu.len());
    let threshold = sorted[rank - 1];
    mu.iter().map(|&m| m >= threshold).collect()
}

/// Solves the enhanced RMP restricted to [`top_items`] and scores its
/// incumbent exactly.
pub fn primal_heuristic(
    instance: &ProblemInstance,
    ctx: &BoundContext,
    backend: Backend,
    time_limit: f64,
) -> Result<Option<HeuristicResult>, MilpError> {
    let keep = top_items(instance.gaussian.mu());
    let mut rmp = Rmp::enhanced(instance, ctx);
    rmp.restrict_items(&keep);
    let sol = rmp.solve(backend, time_limit)?;
    Ok(sol.selection.and_then(|x| {
        let m = pair_moments(&instance.gaussian, &x).ok()?;
        Some(HeuristicResult { z_lb: expected_max(&m), x, kept: keep.iter().filter(|&&k| k).count() })
    }))
}
