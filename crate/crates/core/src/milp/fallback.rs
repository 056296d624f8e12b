//! Built-in backend: depth-first enumeration of the selection binaries with
//! activity-bound pruning, where every other variable is a known function of
//! the selection supplied by a [`SelectionCompletion`].
//!
//! Enumeration order is the order of `selection_vars`, trying 0 before 1;
//! ties keep the first assignment found, so results are deterministic.

use super::{MilpError, MilpModel, MilpOutcome, MilpStatus, VarKind, ROW_TOL};
use crate::model::Relation;
use std::collections::HashSet;
use std::time::Instant;

/// Slack used when pruning on rows over selection variables only.
const PRUNE_TOL: f64 = 1e-9;

/// How often (in visited nodes) the clock is read.
const CLOCK_EVERY: u64 = 4096;

/// Derives the non-selection variables from a selection.
pub trait SelectionCompletion {
    /// Objective value of the best completion of `selection`, or `None` when
    /// no completion satisfies the rows that involve derived variables.
    fn objective(&self, selection: &[bool]) -> Option<f64>;

    /// Full variable assignment realizing [`SelectionCompletion::objective`].
    fn complete(&self, selection: &[bool]) -> Vec<f64>;
}

struct PruneRow {
    rel: Relation,
    rhs: f64,
    /// Minimum and maximum contribution of positions `p..` for each `p`.
    suffix_min: Vec<f64>,
    suffix_max: Vec<f64>,
}

struct Search<'a> {
    completion: &'a dyn SelectionCompletion,
    sense: crate::model::Sense,
    rows: Vec<PruneRow>,
    /// Per position, the prune rows it appears in with its coefficient.
    touches: Vec<Vec<(usize, f64)>>,
    no_goods: HashSet<u64>,
    activity: Vec<f64>,
    bits: Vec<bool>,
    best: Option<(f64, Vec<bool>)>,
    leaves: u64,
    nodes: u64,
    start: Instant,
    time_limit: f64,
    timed_out: bool,
}

impl Search<'_> {
    fn row_ok(&self, r: usize, next: usize) -> bool {
        let row = &self.rows[r];
        let a = self.activity[r];
        let lo = a + row.suffix_min[next];
        let hi = a + row.suffix_max[next];
        match row.rel {
            Relation::Le => lo <= row.rhs + PRUNE_TOL,
            Relation::Ge => hi >= row.rhs - PRUNE_TOL,
            Relation::Eq => lo <= row.rhs + PRUNE_TOL && hi >= row.rhs - PRUNE_TOL,
        }
    }

    fn dfs(&mut self, p: usize) {
        if self.timed_out {
            return;
        }
        self.nodes += 1;
        if self.nodes % CLOCK_EVERY == 0 && self.start.elapsed().as_secs_f64() > self.time_limit {
            self.timed_out = true;
            return;
        }
        if p == self.bits.len() {
            self.leaf();
            return;
        }
        for val in [false, true] {
            self.bits[p] = val;
            if val {
                for &(r, c) in &self.touches[p] {
                    self.activity[r] += c;
                }
            }
            let ok = self.touches[p].iter().all(|&(r, _)| self.row_ok(r, p + 1));
            if ok {
                self.dfs(p + 1);
            }
            if val {
                for &(r, c) in &self.touches[p] {
                    self.activity[r] -= c;
                }
            }
            if self.timed_out {
                break;
            }
        }
        self.bits[p] = false;
    }

    fn leaf(&mut self) {
        self.leaves += 1;
        if !self.no_goods.is_empty() && self.no_goods.contains(&mask(&self.bits)) {
            return;
        }
        if let Some(v) = self.completion.objective(&self.bits) {
            let better = match &self.best {
                None => true,
                Some((b, _)) => self.sense.better(v, *b),
            };
            if better {
                self.best = Some((v, self.bits.clone()));
            }
        }
    }
}

fn mask(bits: &[bool]) -> u64 {
    bits.iter().enumerate().fold(0u64, |m, (p, &b)| if b { m | (1 << p) } else { m })
}

/// Recognizes `sum_{on} x - sum_{off} x <= |on| - 1` over all selection
/// variables and returns the bitmask of the excluded point.
fn no_good_mask(row: &[(usize, f64)], rel: Relation, rhs: f64, position: &[Option<usize>], n_sel: usize) -> Option<u64> {
    if rel != Relation::Le || row.len() != n_sel {
        return None;
    }
    let mut m = 0u64;
    let mut seen = 0u64;
    let mut ones = 0.0;
    for &(k, c) in row {
        let p = position.get(k).copied().flatten()?;
        if seen & (1 << p) != 0 {
            return None;
        }
        seen |= 1 << p;
        if c == 1.0 {
            m |= 1 << p;
            ones += 1.0;
        } else if c != -1.0 {
            return None;
        }
    }
    (rhs == ones - 1.0).then_some(m)
}

/// Enumerates assignments of `selection_vars` and completes each one.
pub fn solve_selection(
    model: &MilpModel,
    selection_vars: &[usize],
    completion: &dyn SelectionCompletion,
    time_limit: f64,
) -> Result<MilpOutcome, MilpError> {
    if !(time_limit > 0.0) {
        return Err(MilpError::BadTimeLimit(time_limit));
    }
    model.validate()?;
    let start = Instant::now();
    let n_sel = selection_vars.len();
    if n_sel > 64 {
        return Err(MilpError::TooManySelectionVars(n_sel));
    }
    let mut position = vec![None; model.num_vars()];
    for (p, &k) in selection_vars.iter().enumerate() {
        if model.vars[k].kind != VarKind::Binary {
            return Err(MilpError::NotSelectionModel(model.vars[k].name.clone()));
        }
        position[k] = Some(p);
    }

    let mut rows = Vec::new();
    let mut touches = vec![Vec::new(); n_sel];
    let mut no_goods = HashSet::new();
    let mut root_infeasible = false;
    for row in &model.rows {
        if !row.coeffs.iter().all(|&(k, _)| position[k].is_some()) {
            continue;
        }
        if let Some(m) = no_good_mask(&row.coeffs, row.rel, row.rhs, &position, n_sel) {
            no_goods.insert(m);
            continue;
        }
        let mut per_pos = vec![0.0; n_sel];
        for &(k, c) in &row.coeffs {
            per_pos[position[k].unwrap()] += c;
        }
        let mut suffix_min = vec![0.0; n_sel + 1];
        let mut suffix_max = vec![0.0; n_sel + 1];
        for p in (0..n_sel).rev() {
            suffix_min[p] = suffix_min[p + 1] + per_pos[p].min(0.0);
            suffix_max[p] = suffix_max[p + 1] + per_pos[p].max(0.0);
        }
        let r = rows.len();
        for (p, &c) in per_pos.iter().enumerate() {
            if c != 0.0 {
                touches[p].push((r, c));
            }
        }
        rows.push(PruneRow { rel: row.rel, rhs: row.rhs, suffix_min, suffix_max });
    }

    let mut search = Search {
        completion,
        sense: model.sense,
        activity: vec![0.0; rows.len()],
        rows,
        touches,
        no_goods,
        bits: vec![false; n_sel],
        best: None,
        leaves: 0,
        nodes: 0,
        start,
        time_limit,
        timed_out: false,
    };
    for r in 0..search.rows.len() {
        if !search.row_ok(r, 0) {
            root_infeasible = true;
        }
    }
    if !root_infeasible {
        search.dfs(0);
    }

    let wall_time = start.elapsed().as_secs_f64();
    let leaves = search.leaves;
    let Some((_, bits)) = search.best else {
        let (status, dual_bound) = if search.timed_out {
            (MilpStatus::TimeLimitNoIncumbent, Some(model.trivial_bound()))
        } else {
            (MilpStatus::Infeasible, None)
        };
        return Ok(MilpOutcome { status, incumbent: None, objective_value: None, dual_bound, wall_time, leaves });
    };
    let full = completion.complete(&bits);
    for (p, &k) in selection_vars.iter().enumerate() {
        debug_assert_eq!(full[k] == 1.0, bits[p]);
    }
    let (worst, v) = model.max_violation(&full);
    if v > ROW_TOL {
        return Err(MilpError::InvalidCompletion { row: worst.unwrap_or(usize::MAX), violation: v });
    }
    let value = model.objective_value(&full);
    let (status, dual_bound) = if search.timed_out {
        let t = model.trivial_bound();
        let bound = match model.sense {
            crate::model::Sense::Maximize => t.max(value),
            crate::model::Sense::Minimize => t.min(value),
        };
        (MilpStatus::FeasibleWithBound, bound)
    } else {
        (MilpStatus::Optimal, value)
    };
    Ok(MilpOutcome {
        status,
        incumbent: Some(full),
        objective_value: Some(value),
        dual_bound: Some(dual_bound),
        wall_time,
        leaves,
    })
}

/// Completion for pure-binary models: the selection is the whole assignment.
struct Identity<'a> {
    model: &'a MilpModel,
    order: &'a [usize],
}

impl SelectionCompletion for Identity<'_> {
    fn objective(&self, selection: &[bool]) -> Option<f64> {
        Some(self.model.objective_value(&self.complete(selection)))
    }

    fn complete(&self, selection: &[bool]) -> Vec<f64> {
        let mut v = vec![0.0; self.model.num_vars()];
        for (p, &k) in self.order.iter().enumerate() {
            v[k] = if selection[p] { 1.0 } else { 0.0 };
        }
        v
    }
}

/// Exhaustive search for models in which every variable is binary.
pub fn solve_binary(model: &MilpModel, time_limit: f64) -> Result<MilpOutcome, MilpError> {
    if let Some(v) = model.vars.iter().find(|v| v.kind != VarKind::Binary) {
        return Err(MilpError::NotSelectionModel(v.name.clone()));
    }
    let order: Vec<usize> = (0..model.num_vars()).collect();
    solve_selection(model, &order, &Identity { model, order: &order }, time_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Sense;
    use std::cell::Cell;

    struct Counting<'a> {
        inner: Identity<'a>,
        calls: Cell<u64>,
    }

    impl SelectionCompletion for Counting<'_> {
        fn objective(&self, s: &[bool]) -> Option<f64> {
            self.calls.set(self.calls.get() + 1);
            self.inner.objective(s)
        }
        fn complete(&self, s: &[bool]) -> Vec<f64> {
            self.inner.complete(s)
        }
    }

    fn binaries(n: usize, sense: Sense) -> MilpModel {
        let mut m = MilpModel::new(sense);
        for k in 0..n {
            m.add_binary(format!("x{k}"));
        }
        m
    }

    #[test]
    fn two_variable_examples() {
        let mut m = binaries(2, Sense::Maximize);
        m.set_objective(vec![(0, 1.0), (1, 1.0)], 0.0);
        m.add_row(vec![(0, 1.0), (1, 1.0)], Relation::Le, 1.0);
        let out = solve_binary(&m, 10.0).unwrap();
        assert_eq!(out.status, MilpStatus::Optimal);
        assert_eq!(out.objective_value, Some(1.0));
        assert_eq!(out.incumbent, Some(vec![0.0, 1.0]));

        let mut m = binaries(1, Sense::Maximize);
        m.add_row(vec![(0, 1.0)], Relation::Ge, 1.0);
        m.add_row(vec![(0, 1.0)], Relation::Le, 0.0);
        let out = solve_binary(&m, 10.0).unwrap();
        assert_eq!(out.status, MilpStatus::Infeasible);
        assert!(out.incumbent.is_none());
    }

    #[test]
    fn unconstrained_visits_every_assignment() {
        let m = binaries(8, Sense::Maximize);
        let order: Vec<usize> = (0..8).collect();
        let c = Counting { inner: Identity { model: &m, order: &order }, calls: Cell::new(0) };
        let out = solve_selection(&m, &order, &c, 10.0).unwrap();
        assert_eq!(out.leaves, 256);
        assert_eq!(c.calls.get(), 256);
    }

    #[test]
    fn disjointness_prunes_to_three_to_the_n() {
        let n = 5;
        let mut m = binaries(2 * n, Sense::Maximize);
        for j in 0..n {
            m.add_row(vec![(j, 1.0), (n + j, 1.0)], Relation::Le, 1.0);
        }
        let out = solve_binary(&m, 10.0).unwrap();
        assert_eq!(out.leaves, 3u64.pow(n as u32));
    }

    #[test]
    fn no_good_rows_exclude_single_points() {
        let mut m = binaries(3, Sense::Maximize);
        m.set_objective(vec![(0, 4.0), (1, 2.0), (2, 1.0)], 0.0);
        // exclude 111 then 110
        m.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Relation::Le, 2.0);
        m.add_row(vec![(0, 1.0), (1, 1.0), (2, -1.0)], Relation::Le, 1.0);
        let out = solve_binary(&m, 10.0).unwrap();
        assert_eq!(out.objective_value, Some(5.0));
        assert_eq!(out.incumbent, Some(vec![1.0, 0.0, 1.0]));
    }

    fn lcg(state: &mut u64) -> u64 {
        *state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        *state >> 33
    }

    #[test]
    fn knapsack_matches_exhaustive_oracle() {
        let mut s = 7u64;
        let n = 20;
        let w: Vec<f64> = (0..n).map(|_| (lcg(&mut s) % 19 + 1) as f64).collect();
        let p: Vec<f64> = (0..n).map(|_| (lcg(&mut s) % 50 + 1) as f64).collect();
        let mut m = binaries(n, Sense::Maximize);
        m.set_objective(p.iter().copied().enumerate().collect(), 0.0);
        m.add_row(w.iter().copied().enumerate().collect(), Relation::Le, 60.0);
        let out = solve_binary(&m, 60.0).unwrap();

        let mut best = 0.0;
        for bits in 0u32..(1 << n) {
            let (mut wt, mut pr) = (0.0, 0.0);
            for j in 0..n {
                if bits >> j & 1 == 1 {
                    wt += w[j];
                    pr += p[j];
                }
            }
            if wt <= 60.0 && pr > best {
                best = pr;
            }
        }
        assert_eq!(out.status, MilpStatus::Optimal);
        assert_eq!(out.objective_value, Some(best));
        assert_eq!(out.dual_bound, Some(best));
    }

    #[test]
    fn deterministic_tie_breaking() {
        let mut m = binaries(4, Sense::Maximize);
        m.set_objective(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], 0.0);
        m.add_row(vec![(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)], Relation::Le, 2.0);
        let a = solve_binary(&m, 10.0).unwrap();
        let b = solve_binary(&m, 10.0).unwrap();
        assert_eq!(a.incumbent, b.incumbent);
        assert_eq!(a.incumbent, Some(vec![0.0, 0.0, 1.0, 1.0]));
    }

    struct Broken;
    impl SelectionCompletion for Broken {
        fn objective(&self, _: &[bool]) -> Option<f64> {
            Some(0.0)
        }
        fn complete(&self, s: &[bool]) -> Vec<f64> {
            let mut v: Vec<f64> = s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            v.push(5.0);
            v
        }
    }

    #[test]
    fn invalid_completion_is_reported() {
        let mut m = binaries(1, Sense::Maximize);
        let c = m.add_var("c", VarKind::Continuous, 0.0, 10.0);
        m.add_row(vec![(c, 1.0)], Relation::Le, 1.0);
        let err = solve_selection(&m, &[0], &Broken, 10.0).unwrap_err();
        assert!(matches!(err, MilpError::InvalidCompletion { row: 0, .. }));
    }

    #[test]
    fn rejects_non_positive_time_limit() {
        let m = binaries(1, Sense::Maximize);
        assert!(matches!(solve_binary(&m, 0.0), Err(MilpError::BadTimeLimit(_))));
    }
}
