//! Ground truth for testing: exhaustive enumeration, Monte-Carlo estimates
//! and a brute-force minimum cut.

use crate::gaussian::{expected_max, pair_moments, GaussianSampler, GaussianVector, SelectionPair};
use crate::model::{FeasibleRegion, LinearConstraint, ProblemInstance, Relation, Sense, FEAS_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("enumeration exceeded {0} selections")]
    BudgetExceeded(u64),
    #[error("no feasible selection")]
    Infeasible,
    #[error("graph has {0} vertices, at most {1} supported")]
    GraphTooLarge(usize, usize),
    #[error("edge list line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub best_x: SelectionPair,
    pub best_value: f64,
    /// Feasible selections evaluated.
    pub evaluated: u64,
}

struct Enumeration<'a> {
    instance: &'a ProblemInstance,
    rows: Vec<&'a LinearConstraint>,
    /// `coef[r][p]`: coefficient of flat position `p` in row `r`.
    coef: Vec<Vec<f64>>,
    /// Smallest and largest contribution of positions `p..` to row `r`.
    tail_min: Vec<Vec<f64>>,
    tail_max: Vec<Vec<f64>>,
}

impl Enumeration<'_> {
    fn viable(&self, lhs: &[f64], next: usize) -> bool {
        self.rows.iter().enumerate().all(|(r, c)| {
            let lo = lhs[r] + self.tail_min[r][next];
            let hi = lhs[r] + self.tail_max[r][next];
            match c.rel {
                Relation::Le => lo <= c.rhs + FEAS_TOL,
                Relation::Ge => hi >= c.rhs - FEAS_TOL,
                Relation::Eq => lo <= c.rhs + FEAS_TOL && hi >= c.rhs - FEAS_TOL,
            }
        })
    }

    fn walk(&self, p: usize, bits: &mut Vec<bool>, lhs: &mut [f64], visit: &mut dyn FnMut(SelectionPair) -> Result<(), OracleError>) -> Result<(), OracleError> {
        if !self.viable(lhs, p) {
            return Ok(());
        }
        if p == bits.len() {
            let x = SelectionPair::from_flat(bits);
            return if self.instance.is_feasible(&x) { visit(x) } else { Ok(()) };
        }
        for v in [false, true] {
            bits[p] = v;
            if v {
                for (r, l) in lhs.iter_mut().enumerate() {
                    *l += self.coef[r][p];
                }
            }
            let res = self.walk(p + 1, bits, lhs, visit);
            if v {
                for (r, l) in lhs.iter_mut().enumerate() {
                    *l -= self.coef[r][p];
                }
            }
            res?;
        }
        bits[p] = false;
        Ok(())
    }
}

/// Calls `visit` on every feasible selection in row-major lexicographic
/// order, pruning branches no completion can make feasible. Returns the
/// number visited; fails once more than `limit` are found.
pub fn for_each_feasible(instance: &ProblemInstance, limit: u64, mut visit: impl FnMut(&SelectionPair)) -> Result<u64, OracleError> {
    let n = instance.n();
    let rows: Vec<&LinearConstraint> = instance.region.constraints().iter().collect();
    let mut coef = vec![vec![0.0; 2 * n]; rows.len()];
    for (r, c) in rows.iter().enumerate() {
        for &(i, j, a) in &c.terms {
            coef[r][i * n + j] += a;
        }
    }
    let tail = |pick: fn(f64) -> f64| -> Vec<Vec<f64>> {
        coef.iter()
            .map(|row| {
                let mut t = vec![0.0; 2 * n + 1];
                for p in (0..2 * n).rev() {
                    t[p] = t[p + 1] + pick(row[p]);
                }
                t
            })
            .collect()
    };
    let tail_min = tail(|a| a.min(0.0));
    let tail_max = tail(|a| a.max(0.0));
    let e = Enumeration { instance, rows, coef, tail_min, tail_max };
    let mut count = 0;
    let mut lhs = vec![0.0; e.rows.len()];
    e.walk(0, &mut vec![false; 2 * n], &mut lhs, &mut |x| {
        count += 1;
        if count > limit {
            return Err(OracleError::BudgetExceeded(limit));
        }
        visit(&x);
        Ok(())
    })?;
    Ok(count)
}

/// Exact optimum over all feasible selections; ties go to the first in
/// enumeration order. At most `limit` selections are evaluated.
pub fn brute_force(instance: &ProblemInstance, limit: u64) -> Result<OracleResult, OracleError> {
    let mut best: Option<(SelectionPair, f64)> = None;
    let evaluated = for_each_feasible(instance, limit, |x| {
        let value = expected_max(&pair_moments(&instance.gaussian, x).expect("dimensions match"));
        if best.as_ref().is_none_or(|b| instance.sense.better(value, b.1)) {
            best = Some((x.clone(), value));
        }
    })?;
    let (best_x, best_value) = best.ok_or(OracleError::Infeasible)?;
    Ok(OracleResult { best_x, best_value, evaluated })
}

/// Sample mean of `max(Z1, Z2)` and its standard error.
pub fn monte_carlo(g: &GaussianVector, x: &SelectionPair, samples: usize, seed: u64) -> (f64, f64) {
    assert!(samples >= 2, "need at least two samples");
    let n = g.n();
    let mut sampler = GaussianSampler::new(g, seed);
    let mut y = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for k in 0..samples {
        sampler.draw_into(&mut y);
        let z = |i: usize| (0..n).filter(|&j| x.get(i, j)).map(|j| y[j]).sum::<f64>();
        let v = z(0).max(z(1));
        let d = v - mean;
        mean += d / (k + 1) as f64;
        m2 += d * (v - mean);
    }
    let sd = (m2 / (samples - 1) as f64).sqrt();
    (mean, sd / (samples as f64).sqrt())
}

/// Undirected weighted graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize, i64)>,
}

impl Graph {
    /// Parses lines `u v w` with 0-based vertices. Blank lines and lines
    /// starting with `#` are skipped; `n` is one past the largest vertex
    /// unless `min_vertices` is larger.
    pub fn parse_edge_list(text: &str, min_vertices: usize) -> Result<Self, OracleError> {
        let mut edges = Vec::new();
        let mut n = min_vertices;
        for (k, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |message: &str| OracleError::Parse { line: k + 1, message: message.to_string() };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(err("expected `u v w`"));
            }
            let u: usize = fields[0].parse().map_err(|_| err("bad vertex"))?;
            let v: usize = fields[1].parse().map_err(|_| err("bad vertex"))?;
            let w: i64 = fields[2].parse().map_err(|_| err("weights must be integers"))?;
            if u == v {
                return Err(err("self loop"));
            }
            n = n.max(u + 1).max(v + 1);
            edges.push((u, v, w));
        }
        Ok(Self { n, edges })
    }

    /// Total weight of edges with exactly one endpoint in `side`.
    pub fn cut_weight(&self, side: &[bool]) -> i64 {
        self.edges.iter().filter(|&&(u, v, _)| side[u] != side[v]).map(|e| e.2).sum()
    }

    pub fn abs_weight(&self) -> i64 {
        self.edges.iter().map(|e| e.2.abs()).sum()
    }

    /// Each vertex pair is an edge with probability `density`, with a weight
    /// uniform on `lo..=hi`.
    pub fn random(n: usize, density: f64, lo: i64, hi: i64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random_bool(density) {
                    edges.push((u, v, rng.random_range(lo..=hi)));
                }
            }
        }
        Self { n, edges }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub side: Vec<bool>,
    pub weight: i64,
}

/// Minimum cuts under both conventions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinCutReport {
    /// Over all 2-partitions, one side possibly empty.
    pub any: Cut,
    /// Over partitions with both sides nonempty; absent when `n < 2`.
    pub nontrivial: Option<Cut>,
}

pub const MAX_CUT_VERTICES: usize = 20;

/// Enumerates all 2-partitions with vertex 0 on the `false` side.
pub fn min_cut_brute_force(graph: &Graph) -> Result<MinCutReport, OracleError> {
    let n = graph.n;
    if n > MAX_CUT_VERTICES {
        return Err(OracleError::GraphTooLarge(n, MAX_CUT_VERTICES));
    }
    let side_of = |mask: u32| (0..n).map(|v| v > 0 && mask >> (v - 1) & 1 == 1).collect::<Vec<_>>();
    let mut any: Option<Cut> = None;
    let mut nontrivial: Option<Cut> = None;
    for mask in 0..1u32 << n.saturating_sub(1) {
        let side = side_of(mask);
        let weight = graph.cut_weight(&side);
        if any.as_ref().is_none_or(|c| weight < c.weight) {
            any = Some(Cut { side: side.clone(), weight });
        }
        if mask != 0 && nontrivial.as_ref().is_none_or(|c| weight < c.weight) {
            nontrivial = Some(Cut { side, weight });
        }
    }
    Ok(MinCutReport { any: any.expect("at least one partition"), nontrivial })
}

/// Zero-mean, unit-variance components with `cov(Y_u, Y_v) = w_uv / (4M + 1)`
/// where `M` is the total absolute edge weight, unconstrained, maximized.
/// Maximizing selections put every vertex in exactly one row, and the rows
/// then form a minimum cut.
pub fn build_mincut_reduction(graph: &Graph) -> ProblemInstance {
    let n = graph.n;
    let scale = 1.0 / (4 * graph.abs_weight() + 1) as f64;
    let mut cov = vec![0.0; n * n];
    for v in 0..n {
        cov[v * n + v] = 1.0;
    }
    for &(u, v, w) in &graph.edges {
        cov[u * n + v] += w as f64 * scale;
        cov[v * n + u] += w as f64 * scale;
    }
    let g = GaussianVector::from_flat(vec![0.0; n], cov).expect("diagonally dominant");
    ProblemInstance::new(g, FeasibleRegion::unconstrained(n), Sense::Maximize, "mincut-reduction").expect("sizes match")
}

/// Vertices in row 1 of `x`.
pub fn partition_of(x: &SelectionPair) -> Vec<bool> {
    x.row(0).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearConstraint;

    fn triangle() -> Graph {
        Graph { n: 3, edges: vec![(0, 1, 1), (1, 2, 1), (0, 2, 1)] }
    }

    #[test]
    fn unconstrained_enumerates_everything() {
        let g = GaussianVector::independent(vec![1.0, -1.0], &[1.0, 2.0]).unwrap();
        let inst = ProblemInstance::new(g, FeasibleRegion::unconstrained(2), Sense::Maximize, "").unwrap();
        let r = brute_force(&inst, 1_000).unwrap();
        assert_eq!(r.evaluated, 16);
        assert!(inst.is_feasible(&r.best_x));
    }

    #[test]
    fn disjointness_bounds_the_count() {
        let n = 4;
        let g = GaussianVector::independent(vec![2.0; n], &vec![1.0; n]).unwrap();
        let mut region = FeasibleRegion::unconstrained(n);
        for j in 0..n {
            region.push(LinearConstraint::new([(0, j, 1.0), (1, j, 1.0)], Relation::Le, 1.0)).unwrap();
        }
        for i in 0..2 {
            region.push(LinearConstraint::new((0..n).map(|j| (i, j, 1.0)), Relation::Le, 2.0)).unwrap();
        }
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        let r = brute_force(&inst, 1_000).unwrap();
        assert!(r.evaluated <= 81);
        assert!(r.evaluated > 0);
        assert_eq!(brute_force(&inst, 3), Err(OracleError::BudgetExceeded(3)));
    }

    #[test]
    fn minimization_picks_smallest() {
        let g = GaussianVector::independent(vec![1.0, 2.0], &[0.0, 0.0]).unwrap();
        let mut region = FeasibleRegion::unconstrained(2);
        for j in 0..2 {
            region.push(LinearConstraint::new([(0, j, 1.0), (1, j, 1.0)], Relation::Eq, 1.0)).unwrap();
        }
        let inst = ProblemInstance::new(g, region, Sense::Minimize, "").unwrap();
        let r = brute_force(&inst, 100).unwrap();
        assert_eq!(r.best_value, 2.0);
        assert_eq!(r.evaluated, 4);
    }

    #[test]
    fn infeasible_is_reported() {
        let g = GaussianVector::independent(vec![1.0], &[1.0]).unwrap();
        let mut region = FeasibleRegion::unconstrained(1);
        region.push(LinearConstraint::new([(0, 0, 1.0), (1, 0, 1.0)], Relation::Ge, 3.0)).unwrap();
        let inst = ProblemInstance::new(g, region, Sense::Maximize, "").unwrap();
        assert_eq!(brute_force(&inst, 100), Err(OracleError::Infeasible));
    }

    #[test]
    fn monte_carlo_degenerate_pair() {
        let g = GaussianVector::independent(vec![3.0], &[4.0]).unwrap();
        let x = SelectionPair::new(vec![true], vec![true]).unwrap();
        let (est, se) = monte_carlo(&g, &x, 20_000, 7);
        assert!((se - 2.0 / (20_000f64).sqrt()).abs() < 1e-3);
        assert!((est - 3.0).abs() < 4.0 * se);
    }

    #[test]
    fn monte_carlo_worked_example() {
        let g = GaussianVector::new(vec![3.0, 2.0], vec![vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let x = SelectionPair::new(vec![true, false], vec![false, true]).unwrap();
        let (est, se) = monte_carlo(&g, &x, 200_000, 11);
        assert!((est - 3.083_315_4).abs() < 4.0 * se, "{est} {se}");
    }

    #[test]
    fn cut_examples() {
        assert_eq!(min_cut_brute_force(&triangle()).unwrap().nontrivial.unwrap().weight, 2);
        let empty = Graph { n: 2, edges: vec![] };
        assert_eq!(min_cut_brute_force(&empty).unwrap().any.weight, 0);
        let single = Graph { n: 2, edges: vec![(0, 1, 5)] };
        let r = min_cut_brute_force(&single).unwrap();
        assert_eq!(r.any.weight, 0);
        assert_eq!(r.nontrivial.unwrap().weight, 5);
        assert!(min_cut_brute_force(&Graph { n: 21, edges: vec![] }).is_err());
    }

    #[test]
    fn reduction_covariances() {
        let inst = build_mincut_reduction(&triangle());
        let g = &inst.gaussian;
        assert_eq!(g.cov(0, 1), 1.0 / 13.0);
        assert_eq!(g.cov(1, 1), 1.0);
        assert!(g.mu().iter().all(|&m| m == 0.0));
        let empty = build_mincut_reduction(&Graph { n: 3, edges: vec![] });
        assert!(empty.gaussian.is_uncorrelated());
    }

    #[test]
    fn reduction_optimum_by_enumeration_is_a_min_cut() {
        let graph = Graph { n: 4, edges: vec![(0, 1, 3), (1, 2, -2), (2, 3, 4), (0, 3, 1), (0, 2, -1)] };
        let r = brute_force(&build_mincut_reduction(&graph), 1 << 20).unwrap();
        for j in 0..4 {
            assert!(r.best_x.get(0, j) ^ r.best_x.get(1, j));
        }
        let want = min_cut_brute_force(&graph).unwrap().any.weight;
        assert_eq!(graph.cut_weight(&partition_of(&r.best_x)), want);
    }

    #[test]
    fn random_graphs_are_seeded() {
        let a = Graph::random(8, 0.5, -5, 5, 3);
        assert_eq!(a, Graph::random(8, 0.5, -5, 5, 3));
        assert!(a.edges.iter().all(|&(u, v, w)| u < v && v < 8 && (-5..=5).contains(&w)));
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::parse_edge_list("# triangle\n0 1 1\n1 2 1\n\n0 2 1\n", 0).unwrap();
        assert_eq!(g, triangle());
        assert!(Graph::parse_edge_list("0 1", 0).is_err());
        assert!(Graph::parse_edge_list("0 1 1.5", 0).is_err());
        assert_eq!(Graph::parse_edge_list("", 4).unwrap().n, 4);
    }

    #[test]
    fn standard_pair_by_monte_carlo() {
        let g = GaussianVector::independent(vec![0.0, 0.0], &[1.0, 1.0]).unwrap();
        let x = SelectionPair::new(vec![true, false], vec![false, true]).unwrap();
        let (est, se) = monte_carlo(&g, &x, 100_000, 3);
        assert!((est - 1.0 / std::f64::consts::PI.sqrt()).abs() < 4.0 * se);
    }
}
