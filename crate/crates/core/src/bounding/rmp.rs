//! Relaxed master problems as MILP models, plus the closed-form completion
//! that lets the fallback backend solve them by enumerating `x` only.
//!
//! Variable layout: `x[i][j]` (row-major), `u1`, `u2`, McCormick products
//! `v[i][j][j']` and `r[j][j']`, `s = theta^2`, `s'`, interval binaries `w`
//! and `y`, and the bound pieces `U`, `U'`.

use super::grid::DiscretizationGrid;
use super::svi::attach_svis;
use super::BoundContext;
use crate::gaussian::{cdf_of_ratio, scaled_pdf, SelectionPair, INV_SQRT_2PI};
use crate::milp::fallback::{solve_selection, SelectionCompletion};
use crate::milp::{Backend, MilpError, MilpModel, MilpOutcome, VarKind};
use crate::model::{LinearConstraint, ProblemInstance, Relation, Sense};

/// Relative tolerance for interval membership in the completion.
const MEMBER_TOL: f64 = 1e-9;

/// Objective of the bounding problems over the shared constraint set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiObjective {
    /// `s = theta(x)^2`
    Theta2,
    /// `u1 - u2 = delta(x)`
    Delta,
    /// `u1 = E[Z1(x)]`
    U1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RmpKind {
    Psi(PsiObjective),
    Baseline,
    Enhanced,
}

/// Variable indices of an RMP.
#[derive(Debug, Clone, PartialEq)]
pub struct RmpLayout {
    pub n: usize,
    /// `x[i * n + j]`
    pub x: Vec<usize>,
    pub u1: usize,
    pub u2: usize,
    /// `v[(i * n + j) * n + j']`
    pub v: Vec<usize>,
    /// `r[j * n + j']`
    pub r: Vec<usize>,
    pub s: usize,
    pub s_prime: Option<usize>,
    pub w: Vec<usize>,
    pub y: Vec<usize>,
    pub big_u: Option<usize>,
    pub big_u_prime: Option<usize>,
}

/// Per-pair constants of the enhanced model and their row, column and
/// global extremes (minima when maximizing, maxima when minimizing).
#[derive(Debug, Clone)]
struct PairTables {
    phi: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    phi_row: Vec<f64>,
    phi_col: Vec<f64>,
    phi_all: f64,
    c_row: Vec<f64>,
    c_col: Vec<f64>,
    c_all: f64,
}

impl PairTables {
    fn new(grid: &DiscretizationGrid, sense: Sense) -> Self {
        let (d, l) = (grid.d(), grid.l());
        let mut phi = vec![vec![0.0; l]; d];
        let mut c = vec![vec![0.0; l]; d];
        for q in 0..d {
            for h in 0..l {
                let (lt, ut) = (grid.theta_lower[q], grid.theta_upper[q]);
                let (ld, ud) = (grid.delta_breaks[h], grid.delta_breaks[h + 1]);
                match sense {
                    Sense::Maximize => {
                        phi[q][h] = cdf_of_ratio(ud, lt);
                        c[q][h] = scaled_pdf(ld, ut);
                    }
                    Sense::Minimize => {
                        phi[q][h] = cdf_of_ratio(ld, ut);
                        c[q][h] = scaled_pdf(ud, lt);
                    }
                }
            }
        }
        let pick = |a: f64, b: f64| if sense == Sense::Maximize { a.min(b) } else { a.max(b) };
        let init = if sense == Sense::Maximize { f64::INFINITY } else { f64::NEG_INFINITY };
        let rows = |t: &Vec<Vec<f64>>| -> Vec<f64> { t.iter().map(|r| r.iter().copied().fold(init, pick)).collect() };
        let cols = |t: &Vec<Vec<f64>>| -> Vec<f64> { (0..l).map(|h| (0..d).map(|q| t[q][h]).fold(init, pick)).collect() };
        let phi_row = rows(&phi);
        let c_row = rows(&c);
        Self {
            phi_all: phi_row.iter().copied().fold(init, pick),
            c_all: c_row.iter().copied().fold(init, pick),
            phi_col: cols(&phi),
            c_col: cols(&c),
            phi_row,
            c_row,
            phi,
            c,
        }
    }
}

/// An RMP model together with what is needed to complete it from `x`.
#[derive(Debug, Clone)]
pub struct Rmp {
    pub model: MilpModel,
    pub layout: RmpLayout,
    pub kind: RmpKind,
    mu: Vec<f64>,
    cov: Vec<f64>,
    grid: Option<DiscretizationGrid>,
    tables: Option<PairTables>,
    /// Squared SVI floors per `delta` interval (`+inf` disables the interval).
    floors2: Option<Vec<f64>>,
    big_m_u: f64,
    big_m_uprime: f64,
    cuts: usize,
}

/// Result of one RMP solve.
#[derive(Debug, Clone)]
pub struct RmpSolution {
    pub outcome: MilpOutcome,
    pub selection: Option<SelectionPair>,
}

fn sum_pos(v: &[f64]) -> f64 {
    v.iter().filter(|&&a| a > 0.0).sum()
}

fn sum_neg(v: &[f64]) -> f64 {
    v.iter().filter(|&&a| a < 0.0).sum()
}

/// Shared skeleton: `x`, `u`, McCormick products, `s` and the region rows.
fn skeleton(instance: &ProblemInstance, sense: Sense) -> (MilpModel, RmpLayout) {
    let n = instance.n();
    let g = &instance.gaussian;
    let mu = g.mu();
    let mut m = MilpModel::new(sense);
    let mut x = Vec::with_capacity(2 * n);
    for i in 0..2 {
        for j in 0..n {
            x.push(m.add_binary(format!("x_{i}_{j}")));
        }
    }
    let (mu_lo, mu_hi) = (sum_neg(mu), sum_pos(mu));
    let u1 = m.add_var("u1", VarKind::Continuous, mu_lo, mu_hi);
    let u2 = m.add_var("u2", VarKind::Continuous, mu_lo, mu_hi);
    let mut v = Vec::with_capacity(2 * n * n);
    for i in 0..2 {
        for j in 0..n {
            for jp in 0..n {
                v.push(m.add_binary(format!("v_{i}_{j}_{jp}")));
            }
        }
    }
    let mut r = Vec::with_capacity(n * n);
    for j in 0..n {
        for jp in 0..n {
            r.push(m.add_binary(format!("r_{j}_{jp}")));
        }
    }
    let abs_cov: f64 = g.cov_flat().iter().map(|c| c.abs()).sum();
    let s = m.add_var("s", VarKind::Continuous, 0.0, abs_cov);

    for (i, u) in [(0, u1), (1, u2)] {
        let mut row = vec![(u, 1.0)];
        row.extend((0..n).filter(|&j| mu[j] != 0.0).map(|j| (x[i * n + j], -mu[j])));
        m.add_row(row, Relation::Eq, 0.0);
    }
    m.add_row(vec![(u1, 1.0), (u2, -1.0)], Relation::Ge, 0.0);

    let mut srow = vec![(s, 1.0)];
    for i in 0..2 {
        for j in 0..n {
            let var = g.variance(j);
            if var != 0.0 {
                srow.push((x[i * n + j], -var));
            }
            for jp in (j + 1)..n {
                let c = g.cov(j, jp);
                if c != 0.0 {
                    srow.push((v[(i * n + j) * n + jp], -2.0 * c));
                }
            }
        }
    }
    for j in 0..n {
        for jp in 0..n {
            let c = g.cov(j, jp);
            if c != 0.0 {
                srow.push((r[j * n + jp], 2.0 * c));
            }
        }
    }
    m.add_row(srow, Relation::Eq, 0.0);

    for i in 0..2 {
        for j in 0..n {
            for jp in 0..n {
                let (vv, a, b) = (v[(i * n + j) * n + jp], x[i * n + j], x[i * n + jp]);
                mccormick(&mut m, vv, a, b);
            }
        }
    }
    for j in 0..n {
        for jp in 0..n {
            mccormick(&mut m, r[j * n + jp], x[j], x[n + jp]);
        }
    }

    let layout = RmpLayout {
        n,
        x,
        u1,
        u2,
        v,
        r,
        s,
        s_prime: None,
        w: Vec::new(),
        y: Vec::new(),
        big_u: None,
        big_u_prime: None,
    };
    for c in instance.region.constraints() {
        add_region_row(&mut m, &layout, c);
    }
    (m, layout)
}

fn mccormick(m: &mut MilpModel, prod: usize, a: usize, b: usize) {
    m.add_row(vec![(prod, 1.0), (a, -1.0)], Relation::Le, 0.0);
    m.add_row(vec![(prod, 1.0), (b, -1.0)], Relation::Le, 0.0);
    if a == b {
        m.add_row(vec![(prod, 1.0), (a, -1.0)], Relation::Ge, 0.0);
    } else {
        m.add_row(vec![(prod, 1.0), (a, -1.0), (b, -1.0)], Relation::Ge, -1.0);
    }
}

fn add_region_row(m: &mut MilpModel, layout: &RmpLayout, c: &LinearConstraint) {
    let coeffs = c.terms.iter().map(|&(i, j, a)| (layout.x[i * layout.n + j], a)).collect();
    m.add_row(coeffs, c.rel, c.rhs);
}

/// Adds the interval binaries `w` with `s'` and their linking rows.
fn add_theta_intervals(m: &mut MilpModel, layout: &mut RmpLayout, grid: &DiscretizationGrid) {
    let d = grid.d();
    let top = grid.theta2_top();
    layout.w = (0..d).map(|q| m.add_binary(format!("w_{q}"))).collect();
    let sp = m.add_var("s_prime", VarKind::Continuous, 0.0, grid.theta_top());
    layout.s_prime = Some(sp);
    m.add_row(layout.w.iter().map(|&k| (k, 1.0)).collect(), Relation::Eq, 1.0);
    let mut row = vec![(sp, 1.0)];
    row.extend((0..d).map(|q| (layout.w[q], -grid.theta_upper[q])));
    m.add_row(row, Relation::Eq, 0.0);
    for q in 0..d {
        let wq = layout.w[q];
        m.add_row(vec![(wq, grid.theta2_breaks[q]), (layout.s, -1.0)], Relation::Le, 0.0);
        m.add_row(vec![(layout.s, 1.0), (wq, top)], Relation::Le, grid.theta2_breaks[q + 1] + top);
    }
}

impl Rmp {
    fn from_parts(instance: &ProblemInstance, model: MilpModel, layout: RmpLayout, kind: RmpKind) -> Self {
        Self {
            model,
            layout,
            kind,
            mu: instance.gaussian.mu().to_vec(),
            cov: instance.gaussian.cov_flat().to_vec(),
            grid: None,
            tables: None,
            floors2: None,
            big_m_u: 0.0,
            big_m_uprime: 0.0,
            cuts: 0,
        }
    }

    /// `max { objective | x in region, u1 >= u2, s = theta(x)^2 }`.
    pub fn psi(instance: &ProblemInstance, objective: PsiObjective) -> Self {
        let (mut m, layout) = skeleton(instance, Sense::Maximize);
        let obj = match objective {
            PsiObjective::Theta2 => vec![(layout.s, 1.0)],
            PsiObjective::Delta => vec![(layout.u1, 1.0), (layout.u2, -1.0)],
            PsiObjective::U1 => vec![(layout.u1, 1.0)],
        };
        m.set_objective(obj, 0.0);
        Self::from_parts(instance, m, layout, RmpKind::Psi(objective))
    }

    /// Baseline model: `u1 + s' / sqrt(2 pi)` when maximizing, `u1` when
    /// minimizing.
    pub fn baseline(instance: &ProblemInstance, ctx: &BoundContext) -> Self {
        let (mut m, mut layout) = skeleton(instance, instance.sense);
        add_theta_intervals(&mut m, &mut layout, &ctx.grid);
        let obj = match instance.sense {
            Sense::Maximize => vec![(layout.u1, 1.0), (layout.s_prime.unwrap(), INV_SQRT_2PI)],
            Sense::Minimize => vec![(layout.u1, 1.0)],
        };
        m.set_objective(obj, 0.0);
        let mut rmp = Self::from_parts(instance, m, layout, RmpKind::Baseline);
        rmp.grid = Some(ctx.grid.clone());
        rmp
    }

    /// Enhanced model over joint `theta^2` and `delta` intervals, with SVIs
    /// when the context carries floors.
    pub fn enhanced(instance: &ProblemInstance, ctx: &BoundContext) -> Self {
        let grid = &ctx.grid;
        let sense = instance.sense;
        let (mut m, mut layout) = skeleton(instance, sense);
        add_theta_intervals(&mut m, &mut layout, grid);
        let (d, l) = (grid.d(), grid.l());
        let dtop = grid.delta_top();
        layout.y = (0..l).map(|h| m.add_binary(format!("y_{h}"))).collect();
        m.add_row(layout.y.iter().map(|&k| (k, 1.0)).collect(), Relation::Eq, 1.0);
        for h in 0..l {
            let yh = layout.y[h];
            m.add_row(vec![(yh, grid.delta_breaks[h]), (layout.u1, -1.0), (layout.u2, 1.0)], Relation::Le, 0.0);
            m.add_row(vec![(layout.u1, 1.0), (layout.u2, -1.0), (yh, dtop)], Relation::Le, grid.delta_breaks[h + 1] + dtop);
        }
        let mu = instance.gaussian.mu();
        let big_u = m.add_var("U", VarKind::Continuous, sum_neg(mu), sum_pos(mu));
        let big_up = m.add_var("U_prime", VarKind::Continuous, 0.0, grid.theta_top() * INV_SQRT_2PI);
        layout.big_u = Some(big_u);
        layout.big_u_prime = Some(big_up);
        let tables = PairTables::new(grid, sense);
        let (bm, bmp) = (ctx.big_m_u, ctx.big_m_uprime);
        for q in 0..d {
            for h in 0..l {
                let (wq, yh) = (layout.w[q], layout.y[h]);
                let p = tables.phi[q][h];
                let c = tables.c[q][h];
                match sense {
                    Sense::Maximize => {
                        m.add_row(
                            vec![(big_u, 1.0), (layout.u1, -p), (layout.u2, -(1.0 - p)), (wq, bm), (yh, bm)],
                            Relation::Le,
                            2.0 * bm,
                        );
                        m.add_row(vec![(big_up, 1.0), (wq, bmp), (yh, bmp)], Relation::Le, c + 2.0 * bmp);
                    }
                    Sense::Minimize => {
                        m.add_row(
                            vec![(big_u, 1.0), (layout.u1, -p), (layout.u2, -(1.0 - p)), (wq, -bm), (yh, -bm)],
                            Relation::Ge,
                            -2.0 * bm,
                        );
                        m.add_row(vec![(big_up, 1.0), (wq, -bmp), (yh, -bmp)], Relation::Ge, c - 2.0 * bmp);
                    }
                }
            }
        }
        m.set_objective(vec![(big_u, 1.0), (big_up, 1.0)], 0.0);
        let floors2 = ctx.theta_floors.as_ref().map(|f| {
            attach_svis(&mut m, layout.s, &layout.y, f);
            f.iter().map(|&t| if t.is_finite() { t * t } else { f64::INFINITY }).collect()
        });
        let mut rmp = Self::from_parts(instance, m, layout, RmpKind::Enhanced);
        rmp.grid = Some(grid.clone());
        rmp.tables = Some(tables);
        rmp.floors2 = floors2;
        rmp.big_m_u = bm;
        rmp.big_m_uprime = bmp;
        rmp
    }

    pub fn sense(&self) -> Sense {
        self.model.sense
    }

    /// Adds a constraint over `x` (a no-good cut or any region row).
    pub fn add_constraint(&mut self, c: &LinearConstraint) {
        add_region_row(&mut self.model, &self.layout, c);
    }

    pub fn add_cut(&mut self, c: &LinearConstraint) {
        self.add_constraint(c);
        self.cuts += 1;
    }

    pub fn cuts(&self) -> usize {
        self.cuts
    }

    /// Forbids every component with `keep[j] == false`.
    pub fn restrict_items(&mut self, keep: &[bool]) {
        for (j, &k) in keep.iter().enumerate() {
            if !k {
                for i in 0..2 {
                    self.model.add_row(vec![(self.layout.x[i * self.layout.n + j], 1.0)], Relation::Le, 0.0);
                }
            }
        }
    }

    pub fn solve(&self, backend: Backend, time_limit: f64) -> Result<RmpSolution, MilpError> {
        let outcome = match backend {
            Backend::Fallback => solve_selection(&self.model, &self.layout.x, self, time_limit)?,
            Backend::External => external_solve(&self.model, time_limit)?,
        };
        let selection = outcome.incumbent.as_ref().map(|v| {
            let bits: Vec<bool> = self.layout.x.iter().map(|&k| v[k] > 0.5).collect();
            SelectionPair::from_flat(&bits)
        });
        Ok(RmpSolution { outcome, selection })
    }

    /// Model objective at the best completion of `x`, or `None` when `x`
    /// admits no completion (for example `E[Z1] < E[Z2]`).
    pub fn evaluate(&self, x: &SelectionPair) -> Option<f64> {
        self.objective(&x.to_flat())
    }

    fn moments(&self, bits: &[bool]) -> (f64, f64, f64) {
        let n = self.layout.n;
        let (mut e1, mut e2) = (0.0, 0.0);
        let mut a: Vec<(usize, f64)> = Vec::new();
        for j in 0..n {
            let (b1, b2) = (bits[j], bits[n + j]);
            if b1 {
                e1 += self.mu[j];
            }
            if b2 {
                e2 += self.mu[j];
            }
            if b1 != b2 {
                a.push((j, if b1 { 1.0 } else { -1.0 }));
            }
        }
        let mut s = 0.0;
        for &(j, aj) in &a {
            let row = &self.cov[j * n..(j + 1) * n];
            for &(k, ak) in &a {
                s += aj * ak * row[k];
            }
        }
        (e1, e2, s.max(0.0))
    }

    /// Chooses the interval pair and returns `(objective, q, h, U, U')`.
    fn best_pair(&self, e1: f64, e2: f64, s: f64) -> Option<(f64, usize, usize, f64, f64)> {
        let grid = self.grid.as_ref()?;
        let delta = (e1 - e2).max(0.0);
        let qs = grid.theta_intervals(s, MEMBER_TOL * s.max(1.0));
        let hs = grid.delta_intervals(delta, MEMBER_TOL * e1.abs().max(e2.abs()).max(1.0));
        match self.kind {
            RmpKind::Baseline => {
                if qs.is_empty() {
                    return None;
                }
                match self.sense() {
                    Sense::Maximize => {
                        let q = qs.end - 1;
                        Some((e1 + grid.theta_upper[q] * INV_SQRT_2PI, q, 0, 0.0, 0.0))
                    }
                    Sense::Minimize => Some((e1, qs.start, 0, 0.0, 0.0)),
                }
            }
            RmpKind::Enhanced => {
                let t = self.tables.as_ref()?;
                let (bm, bmp) = (self.big_m_u, self.big_m_uprime);
                let stol = MEMBER_TOL * s.max(1.0);
                let mut best: Option<(f64, usize, usize, f64, f64)> = None;
                for q in qs {
                    for h in hs.clone() {
                        if let Some(f) = &self.floors2 {
                            if !(s >= f[h] - stol) {
                                continue;
                            }
                        }
                        let (u, up) = match self.sense() {
                            Sense::Maximize => {
                                let m = (delta * t.phi[q][h])
                                    .min(delta * t.phi_row[q] + bm)
                                    .min(delta * t.phi_col[h] + bm)
                                    .min(delta * t.phi_all + 2.0 * bm);
                                let c = t.c[q][h].min(t.c_row[q] + bmp).min(t.c_col[h] + bmp).min(t.c_all + 2.0 * bmp);
                                (e2 + m, c)
                            }
                            Sense::Minimize => {
                                let m = (delta * t.phi[q][h])
                                    .max(delta * t.phi_row[q] - bm)
                                    .max(delta * t.phi_col[h] - bm)
                                    .max(delta * t.phi_all - 2.0 * bm);
                                let c = t.c[q][h]
                                    .max(t.c_row[q] - bmp)
                                    .max(t.c_col[h] - bmp)
                                    .max(t.c_all - 2.0 * bmp)
                                    .max(0.0);
                                (e2 + m, c)
                            }
                        };
                        let val = u + up;
                        let better = match &best {
                            None => true,
                            Some((b, ..)) => self.sense().better(val, *b),
                        };
                        if better {
                            best = Some((val, q, h, u, up));
                        }
                    }
                }
                best
            }
            RmpKind::Psi(_) => None,
        }
    }

    fn admissible_order(&self, e1: f64, e2: f64) -> bool {
        e1 >= e2 - MEMBER_TOL * e1.abs().max(e2.abs()).max(1.0)
    }
}

impl SelectionCompletion for Rmp {
    fn objective(&self, bits: &[bool]) -> Option<f64> {
        let (e1, e2, s) = self.moments(bits);
        if !self.admissible_order(e1, e2) {
            return None;
        }
        match self.kind {
            RmpKind::Psi(PsiObjective::Theta2) => Some(s),
            RmpKind::Psi(PsiObjective::Delta) => Some(e1 - e2),
            RmpKind::Psi(PsiObjective::U1) => Some(e1),
            RmpKind::Baseline | RmpKind::Enhanced => self.best_pair(e1, e2, s).map(|b| b.0),
        }
    }

    fn complete(&self, bits: &[bool]) -> Vec<f64> {
        let l = &self.layout;
        let n = l.n;
        let mut v = vec![0.0; self.model.num_vars()];
        let b = |k: usize| if bits[k] { 1.0 } else { 0.0 };
        for p in 0..2 * n {
            v[l.x[p]] = b(p);
        }
        let (e1, e2, s) = self.moments(bits);
        v[l.u1] = e1;
        v[l.u2] = e2;
        v[l.s] = s;
        for i in 0..2 {
            for j in 0..n {
                for jp in 0..n {
                    v[l.v[(i * n + j) * n + jp]] = b(i * n + j) * b(i * n + jp);
                }
            }
        }
        for j in 0..n {
            for jp in 0..n {
                v[l.r[j * n + jp]] = b(j) * b(n + jp);
            }
        }
        if let Some((_, q, h, u, up)) = self.best_pair(e1, e2, s) {
            let grid = self.grid.as_ref().unwrap();
            v[l.w[q]] = 1.0;
            v[l.s_prime.unwrap()] = grid.theta_upper[q];
            if self.kind == RmpKind::Enhanced {
                v[l.y[h]] = 1.0;
                v[l.big_u.unwrap()] = u;
                v[l.big_u_prime.unwrap()] = up;
            }
        }
        v
    }
}

#[cfg(feature = "microlp")]
fn external_solve(model: &MilpModel, time_limit: f64) -> Result<MilpOutcome, MilpError> {
    crate::milp::external::solve(model, time_limit)
}

#[cfg(not(feature = "microlp"))]
fn external_solve(_: &MilpModel, _: f64) -> Result<MilpOutcome, MilpError> {
    Err(MilpError::External("built without an external backend".into()))
}
