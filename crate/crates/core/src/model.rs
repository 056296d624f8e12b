//! Problem instances: a Gaussian vector, a linear feasible region over the
//! `2 x n` selection binaries, and an objective sense.
//!
//! Instance files are JSON with 0-based indices: `i` in `{0, 1}` picks the
//! row (`Z1` or `Z2`) and `j` in `0..n` picks the component.

use crate::gaussian::{GaussianError, GaussianVector, SelectionPair};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use thiserror::Error;

/// Tolerance for constraints with fractional data.
pub const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "le")]
    Le,
    #[serde(rename = "eq")]
    Eq,
    #[serde(rename = "ge")]
    Ge,
}

impl Relation {
    /// Whether `lhs rel rhs` holds with slack `tol`.
    pub fn holds(self, lhs: f64, rhs: f64, tol: f64) -> bool {
        match self {
            Relation::Le => lhs <= rhs + tol,
            Relation::Eq => (lhs - rhs).abs() <= tol,
            Relation::Ge => lhs >= rhs - tol,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "max")]
    Maximize,
    #[serde(rename = "min")]
    Minimize,
}

impl Sense {
    /// True when `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Maximize => a > b,
            Sense::Minimize => a < b,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Sense::Maximize => Sense::Minimize,
            Sense::Minimize => Sense::Maximize,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sense::Maximize => "max",
            Sense::Minimize => "min",
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema error at {position}: {message}")]
    Schema { position: String, message: String },
    #[error("constraint {index}: {message}")]
    Constraint { index: usize, message: String },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn schema(position: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema { position: position.into(), message: message.into() }
}

/// `sum coeff * x[i][j]  rel  rhs`, with terms sorted by `(i, j)` and no
/// repeated index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(usize, usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

impl LinearConstraint {
    /// Merges repeated indices and drops zero coefficients.
    pub fn new(terms: impl IntoIterator<Item = (usize, usize, f64)>, rel: Relation, rhs: f64) -> Self {
        let mut map: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (i, j, c) in terms {
            *map.entry((i, j)).or_insert(0.0) += c;
        }
        let terms = map.into_iter().filter(|&(_, c)| c != 0.0).map(|((i, j), c)| (i, j, c)).collect();
        Self { terms, rel, rhs }
    }

    pub fn lhs(&self, x: &SelectionPair) -> f64 {
        self.terms.iter().filter(|&&(i, j, _)| x.get(i, j)).map(|&(_, _, c)| c).sum()
    }

    /// True when every coefficient and the right-hand side are integers small
    /// enough to be summed exactly in `f64`.
    pub fn is_integral(&self) -> bool {
        let ok = |v: f64| v.fract() == 0.0 && v.abs() < 1e15;
        ok(self.rhs) && self.terms.iter().all(|&(_, _, c)| ok(c))
    }

    pub fn is_satisfied(&self, x: &SelectionPair) -> bool {
        let tol = if self.is_integral() { 0.0 } else { FEAS_TOL };
        self.rel.holds(self.lhs(x), self.rhs, tol)
    }

    /// The same constraint with rows 0 and 1 exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.terms.iter().map(|&(i, j, c)| (1 - i, j, c)), self.rel, self.rhs)
    }

    fn validate(&self, n: usize, index: usize) -> Result<(), ModelError> {
        if self.terms.is_empty() {
            return Err(ModelError::Constraint { index, message: "no nonzero coefficient".into() });
        }
        if !self.rhs.is_finite() {
            return Err(ModelError::Constraint { index, message: "non-finite right-hand side".into() });
        }
        for (t, &(i, j, c)) in self.terms.iter().enumerate() {
            if i > 1 || j >= n {
                return Err(ModelError::Constraint {
                    index,
                    message: format!("term {t} index ({i}, {j}) outside (2, {n})"),
                });
            }
            if !c.is_finite() {
                return Err(ModelError::Constraint { index, message: format!("term {t} has non-finite coefficient") });
            }
        }
        Ok(())
    }
}

/// Linear feasible region over `x[i][j]`, `i in {0, 1}`, `j in 0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    n: usize,
    constraints: Vec<LinearConstraint>,
}

impl FeasibleRegion {
    pub fn new(n: usize, constraints: Vec<LinearConstraint>) -> Result<Self, ModelError> {
        for (k, c) in constraints.iter().enumerate() {
            c.validate(n, k)?;
        }
        Ok(Self { n, constraints })
    }

    pub fn unconstrained(n: usize) -> Self {
        Self { n, constraints: Vec::new() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn push(&mut self, c: LinearConstraint) -> Result<(), ModelError> {
        c.validate(self.n, self.constraints.len())?;
        self.constraints.push(c);
        Ok(())
    }

    /// True iff `x` satisfies every constraint.
    pub fn is_feasible(&self, x: &SelectionPair) -> bool {
        x.n() == self.n && self.constraints.iter().all(|c| c.is_satisfied(x))
    }

    /// True when exchanging the two rows maps the constraint set onto itself.
    ///
    /// The cutting-plane models impose `E[Z1] >= E[Z2]`, which only loses
    /// nothing when the region is closed under the row swap.
    pub fn is_swap_symmetric(&self) -> bool {
        let key = |c: &LinearConstraint| format!("{:?}", (c.rel, c.rhs.to_bits(), bits(&c.terms)));
        let mut a: Vec<String> = self.constraints.iter().map(key).collect();
        let mut b: Vec<String> = self.constraints.iter().map(|c| key(&c.swapped())).collect();
        a.sort();
        b.sort();
        a == b
    }
}

fn bits(terms: &[(usize, usize, f64)]) -> Vec<(usize, usize, u64)> {
    terms.iter().map(|&(i, j, c)| (i, j, c.to_bits())).collect()
}

/// Free-form provenance carried through instance files.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub gaussian: GaussianVector,
    pub region: FeasibleRegion,
    pub sense: Sense,
    pub label: String,
    pub meta: InstanceMeta,
}

impl ProblemInstance {
    pub fn new(gaussian: GaussianVector, region: FeasibleRegion, sense: Sense, label: impl Into<String>) -> Result<Self, ModelError> {
        if gaussian.n() != region.n() {
            return Err(schema("n", format!("gaussian has {} components, region has {}", gaussian.n(), region.n())));
        }
        Ok(Self { gaussian, region, sense, label: label.into(), meta: InstanceMeta::default() })
    }

    pub fn with_meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n(&self) -> usize {
        self.gaussian.n()
    }

    pub fn is_feasible(&self, x: &SelectionPair) -> bool {
        self.region.is_feasible(x)
    }

    /// Serializes to the instance file format.
    pub fn to_json(&self) -> String {
        let file = InstanceFile {
            n: self.n(),
            mu: self.gaussian.mu().to_vec(),
            sigma: self.gaussian.sigma_rows(),
            sense: self.sense,
            constraints: self.region.constraints().to_vec(),
            label: if self.label.is_empty() { None } else { Some(self.label.clone()) },
            meta: self.meta.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("instance serializes");
        s.push('\n');
        s
    }

    /// Parses the instance file format.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: InstanceFile = serde_json::from_str(text)
            .map_err(|e| schema(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
        file.into_instance()
    }
}

pub fn write_instance(instance: &ProblemInstance, path: &Path) -> Result<(), ModelError> {
    std::fs::write(path, instance.to_json()).map_err(|source| ModelError::Io { path: path.display().to_string(), source })
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    ProblemInstance::from_json(&text)
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    n: usize,
    mu: Vec<f64>,
    sigma: Vec<Vec<f64>>,
    sense: Sense,
    #[serde(default)]
    constraints: Vec<LinearConstraint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(flatten)]
    meta: InstanceMeta,
}

impl InstanceFile {
    fn into_instance(self) -> Result<ProblemInstance, ModelError> {
        let n = self.n;
        if self.mu.len() != n {
            return Err(schema("mu", format!("expected {n} entries, found {}", self.mu.len())));
        }
        if self.sigma.len() != n {
            return Err(schema("sigma", format!("expected {n} rows, found {}", self.sigma.len())));
        }
        for (r, row) in self.sigma.iter().enumerate() {
            if row.len() != n {
                return Err(schema(format!("sigma[{r}]"), format!("expected {n} entries, found {}", row.len())));
            }
        }
        for r in 0..n {
            for c in (r + 1)..n {
                if self.sigma[r][c] != self.sigma[c][r] {
                    return Err(schema(
                        format!("sigma[{r}][{c}] / sigma[{c}][{r}]"),
                        format!("asymmetric entries {} and {}", self.sigma[r][c], self.sigma[c][r]),
                    ));
                }
            }
        }
        let gaussian = GaussianVector::new(self.mu, self.sigma).map_err(|e| schema("sigma", e.to_string()))?;
        let mut constraints = Vec::with_capacity(self.constraints.len());
        for (k, c) in self.constraints.into_iter().enumerate() {
            let norm = LinearConstraint::new(c.terms.iter().copied(), c.rel, c.rhs);
            if norm.terms.len() != c.terms.len() {
                return Err(schema(format!("constraints[{k}].terms"), "repeated index or zero coefficient"));
            }
            norm.validate(n, k).map_err(|e| schema(format!("constraints[{k}]"), e.to_string()))?;
            constraints.push(norm);
        }
        let region = FeasibleRegion { n, constraints };
        Ok(ProblemInstance { gaussian, region, sense: self.sense, label: self.label.unwrap_or_default(), meta: self.meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(r1: &[u8], r2: &[u8]) -> SelectionPair {
        SelectionPair::new(r1.iter().map(|&b| b == 1).collect(), r2.iter().map(|&b| b == 1).collect()).unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let x = pair(&[1, 0], &[1, 1]);
        assert!(FeasibleRegion::unconstrained(2).is_feasible(&x));

        let disjoint = LinearConstraint::new([(0, 0, 1.0), (1, 0, 1.0)], Relation::Le, 1.0);
        assert!(!disjoint.is_satisfied(&x));

        let weights = [19.0, 12.0, 8.0, 7.0];
        let knap = LinearConstraint::new((0..4).map(|j| (0, j, weights[j])), Relation::Le, 40.0);
        assert!(knap.is_satisfied(&pair(&[1, 1, 1, 0], &[0, 0, 0, 0])));
        assert!(!knap.is_satisfied(&pair(&[1, 1, 1, 1], &[0, 0, 0, 0])));
    }

    #[test]
    fn fractional_constraints_use_tolerance() {
        let c = LinearConstraint::new([(0, 0, 0.1), (0, 1, 0.2)], Relation::Eq, 0.3);
        assert!(!c.is_integral());
        assert!(c.is_satisfied(&pair(&[1, 1], &[0, 0])));
    }

    #[test]
    fn constraint_validation() {
        let bad = LinearConstraint::new([(2, 0, 1.0)], Relation::Le, 1.0);
        assert!(FeasibleRegion::new(2, vec![bad]).is_err());
        let empty = LinearConstraint::new([(0, 0, 0.0)], Relation::Le, 1.0);
        assert!(FeasibleRegion::new(2, vec![empty]).is_err());
    }

    fn sample_instance() -> ProblemInstance {
        let g = GaussianVector::new(
            vec![0.1, 1.0 / 3.0, 2.0e-17],
            vec![vec![1.0 / 7.0, 0.01, 0.0], vec![0.01, 2.5, 0.3], vec![0.0, 0.3, 0.7]],
        )
        .unwrap();
        let region = FeasibleRegion::new(
            3,
            vec![
                LinearConstraint::new([(0, 0, 3.0), (0, 2, 1.5)], Relation::Le, 4.0),
                LinearConstraint::new([(0, 1, 1.0), (1, 1, 1.0)], Relation::Eq, 1.0),
            ],
        )
        .unwrap();
        ProblemInstance::new(g, region, Sense::Minimize, "toy").unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let inst = sample_instance().with_meta(InstanceMeta { family: Some("kp".into()), param: Some(0.5), seed: Some(3) });
        let text = inst.to_json();
        let back = ProblemInstance::from_json(&text).unwrap();
        assert_eq!(back, inst);
        for (a, b) in back.gaussian.cov_flat().iter().zip(inst.gaussian.cov_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join(format!("maxtwo-model-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("inst.json");
        let inst = sample_instance();
        write_instance(&inst, &path).unwrap();
        assert_eq!(read_instance(&path).unwrap(), inst);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn asymmetric_sigma_names_entry_pair() {
        let text = r#"{"n":2,"mu":[0,0],"sigma":[[1,0.5],[0.4,1]],"sense":"max","constraints":[]}"#;
        match ProblemInstance::from_json(text) {
            Err(ModelError::Schema { position, .. }) => assert_eq!(position, "sigma[0][1] / sigma[1][0]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sense_and_errors_from_text() {
        let text = r#"{"n":1,"mu":[2],"sigma":[[1]],"sense":"max"}"#;
        let inst = ProblemInstance::from_json(text).unwrap();
        assert_eq!(inst.sense, Sense::Maximize);
        assert!(inst.region.constraints().is_empty());

        let missing = r#"{"n":1,"mu":[2],"sense":"max"}"#;
        assert!(matches!(ProblemInstance::from_json(missing), Err(ModelError::Schema { .. })));
        let short = r#"{"n":2,"mu":[2],"sigma":[[1]],"sense":"max"}"#;
        assert!(matches!(ProblemInstance::from_json(short), Err(ModelError::Schema { position, .. }) if position == "mu"));
        let not_psd = r#"{"n":2,"mu":[0,0],"sigma":[[1,2],[2,1]],"sense":"min"}"#;
        assert!(matches!(ProblemInstance::from_json(not_psd), Err(ModelError::Schema { position, .. }) if position == "sigma"));
        let bad_index = r#"{"n":1,"mu":[0],"sigma":[[1]],"sense":"min","constraints":[{"terms":[[0,4,1]],"rel":"le","rhs":1}]}"#;
        assert!(ProblemInstance::from_json(bad_index).is_err());
    }

    #[test]
    fn swap_symmetry() {
        let mut region = FeasibleRegion::unconstrained(2);
        region.push(LinearConstraint::new([(0, 0, 1.0), (1, 0, 1.0)], Relation::Le, 1.0)).unwrap();
        assert!(region.is_swap_symmetric());
        region.push(LinearConstraint::new([(0, 1, 2.0)], Relation::Le, 1.0)).unwrap();
        assert!(!region.is_swap_symmetric());
        region.push(LinearConstraint::new([(1, 1, 2.0)], Relation::Le, 1.0)).unwrap();
        assert!(region.is_swap_symmetric());
    }
}
