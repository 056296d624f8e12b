//! A small mixed-integer linear model type with two backends: a built-in
//! selection enumerator and an optional adapter to an in-process
//! branch-and-bound engine.

pub mod fallback;
#[cfg(feature = "microlp")]
pub mod external;

use crate::model::{Relation, Sense};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative optimality gap requested from MILP backends.
pub const MIP_GAP: f64 = 1e-6;

/// Constraint tolerance used when checking incumbents.
pub const ROW_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub rel: Relation,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, c)| c * values[k]).sum()
    }

    /// Absolute violation of the row at `values`.
    pub fn violation(&self, values: &[f64]) -> f64 {
        let a = self.activity(values);
        match self.rel {
            Relation::Le => (a - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - a).max(0.0),
            Relation::Eq => (a - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("row {row} references undeclared variable {var}")]
    UnknownVariable { row: usize, var: usize },
    #[error("variable {name} has bounds [{lower}, {upper}]")]
    BadBounds { name: String, lower: f64, upper: f64 },
    #[error("non-finite coefficient in {what}")]
    NonFinite { what: String },
    #[error("time limit must be positive, got {0}")]
    BadTimeLimit(f64),
    #[error("fallback backend needs every variable to be binary or derived from the selection; {0} is not")]
    NotSelectionModel(String),
    #[error("fallback enumeration supports at most 64 selection variables, got {0}")]
    TooManySelectionVars(usize),
    #[error("completion violates row {row} by {violation}")]
    InvalidCompletion { row: usize, violation: f64 },
    #[error("external backend failed: {0}")]
    External(String),
}

/// Variables, rows and a linear objective.
#[derive(Debug, Clone, PartialEq)]
pub struct MilpModel {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub sense: Sense,
}

impl MilpModel {
    pub fn new(sense: Sense) -> Self {
        Self { vars: Vec::new(), rows: Vec::new(), objective: Vec::new(), objective_constant: 0.0, sense }
    }

    pub fn add_var(&mut self, name: impl Into<String>, kind: VarKind, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable { name: name.into(), kind, lower, upper });
        self.vars.len() - 1
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> usize {
        self.add_var(name, VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rel: Relation, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, rel, rhs });
        self.rows.len() - 1
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, f64)>, constant: f64) {
        self.objective = coeffs;
        self.objective_constant = constant;
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(k, c)| c * values[k]).sum::<f64>()
    }

    /// Largest row violation plus bound and integrality violations.
    pub fn max_violation(&self, values: &[f64]) -> (Option<usize>, f64) {
        let mut worst = (None, 0.0);
        for (r, row) in self.rows.iter().enumerate() {
            let v = row.violation(values);
            if v > worst.1 {
                worst = (Some(r), v);
            }
        }
        for (k, var) in self.vars.iter().enumerate() {
            let x = values[k];
            let mut v = (var.lower - x).max(x - var.upper).max(0.0);
            if var.kind == VarKind::Binary {
                v = v.max((x - x.round()).abs());
            }
            if v > worst.1 {
                worst = (None, v);
            }
        }
        worst
    }

    /// Checks index ranges, bounds and finiteness.
    pub fn validate(&self) -> Result<(), MilpError> {
        let nv = self.vars.len();
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(MilpError::BadBounds { name: v.name.clone(), lower: v.lower, upper: v.upper });
            }
        }
        for (r, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(MilpError::NonFinite { what: format!("row {r} rhs") });
            }
            for &(k, c) in &row.coeffs {
                if k >= nv {
                    return Err(MilpError::UnknownVariable { row: r, var: k });
                }
                if !c.is_finite() {
                    return Err(MilpError::NonFinite { what: format!("row {r}") });
                }
            }
        }
        for &(k, c) in &self.objective {
            if k >= nv {
                return Err(MilpError::UnknownVariable { row: usize::MAX, var: k });
            }
            if !c.is_finite() {
                return Err(MilpError::NonFinite { what: "objective".into() });
            }
        }
        Ok(())
    }

    /// Bound on the objective from variable bounds alone.
    pub fn trivial_bound(&self) -> f64 {
        let mut b = self.objective_constant;
        for &(k, c) in &self.objective {
            let v = &self.vars[k];
            let pick = match (self.sense, c >= 0.0) {
                (Sense::Maximize, true) | (Sense::Minimize, false) => v.upper,
                _ => v.lower,
            };
            b += c * pick;
        }
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    FeasibleWithBound,
    Infeasible,
    TimeLimitNoIncumbent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MilpOutcome {
    pub status: MilpStatus,
    pub incumbent: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub dual_bound: Option<f64>,
    pub wall_time: f64,
    /// Complete selections visited (fallback) or zero.
    pub leaves: u64,
}

impl MilpOutcome {
    pub fn has_incumbent(&self) -> bool {
        self.incumbent.is_some()
    }
}

/// Which engine solves the models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Fallback,
    External,
}

impl Backend {
    pub fn external_available() -> bool {
        cfg!(feature = "microlp")
    }
}

/// Solves a model whose variables are all binary.
pub fn solve(model: &MilpModel, time_limit: f64) -> Result<MilpOutcome, MilpError> {
    fallback::solve_binary(model, time_limit)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_catches_bad_models() {
        let mut m = MilpModel::new(Sense::Maximize);
        let x = m.add_binary("x");
        m.add_row(vec![(x, 1.0), (5, 1.0)], Relation::Le, 1.0);
        assert!(matches!(m.validate(), Err(MilpError::UnknownVariable { row: 0, var: 5 })));

        let mut m = MilpModel::new(Sense::Maximize);
        m.add_var("c", VarKind::Continuous, 2.0, 1.0);
        assert!(matches!(m.validate(), Err(MilpError::BadBounds { .. })));
    }

    #[test]
    fn trivial_bound_uses_box() {
        let mut m = MilpModel::new(Sense::Maximize);
        let a = m.add_var("a", VarKind::Continuous, -1.0, 3.0);
        let b = m.add_var("b", VarKind::Continuous, -2.0, 5.0);
        m.set_objective(vec![(a, 2.0), (b, -1.0)], 1.0);
        assert_eq!(m.trivial_bound(), 1.0 + 6.0 + 2.0);
        m.sense = Sense::Minimize;
        assert_eq!(m.trivial_bound(), 1.0 - 2.0 - 5.0);
    }
}
