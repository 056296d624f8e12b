//! Adapter handing a [`MilpModel`] to an in-process branch-and-bound engine
//! (`good_lp` with the pure-Rust `microlp` solver).

use super::{MilpError, MilpModel, MilpOutcome, MilpStatus, VarKind, MIP_GAP};
use crate::model::{Relation, Sense};
use good_lp::solvers::{SolutionStatus, WithMipGap, WithTimeLimit};
use good_lp::{microlp, variable, Expression, ProblemVariables, ResolutionError, Solution, SolverModel};
use std::time::Instant;

/// Solves the full model, forwarding the time limit and a relative gap of
/// [`MIP_GAP`].
pub fn solve(model: &MilpModel, time_limit: f64) -> Result<MilpOutcome, MilpError> {
    if !(time_limit > 0.0) {
        return Err(MilpError::BadTimeLimit(time_limit));
    }
    model.validate()?;
    let start = Instant::now();
    let mut vars = ProblemVariables::new();
    let handles: Vec<_> = model
        .vars
        .iter()
        .map(|v| {
            let def = match v.kind {
                VarKind::Binary => variable().binary(),
                VarKind::Continuous => variable().min(v.lower).max(v.upper),
            };
            vars.add(def.name(v.name.clone()))
        })
        .collect();
    let affine = |coeffs: &[(usize, f64)]| -> Expression {
        coeffs.iter().fold(Expression::from(0.0), |acc, &(k, c)| acc + c * handles[k])
    };
    let objective = affine(&model.objective) + model.objective_constant;
    let unsolved = match model.sense {
        Sense::Maximize => vars.maximise(objective),
        Sense::Minimize => vars.minimise(objective),
    };
    let mut problem = unsolved
        .using(microlp)
        .with_time_limit(time_limit)
        .with_mip_gap(MIP_GAP as f32)
        .map_err(|e| MilpError::External(e.to_string()))?;
    for row in &model.rows {
        let lhs = affine(&row.coeffs);
        let c = match row.rel {
            Relation::Le => lhs.leq(row.rhs),
            Relation::Ge => lhs.geq(row.rhs),
            Relation::Eq => lhs.eq(row.rhs),
        };
        problem.add_constraint(c);
    }
    let outcome = problem.solve();
    let wall_time = start.elapsed().as_secs_f64();
    match outcome {
        Ok(sol) => {
            let mut values: Vec<f64> = handles.iter().map(|&h| sol.value(h)).collect();
            for (v, var) in values.iter_mut().zip(&model.vars) {
                if var.kind == VarKind::Binary {
                    *v = v.round();
                }
            }
            let value = model.objective_value(&values);
            let (status, dual) = match sol.status() {
                SolutionStatus::Optimal => (MilpStatus::Optimal, value),
                SolutionStatus::GapLimit => {
                    let slack = MIP_GAP * value.abs().max(1.0);
                    let d = if model.sense == Sense::Maximize { value + slack } else { value - slack };
                    (MilpStatus::Optimal, d)
                }
                SolutionStatus::TimeLimit => (MilpStatus::FeasibleWithBound, model.trivial_bound()),
            };
            Ok(MilpOutcome {
                status,
                incumbent: Some(values),
                objective_value: Some(value),
                dual_bound: Some(dual),
                wall_time,
                leaves: 0,
            })
        }
        Err(ResolutionError::Infeasible) => Ok(MilpOutcome {
            status: MilpStatus::Infeasible,
            incumbent: None,
            objective_value: None,
            dual_bound: None,
            wall_time,
            leaves: 0,
        }),
        Err(ResolutionError::Other(msg)) if msg.contains("Time limit") => Ok(MilpOutcome {
            status: MilpStatus::TimeLimitNoIncumbent,
            incumbent: None,
            objective_value: None,
            dual_bound: Some(model.trivial_bound()),
            wall_time,
            leaves: 0,
        }),
        Err(e) => Err(MilpError::External(e.to_string())),
    }
}
