//! Batch solving with per-instance CSV rows and per-configuration averages.

use crate::model::ProblemInstance;
use crate::solver::{solve, ModelChoice, SolveStatus, SolverConfig};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write;

pub const CSV_HEADER: &str = "family,n,param,seed,status,time_s,lb,ub,gap_pct,iterations,cuts,model";
pub const SUMMARY_HEADER: &str = "family,n,param,model,instances,solved,avg_time_solved_s,avg_gap_pct,avg_cuts";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub family: String,
    pub n: usize,
    pub param: Option<f64>,
    pub seed: Option<u64>,
    /// A solve status, or `error` when the solve failed.
    pub status: String,
    pub time_s: f64,
    pub lb: f64,
    pub ub: f64,
    pub gap_pct: f64,
    pub iterations: usize,
    pub cuts: usize,
    pub model: String,
    pub error: Option<String>,
}

impl BenchRow {
    pub fn solved(&self) -> bool {
        self.status == SolveStatus::Optimal.as_str()
    }
}

fn model_name(m: ModelChoice) -> &'static str {
    match m {
        ModelChoice::Enhanced => "enhanced",
        ModelChoice::Baseline => "baseline",
    }
}

fn run_one(instance: &ProblemInstance, config: &SolverConfig) -> BenchRow {
    let mut row = BenchRow {
        family: instance.meta.family.clone().unwrap_or_else(|| "custom".into()),
        n: instance.n(),
        param: instance.meta.param,
        seed: instance.meta.seed,
        status: "error".into(),
        time_s: 0.0,
        lb: f64::NAN,
        ub: f64::NAN,
        gap_pct: f64::NAN,
        iterations: 0,
        cuts: 0,
        model: model_name(config.model).into(),
        error: None,
    };
    match solve(instance, config) {
        Ok(r) => {
            row.status = r.status.as_str().into();
            row.time_s = r.wall_time;
            row.lb = r.lb;
            row.ub = r.ub;
            row.gap_pct = if r.status == SolveStatus::Optimal { 0.0 } else { 100.0 * r.gap };
            row.iterations = r.iterations;
            row.cuts = r.cuts_added;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Solves every instance with the configuration `config_for` picks for it,
/// on `threads` workers. Rows come back in input order; failures become rows
/// with status `error`.
pub fn benchmark<F>(instances: &[ProblemInstance], config_for: F, threads: usize) -> Vec<BenchRow>
where
    F: Fn(&ProblemInstance) -> SolverConfig + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool");
    pool.install(|| instances.par_iter().map(|inst| run_one(inst, &config_for(inst))).collect())
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// One line per row under [`CSV_HEADER`]. Times are written as `0` unless
/// `with_times`, which makes reruns byte-identical.
pub fn to_csv(rows: &[BenchRow], with_times: bool) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let time = if with_times { r.time_s } else { 0.0 };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.n,
            opt(r.param),
            opt(r.seed),
            r.status,
            time,
            r.lb,
            r.ub,
            r.gap_pct,
            r.iterations,
            r.cuts,
            r.model
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub family: String,
    pub n: usize,
    pub param: Option<f64>,
    pub model: String,
    pub instances: usize,
    pub solved: usize,
    /// Mean time over solved instances; absent when none solved.
    pub avg_time_solved_s: Option<f64>,
    /// Mean gap over all instances that produced bounds.
    pub avg_gap_pct: Option<f64>,
    pub avg_cuts: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, k) = v.fold((0.0, 0usize), |(s, k), x| (s + x, k + 1));
    (k > 0).then(|| s / k as f64)
}

/// Averages grouped by family, size, parameter and model, sorted by that key.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, usize, Option<u64>, String), Vec<&BenchRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.family.clone(), r.n, r.param.map(f64::to_bits), r.model.clone())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((family, n, param, model), rs)| SummaryRow {
            family,
            n,
            param: param.map(f64::from_bits),
            model,
            instances: rs.len(),
            solved: rs.iter().filter(|r| r.solved()).count(),
            avg_time_solved_s: mean(rs.iter().filter(|r| r.solved()).map(|r| r.time_s)),
            avg_gap_pct: mean(rs.iter().filter(|r| r.gap_pct.is_finite()).map(|r| r.gap_pct)),
            avg_cuts: mean(rs.iter().map(|r| r.cuts as f64)).unwrap_or(0.0),
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow], with_times: bool) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        let time = if with_times { r.avg_time_solved_s } else { r.avg_time_solved_s.map(|_| 0.0) };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.family,
            r.n,
            opt(r.param),
            r.model,
            r.instances,
            r.solved,
            opt(time),
            opt(r.avg_gap_pct),
            r.avg_cuts
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::applications::knapsack::{gen_knapsack, KnapsackSpec};

    #[test]
    fn empty_list_is_header_only() {
        assert_eq!(to_csv(&benchmark(&[], |_| SolverConfig::default(), 2), true), format!("{CSV_HEADER}\n"));
        assert!(summarize(&[]).is_empty());
    }

    #[test]
    fn rows_follow_input_order_and_solve() {
        let insts: Vec<_> = (0..3).map(|s| gen_knapsack(&KnapsackSpec::new(5, 50.0, s)).unwrap()).collect();
        let rows = benchmark(&insts, |i| SolverConfig::for_family(i.meta.family.as_deref()), 3);
        assert_eq!(rows.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![Some(0), Some(1), Some(2)]);
        assert!(rows.iter().all(|r| r.solved() && r.gap_pct == 0.0));
        let summary = summarize(&rows);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].solved, 3);
        assert_eq!(summary[0].avg_gap_pct, Some(0.0));
        let again = benchmark(&insts, |i| SolverConfig::for_family(i.meta.family.as_deref()), 1);
        assert_eq!(to_csv(&rows, false), to_csv(&again, false));
        assert_eq!(to_csv(&rows, false).lines().count(), 4);
    }
}
