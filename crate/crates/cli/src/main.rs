//! `maxtwo`: generate instances, solve them, run property suites and
//! benchmarks.
//!
//! Exit codes: 0 success, 1 failure (a verify suite failed, a solver error,
//! or no benchmark instance completed), 2 invalid input, 3 time limit
//! reached, 4 infeasible instance.

mod verify;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxtwo::applications::bench::{summary_csv, to_csv};
use maxtwo::applications::{benchmark, gen_dfs, gen_knapsack, gen_makespan, summarize, BenchRow, KnapsackSpec, MakespanSpec};
use maxtwo::milp::Backend;
use maxtwo::model::{read_instance, write_instance};
use maxtwo::solver::{ModelChoice, SolveResult};
use maxtwo::{solve, ProblemInstance, Sense, SolveStatus, SolverConfig};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("MAXTWO_GIT_DESCRIBE"), ")");
/// Names the default backend when `--backend` is absent.
const BACKEND_ENV: &str = "MAXTWO_BACKEND";

const EXIT_FAILURE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_TIME_LIMIT: u8 = 3;
const EXIT_INFEASIBLE: u8 = 4;

#[derive(Parser)]
#[command(name = "maxtwo", version = VERSION, about = "Optimize the expected maximum of two Gaussian selections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write generated instance files and print their paths.
    Generate {
        #[command(subcommand)]
        family: Family,
    },
    /// Solve one instance and print the result record.
    Solve(SolveArgs),
    /// Run a property suite and print a JSON summary.
    Verify(VerifyArgs),
    /// Solve every instance in a directory and write CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct Common {
    /// First seed; instance k uses seed + k.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Family {
    /// Two knapsacks with correlated profits.
    Kp {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 50.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = SenseArg::Max)]
        sense: SenseArg,
        #[command(flatten)]
        common: Common,
    },
    /// Two-machine makespan with clustered job times.
    Ms {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        eta: f64,
        /// Independent job times instead of clusters.
        #[arg(long)]
        uncorrelated: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Synthetic two-entry showdown slate.
    Dfs {
        #[arg(long)]
        players: usize,
        /// Covariance multiplier.
        #[arg(long, default_value_t = 20.0)]
        scale: f64,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SenseArg {
    Max,
    Min,
}

impl From<SenseArg> for Sense {
    fn from(s: SenseArg) -> Self {
        match s {
            SenseArg::Max => Sense::Maximize,
            SenseArg::Min => Sense::Minimize,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Fallback,
    External,
}

#[derive(Args, Clone)]
struct SolverFlags {
    /// Number of theta^2 intervals; defaults by instance family.
    #[arg(long)]
    d: Option<usize>,
    /// Number of delta intervals; defaults by instance family.
    #[arg(long)]
    l: Option<usize>,
    #[arg(long, default_value_t = 0.001)]
    tolerance: f64,
    #[arg(long, default_value_t = 600.0)]
    rmp_time_limit: f64,
    #[arg(long, default_value_t = 120.0)]
    bound_time_limit: f64,
    #[arg(long, default_value_t = 60.0)]
    heuristic_time_limit: f64,
    /// Overall budget in seconds.
    #[arg(long, default_value_t = 600.0)]
    time_limit: f64,
    /// Defaults to $MAXTWO_BACKEND, else `fallback`.
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    /// Use the baseline RMP instead of the enhanced one.
    #[arg(long)]
    baseline: bool,
    #[arg(long)]
    no_svi: bool,
    #[arg(long)]
    no_heuristic: bool,
    /// Override the instance's objective sense.
    #[arg(long, value_enum)]
    sense: Option<SenseArg>,
    /// Stop after this many cuts.
    #[arg(long)]
    max_cuts: Option<usize>,
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    /// Also write the result record here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// One of: closed-form, nogood, monte-carlo, oracle, mincut, theorem2,
    /// theorem3, psd.
    suite: String,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    #[arg(long, default_value_t = 6)]
    vertices: usize,
    #[arg(long, default_value_t = 20)]
    graphs: usize,
    #[arg(long, default_value_t = 1_000_000)]
    samples: usize,
    /// Delta intervals for theorem3.
    #[arg(long, default_value_t = 20)]
    l: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModelsArg {
    Enhanced,
    Baseline,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    dir: PathBuf,
    #[command(flatten)]
    flags: SolverFlags,
    #[arg(long, value_enum, default_value_t = ModelsArg::Enhanced)]
    models: ModelsArg,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
    /// Write zero times so reruns produce identical CSV.
    #[arg(long)]
    deterministic: bool,
    /// Per-instance CSV; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Per-configuration averages CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("maxtwo: {message}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate { family } => generate(family),
        Command::Solve(args) => solve_cmd(args),
        Command::Verify(args) => verify_cmd(args),
        Command::Bench(args) => bench_cmd(args),
    }
}

fn generate(family: Family) -> ExitCode {
    let (common, make): (&Common, Box<dyn Fn(u64) -> Result<ProblemInstance, maxtwo::applications::AppError>>) = match &family {
        Family::Kp { n, alpha, sense, common } => {
            let (n, alpha, sense) = (*n, *alpha, Sense::from(*sense));
            (common, Box::new(move |seed| gen_knapsack(&KnapsackSpec { n, alpha, seed, sense })))
        }
        Family::Ms { n, eta, uncorrelated, common } => {
            let (n, eta, clustered) = (*n, *eta, !*uncorrelated);
            (common, Box::new(move |seed| gen_makespan(&MakespanSpec { n, eta, seed, clustered })))
        }
        Family::Dfs { players, scale, common } => {
            let (players, scale) = (*players, *scale);
            (common, Box::new(move |seed| gen_dfs(players, scale, seed)))
        }
    };
    if let Err(e) = std::fs::create_dir_all(&common.out) {
        return fail(EXIT_INPUT, format!("cannot create {}: {e}", common.out.display()));
    }
    for k in 0..common.count {
        let inst = match make(common.seed + k) {
            Ok(i) => i,
            Err(e) => return fail(EXIT_INPUT, e),
        };
        let path = common.out.join(format!("{}.json", inst.label));
        if let Err(e) = write_instance(&inst, &path) {
            return fail(EXIT_FAILURE, e);
        }
        println!("{}", path.display());
    }
    ExitCode::SUCCESS
}

fn default_backend() -> Backend {
    match std::env::var(BACKEND_ENV).as_deref() {
        Ok("external") => Backend::External,
        _ => Backend::Fallback,
    }
}

fn config_for(inst: &ProblemInstance, f: &SolverFlags) -> SolverConfig {
    let mut c = SolverConfig::for_family(inst.meta.family.as_deref());
    c.d = f.d.unwrap_or(c.d);
    c.l = f.l.unwrap_or(c.l);
    c.tolerance = f.tolerance;
    c.rmp_time_limit = f.rmp_time_limit;
    c.bound_time_limit = f.bound_time_limit;
    c.heuristic_time_limit = f.heuristic_time_limit;
    c.total_time_limit = f.time_limit;
    c.backend = match f.backend {
        Some(BackendArg::Fallback) => Backend::Fallback,
        Some(BackendArg::External) => Backend::External,
        None => default_backend(),
    };
    if f.baseline {
        c.model = ModelChoice::Baseline;
    }
    c.svi &= !f.no_svi;
    c.heuristic &= !f.no_heuristic;
    c.max_cuts = f.max_cuts;
    c
}

fn check_flags(f: &SolverFlags) -> Result<(), String> {
    let limits = [f.rmp_time_limit, f.bound_time_limit, f.heuristic_time_limit, f.time_limit];
    if limits.iter().any(|&t| !(t > 0.0)) {
        return Err("time limits must be positive".into());
    }
    if f.d.is_some_and(|d| d < 2) || f.l.is_some_and(|l| l < 1) {
        return Err("need --d >= 2 and --l >= 1".into());
    }
    if !(f.tolerance >= 0.0) {
        return Err("--tolerance must be nonnegative".into());
    }
    if matches!(f.backend, Some(BackendArg::External)) && !Backend::external_available() {
        return Err("this build has no external backend".into());
    }
    Ok(())
}

fn load(path: &Path, f: &SolverFlags) -> Result<ProblemInstance, String> {
    let mut inst = read_instance(path).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = f.sense {
        inst.sense = s.into();
    }
    Ok(inst)
}

#[derive(Serialize)]
struct ResultRecord<'a> {
    version: &'a str,
    instance: String,
    label: &'a str,
    sense: &'a str,
    config: &'a SolverConfig,
    result: &'a SolveResult,
}

fn solve_cmd(args: SolveArgs) -> ExitCode {
    if let Err(e) = check_flags(&args.flags) {
        return fail(EXIT_INPUT, e);
    }
    let inst = match load(&args.instance, &args.flags) {
        Ok(i) => i,
        Err(e) => return fail(EXIT_INPUT, e),
    };
    let config = config_for(&inst, &args.flags);
    let result = match solve(&inst, &config) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_FAILURE, e),
    };
    let record = ResultRecord {
        version: VERSION,
        instance: args.instance.display().to_string(),
        label: &inst.label,
        sense: inst.sense.as_str(),
        config: &config,
        result: &result,
    };
    let text = serde_json::to_string_pretty(&record).expect("serializable") + "\n";
    if let Some(path) = &args.output {
        if let Err(e) = std::fs::write(path, &text) {
            return fail(EXIT_FAILURE, format!("{}: {e}", path.display()));
        }
    }
    print!("{text}");
    eprintln!(
        "status {} objective {} gap {:.3e} cuts {}",
        result.status.as_str(),
        result.objective.map_or("none".into(), |v| v.to_string()),
        result.gap,
        result.cuts_added
    );
    match result.status {
        SolveStatus::Optimal | SolveStatus::GapLimit => ExitCode::SUCCESS,
        SolveStatus::TimeLimit => ExitCode::from(EXIT_TIME_LIMIT),
        SolveStatus::Infeasible => ExitCode::from(EXIT_INFEASIBLE),
    }
}

fn verify_cmd(args: VerifyArgs) -> ExitCode {
    let opts = verify::SuiteOptions {
        n: args.n,
        count: args.count,
        vertices: args.vertices,
        graphs: args.graphs,
        samples: args.samples.max(2),
        l: args.l.max(1),
        seed: args.seed,
    };
    let Some(report) = verify::run(&args.suite, &opts) else {
        return fail(EXIT_INPUT, format!("unknown suite `{}`; expected one of {}", args.suite, verify::SUITES.join(", ")));
    };
    println!("{}", serde_json::to_string(&report).expect("serializable"));
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn bench_cmd(args: BenchArgs) -> ExitCode {
    if let Err(e) = check_flags(&args.flags) {
        return fail(EXIT_INPUT, e);
    }
    let mut paths: Vec<PathBuf> = match std::fs::read_dir(&args.dir) {
        Ok(entries) => entries.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect(),
        Err(e) => return fail(EXIT_INPUT, format!("{}: {e}", args.dir.display())),
    };
    paths.sort();
    let mut instances = Vec::new();
    let mut loaded = Vec::new();
    for p in &paths {
        match load(p, &args.flags) {
            Ok(i) => {
                instances.push(i);
                loaded.push(p);
            }
            Err(e) => eprintln!("maxtwo: skipping {e}"),
        }
    }
    if instances.is_empty() {
        return fail(EXIT_INPUT, format!("no readable instances in {}", args.dir.display()));
    }
    let threads = args.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let models: &[ModelChoice] = match args.models {
        ModelsArg::Enhanced => &[ModelChoice::Enhanced],
        ModelsArg::Baseline => &[ModelChoice::Baseline],
        ModelsArg::Both => &[ModelChoice::Enhanced, ModelChoice::Baseline],
    };
    let runs: Vec<Vec<BenchRow>> = models
        .iter()
        .map(|&m| benchmark(&instances, |i| SolverConfig { model: m, ..config_for(i, &args.flags) }, threads))
        .collect();
    let rows: Vec<BenchRow> = (0..instances.len()).flat_map(|k| runs.iter().map(move |r| r[k].clone())).collect();
    for (r, p) in rows.iter().zip(loaded.iter().flat_map(|p| std::iter::repeat_n(p, models.len()))) {
        if let Some(e) = &r.error {
            eprintln!("maxtwo: {} failed: {e}", p.display());
        }
    }
    let csv = to_csv(&rows, !args.deterministic);
    match &args.output {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &csv) {
                return fail(EXIT_FAILURE, format!("{}: {e}", p.display()));
            }
        }
        None => print!("{csv}"),
    }
    if let Some(p) = &args.summary {
        if let Err(e) = std::fs::write(p, summary_csv(&summarize(&rows), !args.deterministic)) {
            return fail(EXIT_FAILURE, format!("{}: {e}", p.display()));
        }
    }
    if rows.iter().any(|r| r.error.is_none()) {
        ExitCode::SUCCESS
    } else {
        fail(EXIT_FAILURE, "no instance completed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use maxtwo::applications::{gen_makespan, MakespanSpec};

    fn flags(args: &[&str]) -> SolverFlags {
        let mut argv = vec!["maxtwo", "solve", "x.json"];
        argv.extend_from_slice(args);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Solve(s) => s.flags,
            _ => unreachable!(),
        }
    }

    #[test]
    fn family_defaults_survive_unset_flags() {
        let inst = gen_makespan(&MakespanSpec::new(6, 0.5, 1)).unwrap();
        let c = config_for(&inst, &flags(&["--backend", "fallback"]));
        assert_eq!((c.d, c.l, c.svi, c.heuristic), (50, 50, false, true));
        assert_eq!(c.model, ModelChoice::Enhanced);
        assert_eq!(c.backend, Backend::Fallback);
    }

    #[test]
    fn flags_override_config() {
        let inst = gen_makespan(&MakespanSpec::new(6, 0.5, 1)).unwrap();
        let f = flags(&["--d", "7", "--l", "3", "--baseline", "--no-heuristic", "--max-cuts", "4", "--time-limit", "9"]);
        let c = config_for(&inst, &f);
        assert_eq!((c.d, c.l, c.max_cuts, c.total_time_limit), (7, 3, Some(4), 9.0));
        assert_eq!(c.model, ModelChoice::Baseline);
        assert!(!c.heuristic);
    }

    #[test]
    fn invalid_flags_are_rejected() {
        assert!(check_flags(&flags(&[])).is_ok());
        for bad in [&["--time-limit", "0"][..], &["--d", "1"], &["--l", "0"], &["--tolerance=-1"], &["--rmp-time-limit=-2"]] {
            assert!(check_flags(&flags(bad)).is_err(), "{bad:?}");
        }
    }
}
