//! Property suites behind `maxtwo verify`.

use maxtwo::applications::{check_theorem2, check_theorem3, gen_knapsack, gen_makespan, KnapsackSpec, MakespanSpec};
use maxtwo::gaussian::{expected_max, nearest_psd, pair_moments, uncorrelated_standard_pair_max, GaussianVector, PairMoments, SelectionPair};
use maxtwo::oracle::{brute_force, build_mincut_reduction, min_cut_brute_force, monte_carlo, partition_of, Graph};
use maxtwo::solver::{no_good_cut, solve, SolveStatus, SolverConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    pub n: Option<usize>,
    pub count: usize,
    pub vertices: usize,
    pub graphs: usize,
    pub samples: usize,
    pub l: usize,
    pub seed: u64,
}

struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self { checks: 0, failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn finish(self, suite: &str) -> SuiteReport {
        SuiteReport { suite: suite.into(), checks: self.checks, passed: self.failures.is_empty(), failures: self.failures }
    }
}

pub const SUITES: [&str; 8] = ["closed-form", "nogood", "monte-carlo", "oracle", "mincut", "theorem2", "theorem3", "psd"];

pub fn run(suite: &str, o: &SuiteOptions) -> Option<SuiteReport> {
    let mut t = Tally::new();
    match suite {
        "closed-form" => closed_form(&mut t),
        "nogood" => nogood(&mut t, o.n.unwrap_or(3)),
        "monte-carlo" => monte_carlo_suite(&mut t, o),
        "oracle" => oracle_suite(&mut t, o),
        "mincut" => mincut(&mut t, o),
        "theorem2" => theorem2(&mut t, o),
        "theorem3" => theorem3(&mut t, o),
        "psd" => psd(&mut t),
        _ => return None,
    }
    Some(t.finish(suite))
}

fn standard_pair(rho: f64) -> PairMoments {
    PairMoments::from_parts(0.0, 0.0, 1.0, 1.0, rho).expect("valid moments")
}

fn closed_form(t: &mut Tally) {
    let cases = [
        ("rho=0", expected_max(&standard_pair(0.0)), uncorrelated_standard_pair_max()),
        ("rho=1/2", expected_max(&standard_pair(0.5)), 1.0 / (2.0 * PI).sqrt()),
        ("rho=-1/2", expected_max(&standard_pair(-0.5)), 3f64.sqrt() / (2.0 * PI).sqrt()),
        ("rho=0 vs 1/sqrt(pi)", uncorrelated_standard_pair_max(), 1.0 / PI.sqrt()),
    ];
    for (name, got, want) in cases {
        t.check((got - want).abs() <= 1e-9, || format!("{name}: {got} vs {want}"));
    }
}

fn nogood(t: &mut Tally, n: usize) {
    let total = 1u64 << (2 * n);
    let point = |m: u64| SelectionPair::from_flat(&(0..2 * n).map(|p| m >> p & 1 == 1).collect::<Vec<_>>());
    for a in 0..total {
        let x = point(a);
        let cut = no_good_cut(&x);
        let violators: Vec<u64> = (0..total).filter(|&b| !cut.is_satisfied(&point(b))).collect();
        t.check(violators == [a], || format!("cut of {} removes {violators:?}", x.fingerprint()));
    }
}

fn random_gaussian(n: usize, rng: &mut ChaCha8Rng) -> GaussianVector {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let s = &a * a.transpose();
    let flat = (0..n * n).map(|k| s[(k / n, k % n).min((k % n, k / n))]).collect();
    GaussianVector::from_flat(mu, flat).expect("Gram matrices are PSD")
}

fn monte_carlo_suite(t: &mut Tally, o: &SuiteOptions) {
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    for k in 0..o.count {
        let n = o.n.unwrap_or_else(|| rng.random_range(1..=10));
        let g = random_gaussian(n, &mut rng);
        let bits: Vec<bool> = (0..2 * n).map(|_| rng.random_bool(0.5)).collect();
        let x = SelectionPair::from_flat(&bits);
        let exact = expected_max(&pair_moments(&g, &x).expect("sizes match"));
        let (est, se) = monte_carlo(&g, &x, o.samples, o.seed.wrapping_add(k as u64));
        t.check((exact - est).abs() <= 4.0 * se, || format!("instance {k}: closed form {exact}, estimate {est} +- {se}"));
    }
}

fn oracle_suite(t: &mut Tally, o: &SuiteOptions) {
    for k in 0..o.count {
        let n = o.n.unwrap_or(6 + k % 7);
        let inst = gen_knapsack(&KnapsackSpec::new(n, 50.0 * (1 + k % 5) as f64, o.seed + k as u64)).expect("valid spec");
        let best = brute_force(&inst, 1 << 26).expect("small instance");
        match solve(&inst, &SolverConfig::for_family(Some("kp"))) {
            Ok(r) => {
                let obj = r.objective.unwrap_or(f64::NAN);
                let ok = r.status == SolveStatus::Optimal && (obj - best.best_value).abs() <= 1e-3 * best.best_value.abs();
                t.check(ok, || format!("{}: {:?} {obj} vs brute force {}", inst.label, r.status, best.best_value));
            }
            Err(e) => t.check(false, || format!("{}: {e}", inst.label)),
        }
    }
}

fn mincut(t: &mut Tally, o: &SuiteOptions) {
    let cfg = SolverConfig { tolerance: 1e-9, l: 1, ..SolverConfig::default() };
    for k in 0..o.graphs {
        let g = Graph::random(o.vertices, 0.6, -5, 5, o.seed + k as u64);
        let want = min_cut_brute_force(&g).expect("small graph").any.weight;
        match solve(&build_mincut_reduction(&g), &cfg) {
            Ok(r) => {
                let got = r.incumbent.as_ref().map(|x| g.cut_weight(&partition_of(x)));
                t.check(got == Some(want), || format!("graph {k}: cut {got:?}, minimum {want}"));
            }
            Err(e) => t.check(false, || format!("graph {k}: {e}")),
        }
    }
}

fn theorem2(t: &mut Tally, o: &SuiteOptions) {
    for k in 0..o.count {
        let inst = gen_makespan(&MakespanSpec::uncorrelated(o.n.unwrap_or(12), 0.25 * (1 + k % 3) as f64, o.seed + k as u64)).expect("valid spec");
        match check_theorem2(&inst) {
            Ok(r) => t.check(r.passed(), || format!("{}: {r:?}", inst.label)),
            Err(e) => t.check(false, || format!("{}: {e}", inst.label)),
        }
    }
}

fn theorem3(t: &mut Tally, o: &SuiteOptions) {
    for k in 0..o.count {
        let inst = gen_makespan(&MakespanSpec::uncorrelated(o.n.unwrap_or(10), 0.25 * (1 + k % 3) as f64, o.seed + k as u64)).expect("valid spec");
        match check_theorem3(&inst, o.l) {
            Ok(r) => t.check(r.passed(), || format!("{}: {r:?}", inst.label)),
            Err(e) => t.check(false, || format!("{}: {e}", inst.label)),
        }
    }
}

fn psd(t: &mut Tally) {
    let bad = DMatrix::from_row_slice(2, 2, &[1.0, 1.2, 1.2, 1.0]);
    match nearest_psd(&bad) {
        Ok(m) => {
            let flat: Vec<f64> = m.iter().copied().collect();
            t.check(GaussianVector::from_flat(vec![0.0; 2], flat).is_ok(), || "repaired matrix rejected".into());
            t.check(m[(0, 1)].abs() <= (m[(0, 0)] * m[(1, 1)]).sqrt() + 1e-12, || format!("off-diagonal {} too large", m[(0, 1)]));
        }
        Err(e) => t.check(false, || e.to_string()),
    }
}
