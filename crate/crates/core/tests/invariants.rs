use maxtwo::applications::{gen_knapsack, gen_makespan, random_psd, KnapsackSpec, MakespanSpec};
use maxtwo::gaussian::{expected_max, expected_min, pair_moments, GaussianVector, SelectionPair};
use maxtwo::oracle::brute_force;
use maxtwo::solver::{solve, SolveStatus, SolverConfig};
use maxtwo::ProblemInstance;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_gaussian(n: usize, seed: u64, mu: Vec<f64>) -> GaussianVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    GaussianVector::from_flat(mu, random_psd(n, &mut rng)).unwrap()
}

fn gaussian_and_pair() -> impl Strategy<Value = (GaussianVector, SelectionPair)> {
    (1usize..8).prop_flat_map(|n| {
        (prop::collection::vec(-10.0..10.0f64, n), any::<u64>(), prop::collection::vec(any::<bool>(), 2 * n))
            .prop_map(move |(mu, seed, bits)| (random_gaussian(n, seed, mu), SelectionPair::from_flat(&bits)))
    })
}

fn check_trace(inst: &ProblemInstance, cfg: &SolverConfig) -> Result<(), TestCaseError> {
    let r = solve(inst, cfg).unwrap();
    prop_assert_eq!(r.iterations, r.cuts_added);
    for w in r.trace.windows(2) {
        prop_assert!(w[1].lb >= w[0].lb && w[1].ub <= w[0].ub, "bounds moved backwards: {:?}", w);
    }
    for t in &r.trace {
        prop_assert!(t.lb <= t.ub + 1e-9 * t.ub.abs().max(1.0));
    }
    let x = r.incumbent.as_ref().expect("knapsack and makespan regions are nonempty");
    prop_assert!(inst.is_feasible(x));
    let m = pair_moments(&inst.gaussian, x).unwrap();
    let exact = expected_max(&m);
    prop_assert!((r.objective.unwrap() - exact).abs() <= 1e-9 * exact.abs().max(1.0));
    if r.status == SolveStatus::Optimal {
        let best = brute_force(inst, 1 << 24).unwrap().best_value;
        prop_assert!((r.objective.unwrap() - best).abs() <= cfg.tolerance * best.abs().max(1.0));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expected_max_symmetry_and_order((g, x) in gaussian_and_pair()) {
        let m = pair_moments(&g, &x).unwrap();
        let e = expected_max(&m);
        let swapped = expected_max(&pair_moments(&g, &x.swapped()).unwrap());
        prop_assert!((e - swapped).abs() <= 1e-9 * e.abs().max(1.0));
        prop_assert!(e >= m.e1.max(m.e2) - 1e-12);
        prop_assert!(expected_min(&m) <= m.e1.min(m.e2) + 1e-12);
        prop_assert!((e + expected_min(&m) - m.e1 - m.e2).abs() <= 1e-9 * e.abs().max(1.0));
    }

    #[test]
    fn expected_max_is_positively_homogeneous((g, x) in gaussian_and_pair(), a in 0.1..10.0f64) {
        let scaled_mu = g.mu().iter().map(|v| a * v).collect();
        let scaled_cov = g.cov_flat().iter().map(|v| a * a * v).collect();
        let h = GaussianVector::from_flat(scaled_mu, scaled_cov).unwrap();
        let e = expected_max(&pair_moments(&g, &x).unwrap());
        let eh = expected_max(&pair_moments(&h, &x).unwrap());
        prop_assert!((eh - a * e).abs() <= 1e-8 * eh.abs().max(1.0));
    }

    #[test]
    fn instance_json_roundtrip(n in 2usize..10, alpha in 10.0..300.0f64, seed in any::<u64>()) {
        let inst = gen_knapsack(&KnapsackSpec::new(n, alpha, seed)).unwrap();
        let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(back.to_json(), inst.to_json());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn knapsack_solves_keep_bounds_monotone(n in 3usize..8, alpha in 50.0..250.0f64, seed in any::<u64>()) {
        let inst = gen_knapsack(&KnapsackSpec::new(n, alpha, seed)).unwrap();
        check_trace(&inst, &SolverConfig::for_family(Some("kp")))?;
    }

    #[test]
    fn makespan_solves_keep_bounds_monotone(n in 3usize..9, eta in 0.1..0.9f64, seed in any::<u64>()) {
        let inst = gen_makespan(&MakespanSpec::new(n, eta, seed)).unwrap();
        check_trace(&inst, &SolverConfig::for_family(Some("ms")))?;
    }
}
