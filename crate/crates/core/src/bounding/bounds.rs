//! Closed-form bounding functions of the moments of a selection pair.

use crate::gaussian::{cdf_of_ratio, expected_max, scaled_pdf, PairMoments, INV_SQRT_2EPI, INV_SQRT_2PI};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("bounds violate 0 <= {lower_name} <= {value_name} <= {upper_name}: {lower} <= {value} <= {upper}")]
    Ordering {
        lower_name: &'static str,
        value_name: &'static str,
        upper_name: &'static str,
        lower: f64,
        value: f64,
        upper: f64,
    },
}

/// Relative slack when checking interval orderings.
const ORDER_TOL: f64 = 1e-12;

fn check(lower: f64, value: f64, upper: f64, names: (&'static str, &'static str, &'static str)) -> Result<(), BoundError> {
    let tol = ORDER_TOL * value.abs().max(1.0);
    if lower < 0.0 || lower > value + tol || value > upper + tol {
        return Err(BoundError::Ordering {
            lower_name: names.0,
            value_name: names.1,
            upper_name: names.2,
            lower,
            value,
            upper,
        });
    }
    Ok(())
}

fn check_all(m: &PairMoments, l_theta: f64, u_theta: f64, l_delta: f64, u_delta: f64) -> Result<(), BoundError> {
    check(l_theta, m.theta, u_theta, ("l_theta", "theta", "u_theta"))?;
    check(l_delta, m.delta, u_delta, ("l_delta", "delta", "u_delta"))
}

/// `e1 + u_theta / sqrt(2 pi)`, an upper bound on `E[max]` for any
/// `u_theta >= theta`.
pub fn baseline_bound(m: &PairMoments, u_theta: f64) -> Result<f64, BoundError> {
    check(0.0, m.theta, u_theta, ("0", "theta", "u_theta"))?;
    Ok(m.e1 + u_theta * INV_SQRT_2PI)
}

/// Upper bound on `E[max]` from interval bounds on `theta` and `delta`.
pub fn enhanced_bound(m: &PairMoments, l_theta: f64, u_theta: f64, l_delta: f64, u_delta: f64) -> Result<f64, BoundError> {
    check_all(m, l_theta, u_theta, l_delta, u_delta)?;
    let p = cdf_of_ratio(u_delta, l_theta);
    Ok(m.e1 * p + m.e2 * (1.0 - p) + scaled_pdf(l_delta, u_theta))
}

/// Lower bound on `E[max]` from the same interval data, used when
/// minimizing.
pub fn enhanced_lower_bound(m: &PairMoments, l_theta: f64, u_theta: f64, l_delta: f64, u_delta: f64) -> Result<f64, BoundError> {
    check_all(m, l_theta, u_theta, l_delta, u_delta)?;
    let p = cdf_of_ratio(l_delta, u_theta);
    Ok(m.e1 * p + m.e2 * (1.0 - p) + scaled_pdf(u_delta, l_theta))
}

/// Upper bound on `enhanced_bound - E[max]`; `+inf` when `l_theta = 0`.
///
/// Uses `1/sqrt(2 pi)` on the `u_theta - theta` term: with `delta = 0` the
/// gap equals `(u_theta - theta) / sqrt(2 pi)` exactly, so the smaller
/// coefficient `1/sqrt(2 e pi)` would not bound it.
pub fn delta_gap_bound(m: &PairMoments, l_theta: f64, u_theta: f64, l_delta: f64, u_delta: f64) -> Result<f64, BoundError> {
    check_all(m, l_theta, u_theta, l_delta, u_delta)?;
    if l_theta == 0.0 {
        return Ok(f64::INFINITY);
    }
    let spread = u_delta / l_theta - l_delta / u_theta;
    Ok((m.delta * INV_SQRT_2PI + m.theta * INV_SQRT_2EPI) * spread + (u_theta - m.theta) * INV_SQRT_2PI)
}

/// The exact gap `enhanced_bound - E[max]`.
pub fn enhanced_gap(m: &PairMoments, l_theta: f64, u_theta: f64, l_delta: f64, u_delta: f64) -> Result<f64, BoundError> {
    Ok(enhanced_bound(m, l_theta, u_theta, l_delta, u_delta)? - expected_max(m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{std_normal_cdf, std_normal_pdf};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn pm(e1: f64, e2: f64, v1: f64, v2: f64, c: f64) -> PairMoments {
        PairMoments::from_parts(e1, e2, v1, v2, c).unwrap()
    }

    #[test]
    fn baseline_examples() {
        let m = pm(0.0, 0.0, 1.0, 1.0, 0.0);
        assert!((baseline_bound(&m, 2f64.sqrt()).unwrap() - 1.0 / PI.sqrt()).abs() < 1e-12);
        assert!((baseline_bound(&m, 2.0).unwrap() - 0.797_884_6).abs() < 1e-7);
        let m = pm(5.0, 1.0, 1.0, 1.0, 1.0);
        assert_eq!(m.theta, 0.0);
        assert!(baseline_bound(&m, 0.5).unwrap() >= 5.0);
        assert!(baseline_bound(&pm(0.0, 0.0, 1.0, 1.0, 0.0), 1.0).is_err());
    }

    #[test]
    fn enhanced_examples() {
        let m = pm(3.0, 2.0, 2.0, 1.0, 1.0);
        assert_eq!((m.theta, m.delta), (1.0, 1.0));
        assert!((enhanced_bound(&m, 1.0, 1.0, 1.0, 1.0).unwrap() - expected_max(&m)).abs() < 1e-15);

        // second, independent evaluation of the same expression
        let p4 = std_normal_cdf(4.0);
        let alt = 3.0 * p4 + 2.0 * (1.0 - p4) + 2.0 * std_normal_pdf(0.25);
        let got = enhanced_bound(&m, 0.5, 2.0, 0.5, 2.0).unwrap();
        assert!((got - alt).abs() < 1e-14);
        assert!((got - 3.7733).abs() < 1e-4);

        let conv = enhanced_bound(&m, 0.0, 2.0, 0.5, 2.0).unwrap();
        assert!((conv - (3.0 + 2.0 * std_normal_pdf(0.25))).abs() < 1e-14);

        assert!(enhanced_bound(&m, 1.5, 2.0, 0.0, 2.0).is_err());
        assert!(enhanced_bound(&m, 0.5, 2.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn lower_bound_example() {
        let m = pm(3.0, 2.0, 2.0, 1.0, 1.0);
        assert!((enhanced_lower_bound(&m, 1.0, 1.0, 1.0, 1.0).unwrap() - expected_max(&m)).abs() < 1e-15);
        let lb = enhanced_lower_bound(&m, 0.0, 2.0, 0.5, 2.0).unwrap();
        let p = std_normal_cdf(0.25);
        assert!((lb - (3.0 * p + 2.0 * (1.0 - p))).abs() < 1e-14);
    }

    #[test]
    fn gap_bound_examples() {
        let m = pm(3.0, 2.0, 2.0, 1.0, 1.0);
        assert_eq!(delta_gap_bound(&m, 1.0, 1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(delta_gap_bound(&m, 0.0, 1.0, 1.0, 1.0).unwrap(), f64::INFINITY);
        let want = (1.0 * INV_SQRT_2PI + INV_SQRT_2EPI) * (1.5 - 0.5);
        assert!((delta_gap_bound(&m, 1.0, 1.0, 0.5, 1.5).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn zero_delta_gap_needs_the_larger_coefficient() {
        let m = pm(1.0, 1.0, 1.0, 1.0, 0.0);
        let (l_t, u_t) = (1.0, 3.0);
        let gap = enhanced_gap(&m, l_t, u_t, 0.0, 0.0).unwrap();
        let exact = (u_t - m.theta) * INV_SQRT_2PI;
        assert!((gap - exact).abs() < 1e-14);
        assert!(gap > (u_t - m.theta) * INV_SQRT_2EPI + 0.1);
        assert!(gap <= delta_gap_bound(&m, l_t, u_t, 0.0, 0.0).unwrap() + 1e-12);
    }

    fn moments_strategy() -> impl Strategy<Value = PairMoments> {
        (-20.0..20.0f64, 0.0..10.0f64, 0.0..9.0f64, 0.0..9.0f64, -1.0..1.0f64).prop_map(|(e2, d, v1, v2, rho)| {
            let c = rho * (v1 * v2).sqrt();
            PairMoments::from_parts(e2 + d, e2, v1, v2, c).unwrap()
        })
    }

    proptest! {
        #[test]
        fn bounds_sandwich_the_objective(
            m in moments_strategy(),
            a in 0.0..1.0f64, b in 0.0..3.0f64, c in 0.0..1.0f64, e in 0.0..3.0f64,
        ) {
            let (lt, ut) = (m.theta * a, m.theta + b);
            let (ld, ud) = (m.delta * c, m.delta + e);
            let ex = expected_max(&m);
            let up = enhanced_bound(&m, lt, ut, ld, ud).unwrap();
            let lo = enhanced_lower_bound(&m, lt, ut, ld, ud).unwrap();
            let base = baseline_bound(&m, ut).unwrap();
            let tol = 1e-9 * ex.abs().max(1.0);
            prop_assert!(up >= ex - tol);
            prop_assert!(lo <= ex + tol);
            prop_assert!(up <= base + tol);
            if lt > 0.0 {
                prop_assert!(up - ex <= delta_gap_bound(&m, lt, ut, ld, ud).unwrap() + 1e-9);
            }
        }
    }
}
