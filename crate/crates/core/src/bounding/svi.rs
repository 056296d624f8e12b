//! Lower bounds on `theta` for solutions that can still beat a known
//! objective value, given the `delta` interval they fall in.

use super::grid::DiscretizationGrid;
use crate::gaussian::scaled_pdf;
use crate::milp::{MilpModel, VarKind};
use crate::model::Relation;

/// Absolute tolerance of the bisection.
pub const FLOOR_TOL: f64 = 1e-9;

const MAX_BISECTIONS: usize = 200;

/// Smallest `theta >= 0` with `u_bar + theta * phi(delta / theta) >= z_lb`.
///
/// The left side is continuous and nondecreasing in `theta`, so bisection
/// applies. The returned value is at most `FLOOR_TOL` below the true root,
/// which keeps the derived inequality valid. Returns `+inf` when no finite
/// `theta` reaches `z_lb`.
pub fn svi_theta_floor(delta: f64, z_lb: f64, u_bar: f64) -> f64 {
    assert!(delta >= 0.0, "delta must be nonnegative");
    let target = z_lb - u_bar;
    if !(target > 0.0) {
        return 0.0;
    }
    let reaches = |t: f64| scaled_pdf(delta, t) >= target;
    let mut hi = 1.0;
    while !reaches(hi) {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= FLOOR_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if reaches(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo
}

/// Floors at the lower end `delta_h` of every `delta` interval.
pub fn theta_floors(grid: &DiscretizationGrid, z_lb: f64, u_bar: f64) -> Vec<f64> {
    grid.delta_breaks[..grid.l()].iter().map(|&d| svi_theta_floor(d, z_lb, u_bar)).collect()
}

/// Adds `s >= floor_h^2 * y_h` for each `h`, or `y_h <= 0` when the floor is
/// infinite. Returns the number of rows added.
pub fn attach_svis(model: &mut MilpModel, s: usize, y: &[usize], floors: &[f64]) -> usize {
    assert_eq!(y.len(), floors.len());
    debug_assert!(y.iter().all(|&k| model.vars[k].kind == VarKind::Binary));
    for (&yh, &f) in y.iter().zip(floors) {
        if f.is_finite() {
            model.add_row(vec![(s, 1.0), (yh, -f * f)], Relation::Ge, 0.0);
        } else {
            model.add_row(vec![(yh, 1.0)], Relation::Le, 0.0);
        }
    }
    y.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounding::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn zero_delta_has_closed_form() {
        let f = svi_theta_floor(0.0, 12.0, 10.0);
        assert!((f - 2.0 * (2.0 * PI).sqrt()).abs() < 2e-9);
        assert!((f - 5.013_256_5).abs() < 1e-7);
    }

    #[test]
    fn no_target_gives_zero() {
        assert_eq!(svi_theta_floor(1.0, 3.0, 10.0), 0.0);
        assert_eq!(svi_theta_floor(0.0, 10.0, 10.0), 0.0);
    }

    #[test]
    fn matches_grid_scan() {
        let target = 0.3;
        let mut scan = f64::NAN;
        let mut t = 0.0;
        while t < 10.0 {
            if scaled_pdf(1.0, t) >= target {
                scan = t;
                break;
            }
            t += 1e-6;
        }
        let f = svi_theta_floor(1.0, 0.3, 0.0);
        assert!((f - scan).abs() < 2e-6, "{f} vs {scan}");
    }

    #[test]
    fn floors_are_nondecreasing() {
        let g = build_grid(30.0, 12.0, 5, 12);
        let fl = theta_floors(&g, 14.0, 11.0);
        assert_eq!(fl.len(), 12);
        assert!(fl.windows(2).all(|w| w[0] <= w[1] + FLOOR_TOL));
        assert!(theta_floors(&g, 5.0, 11.0).iter().all(|&f| f == 0.0));
    }

    #[test]
    fn unreachable_target_is_infinite() {
        assert_eq!(svi_theta_floor(0.0, 1e308, -1e308), f64::INFINITY);
    }

    #[test]
    fn attach_adds_one_row_per_interval() {
        let mut m = MilpModel::new(crate::model::Sense::Maximize);
        let s = m.add_var("s", VarKind::Continuous, 0.0, 10.0);
        let y: Vec<usize> = (0..3).map(|h| m.add_binary(format!("y{h}"))).collect();
        let before = m.num_rows();
        assert_eq!(attach_svis(&mut m, s, &y, &[0.0, 1.0, f64::INFINITY]), 3);
        assert_eq!(m.num_rows(), before + 3);
    }
}
