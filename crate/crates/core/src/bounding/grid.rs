use serde::{Deserialize, Serialize};

/// Breakpoints for `theta^2` and `delta`, with per-interval bounds on `theta`.
///
/// `theta_lower[q]` and `theta_upper[q]` bound `theta` whenever `theta^2` lies
/// in `[theta2_breaks[q], theta2_breaks[q + 1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationGrid {
    pub theta2_breaks: Vec<f64>,
    pub delta_breaks: Vec<f64>,
    pub theta_lower: Vec<f64>,
    pub theta_upper: Vec<f64>,
}

impl DiscretizationGrid {
    /// Number of `theta^2` intervals.
    pub fn d(&self) -> usize {
        self.theta_lower.len()
    }

    /// Number of `delta` intervals.
    pub fn l(&self) -> usize {
        self.delta_breaks.len() - 1
    }

    pub fn theta2_top(&self) -> f64 {
        *self.theta2_breaks.last().unwrap()
    }

    pub fn delta_top(&self) -> f64 {
        *self.delta_breaks.last().unwrap()
    }

    pub fn theta_top(&self) -> f64 {
        *self.theta_upper.last().unwrap()
    }

    /// Intervals `q` whose `theta^2` range contains `s` within `tol`.
    pub fn theta_intervals(&self, s: f64, tol: f64) -> std::ops::Range<usize> {
        admissible(&self.theta2_breaks, s, tol)
    }

    /// Intervals `h` whose `delta` range contains `delta` within `tol`.
    pub fn delta_intervals(&self, delta: f64, tol: f64) -> std::ops::Range<usize> {
        admissible(&self.delta_breaks, delta, tol)
    }
}

fn admissible(breaks: &[f64], v: f64, tol: f64) -> std::ops::Range<usize> {
    let k = breaks.len() - 1;
    // first interval whose upper end reaches v, one past the last whose lower end does
    let lo = breaks[1..].partition_point(|&b| b < v - tol);
    let hi = breaks[..k].partition_point(|&b| b <= v + tol);
    lo..hi.max(lo)
}

/// Uniform `theta^2` grid with a unit first interval and a uniform `delta`
/// grid.
///
/// When `theta2_max <= 1` the `theta^2` grid collapses to the single interval
/// `[0, 1]`.
pub fn build_grid(theta2_max: f64, delta_max: f64, d: usize, l: usize) -> DiscretizationGrid {
    assert!(d >= 2 && l >= 1, "need d >= 2 and l >= 1");
    assert!(theta2_max.is_finite() && delta_max.is_finite() && delta_max >= 0.0);
    let theta2_breaks = if theta2_max <= 1.0 {
        vec![0.0, 1.0]
    } else {
        let step = (theta2_max - 1.0) / (d - 1) as f64;
        let mut b = vec![0.0, 1.0];
        for q in 2..=d {
            b.push(if q == d { theta2_max } else { 1.0 + step * (q - 1) as f64 });
        }
        b
    };
    let dd = theta2_breaks.len() - 1;
    let theta_lower = (0..dd).map(|q| if q == 0 { 0.0 } else { theta2_breaks[q].sqrt() }).collect();
    let theta_upper = (0..dd).map(|q| if q == 0 { 1.0 } else { theta2_breaks[q + 1].sqrt() }).collect();
    let delta_breaks = (0..=l).map(|h| if h == l { delta_max } else { h as f64 / l as f64 * delta_max }).collect();
    DiscretizationGrid { theta2_breaks, delta_breaks, theta_lower, theta_upper }
}
