//! Two identical machines, jobs with Gaussian processing times.

use super::{stream, AppError, Stream};
use crate::gaussian::GaussianVector;
use crate::model::{FeasibleRegion, InstanceMeta, LinearConstraint, ProblemInstance, Relation, Sense};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub const MEAN: f64 = 20.0;
pub const MEAN_SD: f64 = 3.0;
pub const CLUSTERS: u8 = 3;
/// Largest job count the exact deterministic solver accepts.
pub const EXACT_MAX_JOBS: usize = 24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakespanSpec {
    pub n: usize,
    /// Variance scale: `sigma_j^2 ~ U(0, 0.1 mu_j^2 eta)`.
    pub eta: f64,
    pub seed: u64,
    /// Perfect correlation within clusters when set, independence otherwise.
    pub clustered: bool,
}

impl MakespanSpec {
    pub fn new(n: usize, eta: f64, seed: u64) -> Self {
        Self { n, eta, seed, clustered: true }
    }

    pub fn uncorrelated(n: usize, eta: f64, seed: u64) -> Self {
        Self { clustered: false, ..Self::new(n, eta, seed) }
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.n == 0 {
            return Err(AppError::Spec("n must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(AppError::Spec(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// `x_1j + x_2j = 1` for every job.
pub fn partition_region(n: usize) -> FeasibleRegion {
    let rows = (0..n).map(|j| LinearConstraint::new([(0, j, 1.0), (1, j, 1.0)], Relation::Eq, 1.0)).collect();
    FeasibleRegion::new(n, rows).expect("indices in range")
}

/// Cluster labels in `1..=3`.
pub fn makespan_clusters(spec: &MakespanSpec) -> Vec<u8> {
    let mut rng = stream(spec.seed, Stream::Clusters);
    (0..spec.n).map(|_| rng.random_range(1..=CLUSTERS)).collect()
}

pub fn gen_makespan(spec: &MakespanSpec) -> Result<ProblemInstance, AppError> {
    spec.validate()?;
    let n = spec.n;
    let normal = Normal::new(MEAN, MEAN_SD).expect("valid parameters");
    let mut rng = stream(spec.seed, Stream::Means);
    let mu: Vec<f64> = (0..n)
        .map(|_| loop {
            let m: f64 = normal.sample(&mut rng);
            if m > 0.0 {
                break m;
            }
        })
        .collect();
    let mut rng = stream(spec.seed, Stream::Covariance);
    let var: Vec<f64> = mu.iter().map(|m| rng.random_range(0.0..=0.1 * m * m * spec.eta)).collect();
    let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    let clusters = makespan_clusters(spec);
    let mut cov = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            cov[j * n + k] = if j == k {
                var[j]
            } else if spec.clustered && clusters[j] == clusters[k] {
                sd[j] * sd[k]
            } else {
                0.0
            };
        }
    }
    let g = GaussianVector::from_flat(mu, cov)?;
    let tag = if spec.clustered { "" } else { "-u" };
    let label = format!("ms-n{}-e{}-s{}{}", n, spec.eta, spec.seed, tag);
    Ok(ProblemInstance::new(g, partition_region(n), Sense::Minimize, label)?.with_meta(InstanceMeta {
        family: Some("ms".into()),
        param: Some(spec.eta),
        seed: Some(spec.seed),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MakespanMode {
    Exact,
    /// Longest processing time first.
    Lpt,
}

/// Best split of `mu` over two machines: `(machine of each job, makespan)`.
/// Job 0 is always on machine `false` in exact mode.
pub fn deterministic_makespan_opt(mu: &[f64], mode: MakespanMode) -> Result<(Vec<bool>, f64), AppError> {
    if mu.iter().any(|&m| !(m > 0.0)) {
        return Err(AppError::Precondition("job means must be positive".into()));
    }
    let n = mu.len();
    match mode {
        MakespanMode::Exact => {
            if n > EXACT_MAX_JOBS {
                return Err(AppError::Budget { n, max: EXACT_MAX_JOBS });
            }
            let total: f64 = mu.iter().sum();
            let mut best = (0u32, total);
            for mask in 0..1u32 << n.saturating_sub(1) {
                let load: f64 = (1..n).filter(|&j| mask >> (j - 1) & 1 == 1).map(|j| mu[j]).sum();
                let span = load.max(total - load);
                if span < best.1 {
                    best = (mask, span);
                }
            }
            Ok(((0..n).map(|j| j > 0 && best.0 >> (j - 1) & 1 == 1).collect(), best.1))
        }
        MakespanMode::Lpt => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| mu[b].total_cmp(&mu[a]));
            let mut side = vec![false; n];
            let mut load = [0.0, 0.0];
            for j in order {
                let m = usize::from(load[1] < load[0]);
                side[j] = m == 1;
                load[m] += mu[j];
            }
            Ok((side, load[0].max(load[1])))
        }
    }
}

/// Larger machine load of a split.
pub fn makespan_of(mu: &[f64], side: &[bool]) -> f64 {
    let one: f64 = mu.iter().zip(side).filter(|p| *p.1).map(|p| p.0).sum();
    let total: f64 = mu.iter().sum();
    one.max(total - one)
}
