//! Instance generators and checks for the knapsack, makespan and fantasy
//! sports applications, plus a benchmark harness.

pub mod bench;
pub mod dfs;
pub mod knapsack;
pub mod makespan;
pub mod theorems;

pub use bench::{benchmark, summarize, BenchRow, SummaryRow};
pub use dfs::{dfs_instance, dfs_region, gen_dfs, DfsSpec};
pub use knapsack::{gen_knapsack, KnapsackSpec};
pub use makespan::{deterministic_makespan_opt, gen_makespan, MakespanMode, MakespanSpec};
pub use theorems::{check_theorem2, check_theorem3, Theorem2Report, Theorem3Report};

use crate::gaussian::GaussianError;
use crate::model::ModelError;
use crate::oracle::OracleError;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("invalid generator parameters: {0}")]
    Spec(String),
    #[error("precondition not met: {0}")]
    Precondition(String),
    #[error("exact mode supports at most {max} jobs, got {n}")]
    Budget { n: usize, max: usize },
    #[error(transparent)]
    Gaussian(#[from] GaussianError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Generator streams: each field of an instance draws from its own ChaCha8
/// stream of the seed, so adding draws to one field leaves the others fixed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Weights = 1,
    Means = 2,
    Covariance = 3,
    Clusters = 4,
    Teams = 5,
}

pub(crate) fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// `Q^T D Q` with `Q` the orthogonal factor of a QR decomposition of a
/// standard-normal matrix and `D` uniform on `[0, 1)`, flattened row-major and
/// exactly symmetric.
pub fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let q = a.qr().q();
    let unit = Uniform::new(0.0, 1.0).expect("valid range");
    let d: DMatrix<f64> = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| unit.sample(rng)));
    let m: DMatrix<f64> = q.transpose() * d * q;
    let mut flat = vec![0.0; n * n];
    for r in 0..n {
        for c in r..n {
            flat[r * n + c] = m[(r, c)];
            flat[c * n + r] = m[(r, c)];
        }
    }
    flat
}
