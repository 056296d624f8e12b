//! Gaussian moment algebra for pairs of linear selections and the closed-form
//! expected maximum of two jointly normal variables.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};
use thiserror::Error;

/// `1 / sqrt(2 pi)`, the peak of the standard normal density.
pub const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `1 / sqrt(2 e pi)`, the largest slope of the standard normal density.
pub const INV_SQRT_2EPI: f64 = 0.241_970_724_519_143_37;

/// Relative slack allowed on `v1 + v2 - 2 c12` before it is treated as a
/// genuinely negative variance.
const THETA2_NEG_TOL: f64 = 1e-9;

/// Relative slack on the smallest eigenvalue of a covariance matrix.
const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GaussianError {
    #[error("mean vector has {mu} entries but covariance is {rows}x{cols}")]
    Shape { mu: usize, rows: usize, cols: usize },
    #[error("covariance is not symmetric at ({row}, {col}): {a} vs {b}")]
    Asymmetric { row: usize, col: usize, a: f64, b: f64 },
    #[error("covariance has negative variance {value} at index {index}")]
    NegativeVariance { index: usize, value: f64 },
    #[error("covariance is not positive semidefinite (smallest eigenvalue {min_eigenvalue})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("non-finite entry in mean or covariance")]
    NonFinite,
    #[error("selection has {got} columns, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("selection entry ({row}, {col}) is {value}, expected 0 or 1")]
    NotBinary { row: usize, col: usize, value: f64 },
    #[error("variance of Z1 - Z2 is negative ({theta2}) beyond tolerance")]
    NegativeTheta2 { theta2: f64 },
}

/// Standard normal density.
pub fn std_normal_pdf(w: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * w * w).exp()
}

/// Standard normal distribution function, `Phi(w) = erfc(-w / sqrt 2) / 2`.
///
/// The complementary error function keeps full relative precision in the
/// lower tail, so the absolute error stays below `1e-12` everywhere.
pub fn std_normal_cdf(w: f64) -> f64 {
    0.5 * libm::erfc(-w / SQRT_2)
}

/// `Phi(a / t)` extended to `t = 0` by the limit from the right: 0, 1/2 or 1
/// depending on the sign of `a`.
pub fn cdf_of_ratio(a: f64, t: f64) -> f64 {
    debug_assert!(t >= 0.0);
    if t > 0.0 {
        std_normal_cdf(a / t)
    } else if a < 0.0 {
        0.0
    } else if a == 0.0 {
        0.5
    } else {
        1.0
    }
}

/// `t * phi(a / t)`, which tends to 0 as `t` goes to 0.
pub fn scaled_pdf(a: f64, t: f64) -> f64 {
    if t > 0.0 {
        t * std_normal_pdf(a / t)
    } else {
        0.0
    }
}

/// Means and covariance of `n` jointly Gaussian component variables.
///
/// The covariance is stored row-major and is exactly symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianVector {
    mu: Vec<f64>,
    cov: Vec<f64>,
}

impl GaussianVector {
    /// Validates shape, finiteness, exact symmetry, nonnegative variances and
    /// positive semidefiniteness (smallest eigenvalue at least
    /// `-1e-8 * max diagonal`).
    pub fn new(mu: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self, GaussianError> {
        let n = mu.len();
        if sigma.len() != n || sigma.iter().any(|row| row.len() != n) {
            return Err(GaussianError::Shape {
                mu: n,
                rows: sigma.len(),
                cols: sigma.first().map_or(0, Vec::len),
            });
        }
        let cov: Vec<f64> = sigma.into_iter().flatten().collect();
        Self::from_flat(mu, cov)
    }

    /// Same as [`GaussianVector::new`] with a row-major flat covariance.
    pub fn from_flat(mu: Vec<f64>, cov: Vec<f64>) -> Result<Self, GaussianError> {
        let n = mu.len();
        if cov.len() != n * n {
            return Err(GaussianError::Shape { mu: n, rows: cov.len() / n.max(1), cols: n });
        }
        if mu.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(GaussianError::NonFinite);
        }
        check_symmetric(n, &cov)?;
        for j in 0..n {
            let value = cov[j * n + j];
            if value < 0.0 {
                return Err(GaussianError::NegativeVariance { index: j, value });
            }
        }
        let min_eig = min_eigenvalue(n, &cov);
        let max_diag = (0..n).map(|j| cov[j * n + j]).fold(0.0, f64::max);
        if min_eig < -PSD_TOL * max_diag {
            return Err(GaussianError::NotPsd { min_eigenvalue: min_eig });
        }
        Ok(Self { mu, cov })
    }

    /// Independent components with the given variances.
    pub fn independent(mu: Vec<f64>, variances: &[f64]) -> Result<Self, GaussianError> {
        let n = mu.len();
        let mut cov = vec![0.0; n * n];
        for (j, v) in variances.iter().enumerate().take(n) {
            cov[j * n + j] = *v;
        }
        Self::from_flat(mu, cov)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn cov(&self, j: usize, k: usize) -> f64 {
        self.cov[j * self.n() + k]
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.cov(j, j)
    }

    /// Row-major covariance entries.
    pub fn cov_flat(&self) -> &[f64] {
        &self.cov
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.cov.chunks(self.n().max(1)).map(<[f64]>::to_vec).collect()
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n(), self.n(), &self.cov)
    }

    /// True when every off-diagonal covariance is exactly zero.
    pub fn is_uncorrelated(&self) -> bool {
        let n = self.n();
        (0..n).all(|j| (0..n).all(|k| j == k || self.cov(j, k) == 0.0))
    }

    /// Moments of `(Z1, Z2)` for rows given as boolean masks.
    ///
    /// Rows are swapped so that `e1 >= e2`.
    pub fn moments_of_rows(&self, row1: &[bool], row2: &[bool]) -> Result<PairMoments, GaussianError> {
        let n = self.n();
        if row1.len() != n || row2.len() != n {
            return Err(GaussianError::DimensionMismatch { expected: n, got: row1.len().max(row2.len()) });
        }
        let s1: Vec<usize> = (0..n).filter(|&j| row1[j]).collect();
        let s2: Vec<usize> = (0..n).filter(|&j| row2[j]).collect();
        let e1: f64 = s1.iter().map(|&j| self.mu[j]).sum();
        let e2: f64 = s2.iter().map(|&j| self.mu[j]).sum();
        let quad = |a: &[usize], b: &[usize]| -> f64 {
            a.iter()
                .map(|&j| {
                    let row = &self.cov[j * n..(j + 1) * n];
                    b.iter().map(|&k| row[k]).sum::<f64>()
                })
                .sum()
        };
        let v1 = quad(&s1, &s1);
        let v2 = quad(&s2, &s2);
        let c12 = quad(&s1, &s2);
        PairMoments::from_parts(e1, e2, v1, v2, c12)
    }
}

fn check_symmetric(n: usize, cov: &[f64]) -> Result<(), GaussianError> {
    for r in 0..n {
        for c in (r + 1)..n {
            let (a, b) = (cov[r * n + c], cov[c * n + r]);
            if a != b {
                return Err(GaussianError::Asymmetric { row: r, col: c, a, b });
            }
        }
    }
    Ok(())
}

fn min_eigenvalue(n: usize, cov: &[f64]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_row_slice(n, n, cov);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// A 2 x n binary selection: row 0 builds `Z1`, row 1 builds `Z2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SelectionPair {
    rows: [Vec<bool>; 2],
}

impl SelectionPair {
    pub fn new(row1: Vec<bool>, row2: Vec<bool>) -> Result<Self, GaussianError> {
        if row1.len() != row2.len() {
            return Err(GaussianError::DimensionMismatch { expected: row1.len(), got: row2.len() });
        }
        Ok(Self { rows: [row1, row2] })
    }

    pub fn empty(n: usize) -> Self {
        Self { rows: [vec![false; n], vec![false; n]] }
    }

    /// Builds a selection from numeric rows, rejecting anything that is not
    /// exactly 0 or 1.
    pub fn from_numeric(rows: &[Vec<f64>]) -> Result<Self, GaussianError> {
        if rows.len() != 2 {
            return Err(GaussianError::DimensionMismatch { expected: 2, got: rows.len() });
        }
        let mut out = [Vec::new(), Vec::new()];
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 && v != 1.0 {
                    return Err(GaussianError::NotBinary { row: i, col: j, value: v });
                }
                out[i].push(v == 1.0);
            }
        }
        let [a, b] = out;
        Self::new(a, b)
    }

    /// Splits a flat row-major mask of length `2n`.
    pub fn from_flat(bits: &[bool]) -> Self {
        let n = bits.len() / 2;
        Self { rows: [bits[..n].to_vec(), bits[n..2 * n].to_vec()] }
    }

    pub fn to_flat(&self) -> Vec<bool> {
        self.rows[0].iter().chain(self.rows[1].iter()).copied().collect()
    }

    pub fn n(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i][j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.rows[i][j] = value;
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn swapped(&self) -> Self {
        Self { rows: [self.rows[1].clone(), self.rows[0].clone()] }
    }

    pub fn count_ones(&self) -> usize {
        self.rows.iter().flatten().filter(|&&b| b).count()
    }

    /// Compact text form, e.g. `10110/01001`.
    pub fn fingerprint(&self) -> String {
        let enc = |r: &[bool]| r.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>();
        format!("{}/{}", enc(&self.rows[0]), enc(&self.rows[1]))
    }
}

/// First and second moments of `(Z1, Z2)` under the ordering `e1 >= e2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMoments {
    pub e1: f64,
    pub e2: f64,
    pub v1: f64,
    pub v2: f64,
    pub c12: f64,
    /// `e1 - e2`, nonnegative.
    pub delta: f64,
    /// Standard deviation of `Z1 - Z2`.
    pub theta: f64,
    /// Whether the input rows were swapped to reach `e1 >= e2`.
    pub swapped: bool,
}

impl PairMoments {
    /// Canonicalizes the ordering and computes `delta` and `theta`.
    pub fn from_parts(e1: f64, e2: f64, v1: f64, v2: f64, c12: f64) -> Result<Self, GaussianError> {
        let (e1, e2, v1, v2, swapped) = if e2 > e1 { (e2, e1, v2, v1, true) } else { (e1, e2, v1, v2, false) };
        let theta2 = v1 + v2 - 2.0 * c12;
        if theta2 < -THETA2_NEG_TOL * v1.max(v2).max(1.0) {
            return Err(GaussianError::NegativeTheta2 { theta2 });
        }
        Ok(Self { e1, e2, v1, v2, c12, delta: e1 - e2, theta: theta2.max(0.0).sqrt(), swapped })
    }

    /// `v1 + v2 - 2 c12`, clamped at zero.
    pub fn theta2(&self) -> f64 {
        (self.v1 + self.v2 - 2.0 * self.c12).max(0.0)
    }
}

/// Moments of `(Z1(x), Z2(x))`.
pub fn pair_moments(g: &GaussianVector, x: &SelectionPair) -> Result<PairMoments, GaussianError> {
    if x.n() != g.n() {
        return Err(GaussianError::DimensionMismatch { expected: g.n(), got: x.n() });
    }
    g.moments_of_rows(x.row(0), x.row(1))
}

/// `E[max(Z1, Z2)]` in closed form.
pub fn expected_max(m: &PairMoments) -> f64 {
    m.e1 * cdf_of_ratio(m.delta, m.theta) + m.e2 * cdf_of_ratio(-m.delta, m.theta) + scaled_pdf(m.delta, m.theta)
}

/// `E[min(Z1, Z2)] = E[Z1] + E[Z2] - E[max(Z1, Z2)]`.
pub fn expected_min(m: &PairMoments) -> f64 {
    m.e1 + m.e2 - expected_max(m)
}

/// Eigenvalue clipping onto the PSD cone.
///
/// A matrix that is already PSD is returned unchanged.
pub fn nearest_psd(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianError> {
    let n = sigma.nrows();
    if sigma.ncols() != n {
        return Err(GaussianError::Shape { mu: n, rows: n, cols: sigma.ncols() });
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if sigma[(r, c)] != sigma[(c, r)] {
                return Err(GaussianError::Asymmetric { row: r, col: c, a: sigma[(r, c)], b: sigma[(c, r)] });
            }
        }
    }
    let eig = SymmetricEigen::new(sigma.clone());
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return Ok(sigma.clone());
    }
    let clipped = DVector::from_iterator(n, eig.eigenvalues.iter().map(|&l| l.max(0.0)));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    // exact symmetry
    Ok(DMatrix::from_fn(n, n, |r, c| if r <= c { out[(r, c)] } else { out[(c, r)] }))
}

/// Draws from `N(mu, Sigma)` through a spectral square root, which tolerates
/// singular covariances.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mu: Vec<f64>,
    /// Row-major `n x n` factor `L` with `L L^T = Sigma`.
    factor: Vec<f64>,
    rng: ChaCha8Rng,
    z: Vec<f64>,
}

impl GaussianSampler {
    pub fn new(g: &GaussianVector, seed: u64) -> Self {
        let n = g.n();
        let eig = SymmetricEigen::new(g.sigma_matrix());
        let mut factor = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                factor[r * n + c] = eig.eigenvectors[(r, c)] * eig.eigenvalues[c].max(0.0).sqrt();
            }
        }
        Self { mu: g.mu().to_vec(), factor, rng: ChaCha8Rng::seed_from_u64(seed), z: vec![0.0; n] }
    }

    /// Writes the next draw into `out`.
    pub fn draw_into(&mut self, out: &mut [f64]) {
        let n = self.mu.len();
        for z in self.z.iter_mut() {
            *z = StandardNormal.sample(&mut self.rng);
        }
        for r in 0..n {
            let row = &self.factor[r * n..(r + 1) * n];
            out[r] = self.mu[r] + row.iter().zip(&self.z).map(|(a, b)| a * b).sum::<f64>();
        }
    }
}

/// `count` i.i.d. draws, one per row. Deterministic for a fixed seed.
pub fn sample(g: &GaussianVector, count: usize, seed: u64) -> DMatrix<f64> {
    let n = g.n();
    let mut sampler = GaussianSampler::new(g, seed);
    let mut out = DMatrix::zeros(count, n);
    let mut buf = vec![0.0; n];
    for r in 0..count {
        sampler.draw_into(&mut buf);
        for c in 0..n {
            out[(r, c)] = buf[c];
        }
    }
    out
}

/// `1 / sqrt(pi)`, `E[max]` of two independent standard normals.
pub fn uncorrelated_standard_pair_max() -> f64 {
    1.0 / PI.sqrt()
}
