//! Covariance models for zero-mean load fluctuations and nominal load profiles.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-9;
const BALANCE_TOL: f64 = 1e-9;

/// Covariance `Σ` of the nodal fluctuations.
///
/// The stochastic set `S` is derived from `Σ`: a node belongs to `S` iff its
/// row is not identically zero.
#[derive(Debug, Clone)]
pub struct CovarianceModel {
    sigma: DMatrix<f64>,
    stochastic_set: Vec<usize>,
    total_variance: f64,
    // n x |S| factor with sigma = factor * factor^T and zero rows outside S.
    factor: DMatrix<f64>,
}

/// Validates a raw covariance matrix.
pub fn validate_covariance(raw: DMatrix<f64>) -> Result<CovarianceModel> {
    let n = raw.nrows();
    if raw.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: raw.ncols() });
    }
    if n == 0 {
        return Err(Error::DegenerateNoise("empty covariance matrix".into()));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
    }
    let scale = raw.amax();
    let asym = (&raw - raw.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric(asym));
    }
    let sigma = (&raw + raw.transpose()) * 0.5;

    let stochastic_set: Vec<usize> =
        (0..n).filter(|&i| sigma.row(i).iter().any(|&x| x != 0.0)).collect();
    if stochastic_set.is_empty() {
        return Err(Error::DegenerateNoise("no node has stochastic fluctuations".into()));
    }

    // Rows and columns outside S vanish, so the spectrum of Σ is that of the
    // S-block plus zeros.
    let k = stochastic_set.len();
    let block = DMatrix::from_fn(k, k, |a, b| sigma[(stochastic_set[a], stochastic_set[b])]);
    let eig = block.symmetric_eigen();
    let max_eig = eig.eigenvalues.max().max(0.0);
    let min_eig = eig.eigenvalues.min();
    if min_eig < -PSD_TOL * max_eig || max_eig <= 0.0 {
        return Err(Error::NotPsd(min_eig));
    }

    let total_variance = sigma.sum();
    if !(total_variance > 1e-12 * sigma.trace()) {
        return Err(Error::DegenerateNoise(format!(
            "variance of the total mismatch is {total_variance:e}"
        )));
    }

    let mut factor = DMatrix::zeros(n, k);
    for (a, &node) in stochastic_set.iter().enumerate() {
        for c in 0..k {
            factor[(node, c)] = eig.eigenvectors[(a, c)] * eig.eigenvalues[c].max(0.0).sqrt();
        }
    }

    Ok(CovarianceModel { sigma, stochastic_set, total_variance, factor })
}

/// `Σ = variance * I`.
pub fn iid_covariance(n: usize, variance: f64) -> Result<CovarianceModel> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 nodes, got {n}")));
    }
    if !(variance.is_finite() && variance > 0.0) {
        return Err(Error::InvalidParameter(format!("variance must be positive, got {variance}")));
    }
    validate_covariance(DMatrix::from_diagonal_element(n, n, variance))
}

impl CovarianceModel {
    pub fn n(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn stochastic_set(&self) -> &[usize] {
        &self.stochastic_set
    }

    /// `σ² = 1^T Σ 1`.
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Row sums `Σ 1`.
    pub fn row_sums(&self) -> DVector<f64> {
        DVector::from_iterator(self.n(), self.sigma.row_iter().map(|r| r.sum()))
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// `δ Σ` for `δ > 0`.
    pub fn scaled(&self, delta: f64) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::InvalidParameter(format!("scale must be positive, got {delta}")));
        }
        validate_covariance(&self.sigma * delta)
    }

    /// Draws sample `index` of the stream identified by `seed`.
    ///
    /// Each index has its own ChaCha stream, so any subset of samples can be
    /// generated in any order with identical results.
    pub fn sample(&self, seed: u64, index: u64) -> FluctuationSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let z = DVector::from_iterator(
            self.factor.ncols(),
            (0..self.factor.ncols()).map(|_| StandardNormal.sample(&mut rng)),
        );
        let mut omega = &self.factor * z;
        let mut in_s = vec![false; self.n()];
        for &i in &self.stochastic_set {
            in_s[i] = true;
        }
        for (i, w) in omega.iter_mut().enumerate() {
            if !in_s[i] {
                *w = 0.0;
            }
        }
        FluctuationSample { omega }
    }
}

/// Nominal load profile `μ`, balanced on average.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadProfile {
    mu: DVector<f64>,
}

impl LoadProfile {
    pub fn new(mu: DVector<f64>) -> Result<Self> {
        let sum = mu.sum();
        if sum.abs() > BALANCE_TOL * (1.0 + mu.lp_norm(1)) {
            return Err(Error::UnbalancedProfile(sum));
        }
        Ok(Self { mu })
    }

    pub fn zeros(n: usize) -> Self {
        Self { mu: DVector::zeros(n) }
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }
}

/// One realization `ω` of the fluctuations.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSample {
    pub omega: DVector<f64>,
}

/// Draws `count` samples `N(0, Σ)` deterministically from `seed`.
pub fn sample_fluctuations(cov: &CovarianceModel, seed: u64, count: usize) -> Vec<FluctuationSample> {
    (0..count as u64).map(|i| cov.sample(seed, i)).collect()
}
