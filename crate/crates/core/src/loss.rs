//! Quadratic transport-loss functionals.
//!
//! The loss of a balanced profile `p` is `½ p^T L+ p`. Under an affine
//! load-sharing control `α`, the realized mismatch `1^T ω` is redistributed
//! as `p(α) = μ + ω - α (1^T ω)`, which is the action of `I - α 1^T` without
//! ever forming that matrix.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::stochastic::{CovarianceModel, FluctuationSample, LoadProfile};

const SUM_TOL: f64 = 1e-10;

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

/// Load-sharing coefficients `α` supported on a set `B`, with `1^T α = 1`.
///
/// Entries may be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    alpha: DVector<f64>,
    support: Vec<usize>,
}

impl ControlVector {
    /// Validates `alpha` against an explicit support.
    pub fn new(alpha: DVector<f64>, support: &[usize]) -> Result<Self> {
        let n = alpha.len();
        let mut in_support = vec![false; n];
        for &v in support {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            in_support[v] = true;
        }
        if let Some(v) = (0..n).find(|&v| !in_support[v] && alpha[v] != 0.0) {
            return Err(Error::InvalidControl(format!(
                "node {v} is outside the support but has coefficient {}",
                alpha[v]
            )));
        }
        if alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidControl("non-finite coefficient".into()));
        }
        let sum = alpha.sum();
        if (sum - 1.0).abs() > SUM_TOL * alpha.lp_norm(1).max(1.0) {
            return Err(Error::InvalidControl(format!("coefficients sum to {sum}, not 1")));
        }
        let mut support = support.to_vec();
        support.sort_unstable();
        support.dedup();
        Ok(Self { alpha, support })
    }

    /// Uses the nonzero entries of `alpha` as its support.
    pub fn from_dense(alpha: DVector<f64>) -> Result<Self> {
        let support: Vec<usize> = (0..alpha.len()).filter(|&i| alpha[i] != 0.0).collect();
        Self::new(alpha, &support)
    }

    /// Equal share `1/k` on each of the `k` given nodes.
    pub fn equal_share(n: usize, nodes: &[usize]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidControl("empty support".into()));
        }
        let mut alpha = DVector::zeros(n);
        for &v in nodes {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            alpha[v] = 1.0;
        }
        let k = alpha.sum();
        alpha /= k;
        let nodes: Vec<usize> = (0..n).filter(|&i| alpha[i] != 0.0).collect();
        Self::new(alpha, &nodes)
    }

    /// `α = 1/n · 1`.
    pub fn uniform(n: usize) -> Self {
        Self { alpha: DVector::from_element(n, 1.0 / n as f64), support: (0..n).collect() }
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn n(&self) -> usize {
        self.alpha.len()
    }
}

/// Coefficients of `E H(α) = (σ²/2) α^T A α - b^T α + c`.
#[derive(Debug, Clone)]
pub struct LossCoefficients {
    /// `A = L+`.
    pub a: DMatrix<f64>,
    /// `b = L+ Σ 1`.
    pub b: DVector<f64>,
    /// `c = tr(Σ L+)/2 + μ^T L+ μ / 2`.
    pub c: f64,
    pub sigma2: f64,
    /// The `μ^T L+ μ / 2` part of `c`.
    pub deterministic: f64,
}

impl LossCoefficients {
    /// Expected total loss at `alpha`.
    pub fn evaluate(&self, alpha: &DVector<f64>) -> f64 {
        let a_alpha = &self.a * alpha;
        0.5 * self.sigma2 * alpha.dot(&a_alpha) - self.b.dot(alpha) + self.c
    }

    /// Expected loss due to fluctuations only.
    pub fn evaluate_stochastic(&self, alpha: &DVector<f64>) -> f64 {
        self.evaluate(alpha) - self.deterministic
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(rename = "stochastic")]
    pub expected_stochastic_loss: f64,
    #[serde(rename = "deterministic")]
    pub deterministic_loss: f64,
    #[serde(rename = "total")]
    pub expected_total: f64,
}

/// Net profile `μ + ω - α (1^T ω)`.
pub fn net_profile(mu: &LoadProfile, omega: &FluctuationSample, alpha: &ControlVector) -> DVector<f64> {
    let mismatch = omega.omega.sum();
    mu.mu() + &omega.omega - alpha.alpha() * mismatch
}

/// Loss `½ p(α)^T L+ p(α)` of a single realization.
pub fn realized_loss(
    lp: &LaplacianPair,
    mu: &LoadProfile,
    omega: &FluctuationSample,
    alpha: &ControlVector,
) -> Result<f64> {
    let n = lp.n();
    check_dim(n, mu.n())?;
    check_dim(n, omega.omega.len())?;
    check_dim(n, alpha.n())?;
    let p = net_profile(mu, omega, alpha);
    Ok((0.5 * p.dot(&(lp.pseudoinverse() * &p))).max(0.0))
}

/// `tr(Σ L+)` without forming the product.
pub(crate) fn trace_product(sigma: &DMatrix<f64>, lplus: &DMatrix<f64>) -> f64 {
    sigma.component_mul(lplus).sum()
}

/// Expected loss split into its stochastic and deterministic parts.
pub fn expected_loss(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    mu: &LoadProfile,
    alpha: &ControlVector,
) -> Result<LossReport> {
    let n = lp.n();
    check_dim(n, cov.n())?;
    check_dim(n, mu.n())?;
    check_dim(n, alpha.n())?;
    let lplus = lp.pseudoinverse();
    let a = alpha.alpha();
    let lplus_alpha = lplus * a;
    let stochastic = 0.5 * cov.total_variance() * a.dot(&lplus_alpha)
        - cov.row_sums().dot(&lplus_alpha)
        + 0.5 * trace_product(cov.matrix(), lplus);
    let deterministic = 0.5 * mu.mu().dot(&(lplus * mu.mu()));
    Ok(LossReport {
        expected_stochastic_loss: stochastic,
        deterministic_loss: deterministic,
        expected_total: stochastic + deterministic,
    })
}

pub fn loss_coefficients(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    mu: &LoadProfile,
) -> Result<LossCoefficients> {
    let n = lp.n();
    check_dim(n, cov.n())?;
    check_dim(n, mu.n())?;
    let lplus = lp.pseudoinverse();
    let deterministic = 0.5 * mu.mu().dot(&(lplus * mu.mu()));
    Ok(LossCoefficients {
        a: lplus.clone(),
        b: lplus * cov.row_sums(),
        c: 0.5 * trace_product(cov.matrix(), lplus) + deterministic,
        sigma2: cov.total_variance(),
        deterministic,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedGraph};
    use crate::stochastic::{iid_covariance, validate_covariance};

    fn path3() -> LaplacianPair {
        build_laplacian(&WeightedGraph::from_triples(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap())
            .unwrap()
    }

    fn cycle4() -> LaplacianPair {
        let g = WeightedGraph::from_triples(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0)])
            .unwrap();
        build_laplacian(&g).unwrap()
    }

    fn sample(v: &[f64]) -> FluctuationSample {
        FluctuationSample { omega: DVector::from_row_slice(v) }
    }

    #[test]
    fn control_vector_validation() {
        assert!(ControlVector::from_dense(DVector::from_vec(vec![0.5, 0.5, 0.0])).is_ok());
        assert!(ControlVector::from_dense(DVector::from_vec(vec![1.5, -0.5])).is_ok());
        assert!(matches!(
            ControlVector::from_dense(DVector::from_vec(vec![0.5, 0.4])),
            Err(Error::InvalidControl(_))
        ));
        assert!(matches!(
            ControlVector::new(DVector::from_vec(vec![0.5, 0.5, 0.0]), &[0]),
            Err(Error::InvalidControl(_))
        ));
        assert!(ControlVector::equal_share(3, &[]).is_err());
        let eq = ControlVector::equal_share(4, &[1, 3]).unwrap();
        assert_eq!(eq.alpha().as_slice(), &[0.0, 0.5, 0.0, 0.5]);
        assert_eq!(eq.support(), &[1, 3]);
    }

    #[test]
    fn zero_profile_has_zero_loss() {
        let lp = path3();
        let h = realized_loss(
            &lp,
            &LoadProfile::zeros(3),
            &sample(&[0.0, 0.0, 0.0]),
            &ControlVector::uniform(3),
        )
        .unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn path_endpoint_to_endpoint() {
        let lp = path3();
        let alpha = ControlVector::from_dense(DVector::from_vec(vec![0.0, 0.0, 1.0])).unwrap();
        let omega = sample(&[1.0, 0.0, 0.0]);
        let mu = LoadProfile::zeros(3);
        assert_eq!(net_profile(&mu, &omega, &alpha).as_slice(), &[1.0, 0.0, -1.0]);
        let h = realized_loss(&lp, &mu, &omega, &alpha).unwrap();
        assert!((h - 1.0).abs() < 1e-12);
    }

    #[test]
    fn realized_loss_matches_dense_operator() {
        // Oracle: explicit C_α = I - α 1^T and a dense quadratic form.
        let lp = cycle4();
        let alpha = ControlVector::from_dense(DVector::from_vec(vec![0.7, -0.2, 0.0, 0.5])).unwrap();
        let mu = LoadProfile::new(DVector::from_vec(vec![0.3, -0.1, -0.4, 0.2])).unwrap();
        let c = DMatrix::identity(4, 4) - alpha.alpha() * DVector::from_element(4, 1.0).transpose();
        for scale in [1.0, 2.0] {
            let omega = sample(&[0.4 * scale, -1.1 * scale, 0.25 * scale, 0.9 * scale]);
            let p = mu.mu() + &c * &omega.omega;
            let oracle = 0.5 * p.dot(&(lp.pseudoinverse() * &p));
            let got = realized_loss(&lp, &mu, &omega, &alpha).unwrap();
            assert!((got - oracle).abs() < 1e-12);
            assert!(net_profile(&mu, &omega, &alpha).sum().abs() < 1e-10);
        }
        // With μ = 0 the loss is a quadratic form in ω.
        let zero = LoadProfile::zeros(4);
        let w = sample(&[0.4, -1.1, 0.25, 0.9]);
        let w2 = sample(&[0.8, -2.2, 0.5, 1.8]);
        let h1 = realized_loss(&lp, &zero, &w, &alpha).unwrap();
        let h2 = realized_loss(&lp, &zero, &w2, &alpha).unwrap();
        assert!((h2 - 4.0 * h1).abs() < 1e-12);
    }

    #[test]
    fn uniform_iid_gives_half_trace() {
        let lp = cycle4();
        let cov = iid_covariance(4, 1.0).unwrap();
        let r = expected_loss(&lp, &cov, &LoadProfile::zeros(4), &ControlVector::uniform(4)).unwrap();
        assert!((r.expected_stochastic_loss - 0.625).abs() < 1e-12);
        assert_eq!(r.deterministic_loss, 0.0);
    }

    #[test]
    fn scaling_sigma_scales_stochastic_loss() {
        let lp = cycle4();
        let cov = validate_covariance(DMatrix::from_row_slice(
            4,
            4,
            &[2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, -0.4, 0.1, 0.0, -0.4, 1.2],
        ))
        .unwrap();
        let alpha = ControlVector::from_dense(DVector::from_vec(vec![0.6, 0.0, 0.6, -0.2])).unwrap();
        let mu = LoadProfile::zeros(4);
        let base = expected_loss(&lp, &cov, &mu, &alpha).unwrap().expected_stochastic_loss;
        let scaled = expected_loss(&lp, &cov.scaled(3.5).unwrap(), &mu, &alpha)
            .unwrap()
            .expected_stochastic_loss;
        assert!((scaled - 3.5 * base).abs() <= 1e-12 * scaled.abs());
    }

    #[test]
    fn nominal_profile_only_moves_deterministic_part() {
        let lp = cycle4();
        let cov = iid_covariance(4, 1.0).unwrap();
        let alpha = ControlVector::equal_share(4, &[0, 2]).unwrap();
        let r0 = expected_loss(&lp, &cov, &LoadProfile::zeros(4), &alpha).unwrap();
        let mu = LoadProfile::new(DVector::from_vec(vec![1.0, -2.0, 0.5, 0.5])).unwrap();
        let r1 = expected_loss(&lp, &cov, &mu, &alpha).unwrap();
        assert_eq!(r0.expected_stochastic_loss, r1.expected_stochastic_loss);
        assert!(r1.deterministic_loss > 0.0);
        assert!((r1.expected_total - r1.expected_stochastic_loss - r1.deterministic_loss).abs() < 1e-15);
    }

    #[test]
    fn coefficients() {
        let lp = cycle4();
        let cov = iid_covariance(4, 1.0).unwrap();
        let co = loss_coefficients(&lp, &cov, &LoadProfile::zeros(4)).unwrap();
        assert!(co.b.amax() < 1e-12);
        assert!((co.c - 0.5 * lp.trace_pseudoinverse()).abs() < 1e-12);

        let neg = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        let co = loss_coefficients(&lp, &neg, &LoadProfile::zeros(4)).unwrap();
        assert!((co.sigma2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dimension_mismatch() {
        let lp = cycle4();
        let cov = iid_covariance(3, 1.0).unwrap();
        assert!(matches!(
            expected_loss(&lp, &cov, &LoadProfile::zeros(4), &ControlVector::uniform(4)),
            Err(Error::DimensionMismatch { expected: 4, found: 3 })
        ));
        assert!(realized_loss(&lp, &LoadProfile::zeros(4), &sample(&[0.0; 3]), &ControlVector::uniform(4))
            .is_err());
    }
}
