//! Optimal load-sharing controls.
//!
//! With controllables restricted to `B` (`|B| = k < n`) the minimizer of the
//! expected stochastic loss is
//!
//! ```text
//! α_B = w / t + (I - w 1^T / t) (L+_B)^-1 (L+ Σ 1)_B / σ²,   w = (L+_B)^-1 1,  t = 1^T w
//! ```
//!
//! where `L+_B` is the principal `k x k` block of `L+`, positive definite for
//! any connected graph. When every node is controllable the optimum collapses
//! to `Σ 1 / σ²`, independent of the network.
//!
//! [`kkt_oracle`] solves the same problems from the raw quadratic
//! coefficients by assembling the full KKT system, and serves as the
//! reference the closed forms are tested against.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::loss::{expected_loss, trace_product, ControlVector, LossCoefficients};
use crate::stochastic::{CovarianceModel, LoadProfile};

/// Nodes allowed a nonzero load-sharing coefficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControllableSet {
    n: usize,
    nodes: Vec<usize>,
}

impl ControllableSet {
    pub fn new(n: usize, nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidControllableSet("at least one node is required".into()));
        }
        let mut seen = vec![false; n];
        for &v in &nodes {
            if v >= n {
                return Err(Error::IndexOutOfRange { index: v, n });
            }
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::InvalidControllableSet(format!("node {v} listed twice")));
            }
        }
        Ok(Self { n, nodes })
    }

    pub fn full(n: usize) -> Self {
        Self { n, nodes: (0..n).collect() }
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_full(&self) -> bool {
        self.nodes.len() == self.n
    }

    /// Scatters a `k`-vector indexed like `nodes` into an `n`-vector.
    pub fn embed(&self, values: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.n);
        for (a, &v) in self.nodes.iter().enumerate() {
            out[v] = values[a];
        }
        out
    }

    fn restrict(&self, full: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.nodes.iter().map(|&v| full[v]))
    }

    fn principal_block(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |a, b| m[(self.nodes[a], self.nodes[b])])
    }
}

/// Usage penalty `ξ (α^T P α + q^T α)` with diagonal `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyModel {
    pub p_diag: DVector<f64>,
    pub q: DVector<f64>,
    pub xi: f64,
}

impl PenaltyModel {
    pub fn new(p_diag: DVector<f64>, q: DVector<f64>, xi: f64) -> Result<Self> {
        if p_diag.len() != q.len() {
            return Err(Error::InvalidPenalty(format!(
                "P has {} entries but q has {}",
                p_diag.len(),
                q.len()
            )));
        }
        if p_diag.iter().any(|&p| !(p.is_finite() && p > 0.0)) {
            return Err(Error::InvalidPenalty("P entries must be positive".into()));
        }
        if q.iter().any(|&x| !(x.is_finite() && x >= 0.0)) {
            return Err(Error::InvalidPenalty("q entries must be nonnegative".into()));
        }
        if !(xi.is_finite() && xi >= 0.0) {
            return Err(Error::InvalidPenalty(format!("xi must be nonnegative, got {xi}")));
        }
        Ok(Self { p_diag, q, xi })
    }

    /// `α^T P α + q^T α`, unweighted by `ξ`.
    pub fn cost(&self, alpha: &DVector<f64>) -> f64 {
        alpha.component_mul(alpha).dot(&self.p_diag) + self.q.dot(alpha)
    }
}

#[derive(Debug, Clone)]
pub struct OptimalControl {
    pub alpha_star: ControlVector,
    /// Multiplier `γ` of the constraint `1^T α = 1`.
    pub lagrange_multiplier: f64,
    /// Expected stochastic loss at the optimum.
    pub objective_value: f64,
    /// `‖H α_B - γ 1 - r‖_∞` of the reduced stationarity condition.
    pub kkt_residual: f64,
}

fn check_dims(lp: &LaplacianPair, cov: &CovarianceModel, set: Option<&ControllableSet>) -> Result<()> {
    let n = lp.n();
    if cov.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: cov.n() });
    }
    if let Some(s) = set {
        if s.n() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.n() });
        }
    }
    Ok(())
}

fn stochastic_objective(lp: &LaplacianPair, cov: &CovarianceModel, alpha: &ControlVector) -> Result<f64> {
    Ok(expected_loss(lp, cov, &LoadProfile::zeros(lp.n()), alpha)?.expected_stochastic_loss)
}

/// Closed-form optimum for `1 <= |B| < n` controllables.
pub fn optimize_subset(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    set: &ControllableSet,
) -> Result<OptimalControl> {
    check_dims(lp, cov, Some(set))?;
    if set.is_full() {
        return Err(Error::FullSetRequested);
    }
    let k = set.len();
    let sigma2 = cov.total_variance();
    let lplus_b = set.principal_block(lp.pseudoinverse());
    let chol = lplus_b
        .clone()
        .cholesky()
        .expect("principal submatrix of L+ is positive definite for a connected graph");

    let b_full = lp.pseudoinverse() * cov.row_sums();
    let b_set = set.restrict(&b_full);
    let w = chol.solve(&DVector::from_element(k, 1.0));
    let t = w.sum();
    let y = chol.solve(&(&b_set / sigma2));
    let y_sum = y.sum();
    let alpha_b = &w / t + &y - &w * (y_sum / t);
    let gamma = sigma2 * (1.0 - y_sum) / t;

    let residual = (sigma2 * &lplus_b * &alpha_b - DVector::from_element(k, gamma) - &b_set).amax();
    let alpha_star = ControlVector::new(set.embed(&alpha_b), set.nodes())?;
    let objective_value = stochastic_objective(lp, cov, &alpha_star)?;
    Ok(OptimalControl { alpha_star, lagrange_multiplier: gamma, objective_value, kkt_residual: residual })
}

/// Optimum when every node is controllable: `α* = Σ 1 / σ²`.
pub fn optimize_full(lp: &LaplacianPair, cov: &CovarianceModel) -> Result<OptimalControl> {
    check_dims(lp, cov, None)?;
    let n = lp.n();
    let sigma2 = cov.total_variance();
    let row_sums = cov.row_sums();
    let alpha = &row_sums / sigma2;
    let lplus = lp.pseudoinverse();
    let b = lplus * &row_sums;
    let residual = (sigma2 * lplus * &alpha - &b).amax();
    let objective_value = 0.5 * (trace_product(cov.matrix(), lplus) - row_sums.dot(&b) / sigma2);
    let all: Vec<usize> = (0..n).collect();
    Ok(OptimalControl {
        alpha_star: ControlVector::new(alpha, &all)?,
        lagrange_multiplier: 0.0,
        objective_value,
        kkt_residual: residual,
    })
}

/// Minimizes `E H(α) + ξ (α^T P α + q^T α)` over `α` supported on `set`
/// with `1^T α = 1`, by solving the bordered system
/// `[H -1; 1^T 0] [α_B; γ] = [r; 1]` with `H = σ² L+_B + 2ξ P_B` and
/// `r = (L+ Σ 1)_B - ξ q_B`.
pub fn optimize_penalized(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    pen: &PenaltyModel,
    set: &ControllableSet,
) -> Result<OptimalControl> {
    check_dims(lp, cov, Some(set))?;
    let n = lp.n();
    if pen.p_diag.len() != n {
        return Err(Error::InvalidPenalty(format!(
            "penalty has {} entries for {n} nodes",
            pen.p_diag.len()
        )));
    }
    let k = set.len();
    let sigma2 = cov.total_variance();
    let mut hess = set.principal_block(lp.pseudoinverse()) * sigma2;
    for (a, &v) in set.nodes().iter().enumerate() {
        hess[(a, a)] += 2.0 * pen.xi * pen.p_diag[v];
    }
    let b_full = lp.pseudoinverse() * cov.row_sums();
    let rhs_b = set.restrict(&b_full) - set.restrict(&pen.q) * pen.xi;

    let mut kkt = DMatrix::zeros(k + 1, k + 1);
    kkt.view_mut((0, 0), (k, k)).copy_from(&hess);
    for a in 0..k {
        kkt[(a, k)] = -1.0;
        kkt[(k, a)] = 1.0;
    }
    let mut rhs = DVector::zeros(k + 1);
    rhs.rows_mut(0, k).copy_from(&rhs_b);
    rhs[k] = 1.0;
    let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularKkt)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularKkt);
    }
    let alpha_b = sol.rows(0, k).into_owned();
    let gamma = sol[k];
    let residual = (&hess * &alpha_b - DVector::from_element(k, gamma) - &rhs_b).amax();
    let alpha_star = ControlVector::new(set.embed(&alpha_b), set.nodes())?;
    let objective_value = stochastic_objective(lp, cov, &alpha_star)?;
    Ok(OptimalControl { alpha_star, lagrange_multiplier: gamma, objective_value, kkt_residual: residual })
}

/// Reference solver working only from the quadratic coefficients.
///
/// Minimizes `(σ²/2) α^T A α - b^T α (+ ξ (α^T P α + q^T α))` subject to
/// `1^T α = 1` and `α_v = 0` for every `v` outside `set`, by an LU solve of
/// the full `(2n - k + 1)`-dimensional KKT system with one explicit
/// multiplier per constraint.
pub fn kkt_oracle(
    coeffs: &LossCoefficients,
    pen: Option<&PenaltyModel>,
    set: &ControllableSet,
) -> Result<ControlVector> {
    let n = coeffs.b.len();
    if set.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: set.n() });
    }
    let mut in_set = vec![false; n];
    for &v in set.nodes() {
        in_set[v] = true;
    }
    let fixed: Vec<usize> = (0..n).filter(|&v| !in_set[v]).collect();
    let m = n + 1 + fixed.len();

    let mut kkt = DMatrix::zeros(m, m);
    let mut rhs = DVector::zeros(m);
    kkt.view_mut((0, 0), (n, n)).copy_from(&(&coeffs.a * coeffs.sigma2));
    rhs.rows_mut(0, n).copy_from(&coeffs.b);
    if let Some(pen) = pen {
        if pen.p_diag.len() != n {
            return Err(Error::InvalidPenalty(format!(
                "penalty has {} entries for {n} nodes",
                pen.p_diag.len()
            )));
        }
        for i in 0..n {
            kkt[(i, i)] += 2.0 * pen.xi * pen.p_diag[i];
            rhs[i] -= pen.xi * pen.q[i];
        }
    }
    for i in 0..n {
        kkt[(i, n)] = -1.0;
        kkt[(n, i)] = 1.0;
    }
    rhs[n] = 1.0;
    for (c, &v) in fixed.iter().enumerate() {
        kkt[(v, n + 1 + c)] = -1.0;
        kkt[(n + 1 + c, v)] = 1.0;
    }

    let sol = kkt.lu().solve(&rhs).ok_or(Error::SingularKkt)?;
    if sol.iter().any(|x| !x.is_finite()) {
        return Err(Error::SingularKkt);
    }
    let mut alpha = sol.rows(0, n).into_owned();
    for &v in &fixed {
        alpha[v] = 0.0;
    }
    ControlVector::new(alpha, set.nodes())
}

/// Relative contribution `(Σ 1)_i / σ²` of each node to the variance of the
/// total mismatch.
pub fn interpretation_weights(cov: &CovarianceModel) -> Result<DVector<f64>> {
    let sigma2 = cov.total_variance();
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateNoise(format!("σ² = {sigma2}")));
    }
    Ok(cov.row_sums() / sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_laplacian, WeightedGraph};
    use crate::loss::loss_coefficients;
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

    fn assert_vec_close(got: &DVector<f64>, want: &[f64], tol: f64) {
        let diff = (got - DVector::from_row_slice(want)).amax();
        assert!(diff <= tol, "got {got} want {want:?} (diff {diff:e})");
    }

    #[test]
    fn path3_adjacent_pair() {
        let lp = path3();
        let cov = iid_covariance(3, 1.0).unwrap();
        let set = ControllableSet::new(3, vec![0, 1]).unwrap();
        let opt = optimize_subset(&lp, &cov, &set).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[1.0 / 3.0, 2.0 / 3.0, 0.0], 1e-12);
        assert!(opt.kkt_residual < 1e-10);

        let co = loss_coefficients(&lp, &cov, &LoadProfile::zeros(3)).unwrap();
        let oracle = kkt_oracle(&co, None, &set).unwrap();
        assert_vec_close(oracle.alpha(), &[1.0 / 3.0, 2.0 / 3.0, 0.0], 1e-12);
    }

    #[test]
    fn path3_endpoints_share_equally() {
        let lp = path3();
        let cov = iid_covariance(3, 1.0).unwrap();
        let set = ControllableSet::new(3, vec![0, 2]).unwrap();
        let opt = optimize_subset(&lp, &cov, &set).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[0.5, 0.0, 0.5], 1e-12);
    }

    #[test]
    fn full_set_is_rejected_by_subset_solver() {
        let lp = path3();
        let cov = iid_covariance(3, 1.0).unwrap();
        assert!(matches!(
            optimize_subset(&lp, &cov, &ControllableSet::full(3)),
            Err(Error::FullSetRequested)
        ));
    }

    #[test]
    fn controllable_set_validation() {
        assert!(ControllableSet::new(3, vec![]).is_err());
        assert!(ControllableSet::new(3, vec![0, 0]).is_err());
        assert!(matches!(ControllableSet::new(3, vec![3]), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn full_controllability_with_negative_correlation() {
        let lp = cycle4();
        let cov = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        let opt = optimize_full(&lp, &cov).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[0.5, 0.5, 0.5, -0.5], 1e-12);
        assert_eq!(opt.lagrange_multiplier, 0.0);
        let direct = stochastic_objective(&lp, &cov, &opt.alpha_star).unwrap();
        assert!((direct - opt.objective_value).abs() < 1e-12);
    }

    #[test]
    fn full_controllability_iid_is_uniform() {
        let cov = iid_covariance(4, 3.0).unwrap();
        let opt = optimize_full(&cycle4(), &cov).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[0.25; 4], 1e-15);
    }

    #[test]
    fn quiet_node_gets_zero_share() {
        let mut raw = DMatrix::identity(4, 4);
        raw[(2, 2)] = 0.0;
        let cov = validate_covariance(raw).unwrap();
        let opt = optimize_full(&cycle4(), &cov).unwrap();
        assert_eq!(opt.alpha_star.alpha()[2], 0.0);
    }

    #[test]
    fn single_controllable_takes_everything() {
        let lp = cycle4();
        let cov = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        let co = loss_coefficients(&lp, &cov, &LoadProfile::zeros(4)).unwrap();
        let set = ControllableSet::new(4, vec![2]).unwrap();
        assert_eq!(kkt_oracle(&co, None, &set).unwrap().alpha().as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let opt = optimize_subset(&lp, &cov, &set).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[0.0, 0.0, 1.0, 0.0], 1e-12);
    }

    #[test]
    fn interpretation() {
        let w = interpretation_weights(&iid_covariance(4, 1.0).unwrap()).unwrap();
        assert_vec_close(&w, &[0.25; 4], 1e-15);
        let neg = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        assert_vec_close(&interpretation_weights(&neg).unwrap(), &[0.5, 0.5, 0.5, -0.5], 1e-15);
        let diag = validate_covariance(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0])))
            .unwrap();
        assert_vec_close(&interpretation_weights(&diag).unwrap(), &[0.25, 0.75], 1e-15);
    }

    #[test]
    fn penalized_reduces_to_unpenalized_at_zero_weight() {
        let lp = cycle4();
        let cov = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        let pen = PenaltyModel::new(DVector::from_element(4, 1.0), DVector::from_element(4, 0.3), 0.0)
            .unwrap();
        let full = optimize_penalized(&lp, &cov, &pen, &ControllableSet::full(4)).unwrap();
        assert_vec_close(full.alpha_star.alpha(), &[0.5, 0.5, 0.5, -0.5], 1e-10);

        let set = ControllableSet::new(4, vec![0, 3]).unwrap();
        let pen_sub = optimize_penalized(&lp, &cov, &pen, &set).unwrap();
        let plain = optimize_subset(&lp, &cov, &set).unwrap();
        assert!((pen_sub.alpha_star.alpha() - plain.alpha_star.alpha()).amax() < 1e-10);
        assert!((pen_sub.lagrange_multiplier - plain.lagrange_multiplier).abs() < 1e-10);
    }

    #[test]
    fn heavy_penalty_spreads_evenly() {
        let lp = cycle4();
        let cov = validate_covariance(crate::generators::negative_correlation_example()).unwrap();
        let pen = PenaltyModel::new(DVector::from_element(4, 1.0), DVector::zeros(4), 1e6).unwrap();
        let opt = optimize_penalized(&lp, &cov, &pen, &ControllableSet::full(4)).unwrap();
        assert_vec_close(opt.alpha_star.alpha(), &[0.25; 4], 1e-4);
    }

    #[test]
    fn penalty_validation() {
        let ones = DVector::from_element(3, 1.0);
        assert!(PenaltyModel::new(DVector::from_vec(vec![1.0, 0.0, 1.0]), ones.clone(), 1.0).is_err());
        assert!(PenaltyModel::new(ones.clone(), DVector::from_vec(vec![0.0, -1.0, 0.0]), 1.0).is_err());
        assert!(PenaltyModel::new(ones.clone(), ones.clone(), -1.0).is_err());
        assert!(PenaltyModel::new(ones.clone(), DVector::zeros(2), 1.0).is_err());
        let pen = PenaltyModel::new(ones.clone(), ones, 1.0).unwrap();
        let cov = iid_covariance(4, 1.0).unwrap();
        assert!(matches!(
            optimize_penalized(&cycle4(), &cov, &pen, &ControllableSet::full(4)),
            Err(Error::InvalidPenalty(_))
        ));
    }
}
