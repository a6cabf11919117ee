//! Instance generators and reference computations shared by the integration
//! tests. Every oracle here works from dense matrices and avoids the closed
//! forms implemented in the library.

#![allow(dead_code)]

use gridloss::generators::{random_connected, random_covariance};
use gridloss::{build_laplacian, ControlVector, CovarianceModel, LaplacianPair, WeightedGraph};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub struct Instance {
    pub graph: WeightedGraph,
    pub lp: LaplacianPair,
    pub cov: CovarianceModel,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.graph.n()
    }
}

pub fn random_graph<R: Rng>(rng: &mut R, n_min: usize, n_max: usize) -> WeightedGraph {
    let n = rng.random_range(n_min..=n_max);
    let p = rng.random_range(0.1..0.6);
    random_connected(n, p, (0.5, 2.0), rng).unwrap()
}

/// Random connected graph with `n_min..=n_max` nodes and a random PSD
/// covariance of random rank on all nodes.
pub fn random_instance<R: Rng>(rng: &mut R, n_min: usize, n_max: usize) -> Instance {
    let graph = random_graph(rng, n_min, n_max);
    let n = graph.n();
    let rank = rng.random_range(1..=n);
    let cov = random_covariance(n, rank, None, rng).unwrap();
    let lp = build_laplacian(&graph).unwrap();
    Instance { graph, lp, cov }
}

/// Random subset of `0..n` of size `k`, sorted.
pub fn random_subset<R: Rng>(rng: &mut R, n: usize, k: usize) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    all.shuffle(rng);
    let mut out = all[..k].to_vec();
    out.sort_unstable();
    out
}

/// Random feasible control on `support` (entries may be negative).
pub fn random_control<R: Rng>(rng: &mut R, n: usize, support: &[usize]) -> ControlVector {
    let mut alpha = DVector::zeros(n);
    for &v in support {
        alpha[v] = rng.random_range(-1.0..1.0);
    }
    let shift = (1.0 - alpha.sum()) / support.len() as f64;
    for &v in support {
        alpha[v] += shift;
    }
    ControlVector::new(alpha, support).unwrap()
}

/// Random direction `δ` with `1^T δ = 0` supported on `support`, unit norm.
pub fn tangent_direction<R: Rng>(rng: &mut R, n: usize, support: &[usize]) -> DVector<f64> {
    let mut d = DVector::zeros(n);
    for &v in support {
        d[v] = rng.random_range(-1.0..1.0);
    }
    let mean = d.sum() / support.len() as f64;
    for &v in support {
        d[v] -= mean;
    }
    let norm = d.norm();
    d / norm
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn matrix_rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(b.norm())
}

/// Pseudoinverse as the spectral sum `Σ v v^T / λ` over nonzero eigenvalues.
pub fn spectral_pseudoinverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = l.clone().symmetric_eigen();
    let tol = 1e-9 * eig.eigenvalues.amax();
    let n = l.nrows();
    let mut out = DMatrix::zeros(n, n);
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let v = eig.eigenvectors.column(c);
            out += v * v.transpose() / lambda;
        }
    }
    out
}

/// Dense `C_α = I - α 1^T`.
pub fn c_alpha(alpha: &DVector<f64>) -> DMatrix<f64> {
    let n = alpha.len();
    DMatrix::identity(n, n) - alpha * DVector::from_element(n, 1.0).transpose()
}

/// `½ (C_α (μ + ω))^T L+ (C_α (μ + ω))` with dense `C_α`.
pub fn dense_realized_loss(
    lplus: &DMatrix<f64>,
    mu: &DVector<f64>,
    omega: &DVector<f64>,
    alpha: &DVector<f64>,
) -> f64 {
    let p = c_alpha(alpha) * (mu + omega);
    0.5 * p.dot(&(lplus * &p))
}

/// `E ½ ω^T C_α^T L+ C_α ω = ½ tr(C_α Σ C_α^T L+)`.
pub fn dense_expected_stochastic(lplus: &DMatrix<f64>, sigma: &DMatrix<f64>, alpha: &DVector<f64>) -> f64 {
    let c = c_alpha(alpha);
    0.5 * (&c * sigma * c.transpose() * lplus).trace()
}

/// Projected gradient descent with step `1 / Lipschitz` for
/// `(σ²/2) α^T L+ α - b^T α + ξ (α^T P α + q^T α)` over
/// `{1^T α = 1, α_v = 0 off support}`.
#[allow(clippy::too_many_arguments)]
pub fn projected_gradient(
    lplus: &DMatrix<f64>,
    b: &DVector<f64>,
    sigma2: f64,
    p_diag: &DVector<f64>,
    q: &DVector<f64>,
    xi: f64,
    support: &[usize],
    iterations: usize,
) -> DVector<f64> {
    let k = support.len();
    let hess = DMatrix::from_fn(k, k, |a, c| {
        let (i, j) = (support[a], support[c]);
        sigma2 * lplus[(i, j)] + if a == c { 2.0 * xi * p_diag[i] } else { 0.0 }
    });
    let lin = DVector::from_iterator(k, support.iter().map(|&i| b[i] - xi * q[i]));
    let lipschitz = hess.clone().symmetric_eigen().eigenvalues.max();
    let step = 1.0 / lipschitz;

    let mut x = DVector::from_element(k, 1.0 / k as f64);
    let mut grad = DVector::zeros(k);
    for _ in 0..iterations {
        hess.mul_to(&x, &mut grad);
        grad -= &lin;
        let mean = grad.sum() / k as f64;
        let mut moved = 0.0f64;
        for a in 0..k {
            let delta = step * (grad[a] - mean);
            x[a] -= delta;
            moved = moved.max(delta.abs());
        }
        if moved < 1e-17 {
            break;
        }
    }
    let mut out = DVector::zeros(lplus.nrows());
    for (a, &i) in support.iter().enumerate() {
        out[i] = x[a];
    }
    out
}
