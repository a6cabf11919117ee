//! Deterministic families and seeded random instances of graphs, covariances
//! and load profiles.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::graph::{Edge, WeightedGraph};
use crate::stochastic::{validate_covariance, CovarianceModel, LoadProfile};

pub fn path(n: usize) -> Result<WeightedGraph> {
    let edges = (1..n).map(|i| Edge { u: i - 1, v: i, weight: 1.0 }).collect();
    WeightedGraph::new(n, edges)
}

pub fn cycle(n: usize) -> Result<WeightedGraph> {
    let edges = (0..n).map(|i| Edge { u: i, v: (i + 1) % n, weight: 1.0 }).collect();
    WeightedGraph::new(n, edges)
}

pub fn complete(n: usize) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push(Edge { u, v, weight: 1.0 });
        }
    }
    WeightedGraph::new(n, edges)
}

/// Erdős–Rényi graph `G(n, p)`, resampled until connected.
///
/// Weights are drawn uniformly from `weights` (pass `(1.0, 1.0)` for unit
/// weights).
pub fn erdos_renyi_connected<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    weights: (f64, f64),
    rng: &mut R,
) -> Result<WeightedGraph> {
    loop {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < p {
                    let weight = if weights.1 > weights.0 {
                        rng.random_range(weights.0..weights.1)
                    } else {
                        weights.0
                    };
                    edges.push(Edge { u, v, weight });
                }
            }
        }
        let g = WeightedGraph::new(n, edges)?;
        if g.is_connected() {
            return Ok(g);
        }
    }
}

/// Random connected graph on `n` nodes: a random spanning tree plus extra
/// edges with probability `p`.
pub fn random_connected<R: Rng + ?Sized>(
    n: usize,
    p: f64,
    weights: (f64, f64),
    rng: &mut R,
) -> Result<WeightedGraph> {
    let draw = |rng: &mut R| {
        if weights.1 > weights.0 {
            rng.random_range(weights.0..weights.1)
        } else {
            weights.0
        }
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut present = vec![vec![false; n]; n];
    let mut edges = Vec::new();
    for i in 1..n {
        let parent = order[rng.random_range(0..i)];
        let child = order[i];
        present[parent][child] = true;
        present[child][parent] = true;
        edges.push(Edge { u: parent.min(child), v: parent.max(child), weight: draw(rng) });
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if !present[u][v] && rng.random::<f64>() < p {
                edges.push(Edge { u, v, weight: draw(rng) });
            }
        }
    }
    WeightedGraph::new(n, edges)
}

/// Random PSD covariance `F F^T` with `F` Gaussian of rank `rank`, supported
/// on `support` (all nodes when `None`).
pub fn random_covariance<R: Rng + ?Sized>(
    n: usize,
    rank: usize,
    support: Option<&[usize]>,
    rng: &mut R,
) -> Result<CovarianceModel> {
    let all: Vec<usize> = (0..n).collect();
    let support = support.unwrap_or(&all);
    loop {
        let mut f = DMatrix::zeros(n, rank);
        for &i in support {
            for c in 0..rank {
                f[(i, c)] = Distribution::<f64>::sample(&StandardNormal, rng);
            }
        }
        let sigma = &f * f.transpose();
        // Reject draws whose total mismatch variance is tiny relative to the
        // diagonal; they make σ² ill-conditioned rather than interesting.
        if sigma.sum() > 0.05 * sigma.trace() {
            return validate_covariance(sigma);
        }
    }
}

/// Random balanced nominal profile with entries of order `scale`.
pub fn random_profile<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> LoadProfile {
    let raw = DVector::from_iterator(n, (0..n).map(|_| scale * rng.random_range(-1.0..1.0)));
    let mean = raw.mean();
    LoadProfile::new(raw.map(|x| x - mean)).expect("centered profile is balanced")
}

/// Four-node covariance where node 3 is negatively correlated (−0.5) with
/// each of three unit-variance nodes; `σ² = 1` and `Σ 1 / σ² = (½, ½, ½, −½)`.
pub fn negative_correlation_example() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        4,
        4,
        &[
            1.0, 0.0, 0.0, -0.5, //
            0.0, 1.0, 0.0, -0.5, //
            0.0, 0.0, 1.0, -0.5, //
            -0.5, -0.5, -0.5, 1.0,
        ],
    )
}
