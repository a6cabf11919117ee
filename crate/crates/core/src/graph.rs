//! Weighted graphs, Laplacians and their pseudoinverses.
//!
//! For a connected graph the pseudoinverse is obtained from the regularized
//! inverse `(L + J/n)^-1 - J/n`, where `J` is the all-ones matrix. Adding
//! `J/n` lifts the zero eigenvalue on the constant vector to one without
//! touching the rest of the spectrum, so the inverse exists and subtracting
//! `J/n` again removes the lifted component.

use std::collections::HashSet;
use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold on `λ_2 / λ_n` below which a graph counts as disconnected.
pub const CONNECTIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected simple graph with strictly positive edge weights.
///
/// Absent edges are simply not listed; zero weights are rejected.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidGraph(format!("need at least 2 nodes, got {n}")));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        for e in &edges {
            if e.u >= n || e.v >= n {
                return Err(Error::IndexOutOfRange { index: e.u.max(e.v), n });
            }
            if e.u == e.v {
                return Err(Error::InvalidGraph(format!("self-loop at node {}", e.u)));
            }
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.u, e.v, e.weight
                )));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", e.u, e.v)));
            }
        }
        Ok(Self { n, edges })
    }

    /// Builds a graph from `(u, v, w)` triples.
    pub fn from_triples(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        let edges = triples.iter().map(|&(u, v, weight)| Edge { u, v, weight }).collect();
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Returns the graph with `beta` added to the weight of `(i, j)`, creating
    /// the edge if it is absent.
    pub fn with_added_weight(&self, i: usize, j: usize, beta: f64) -> Result<Self> {
        let mut edges = self.edges.clone();
        match edges
            .iter_mut()
            .find(|e| (e.u == i && e.v == j) || (e.u == j && e.v == i))
        {
            Some(e) => e.weight += beta,
            None => edges.push(Edge { u: i, v: j, weight: beta }),
        }
        Self::new(self.n, edges)
    }

    pub fn is_connected(&self) -> bool {
        let mut adj = vec![Vec::new(); self.n];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        let mut visited = vec![false; self.n];
        let mut stack = vec![0];
        visited[0] = true;
        let mut count = 1;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !visited[v] {
                    visited[v] = true;
                    count += 1;
                    stack.push(v);
                }
            }
        }
        count == self.n
    }

    /// Dense weighted Laplacian `D - W`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            l[(e.u, e.u)] += e.weight;
            l[(e.v, e.v)] += e.weight;
            l[(e.u, e.v)] -= e.weight;
            l[(e.v, e.u)] -= e.weight;
        }
        l
    }
}

/// Eigen-decomposition of a Laplacian, eigenvalues in nondecreasing order.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    /// Orthonormal eigenvectors stored as columns, aligned with `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    fn of(l: &DMatrix<f64>) -> Self {
        let eig = l.clone().symmetric_eigen();
        let n = l.nrows();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { eigenvalues, eigenvectors }
    }

    /// Algebraic connectivity `λ_2`.
    pub fn fiedler_value(&self) -> f64 {
        self.eigenvalues[1]
    }
}

/// A Laplacian together with its Moore-Penrose pseudoinverse.
#[derive(Debug)]
pub struct LaplacianPair {
    laplacian: DMatrix<f64>,
    pseudoinverse: DMatrix<f64>,
    spectrum: OnceLock<Spectrum>,
}

impl Clone for LaplacianPair {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            laplacian: self.laplacian.clone(),
            pseudoinverse: self.pseudoinverse.clone(),
            spectrum,
        }
    }
}

/// Builds the Laplacian of `g` and its pseudoinverse.
///
/// Fails with [`Error::DisconnectedGraph`] when the graph has more than one
/// component, detected first by traversal and then confirmed spectrally.
pub fn build_laplacian(g: &WeightedGraph) -> Result<LaplacianPair> {
    if !g.is_connected() {
        return Err(Error::DisconnectedGraph(
            "not every node is reachable from node 0".into(),
        ));
    }
    let laplacian = g.laplacian();
    let spectrum = Spectrum::of(&laplacian);
    let lambda_max = spectrum.eigenvalues[g.n() - 1];
    let lambda2 = spectrum.fiedler_value();
    if lambda2 <= CONNECTIVITY_TOL * lambda_max {
        return Err(Error::DisconnectedGraph(format!(
            "algebraic connectivity {lambda2:e} is numerically zero (λ_max = {lambda_max:e})"
        )));
    }
    let pseudoinverse = regularized_pseudoinverse(&laplacian)?;
    let cell = OnceLock::new();
    let _ = cell.set(spectrum);
    Ok(LaplacianPair { laplacian, pseudoinverse, spectrum: cell })
}

fn regularized_pseudoinverse(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = l.nrows();
    let j_over_n = DMatrix::from_element(n, n, 1.0 / n as f64);
    let shifted = l + &j_over_n;
    let inv = match shifted.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => shifted
            .try_inverse()
            .ok_or_else(|| Error::DisconnectedGraph("regularized Laplacian is singular".into()))?,
    };
    let lp = inv - j_over_n;
    Ok((&lp + lp.transpose()) * 0.5)
}

impl LaplacianPair {
    pub fn n(&self) -> usize {
        self.laplacian.nrows()
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn pseudoinverse(&self) -> &DMatrix<f64> {
        &self.pseudoinverse
    }

    /// Spectral data of `L`; computed lazily after a rank-one update.
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| Spectrum::of(&self.laplacian))
    }

    pub fn trace_pseudoinverse(&self) -> f64 {
        self.pseudoinverse.trace()
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.n() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange { index: i, n: self.n() })
        }
    }

    /// Relative Frobenius residuals of the Penrose conditions
    /// `L L+ L = L` and `L+ L L+ = L+`.
    pub fn penrose_residuals(&self) -> (f64, f64) {
        let l = &self.laplacian;
        let p = &self.pseudoinverse;
        let r1 = (l * p * l - l).norm() / l.norm();
        let r2 = (p * l * p - p).norm() / p.norm();
        (r1, r2)
    }
}

/// Effective resistance `(e_i - e_j)^T L+ (e_i - e_j)`.
pub fn effective_resistance(lp: &LaplacianPair, i: usize, j: usize) -> Result<f64> {
    lp.check_index(i)?;
    lp.check_index(j)?;
    if i == j {
        return Ok(0.0);
    }
    let p = &lp.pseudoinverse;
    Ok((p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)]).max(0.0))
}

/// Total effective resistance (Kirchhoff index) via `n tr(L+)`.
pub fn total_effective_resistance(lp: &LaplacianPair) -> f64 {
    lp.n() as f64 * lp.trace_pseudoinverse()
}

/// Total effective resistance as half the double sum of pairwise resistances.
pub fn pairwise_total_resistance(lp: &LaplacianPair) -> f64 {
    let n = lp.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let p = &lp.pseudoinverse;
            total += p[(i, i)] + p[(j, j)] - 2.0 * p[(i, j)];
        }
    }
    total
}

/// Weight increment `beta` on the (possibly new) edge `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgePerturbation {
    i: usize,
    j: usize,
    beta: f64,
}

impl EdgePerturbation {
    pub fn new(i: usize, j: usize, beta: f64) -> Result<Self> {
        if i == j {
            return Err(Error::InvalidParameter(format!("perturbation endpoints coincide ({i})")));
        }
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { i, j, beta })
    }

    pub fn endpoints(&self) -> (usize, usize) {
        (self.i, self.j)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Signed incidence vector `e_i - e_j`.
    pub fn incidence(&self, n: usize) -> DVector<f64> {
        let mut m = DVector::zeros(n);
        m[self.i] = 1.0;
        m[self.j] = -1.0;
        m
    }
}

/// Applies `L' = L + beta m m^T` and updates the pseudoinverse with the
/// rank-one formula `L'+ = L+ - (L+ m)(L+ m)^T / (1/beta + m^T L+ m)`.
pub fn perturb_edge(lp: &LaplacianPair, pert: &EdgePerturbation) -> Result<LaplacianPair> {
    lp.check_index(pert.i)?;
    lp.check_index(pert.j)?;
    let (i, j, beta) = (pert.i, pert.j, pert.beta);
    let p = &lp.pseudoinverse;
    let u: DVector<f64> = p.column(i) - p.column(j);
    let denom = 1.0 / beta + (u[i] - u[j]);
    let mut pseudoinverse = p - (&u * u.transpose()) / denom;
    pseudoinverse = (&pseudoinverse + pseudoinverse.transpose()) * 0.5;

    let mut laplacian = lp.laplacian.clone();
    laplacian[(i, i)] += beta;
    laplacian[(j, j)] += beta;
    laplacian[(i, j)] -= beta;
    laplacian[(j, i)] -= beta;

    Ok(LaplacianPair { laplacian, pseudoinverse, spectrum: OnceLock::new() })
}
