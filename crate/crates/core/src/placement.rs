//! Expected loss averaged over placements of `k` equal-share controllables.
//!
//! Averaging `E H_s(α)` over all `C(n, k)` vectors `α = 1/k Σ_{i∈B} e_i`
//! gives `H_k = C1 + C2 / k` with
//!
//! ```text
//! C1 = ½ tr(Σ L+) - σ² tr(L+) / (2 n (n-1))
//! C2 = σ² tr(L+) / (2 (n-1))
//! ```
//!
//! The brute-force average over every placement is computed alongside when
//! the number of placements is at most [`ENUMERATION_CAP`].

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators;
use crate::graph::{build_laplacian, LaplacianPair, WeightedGraph};
use crate::loss::{expected_loss, trace_product, ControlVector};
use crate::stochastic::{iid_covariance, CovarianceModel, LoadProfile};

pub const ENUMERATION_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementAverage {
    pub k: usize,
    pub closed_form: f64,
    pub c1: f64,
    pub c2: f64,
    /// Brute-force average; absent above the enumeration cap.
    pub enumerated: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    /// `(k, H_k / H_1)` for `k = 1..=k_max`.
    pub ratios: Vec<(usize, f64)>,
    /// Finite-`n` value of `(n-1) tr(Σ L+) / (σ² tr(L+))`.
    pub gamma: Option<f64>,
    /// `(1 / (1 + 1/γ), 1 / (1 + γ))`: the limit ratio is `a + b / k`.
    pub asymptote: Option<(f64, f64)>,
}

/// `C(n, k)` in floating point.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_dims(lp: &LaplacianPair, cov: &CovarianceModel) -> Result<()> {
    if lp.n() != cov.n() {
        return Err(Error::DimensionMismatch { expected: lp.n(), found: cov.n() });
    }
    Ok(())
}

/// `(C1, C2)`.
pub fn placement_constants(lp: &LaplacianPair, cov: &CovarianceModel) -> Result<(f64, f64)> {
    check_dims(lp, cov)?;
    let n = lp.n() as f64;
    let tr = lp.trace_pseudoinverse();
    let sigma2 = cov.total_variance();
    let c1 = 0.5 * trace_product(cov.matrix(), lp.pseudoinverse()) - sigma2 * tr / (2.0 * n * (n - 1.0));
    let c2 = sigma2 * tr / (2.0 * (n - 1.0));
    Ok((c1, c2))
}

pub fn average_loss_k(lp: &LaplacianPair, cov: &CovarianceModel, k: usize) -> Result<PlacementAverage> {
    average_loss_k_with_cap(lp, cov, k, ENUMERATION_CAP)
}

pub fn average_loss_k_with_cap(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    k: usize,
    cap: f64,
) -> Result<PlacementAverage> {
    let n = lp.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    let (c1, c2) = placement_constants(lp, cov)?;
    let enumerated = (binomial(n, k) <= cap).then(|| enumerate_average(lp, cov, k));
    Ok(PlacementAverage { k, closed_form: c1 + c2 / k as f64, c1, c2, enumerated })
}

/// Average of the equal-share expected stochastic loss over every size-`k`
/// placement, evaluated placement by placement.
///
/// Work is split by the smallest node of each placement; partial sums are
/// reduced in that order so the result does not depend on the thread count.
pub fn enumerate_average(lp: &LaplacianPair, cov: &CovarianceModel, k: usize) -> f64 {
    let n = lp.n();
    let lplus = lp.pseudoinverse();
    let b = lplus * cov.row_sums();
    let sigma2 = cov.total_variance();
    let constant = 0.5 * trace_product(cov.matrix(), lplus);
    let kf = k as f64;

    let loss_of = |nodes: &[usize]| -> f64 {
        let mut quad = 0.0;
        let mut lin = 0.0;
        for &i in nodes {
            lin += b[i];
            for &j in nodes {
                quad += lplus[(i, j)];
            }
        }
        0.5 * sigma2 * quad / (kf * kf) - lin / kf + constant
    };

    let partials: Vec<f64> = (0..=(n - k))
        .into_par_iter()
        .map(|first| {
            let mut nodes = Vec::with_capacity(k);
            let mut sum = 0.0;
            for rest in ((first + 1)..n).combinations(k - 1) {
                nodes.clear();
                nodes.push(first);
                nodes.extend_from_slice(&rest);
                sum += loss_of(&nodes);
            }
            sum
        })
        .collect();
    partials.iter().sum::<f64>() / binomial(n, k)
}

pub fn scaling_curve(lp: &LaplacianPair, cov: &CovarianceModel, k_max: usize) -> Result<ScalingCurve> {
    let n = lp.n();
    if k_max == 0 || k_max > n {
        return Err(Error::InvalidK { k: k_max, n });
    }
    let (c1, c2) = placement_constants(lp, cov)?;
    let h1 = c1 + c2;
    let ratios = (1..=k_max).map(|k| (k, (c1 + c2 / k as f64) / h1)).collect();
    let gamma = (n as f64 - 1.0) * trace_product(cov.matrix(), lp.pseudoinverse())
        / (cov.total_variance() * lp.trace_pseudoinverse());
    let gamma = gamma.is_finite().then_some(gamma);
    let asymptote = gamma.map(|g| (g / (1.0 + g), 1.0 / (1.0 + g)));
    Ok(ScalingCurve { ratios, gamma, asymptote })
}

/// Adds controllables one at a time in a random order (fixed by `seed`) and
/// records the equal-share expected stochastic loss after each addition.
pub fn empirical_random_placement_trace(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    check_dims(lp, cov)?;
    let n = lp.n();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let zero = LoadProfile::zeros(n);
    (1..=n)
        .map(|k| {
            let alpha = ControlVector::equal_share(n, &order[..k])?;
            Ok((k, expected_loss(lp, cov, &zero, &alpha)?.expected_stochastic_loss))
        })
        .collect()
}

/// A graph where adding one equal-share controllable increases the
/// expected loss.
#[derive(Debug, Clone)]
pub struct NonMonotoneWitness {
    pub graph: WeightedGraph,
    pub base: Vec<usize>,
    pub added: usize,
    pub loss_base: f64,
    pub loss_augmented: f64,
}

/// Equal-share expected stochastic loss on `nodes`.
pub fn equal_share_loss(lp: &LaplacianPair, cov: &CovarianceModel, nodes: &[usize]) -> Result<f64> {
    let alpha = ControlVector::equal_share(lp.n(), nodes)?;
    Ok(expected_loss(lp, cov, &LoadProfile::zeros(lp.n()), &alpha)?.expected_stochastic_loss)
}

/// Searches random unit-weight graphs with `3 <= n <= max_n` nodes and unit
/// i.i.d. fluctuations for a set `B` and node `v` such that equal sharing on
/// `B ∪ {v}` is worse than on `B`. Candidates are scanned in a deterministic
/// order; the first witness is returned.
pub fn find_equal_share_nonmonotonicity(
    seed: u64,
    max_graphs: usize,
    max_n: usize,
) -> Result<Option<NonMonotoneWitness>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_graphs {
        let n = rand::Rng::random_range(&mut rng, 3..=max_n.max(3));
        let graph = generators::random_connected(n, 0.3, (1.0, 1.0), &mut rng)?;
        let lp = build_laplacian(&graph)?;
        let cov = iid_covariance(n, 1.0)?;
        for size in 1..n {
            for base in (0..n).combinations(size) {
                let loss_base = equal_share_loss(&lp, &cov, &base)?;
                for added in (0..n).filter(|v| !base.contains(v)) {
                    let mut aug = base.clone();
                    aug.push(added);
                    let loss_augmented = equal_share_loss(&lp, &cov, &aug)?;
                    if loss_augmented > loss_base * (1.0 + 1e-9) {
                        return Ok(Some(NonMonotoneWitness {
                            graph,
                            base,
                            added,
                            loss_base,
                            loss_augmented,
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

/// Equal-share loss of every size-`k` placement, in lexicographic order.
pub fn placement_losses(lp: &LaplacianPair, cov: &CovarianceModel, k: usize) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = lp.n();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    (0..n)
        .combinations(k)
        .map(|nodes| {
            let loss = equal_share_loss(lp, cov, &nodes)?;
            Ok((nodes, loss))
        })
        .collect()
}
