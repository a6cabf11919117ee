//! Sampling estimates of expected losses.
//!
//! Samples are drawn from per-index streams (see [`CovarianceModel::sample`])
//! and processed in fixed-size chunks. Chunk statistics are merged by an
//! ordered pairwise reduction, so estimates are identical for any thread
//! count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::LaplacianPair;
use crate::loss::{realized_loss, ControlVector};
use crate::stochastic::{CovarianceModel, LoadProfile};

const CHUNK: u64 = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseDifference {
    pub first: usize,
    pub second: usize,
    /// Estimate of `E[H(α_first) - H(α_second)]`.
    pub estimate: MCEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlComparison {
    pub estimates: Vec<MCEstimate>,
    pub differences: Vec<PairwiseDifference>,
}

/// Count, mean and centered sum of squares of a batch.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(a: Moments, b: Moments) -> Moments {
        if a.count == 0.0 {
            return b;
        }
        if b.count == 0.0 {
            return a;
        }
        let count = a.count + b.count;
        let delta = b.mean - a.mean;
        Moments {
            count,
            mean: a.mean + delta * b.count / count,
            m2: a.m2 + b.m2 + delta * delta * a.count * b.count / count,
        }
    }

    fn estimate(&self, seed: u64) -> MCEstimate {
        let var = self.m2 / (self.count - 1.0);
        MCEstimate {
            mean: self.mean,
            std_error: (var / self.count).sqrt(),
            n_samples: self.count as u64,
            seed,
        }
    }
}

fn pairwise_reduce(mut level: Vec<Vec<Moments>>) -> Vec<Moments> {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.iter().zip(b).map(|(x, y)| Moments::merge(*x, *y)).collect(),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop().unwrap_or_default()
}

/// Runs `f` on every sample index and accumulates `width` statistics.
fn accumulate<F>(n_samples: u64, width: usize, f: F) -> Result<Vec<Moments>>
where
    F: Fn(u64, &mut [f64]) -> Result<()> + Sync,
{
    let n_chunks = n_samples.div_ceil(CHUNK);
    let per_chunk: Vec<Vec<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut moments = vec![Moments::default(); width];
            let mut values = vec![0.0; width];
            for idx in (c * CHUNK)..((c + 1) * CHUNK).min(n_samples) {
                f(idx, &mut values)?;
                for (m, &v) in moments.iter_mut().zip(&values) {
                    m.push(v);
                }
            }
            Ok(moments)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_reduce(per_chunk))
}

fn check_samples(n_samples: u64) -> Result<()> {
    if n_samples < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 samples, got {n_samples}")));
    }
    Ok(())
}

/// Sample mean of the realized loss with its standard error.
pub fn estimate_expected_loss(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    mu: &LoadProfile,
    alpha: &ControlVector,
    seed: u64,
    n_samples: u64,
) -> Result<MCEstimate> {
    check_samples(n_samples)?;
    let moments = accumulate(n_samples, 1, |idx, out| {
        out[0] = realized_loss(lp, mu, &cov.sample(seed, idx), alpha)?;
        Ok(())
    })?;
    Ok(moments[0].estimate(seed))
}

/// Evaluates every control on the same sampled fluctuations, so that
/// pairwise differences benefit from common random numbers.
pub fn compare_controls(
    lp: &LaplacianPair,
    cov: &CovarianceModel,
    mu: &LoadProfile,
    alphas: &[ControlVector],
    seed: u64,
    n_samples: u64,
) -> Result<ControlComparison> {
    check_samples(n_samples)?;
    let m = alphas.len();
    let pairs: Vec<(usize, usize)> =
        (0..m).flat_map(|i| ((i + 1)..m).map(move |j| (i, j))).collect();
    let moments = accumulate(n_samples, m + pairs.len(), |idx, out| {
        let omega = cov.sample(seed, idx);
        for (slot, alpha) in out.iter_mut().zip(alphas) {
            *slot = realized_loss(lp, mu, &omega, alpha)?;
        }
        for (p, &(i, j)) in pairs.iter().enumerate() {
            out[m + p] = out[i] - out[j];
        }
        Ok(())
    })?;
    let estimates = moments[..m].iter().map(|mo| mo.estimate(seed)).collect();
    let differences = pairs
        .iter()
        .zip(&moments[m..])
        .map(|(&(first, second), mo)| PairwiseDifference { first, second, estimate: mo.estimate(seed) })
        .collect();
    Ok(ControlComparison { estimates, differences })
}
