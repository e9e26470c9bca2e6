//! Per-column Gaussian mixtures for mode-specific normalization.
//!
//! The number of modes is chosen by BIC over `1..=max_modes`; each candidate
//! is fitted by EM from a k-means++ style seeding. Modes lighter than
//! [`PRUNE_WEIGHT`] are then dropped and the weights renormalized.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{exp, ln, sqrt};
use crate::rng::{derive_seed, rng_from_seed};

pub const STD_FLOOR: f64 = 1e-4;
pub const PRUNE_WEIGHT: f64 = 0.01;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmNormalizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    pub weights: Vec<f64>,
    /// Mean log-likelihood per EM iteration of the selected fit.
    pub log_likelihood: Vec<f64>,
}

impl GmmNormalizer {
    pub fn n_modes(&self) -> usize {
        self.means.len()
    }

    fn log_joint(&self, x: f64, m: usize) -> f64 {
        let z = (x - self.means[m]) / self.stds[m];
        ln(self.weights[m]) - ln(self.stds[m]) - LN_SQRT_2PI - 0.5 * z * z
    }

    /// Posterior mode probabilities for `x`.
    pub fn responsibilities(&self, x: f64) -> Vec<f64> {
        let logs: Vec<f64> = (0..self.n_modes()).map(|m| self.log_joint(x, m)).collect();
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logs.iter().map(|l| exp(l - top)).collect();
        let s: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= s);
        r
    }

    pub fn most_likely_mode(&self, x: f64) -> usize {
        let r = self.responsibilities(x);
        (0..r.len()).fold(0, |best, m| if r[m] > r[best] { m } else { best })
    }

    pub fn mean_log_likelihood(&self, values: &[f64]) -> f64 {
        values
            .iter()
            .map(|&x| log_sum_exp((0..self.n_modes()).map(|m| self.log_joint(x, m))))
            .sum::<f64>()
            / values.len() as f64
    }
}

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let top = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + ln(it.map(|v| exp(v - top)).sum::<f64>())
}

fn seed_means(values: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    let mut means = vec![values[rng.random_range(0..values.len())]];
    let mut d2: Vec<f64> = values
        .iter()
        .map(|&x| (x - means[0]) * (x - means[0]))
        .collect();
    while means.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut pick = values.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            if target < d {
                pick = i;
                break;
            }
            target -= d;
        }
        let c = values[pick];
        means.push(c);
        for (d, &x) in d2.iter_mut().zip(values) {
            *d = d.min((x - c) * (x - c));
        }
    }
    means
}

fn em(values: &[f64], k: usize, iters: usize, seed: u64) -> GmmNormalizer {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let spread =
        sqrt(values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).max(STD_FLOOR);
    let means = seed_means(values, k, seed);
    let k = means.len();
    let mut g = GmmNormalizer {
        stds: vec![spread; k],
        weights: vec![1.0 / k as f64; k],
        means,
        log_likelihood: Vec::new(),
    };
    let mut resp = vec![0.0; values.len() * k];
    let mut logs = vec![0.0; k];
    for _ in 0..iters.max(1) {
        let consts: Vec<f64> = (0..k)
            .map(|m| ln(g.weights[m]) - ln(g.stds[m]) - LN_SQRT_2PI)
            .collect();
        let inv: Vec<f64> = g.stds.iter().map(|s| 1.0 / s).collect();
        let mut ll = 0.0;
        for (i, &x) in values.iter().enumerate() {
            for (m, l) in logs.iter_mut().enumerate() {
                let z = (x - g.means[m]) * inv[m];
                *l = consts[m] - 0.5 * z * z;
            }
            let lse = log_sum_exp(logs.iter().copied());
            ll += lse;
            for m in 0..k {
                resp[i * k + m] = exp(logs[m] - lse);
            }
        }
        ll /= n;
        let converged = g
            .log_likelihood
            .last()
            .is_some_and(|&prev| ll - prev <= 1e-10 * ll.abs().max(1.0));
        g.log_likelihood.push(ll);
        if converged {
            break;
        }
        for m in 0..k {
            let nk: f64 = (0..values.len()).map(|i| resp[i * k + m]).sum();
            if nk <= 1e-12 {
                g.weights[m] = 0.0;
                continue;
            }
            let mu = values
                .iter()
                .enumerate()
                .map(|(i, &x)| resp[i * k + m] * x)
                .sum::<f64>()
                / nk;
            let var = values
                .iter()
                .enumerate()
                .map(|(i, &x)| resp[i * k + m] * (x - mu) * (x - mu))
                .sum::<f64>()
                / nk;
            g.means[m] = mu;
            g.stds[m] = sqrt(var).max(STD_FLOOR);
            g.weights[m] = nk / n;
        }
    }
    g
}

/// Fits a mixture to one continuous column.
pub fn fit_normalizer(
    values: &[f64],
    max_modes: usize,
    em_iters: usize,
    seed: u64,
) -> Result<GmmNormalizer> {
    if values.len() < 10 {
        bail!(
            Domain,
            "mode normalizer needs at least 10 values, got {}",
            values.len()
        );
    }
    if max_modes == 0 {
        bail!(Config, "max_modes must be at least 1");
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Domain, "mode normalizer got a non-finite value");
    }
    let mut distinct = values.to_vec();
    crate::math::sort_floats(&mut distinct);
    distinct.dedup();
    let n = values.len() as f64;
    let mut best: Option<(f64, GmmNormalizer)> = None;
    for k in 1..=max_modes.min(distinct.len()) {
        let g = em(values, k, em_iters, derive_seed(seed, k as u64));
        let ll = g
            .log_likelihood
            .last()
            .copied()
            .unwrap_or(f64::NEG_INFINITY)
            * n;
        let alive = g.weights.iter().filter(|&&w| w > 0.0).count();
        let bic = -2.0 * ll + (3 * alive - 1) as f64 * ln(n);
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, g));
        }
    }
    let (_, mut g) = best.expect("at least one candidate");
    let keep: Vec<usize> = (0..g.n_modes())
        .filter(|&m| g.weights[m] >= PRUNE_WEIGHT)
        .collect();
    let total: f64 = keep.iter().map(|&m| g.weights[m]).sum();
    g.means = keep.iter().map(|&m| g.means[m]).collect();
    g.stds = keep.iter().map(|&m| g.stds[m]).collect();
    g.weights = keep.iter().map(|&m| g.weights[m] / total).collect();
    Ok(g)
}
