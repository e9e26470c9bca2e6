//! Exact (all-pairs) t-SNE for 2-D diagnostic embeddings.
//!
//! Bandwidths are found per point by bisection on the Gaussian precision so
//! the conditional entropy matches `ln(perplexity)`. The first
//! `exaggeration_iters` steps use momentum 0.5 and exaggerated affinities,
//! the rest momentum 0.8. A step is accepted only if it does not raise the
//! objective of its phase; otherwise momentum is dropped and the step size
//! halved until it does, so the KL divergence never rises after the
//! exaggeration phase.

use alloc::vec;
use alloc::vec::Vec;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{exp, ln};
use crate::matrix::Matrix;
use crate::rng::{derive_seed, permutation, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    /// Inputs with more rows are subsampled (seeded) to this many.
    pub max_rows: usize,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 500,
            exaggeration: 12.0,
            exaggeration_iters: 100,
            learning_rate: 200.0,
            max_rows: 2_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub coords: Matrix,
    /// Source row of each embedded point.
    pub rows: Vec<usize>,
    pub kl_divergence: f64,
    /// KL divergence (against the unexaggerated affinities) after every iteration.
    pub kl_trace: Vec<f64>,
}

fn squared_distances(data: &Matrix) -> Matrix {
    let n = data.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let s: f64 = data
                .row(i)
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d.set(i, j, s);
            d.set(j, i, s);
        }
    }
    d
}

/// Conditional affinities `p_{j|i}` with entropy matched to `ln(perplexity)`.
pub fn conditional_affinities(dist2: &Matrix, perplexity: f64) -> Matrix {
    let n = dist2.rows();
    let target = ln(perplexity);
    let mut p = Matrix::zeros(n, n);
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let dmin = (0..n)
            .filter(|&j| j != i)
            .map(|j| dist2.get(i, j))
            .fold(f64::INFINITY, f64::min);
        for _ in 0..200 {
            let mut sum = 0.0;
            let mut wsum = 0.0;
            for (j, r) in row.iter_mut().enumerate() {
                *r = if j == i {
                    0.0
                } else {
                    exp(-beta * (dist2.get(i, j) - dmin))
                };
                sum += *r;
                wsum += *r * (dist2.get(i, j) - dmin);
            }
            let entropy = ln(sum) + beta * wsum / sum;
            let diff = entropy - target;
            if diff.abs() < 1e-5 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_infinite() {
                    beta * 2.0
                } else {
                    (beta + hi) / 2.0
                };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        let sum: f64 = row.iter().sum();
        for (j, &r) in row.iter().enumerate() {
            p.set(i, j, r / sum);
        }
    }
    p
}

/// Objective `-scale * sum p ln w + ln Z + sum p ln p` and its gradient.
/// At `scale = 1` this is the KL divergence; larger scales give the
/// exaggerated objective whose gradient is `4 sum (scale p - q) w (y_i - y_j)`.
fn objective(p: &Matrix, y: &Matrix, scale: f64, grad: Option<&mut Matrix>) -> f64 {
    let n = y.rows();
    let mut num = Matrix::zeros(n, n);
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y.get(i, 0) - y.get(j, 0);
            let dy = y.get(i, 1) - y.get(j, 1);
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            num.set(i, j, w);
            num.set(j, i, w);
            z += 2.0 * w;
        }
    }
    let mut value = ln(z);
    for i in 0..n {
        for j in 0..n {
            let pij = p.get(i, j);
            if i != j && pij > 0.0 {
                value += pij * ln(pij) - scale * pij * ln(num.get(i, j));
            }
        }
    }
    if let Some(g) = grad {
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num.get(i, j);
                let m = (scale * p.get(i, j) - w / z) * w;
                gx += m * (y.get(i, 0) - y.get(j, 0));
                gy += m * (y.get(i, 1) - y.get(j, 1));
            }
            g.set(i, 0, 4.0 * gx);
            g.set(i, 1, 4.0 * gy);
        }
    }
    value
}

pub fn tsne(data: &Matrix, cfg: &TsneConfig) -> Result<Embedding2D> {
    let rows: Vec<usize> = if data.rows() > cfg.max_rows {
        let mut idx = permutation(data.rows(), &mut rng_from_seed(derive_seed(cfg.seed, 1)));
        idx.truncate(cfg.max_rows);
        idx.sort_unstable();
        idx
    } else {
        (0..data.rows()).collect()
    };
    let n = rows.len();
    if n < 2 {
        bail!(Config, "t-SNE needs at least 2 rows");
    }
    if !(cfg.perplexity > 0.0 && cfg.perplexity < n as f64 / 3.0) {
        bail!(
            Config,
            "perplexity {} must lie in (0, n/3) for n = {n}",
            cfg.perplexity
        );
    }
    let sub = data.select_rows(&rows);
    let cond = conditional_affinities(&squared_distances(&sub), cfg.perplexity);
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p.set(
                i,
                j,
                ((cond.get(i, j) + cond.get(j, i)) / (2.0 * n as f64)).max(1e-12),
            );
        }
        p.set(i, i, 0.0);
    }

    let mut rng = rng_from_seed(cfg.seed);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Matrix::zeros(n, 2);
    for v in y.as_mut_slice() {
        *v = init.sample(&mut rng);
    }
    let mut velocity = Matrix::zeros(n, 2);
    let mut gains = Matrix::from_vec(n, 2, vec![1.0; 2 * n])?;
    let mut grad = Matrix::zeros(n, 2);
    let mut trace = Vec::with_capacity(cfg.iterations);
    let mut step = cfg.learning_rate;
    let mut current_kl = objective(&p, &y, 1.0, None);

    for it in 0..cfg.iterations {
        let exaggerating = it < cfg.exaggeration_iters;
        let (scale, momentum) = if exaggerating {
            (cfg.exaggeration, 0.5)
        } else {
            (1.0, 0.8)
        };
        if it == cfg.exaggeration_iters {
            velocity.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
            step = cfg.learning_rate;
        }
        let current = objective(&p, &y, scale, Some(&mut grad));
        for k in 0..2 * n {
            let g = grad.as_slice()[k];
            let v = velocity.as_slice()[k];
            let gain = &mut gains.as_mut_slice()[k];
            *gain = if (g > 0.0) != (v > 0.0) {
                *gain + 0.2
            } else {
                (*gain * 0.8).max(0.01)
            };
        }
        // Accept the momentum step only if the objective does not rise;
        // otherwise drop the momentum and halve the step.
        let mut trial = y.clone();
        let mut trial_v = velocity.clone();
        let mut accepted = false;
        for attempt in 0..60 {
            let keep = if attempt == 0 { momentum } else { 0.0 };
            for k in 0..2 * n {
                let nv =
                    keep * velocity.as_slice()[k] - step * gains.as_slice()[k] * grad.as_slice()[k];
                trial_v.as_mut_slice()[k] = nv;
                trial.as_mut_slice()[k] = y.as_slice()[k] + nv;
            }
            let value = objective(&p, &trial, scale, None);
            if value.is_finite() && value <= current {
                accepted = true;
                break;
            }
            if attempt > 0 {
                step *= 0.5;
            }
        }
        if accepted {
            core::mem::swap(&mut y, &mut trial);
            core::mem::swap(&mut velocity, &mut trial_v);
            step = (step * 1.1).min(cfg.learning_rate);
        } else {
            velocity.as_mut_slice().iter_mut().for_each(|v| *v = 0.0);
        }
        current_kl = objective(&p, &y, 1.0, None);
        trace.push(current_kl);
    }
    // centre the layout
    for c in 0..2 {
        let m = y.column(c).iter().sum::<f64>() / n as f64;
        for i in 0..n {
            let v = y.get(i, c) - m;
            y.set(i, c, v);
        }
    }
    Ok(Embedding2D {
        coords: y,
        rows,
        kl_divergence: current_kl,
        kl_trace: trace,
    })
}
