use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::math::{exp, sort_floats, sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n_a: usize,
    pub n_b: usize,
}

impl KsResult {
    /// Asymptotic two-sided p-value (Kolmogorov distribution with the
    /// Stephens small-sample correction).
    pub fn p_value(&self) -> f64 {
        let ne = (self.n_a * self.n_b) as f64 / (self.n_a + self.n_b) as f64;
        let s = sqrt(ne);
        kolmogorov_sf((s + 0.12 + 0.11 / s) * self.statistic)
    }
}

/// `P(K > x)` for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    // K(0.2) differs from 0 by ~3e-11
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = exp(-2.0 * kf * kf * x * x);
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov statistic by a merged scan of both sorted samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        bail!(
            Domain,
            "KS needs two non-empty samples ({} and {})",
            a.len(),
            b.len()
        );
    }
    let mut xs: Vec<f64> = a.to_vec();
    let mut ys: Vec<f64> = b.to_vec();
    sort_floats(&mut xs);
    sort_floats(&mut ys);
    let (na, nb) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < xs.len() && j < ys.len() {
        let v = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= v {
            i += 1;
        }
        while j < ys.len() && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        n_a: xs.len(),
        n_b: ys.len(),
    })
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 || dof == 0 {
        return 1.0;
    }
    1.0 - regularized_lower_gamma(dof as f64 / 2.0, x / 2.0)
}

/// `P(a, x)`: series for `x < a + 1`, Lentz continued fraction otherwise.
fn regularized_lower_gamma(a: f64, x: f64) -> f64 {
    let ln_prefix = a * libm::log(x) - x - libm::lgamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..500 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        (sum * exp(ln_prefix)).clamp(0.0, 1.0)
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (1.0 - exp(ln_prefix) * h).clamp(0.0, 1.0)
    }
}

/// Pearson chi-square test of homogeneity between two count vectors.
/// Returns `(statistic, p_value)`; levels empty in both samples are skipped.
pub fn chi_square_homogeneity(a: &[u64], b: &[u64]) -> (f64, f64) {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return (0.0, 1.0);
    }
    let n = (na + nb) as f64;
    let mut stat = 0.0;
    let mut levels = 0;
    for (&x, &y) in a.iter().zip(b) {
        let tot = (x + y) as f64;
        if tot == 0.0 {
            continue;
        }
        levels += 1;
        let ea = tot * na as f64 / n;
        let eb = tot * nb as f64 / n;
        stat += (x as f64 - ea) * (x as f64 - ea) / ea + (y as f64 - eb) * (y as f64 - eb) / eb;
    }
    if levels < 2 {
        return (0.0, 1.0);
    }
    (stat, chi_square_sf(stat, levels - 1))
}
