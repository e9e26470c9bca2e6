use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};
use crate::linalg::symmetric_eigen;
use crate::matrix::Matrix;

/// Principal axes of a data matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Orthonormal component vectors, one per row.
    pub components: Matrix,
    /// Share of total variance along each component, non-increasing.
    pub explained_variance_ratio: Vec<f64>,
    pub means: Vec<f64>,
    /// Set when the data has fewer non-negligible directions than components returned.
    pub rank_deficient: bool,
}

/// Eigendecomposition of the sample covariance. At most `min(p, n - 1)`
/// components are returned; each is signed so its largest-magnitude entry is
/// positive.
pub fn pca_fit(data: &Matrix, n_components: usize) -> Result<PcaModel> {
    let (n, p) = (data.rows(), data.cols());
    if n < 2 {
        bail!(Domain, "PCA needs at least 2 rows, got {n}");
    }
    if n_components == 0 || p == 0 {
        bail!(Config, "PCA needs at least one component and one column");
    }
    let means: Vec<f64> = (0..p)
        .map(|j| data.iter_rows().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = Matrix::zeros(p, p);
    for row in data.iter_rows() {
        for a in 0..p {
            let da = row[a] - means[a];
            if da == 0.0 {
                continue;
            }
            let cr = cov.row_mut(a);
            for b in a..p {
                cr[b] += da * (row[b] - means[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov.get(a, b) / (n - 1) as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    let eig = symmetric_eigen(&cov);
    let total: f64 = eig.values.iter().map(|v| v.max(0.0)).sum();
    let k = n_components.min(p).min(n - 1);
    let scale = eig
        .values
        .first()
        .copied()
        .unwrap_or(0.0)
        .abs()
        .max(f64::MIN_POSITIVE);
    let rank = eig.values.iter().filter(|&&v| v > 1e-10 * scale).count();

    let mut components = Matrix::zeros(k, p);
    for c in 0..k {
        let v = eig.vectors.row(c);
        let mut big = 0;
        for j in 1..p {
            if v[j].abs() > v[big].abs() {
                big = j;
            }
        }
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        for (j, &x) in v.iter().enumerate().take(p) {
            components.set(c, j, sign * x);
        }
    }
    let explained_variance_ratio = (0..k)
        .map(|c| {
            if total > 0.0 {
                eig.values[c].max(0.0) / total
            } else {
                0.0
            }
        })
        .collect();
    Ok(PcaModel {
        components,
        explained_variance_ratio,
        means,
        rank_deficient: rank < k || n_components > k,
    })
}

pub fn pca_project(model: &PcaModel, data: &Matrix) -> Result<Matrix> {
    if data.cols() != model.means.len() {
        bail!(
            Shape,
            "PCA fitted on {} columns, data has {}",
            model.means.len(),
            data.cols()
        );
    }
    let k = model.components.rows();
    let mut out = Matrix::zeros(data.rows(), k);
    let mut centred = alloc::vec![0.0; data.cols()];
    for i in 0..data.rows() {
        for ((c, &x), &m) in centred.iter_mut().zip(data.row(i)).zip(&model.means) {
            *c = x - m;
        }
        for c in 0..k {
            out.set(i, c, crate::math::dot(&centred, model.components.row(c)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_line() {
        let rows: Vec<[f64; 2]> = (0..20)
            .map(|i| [i as f64 * 0.5 - 3.0, 2.0 * (i as f64 * 0.5 - 3.0)])
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let m = pca_fit(&data, 2).unwrap();
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        assert!(m.explained_variance_ratio[1].abs() < 1e-9);
        assert!(m.rank_deficient);
        let c0 = m.components.row(0);
        assert!(c0[1] > 0.0 && (c0[1] / c0[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn projections_are_centred() {
        let rows: Vec<[f64; 3]> = (0..30)
            .map(|i| {
                let t = i as f64;
                [
                    t.sin() * 3.0,
                    (t * 0.7).cos() + t * 0.1,
                    (t * 1.3).sin() - 2.0,
                ]
            })
            .collect();
        let data = Matrix::from_rows(&rows).unwrap();
        let m = pca_fit(&data, 2).unwrap();
        let proj = pca_project(&m, &data).unwrap();
        for c in 0..2 {
            let mean = proj.column(c).iter().sum::<f64>() / 30.0;
            assert!(mean.abs() < 1e-9);
        }
        assert!(!m.rank_deficient);
    }

    #[test]
    fn too_few_rows() {
        let data = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(pca_fit(&data, 2).is_err());
    }
}
