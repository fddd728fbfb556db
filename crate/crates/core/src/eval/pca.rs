//! Principal component analysis through the covariance eigen-decomposition.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{HarError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PcaSummary {
    pub feature_ids: Vec<String>,
    pub mean: Vec<f64>,
    /// Unit principal axes, one row per component, by descending variance.
    pub components: Array2<f64>,
    /// Variance along each kept component.
    pub explained_variance: Vec<f64>,
    /// Share of the total variance along each kept component.
    pub explained_ratio: Vec<f64>,
    /// Rows projected onto the kept components.
    pub projections: Array2<f64>,
}

/// Centre the columns, diagonalise the sample covariance and keep the
/// `n_components` leading axes. Each axis is signed so that its largest
/// magnitude loading is positive.
pub fn pca_summary(x: ArrayView2<f64>, feature_ids: &[String], n_components: usize) -> Result<PcaSummary> {
    let (n, p) = x.dim();
    if feature_ids.len() != p {
        return Err(HarError::ShapeMismatch {
            expected: p,
            got: feature_ids.len(),
        });
    }
    if n_components == 0 || n_components > p {
        return Err(HarError::InvalidParameter(format!(
            "n_components must lie in 1..={p}, got {n_components}"
        )));
    }
    if n < n_components.max(2) {
        return Err(HarError::TooFewSamples {
            needed: n_components.max(2),
            got: n,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HarError::NonFinite("pca input".into()));
    }
    let mean: Vec<f64> = x.columns().into_iter().map(|c| c.sum() / n as f64).collect();
    let centred = DMatrix::from_fn(n, p, |i, j| x[[i, j]] - mean[j]);
    let cov = (centred.transpose() * &centred) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();

    let mut components = Array2::zeros((n_components, p));
    for (c, &i) in order.iter().take(n_components).enumerate() {
        let v = eig.eigenvectors.column(i);
        let lead = (0..p).fold(0, |b, j| if v[j].abs() > v[b].abs() { j } else { b });
        let sign = if v[lead] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components[[c, j]] = sign * v[j];
        }
    }
    let mut projections = Array2::zeros((n, n_components));
    for i in 0..n {
        for c in 0..n_components {
            projections[[i, c]] = (0..p).map(|j| centred[(i, j)] * components[[c, j]]).sum();
        }
    }
    Ok(PcaSummary {
        feature_ids: feature_ids.to_vec(),
        mean,
        explained_variance: values[..n_components].to_vec(),
        explained_ratio: values[..n_components]
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect(),
        components,
        projections,
    })
}

impl PcaSummary {
    /// Map projections back to the centred feature space.
    pub fn reconstruct_centred(&self) -> Array2<f64> {
        self.projections.dot(&self.components)
    }

    /// CSV `pc1,..,pcN,label` with one row per projected point.
    pub fn write_projection_csv<W: Write>(&self, mut w: W, labels: &[String]) -> std::io::Result<()> {
        let k = self.components.nrows();
        let header: Vec<String> = (1..=k).map(|c| format!("pc{c}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for (i, row) in self.projections.rows().into_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", cells.join(","), labels.get(i).map_or("", String::as_str))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    use crate::rng::StageRng;

    fn ids(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("f{j}")).collect()
    }

    fn random(n: usize, p: usize, seed: u64) -> Array2<f64> {
        let mut rng = StageRng::seed_from_u64(seed);
        Array2::from_shape_fn((n, p), |(_, j)| rng.gen_range(-1.0..1.0) * (j + 1) as f64)
    }

    #[test]
    fn collinear_is_rank_one() {
        let mut rng = StageRng::seed_from_u64(3);
        let x = Array2::from_shape_fn((200, 2), |_| 0.0);
        let mut x = x;
        for i in 0..200 {
            let t: f64 = rng.gen_range(-5.0..5.0);
            x[[i, 0]] = t;
            x[[i, 1]] = 2.0 * t + 1e-9 * rng.gen_range(-1.0..1.0);
        }
        let s = pca_summary(x.view(), &ids(2), 2).unwrap();
        assert!(s.explained_ratio[0] >= 0.999999);
        let v = s.components.row(0);
        assert!((v[1] / v[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn spectral_contract() {
        for seed in 0..10 {
            let x = random(60, 10, seed);
            let s = pca_summary(x.view(), &ids(10), 10).unwrap();
            assert!(s.explained_ratio.windows(2).all(|w| w[0] >= w[1]));
            assert!(s.explained_ratio.iter().sum::<f64>() <= 1.0 + 1e-9);
            let g = s.components.dot(&s.components.t());
            for i in 0..10 {
                for j in 0..10 {
                    assert!((g[[i, j]] - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn full_reconstruction() {
        let x = random(40, 6, 9);
        let s = pca_summary(x.view(), &ids(6), 6).unwrap();
        let back = s.reconstruct_centred();
        for i in 0..40 {
            for j in 0..6 {
                assert!((back[[i, j]] - (x[[i, j]] - s.mean[j])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn variance_of_projection_matches_eigenvalue() {
        let x = random(80, 4, 1);
        let s = pca_summary(x.view(), &ids(4), 3).unwrap();
        for c in 0..3 {
            let col = s.projections.column(c);
            let var = col.iter().map(|v| v * v).sum::<f64>() / 79.0;
            assert!((var - s.explained_variance[c]).abs() < 1e-9 * var.max(1.0));
        }
    }

    #[test]
    fn errors_and_csv() {
        let x = array![[1.0, 2.0, 3.0], [2.0, 1.0, 0.0]];
        assert!(pca_summary(x.slice(ndarray::s![..1, ..]), &ids(3), 1).is_err());
        assert!(pca_summary(x.view(), &ids(3), 4).is_err());
        assert!(pca_summary(x.view(), &ids(2), 1).is_err());
        let s = pca_summary(x.view(), &ids(3), 2).unwrap();
        let mut out = Vec::new();
        s.write_projection_csv(&mut out, &["a".into(), "b".into()]).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("pc1,pc2,label\n"));
        assert_eq!(text.lines().count(), 3);
    }
}
