use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::PointCloud;
use crate::error::{Error, Result};

/// Principal axes of a point cloud, largest variance first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    pub fn output_dim(&self) -> usize {
        self.components.len()
    }
}

fn sign_normalize(v: &mut [f64]) {
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Top-`d` eigenvectors of the sample covariance (denominator `n - 1`).
/// Each component is signed so its first non-zero coordinate is positive.
pub fn pca_fit(cloud: &PointCloud, d: usize) -> Result<PcaModel> {
    let dim = cloud.dim();
    if d == 0 || d > dim {
        return Err(Error::param(format!(
            "pca dimension must be in 1..={dim}, got {d}"
        )));
    }
    let n = cloud.len();
    if n < 2 {
        return Err(Error::param(format!("pca needs at least 2 points, got {n}")));
    }
    let mut mean = vec![0.0; dim];
    for p in cloud.points() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);

    let centered = DMatrix::from_fn(n, dim, |i, j| cloud.point(i)[j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n as f64 - 1.0);
    let eig = SymmetricEigen::new(cov);

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut components = Vec::with_capacity(d);
    let mut explained_variance = Vec::with_capacity(d);
    for &k in order.iter().take(d) {
        let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
        sign_normalize(&mut v);
        components.push(v);
        explained_variance.push(eig.eigenvalues[k].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// Coordinates of each centred point along the model's components.
pub fn pca_project(model: &PcaModel, cloud: &PointCloud) -> Result<PointCloud> {
    if cloud.dim() != model.mean.len() {
        return Err(Error::DimensionMismatch {
            expected: model.mean.len(),
            got: cloud.dim(),
        });
    }
    let d = model.output_dim();
    let mut data = Vec::with_capacity(cloud.len() * d);
    let mut centered = vec![0.0; cloud.dim()];
    for p in cloud.points() {
        for ((c, v), m) in centered.iter_mut().zip(p).zip(&model.mean) {
            *c = v - m;
        }
        data.extend(
            model
                .components
                .iter()
                .map(|comp| comp.iter().zip(&centered).map(|(a, b)| a * b).sum::<f64>()),
        );
    }
    Ok(PointCloud::from_flat(
        data,
        d,
        cloud.source_index().to_vec(),
    ))
}
