//! Two-layer Gaussian kernel architecture.
//!
//! The first layer is a fixed grid of Gaussian bumps over the workspace
//! (a coarse Hilbert-map style occupancy feature); the second layer is a
//! Gaussian kernel between feature vectors, used by the SVM. Both layers
//! use `exp(-d^2 / sigma^2)`.

use serde::{Deserialize, Serialize};

use crate::environment::Workspace;
use crate::{Error, Point, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// First-layer bandwidth, meters.
    pub sigma1: f64,
    /// Second-layer bandwidth, feature-space units.
    pub sigma2: f64,
    pub grid_spacing: f64,
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma1", self.sigma1),
            ("sigma2", self.sigma2),
            ("grid_spacing", self.grid_spacing),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Fixed first layer: Gaussian features centered on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub centers: Vec<Point>,
    pub sigma1: f64,
    pub spacing: f64,
    inv_sigma1_sq: f64,
}

impl FeatureMap {
    pub fn new(centers: Vec<Point>, sigma1: f64, spacing: f64) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidArgument("feature map needs at least one center".into()));
        }
        if !(sigma1.is_finite() && sigma1 > 0.0) {
            return Err(Error::InvalidArgument(format!("sigma1 must be > 0, got {sigma1}")));
        }
        Ok(Self {
            centers,
            sigma1,
            spacing,
            inv_sigma1_sq: 1.0 / (sigma1 * sigma1),
        })
    }

    /// Uniform grid of centers covering `workspace` (both edges included).
    pub fn covering(workspace: &Workspace, config: &KernelConfig) -> Self {
        let s = config.grid_spacing;
        let nx = (workspace.width() / s - 1e-9).ceil() as usize + 1;
        let ny = (workspace.height() / s - 1e-9).ceil() as usize + 1;
        let centers = (0..ny)
            .flat_map(|iy| {
                (0..nx).map(move |ix| {
                    Point::new(
                        workspace.x_min + ix as f64 * s,
                        workspace.y_min + iy as f64 * s,
                    )
                })
            })
            .collect();
        Self::new(centers, config.sigma1, s).expect("validated config")
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    pub fn featurize_into(&self, x: &Point, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        for (o, c) in out.iter_mut().zip(&self.centers) {
            *o = (-(x - c).norm_squared() * self.inv_sigma1_sq).exp();
        }
    }

    pub fn featurize(&self, x: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.featurize_into(x, &mut out);
        out
    }
}

/// Feature vector of `x`: `exp(-|x - c_j|^2 / sigma1^2)` for every center.
pub fn featurize(map: &FeatureMap, x: &Point) -> Vec<f64> {
    map.featurize(x)
}

/// Squared Euclidean distance between two feature vectors.
#[inline]
pub fn feature_distance_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Squared Euclidean norm of each `dim`-wide row of `rows`.
pub(crate) fn row_sq_norms(rows: &[f64], dim: usize) -> Vec<f64> {
    rows.chunks_exact(dim).map(|r| r.iter().map(|v| v * v).sum()).collect()
}

/// Squared distances between the rows of `a` and the rows of `b` (both
/// row-major, `dim` wide) as an `|a| x |b|` matrix, via one matrix product.
pub(crate) fn pairwise_sq_distances(
    a: &[f64],
    a_sq: &[f64],
    b: &[f64],
    b_sq: &[f64],
    dim: usize,
) -> nalgebra::DMatrix<f64> {
    let va = nalgebra::DMatrixView::from_slice(a, dim, a_sq.len());
    let vb = nalgebra::DMatrixView::from_slice(b, dim, b_sq.len());
    let mut d = va.tr_mul(&vb);
    for (j, bj) in b_sq.iter().enumerate() {
        for (i, ai) in a_sq.iter().enumerate() {
            let v = &mut d[(i, j)];
            *v = (ai + bj - 2.0 * *v).max(0.0);
        }
    }
    d
}

/// Second-layer kernel on precomputed features.
#[inline]
pub fn feature_kernel(sigma2: f64, a: &[f64], b: &[f64]) -> f64 {
    (-feature_distance_sq(a, b) / (sigma2 * sigma2)).exp()
}

/// Composite two-layer kernel between two points.
pub fn kernel(config: &KernelConfig, map: &FeatureMap, x_a: &Point, x_b: &Point) -> f64 {
    feature_kernel(config.sigma2, &map.featurize(x_a), &map.featurize(x_b))
}

/// Gradient of [`kernel`] with respect to `x_query`, by the chain rule
/// through both layers.
pub fn kernel_gradient(
    config: &KernelConfig,
    map: &FeatureMap,
    x_query: &Point,
    x_support: &Point,
) -> Point {
    let fq = map.featurize(x_query);
    let fs = map.featurize(x_support);
    let k = feature_kernel(config.sigma2, &fq, &fs);
    let mut acc = Point::zeros();
    for ((q, s), c) in fq.iter().zip(&fs).zip(&map.centers) {
        // d phi_j / dx = phi_j * (-2 (x - c_j) / sigma1^2)
        acc += (x_query - c) * ((q - s) * q);
    }
    acc * (k * 4.0 / (config.sigma1 * config.sigma1 * config.sigma2 * config.sigma2))
}

/// Plain Gaussian kernel on points, the single-layer form.
pub fn gaussian_kernel(a: &Point, b: &Point, sigma: f64) -> f64 {
    (-(a - b).norm_squared() / (sigma * sigma)).exp()
}

/// Gradient of [`gaussian_kernel`] with respect to `a`.
pub fn gaussian_kernel_gradient(a: &Point, b: &Point, sigma: f64) -> Point {
    (a - b) * (-2.0 / (sigma * sigma) * gaussian_kernel(a, b, sigma))
}
