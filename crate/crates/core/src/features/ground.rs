use rand::Rng;

use crate::cloud::{PointCloud, Vec3};
use crate::{Error, Result};

/// Planes holding less than this share of the points are not treated as ground.
pub const DOMINANT_PLANE_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroundParams {
    pub dist_threshold: f64,
    pub max_iterations: usize,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self { dist_threshold: 0.15, max_iterations: 1000 }
    }
}

/// Plane `{p : n·p + d = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneModel {
    pub normal: Vec3,
    pub offset: f64,
    pub inlier_count: usize,
}

impl PlaneModel {
    pub fn distance(&self, p: &Vec3) -> f64 {
        (self.normal.dot(p) + self.offset).abs()
    }
}

#[derive(Debug, Clone)]
pub struct GroundRemoval {
    pub filtered: PointCloud,
    pub model: PlaneModel,
    pub inlier_indices: Vec<usize>,
    /// `inlier_count / len ≥ DOMINANT_PLANE_FRACTION`; callers may skip the
    /// removal when false.
    pub dominant: bool,
}

/// RANSAC plane fit; removes the inliers of the plane with the most support.
/// Ties keep the earliest hypothesis, so a fixed seed is fully reproducible.
pub fn remove_ground_plane(cloud: &PointCloud, params: &GroundParams, seed: u64) -> Result<GroundRemoval> {
    if cloud.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "plane fitting needs at least 3 points, got {}",
            cloud.len()
        )));
    }
    if !(params.dist_threshold >= 0.0) {
        return Err(Error::InvalidParameter("ground distance threshold must be non-negative".into()));
    }
    let pts = cloud.positions();
    let mut rng = crate::rng::seeded(seed);
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..params.max_iterations {
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        let k = rng.random_range(0..pts.len());
        if i == j || j == k || i == k {
            continue;
        }
        let cross = (pts[j] - pts[i]).cross(&(pts[k] - pts[i]));
        let len = cross.norm();
        if !(len > 1e-12) {
            continue;
        }
        let normal = cross / len;
        let offset = -normal.dot(&pts[i]);
        let count = pts
            .iter()
            .filter(|p| (normal.dot(p) + offset).abs() <= params.dist_threshold)
            .count();
        if best.is_none_or(|(c, _, _)| count > c) {
            best = Some((count, normal, offset));
        }
    }
    let Some((count, normal, offset)) = best else {
        return Err(Error::DegenerateInput("no non-degenerate plane hypothesis".into()));
    };
    let model = PlaneModel { normal, offset, inlier_count: count };
    let (inliers, outliers): (Vec<usize>, Vec<usize>) =
        (0..pts.len()).partition(|&i| model.distance(&pts[i]) <= params.dist_threshold);
    Ok(GroundRemoval {
        filtered: cloud.select(&outliers),
        dominant: inliers.len() as f64 >= DOMINANT_PLANE_FRACTION * pts.len() as f64,
        inlier_indices: inliers,
        model,
    })
}
