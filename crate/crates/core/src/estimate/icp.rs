use rayon::prelude::*;

use super::{kabsch_umeyama, ObjectiveStep, RegistrationResult};
use crate::cloud::{PointCloud, RigidTransform, SpatialIndex, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IcpParams {
    pub max_iterations: usize,
    pub max_correspondence_distance: f64,
    /// Stop when rotation change (rad) plus translation change (m) falls below this.
    pub convergence_eps: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self { max_iterations: 50, max_correspondence_distance: 1.0, convergence_eps: 1e-6 }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 || !(self.max_correspondence_distance > 0.0) || !(self.convergence_eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("invalid ICP parameters {self:?}")));
        }
        Ok(())
    }
}

/// Closest-point pairs `(source index, target index)` within `max_dist`.
fn pairings(source: &[Vec3], index: &SpatialIndex, transform: &RigidTransform, max_dist: f64) -> Vec<(usize, usize)> {
    let max2 = max_dist * max_dist;
    source
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let nb = index.nearest(&transform.apply_point(p))?;
            (nb.distance * nb.distance <= max2).then_some((i, nb.index))
        })
        .collect()
}

fn mean_squared(source: &[Vec3], target: &SpatialIndex, pairs: &[(usize, usize)], t: &RigidTransform) -> f64 {
    pairs.iter().map(|&(i, j)| (t.apply_point(&source[i]) - target.point(j)).norm_squared()).sum::<f64>()
        / pairs.len() as f64
}

/// Point-to-point ICP from `initial`. `trace` holds the mean squared residual
/// of each iteration's pairing before and after its update.
pub fn icp_refine(
    source: &PointCloud,
    target: &PointCloud,
    initial: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    params.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput("ICP needs non-empty clouds".into()));
    }
    let src = source.positions();
    let index = SpatialIndex::new(target.positions());
    refine_with_index(&src, &index, initial, params)
}

pub(crate) fn refine_with_index(
    src: &[Vec3],
    index: &SpatialIndex,
    initial: &RigidTransform,
    params: &IcpParams,
) -> Result<RegistrationResult> {
    let mut transform = *initial;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        let pairs = pairings(src, index, &transform, params.max_correspondence_distance);
        if pairs.is_empty() {
            if iterations == 0 {
                return Err(Error::NoOverlap);
            }
            break;
        }
        let matched: Vec<(Vec3, Vec3)> = pairs.iter().map(|&(i, j)| (src[i], *index.point(j))).collect();
        let next = match kabsch_umeyama(&matched) {
            Ok(t) => t,
            Err(e) if iterations == 0 => return Err(e),
            Err(_) => break,
        };
        iterations += 1;
        let before = mean_squared(src, index, &pairs, &transform);
        let after = mean_squared(src, index, &pairs, &next);
        trace.push(ObjectiveStep { mu: None, before, after });
        let delta = next.compose(&transform.inverse());
        transform = next;
        if delta.rotation_angle() + delta.translation().norm() < params.convergence_eps {
            converged = true;
            break;
        }
    }

    let pairs = pairings(src, index, &transform, params.max_correspondence_distance);
    let mut result = RegistrationResult::new(transform);
    if !pairs.is_empty() {
        result.rms_residual = mean_squared(src, index, &pairs, &transform).sqrt();
    }
    result.inlier_indices = pairs.iter().map(|&(i, _)| i).collect();
    result.iterations = iterations;
    result.converged = converged;
    result.trace = trace;
    Ok(result)
}
