use rand::seq::index::sample;

use super::{kabsch_umeyama, score, RegistrationResult};
use crate::cloud::{RigidTransform, Vec3};
use crate::correspond::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::rng;

pub const SAMPLE_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacParams {
    pub max_iterations: usize,
    pub inlier_threshold: f64,
    pub min_inlier_fraction: f64,
    /// Stop once a sample free of outliers has been drawn with this probability,
    /// judged from the best inlier fraction so far. 1.0 disables early stopping.
    pub confidence: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for RansacParams {
    fn default() -> Self {
        Self { max_iterations: 10_000, inlier_threshold: 0.5, min_inlier_fraction: 0.1, confidence: 0.999, seed: 0 }
    }
}

impl RansacParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0
            || !(self.inlier_threshold > 0.0)
            || !(0.0..=1.0).contains(&self.min_inlier_fraction)
            || !(self.confidence > 0.0 && self.confidence <= 1.0)
        {
            return Err(Error::InvalidParameter(format!("invalid RANSAC parameters {self:?}")));
        }
        Ok(())
    }
}

fn required_iterations(inlier_fraction: f64, confidence: f64) -> f64 {
    if confidence >= 1.0 {
        return f64::INFINITY;
    }
    let good = inlier_fraction.powi(SAMPLE_SIZE as i32);
    if good >= 1.0 {
        return 0.0;
    }
    if good <= 0.0 {
        return f64::INFINITY;
    }
    (1.0 - confidence).ln() / (1.0 - good).ln()
}

/// Hypothesize-and-verify over minimal 3-correspondence samples; the
/// hypothesis with the most inliers (earliest on ties) is refit on its inliers.
pub fn ransac_register(
    correspondences: &CorrespondenceSet,
    source_positions: &[Vec3],
    target_positions: &[Vec3],
    params: &RansacParams,
) -> Result<RegistrationResult> {
    params.validate()?;
    let n = correspondences.len();
    if n < SAMPLE_SIZE {
        return Err(Error::InsufficientData { needed: SAMPLE_SIZE, got: n });
    }
    let pairs: Vec<(Vec3, Vec3)> = correspondences
        .pairs
        .iter()
        .map(|c| (source_positions[c.source], target_positions[c.target]))
        .collect();
    let threshold2 = params.inlier_threshold * params.inlier_threshold;
    let count_inliers = |t: &RigidTransform| {
        pairs.iter().filter(|(s, q)| (t.apply_point(s) - q).norm_squared() <= threshold2).count()
    };

    let mut rng = rng::seeded(params.seed);
    let mut best: Option<(RigidTransform, usize)> = None;
    let mut iterations = 0;
    while iterations < params.max_iterations {
        iterations += 1;
        let idx = sample(&mut rng, n, SAMPLE_SIZE);
        let minimal: Vec<(Vec3, Vec3)> = idx.iter().map(|i| pairs[i]).collect();
        let Ok(hypothesis) = kabsch_umeyama(&minimal) else {
            continue;
        };
        let inliers = count_inliers(&hypothesis);
        if best.as_ref().is_none_or(|(_, b)| inliers > *b) {
            best = Some((hypothesis, inliers));
        }
        let fraction = best.as_ref().map_or(0.0, |(_, b)| *b as f64 / n as f64);
        if iterations as f64 >= required_iterations(fraction, params.confidence) {
            break;
        }
    }
    let (hypothesis, _) = best.ok_or_else(|| Error::DegenerateSample("no non-degenerate sample found".into()))?;

    let (support, _) = score(&hypothesis, pairs.iter().copied(), params.inlier_threshold);
    let refit: Vec<(Vec3, Vec3)> = support.iter().map(|&i| pairs[i]).collect();
    let transform = kabsch_umeyama(&refit).unwrap_or(hypothesis);
    let (inlier_indices, rms_residual) = score(&transform, pairs.iter().copied(), params.inlier_threshold);

    let mut result = RegistrationResult::new(transform);
    result.converged = inlier_indices.len() as f64 >= params.min_inlier_fraction * n as f64;
    result.inlier_indices = inlier_indices;
    result.rms_residual = rms_residual;
    result.iterations = iterations;
    Ok(result)
}
