//! Rigid transform estimation from correspondences, and ICP refinement.

mod consistency;
mod fgr;
mod icp;
mod kabsch;
mod ransac;

use std::collections::BTreeMap;

pub use consistency::geometric_consistency_filter;
pub use fgr::{fgr_register, line_process_weight, FgrParams};
pub use icp::{icp_refine, IcpParams};
pub use kabsch::kabsch_umeyama;
pub use ransac::{ransac_register, RansacParams};

use crate::cloud::RigidTransform;

/// Pipeline stages that report wall-clock time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Features,
    Description,
    Matching,
    Estimation,
    Icp,
}

impl Stage {
    pub const ALL: [Stage; 5] = [Stage::Features, Stage::Description, Stage::Matching, Stage::Estimation, Stage::Icp];

    pub const fn label(self) -> &'static str {
        match self {
            Stage::Features => "Key-point / Segmentation",
            Stage::Description => "Description",
            Stage::Matching => "Matching",
            Stage::Estimation => "Geometric consistency / Optimization",
            Stage::Icp => "icp",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Objective value before and after one update step. `mu` is the robust
/// scale the objective was evaluated at, if any.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveStep {
    pub mu: Option<f64>,
    pub before: f64,
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegistrationResult {
    /// Maps source coordinates into the target frame.
    pub transform: RigidTransform,
    /// Indices into the estimator's input (correspondences, or source points for ICP).
    pub inlier_indices: Vec<usize>,
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Milliseconds per stage; filled by the pipeline.
    pub stage_timings: BTreeMap<Stage, f64>,
    pub trace: Vec<ObjectiveStep>,
}

impl RegistrationResult {
    pub(crate) fn new(transform: RigidTransform) -> Self {
        Self {
            transform,
            inlier_indices: Vec::new(),
            rms_residual: 0.0,
            iterations: 0,
            converged: false,
            stage_timings: BTreeMap::new(),
            trace: Vec::new(),
        }
    }
}

/// Inliers and their RMS residual under `transform`.
pub(crate) fn score(
    transform: &RigidTransform,
    pairs: impl Iterator<Item = (crate::Vec3, crate::Vec3)>,
    threshold: f64,
) -> (Vec<usize>, f64) {
    let mut inliers = Vec::new();
    let mut sum = 0.0;
    for (i, (s, t)) in pairs.enumerate() {
        let r2 = (transform.apply_point(&s) - t).norm_squared();
        if r2 <= threshold * threshold {
            inliers.push(i);
            sum += r2;
        }
    }
    let rms = if inliers.is_empty() { 0.0 } else { (sum / inliers.len() as f64).sqrt() };
    (inliers, rms)
}
