use crate::correspond::MatchPolicy;
use crate::descriptors::{EsfParams, FpfhParams, ShotParams};
use crate::error::{Error, Result};
use crate::estimate::{FgrParams, IcpParams, RansacParams};
use crate::features::{GroundParams, IssParams, SegmentParams};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessParams {
    /// Voxel leaf for feature extraction and description.
    pub voxel_size: f64,
    /// Voxel leaf for the ICP refinement clouds.
    pub icp_voxel_size: f64,
    pub normal_radius: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        Self { voxel_size: 0.2, icp_voxel_size: 0.1, normal_radius: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingParams {
    pub policy: MatchPolicy,
    /// Pairwise length tolerance of the consistency filter; 0 disables it.
    pub consistency_eps: f64,
}

impl Default for MatchingParams {
    fn default() -> Self {
        Self { policy: MatchPolicy::Forward, consistency_eps: 0.7 }
    }
}

/// Every tunable of the pipeline, grouped by stage.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineParams {
    pub preprocess: PreprocessParams,
    pub ground: GroundParams,
    pub iss: IssParams,
    pub segment: SegmentParams,
    pub fpfh: FpfhParams,
    pub shot: ShotParams,
    pub esf: EsfParams,
    pub matching: MatchingParams,
    pub ransac: RansacParams,
    pub fgr: FgrParams,
    pub icp: IcpParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<()> {
        let p = &self.preprocess;
        if !(p.voxel_size > 0.0 && p.icp_voxel_size > 0.0 && p.normal_radius > 0.0) {
            return Err(Error::InvalidParameter("voxel sizes and normal radius must be positive".into()));
        }
        if !(self.matching.consistency_eps >= 0.0) {
            return Err(Error::InvalidParameter("consistency tolerance must be non-negative".into()));
        }
        if !(self.fpfh.radius > 0.0 && self.fpfh.spfh_radius > 0.0 && self.shot.radius > 0.0) {
            return Err(Error::InvalidParameter("descriptor radii must be positive".into()));
        }
        if !(self.ground.dist_threshold >= 0.0) || self.ground.max_iterations == 0 {
            return Err(Error::InvalidParameter("invalid ground removal parameters".into()));
        }
        self.iss.validate()?;
        self.segment.validate()?;
        self.esf.validate()?;
        self.ransac.validate()?;
        self.fgr.validate()?;
        self.icp.validate()
    }
}

/// One registration strategy: which registered feature extractor, descriptor
/// and estimator to run, whether to strip the ground plane first, and the
/// parameters of every stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RealizationConfig {
    pub name: String,
    pub feature: String,
    pub descriptor: String,
    pub estimator: String,
    #[serde(default)]
    pub ground_removal: bool,
    #[serde(default)]
    pub params: PipelineParams,
}

impl RealizationConfig {
    pub fn new(name: &str, feature: &str, descriptor: &str, estimator: &str, ground_removal: bool) -> Self {
        Self {
            name: name.into(),
            feature: feature.into(),
            descriptor: descriptor.into(),
            estimator: estimator.into(),
            ground_removal,
            params: PipelineParams::default(),
        }
    }

    /// File- and CLI-friendly form of the name: `"FPFH FGR gr"` → `fpfh_fgr_gr`.
    pub fn slug(&self) -> String {
        self.name.to_lowercase().split_whitespace().collect::<Vec<_>>().join("_")
    }

    /// Looks up a realization by display name or slug.
    pub fn find(name: &str) -> Option<RealizationConfig> {
        enumerate_realizations().into_iter().find(|r| r.name == name || r.slug() == name)
    }
}

/// The eleven evaluated combinations: keypoint FPFH and SHOT with RANSAC or
/// FGR, each with and without ground removal, plus segment FPFH, SHOT and ESF.
pub fn enumerate_realizations() -> Vec<RealizationConfig> {
    let mut out = Vec::with_capacity(11);
    for descriptor in ["FPFH", "SHOT"] {
        for (estimator, suffix) in [("ransac", ""), ("fgr", " FGR")] {
            for gr in [false, true] {
                let name = format!("{descriptor}{suffix}{}", if gr { " gr" } else { "" });
                out.push(RealizationConfig::new(&name, "keypoint", &descriptor.to_lowercase(), estimator, gr));
            }
        }
    }
    for descriptor in ["FPFH", "SHOT", "ESF"] {
        out.push(RealizationConfig::new(&format!("{descriptor} seg"), "segment", &descriptor.to_lowercase(), "ransac", false));
    }
    out
}
