use std::collections::BTreeMap;
use std::sync::Arc;

use super::{PipelineParams, RealizationConfig};
use crate::cloud::{PointCloud, SpatialIndex, Vec3};
use crate::correspond::CorrespondenceSet;
use crate::descriptors::{self, FeatureSet, SupportQuery};
use crate::error::{Error, Result};
use crate::estimate::{self, RegistrationResult};
use crate::features::{self, KeypointSet, SegmentSet};

/// Parameters and the random stream a strategy may draw from.
#[derive(Debug, Clone, Copy)]
pub struct StageContext<'a> {
    pub params: &'a PipelineParams,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureOutput {
    Keypoints,
    Segments,
}

#[derive(Debug, Clone)]
pub enum Features {
    Keypoints(KeypointSet),
    /// Segment indices refer to `cloud`, which may be a subset of the input
    /// (for instance with the ground removed).
    Segments { set: SegmentSet, cloud: PointCloud },
}

impl Features {
    pub fn output(&self) -> FeatureOutput {
        match self {
            Features::Keypoints(_) => FeatureOutput::Keypoints,
            Features::Segments { .. } => FeatureOutput::Segments,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Features::Keypoints(k) => k.len(),
            Features::Segments { set, .. } => set.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Description supports: keypoints with the given radius, segments with
    /// their bounding spheres.
    pub fn queries(&self, cloud: &PointCloud, radius: f64) -> Vec<SupportQuery> {
        match self {
            Features::Keypoints(k) => SupportQuery::at_keypoints(cloud, k, radius),
            Features::Segments { set, cloud: seg_cloud } => SupportQuery::at_segments(seg_cloud, set),
        }
    }
}

pub trait FeatureExtractor: Send + Sync {
    fn output(&self) -> FeatureOutput;
    fn extract(&self, cloud: &PointCloud, ctx: &StageContext) -> Result<Features>;
}

pub trait DescriptorExtractor: Send + Sync {
    fn accepts(&self, features: FeatureOutput) -> bool;
    fn needs_normals(&self) -> bool {
        true
    }
    /// `cloud` carries normals when [`needs_normals`](Self::needs_normals)
    /// holds; `index` is built over its positions.
    fn describe(&self, cloud: &PointCloud, index: &SpatialIndex, features: &Features, ctx: &StageContext)
        -> Result<FeatureSet>;
}

pub trait TransformEstimator: Send + Sync {
    fn estimate(
        &self,
        correspondences: &CorrespondenceSet,
        source: &[Vec3],
        target: &[Vec3],
        ctx: &StageContext,
    ) -> Result<RegistrationResult>;

    /// Residual bound under which a correspondence counts as an inlier.
    fn inlier_threshold(&self, params: &PipelineParams) -> f64 {
        params.ransac.inlier_threshold
    }
}

struct IssKeypoints;

impl FeatureExtractor for IssKeypoints {
    fn output(&self) -> FeatureOutput {
        FeatureOutput::Keypoints
    }

    fn extract(&self, cloud: &PointCloud, ctx: &StageContext) -> Result<Features> {
        features::detect_iss_keypoints(cloud, &ctx.params.iss).map(Features::Keypoints)
    }
}

/// Euclidean clusters of the non-ground points. The ground joins everything
/// into one component, so it is always stripped here.
struct EuclideanSegments;

impl FeatureExtractor for EuclideanSegments {
    fn output(&self) -> FeatureOutput {
        FeatureOutput::Segments
    }

    fn extract(&self, cloud: &PointCloud, ctx: &StageContext) -> Result<Features> {
        let objects = if cloud.len() >= 3 {
            let removal = features::remove_ground_plane(cloud, &ctx.params.ground, ctx.seed)?;
            if removal.dominant { removal.filtered } else { cloud.clone() }
        } else {
            cloud.clone()
        };
        let set = features::segment_euclidean(&objects, &ctx.params.segment)?;
        Ok(Features::Segments { set, cloud: objects })
    }
}

struct Fpfh;

impl DescriptorExtractor for Fpfh {
    fn accepts(&self, _: FeatureOutput) -> bool {
        true
    }

    fn describe(&self, cloud: &PointCloud, index: &SpatialIndex, features: &Features, ctx: &StageContext) -> Result<FeatureSet> {
        let p = &ctx.params.fpfh;
        Ok(descriptors::fpfh::compute_with_index(cloud, index, &features.queries(cloud, p.radius), p))
    }
}

struct Shot;

impl DescriptorExtractor for Shot {
    fn accepts(&self, _: FeatureOutput) -> bool {
        true
    }

    fn describe(&self, cloud: &PointCloud, index: &SpatialIndex, features: &Features, ctx: &StageContext) -> Result<FeatureSet> {
        let p = &ctx.params.shot;
        Ok(descriptors::shot::compute_with_index(cloud, index, &features.queries(cloud, p.radius), p))
    }
}

struct Esf;

impl DescriptorExtractor for Esf {
    fn accepts(&self, features: FeatureOutput) -> bool {
        features == FeatureOutput::Segments
    }

    fn needs_normals(&self) -> bool {
        false
    }

    fn describe(&self, _: &PointCloud, _: &SpatialIndex, features: &Features, ctx: &StageContext) -> Result<FeatureSet> {
        match features {
            Features::Segments { set, cloud } => descriptors::compute_esf_set(cloud, set, &ctx.params.esf, ctx.seed),
            Features::Keypoints(_) => Err(Error::InvalidConfig("ESF describes segments only".into())),
        }
    }
}

struct Ransac;

impl TransformEstimator for Ransac {
    fn estimate(&self, c: &CorrespondenceSet, s: &[Vec3], t: &[Vec3], ctx: &StageContext) -> Result<RegistrationResult> {
        let params = estimate::RansacParams { seed: ctx.seed, ..ctx.params.ransac };
        estimate::ransac_register(c, s, t, &params)
    }
}

struct Fgr;

impl TransformEstimator for Fgr {
    fn estimate(&self, c: &CorrespondenceSet, s: &[Vec3], t: &[Vec3], ctx: &StageContext) -> Result<RegistrationResult> {
        let params = estimate::FgrParams { seed: ctx.seed, ..ctx.params.fgr };
        estimate::fgr_register(c, s, t, &params)
    }

    fn inlier_threshold(&self, params: &PipelineParams) -> f64 {
        params.fgr.inlier_threshold
    }
}

/// Named strategies for each pipeline slot. Realizations refer to them by name.
#[derive(Clone, Default)]
pub struct Registry {
    features: BTreeMap<String, Arc<dyn FeatureExtractor>>,
    descriptors: BTreeMap<String, Arc<dyn DescriptorExtractor>>,
    estimators: BTreeMap<String, Arc<dyn TransformEstimator>>,
}

impl Registry {
    /// `keypoint`/`segment`, `fpfh`/`shot`/`esf`, `ransac`/`fgr`.
    pub fn builtin() -> Self {
        let mut r = Self::default();
        r.register_feature("keypoint", Arc::new(IssKeypoints));
        r.register_feature("segment", Arc::new(EuclideanSegments));
        r.register_descriptor("fpfh", Arc::new(Fpfh));
        r.register_descriptor("shot", Arc::new(Shot));
        r.register_descriptor("esf", Arc::new(Esf));
        r.register_estimator("ransac", Arc::new(Ransac));
        r.register_estimator("fgr", Arc::new(Fgr));
        r
    }

    pub fn register_feature(&mut self, name: &str, strategy: Arc<dyn FeatureExtractor>) {
        self.features.insert(name.into(), strategy);
    }

    pub fn register_descriptor(&mut self, name: &str, strategy: Arc<dyn DescriptorExtractor>) {
        self.descriptors.insert(name.into(), strategy);
    }

    pub fn register_estimator(&mut self, name: &str, strategy: Arc<dyn TransformEstimator>) {
        self.estimators.insert(name.into(), strategy);
    }

    pub fn feature(&self, name: &str) -> Result<&Arc<dyn FeatureExtractor>> {
        self.features.get(name).ok_or_else(|| unknown("feature extractor", name, self.features.keys()))
    }

    pub fn descriptor(&self, name: &str) -> Result<&Arc<dyn DescriptorExtractor>> {
        self.descriptors.get(name).ok_or_else(|| unknown("descriptor", name, self.descriptors.keys()))
    }

    pub fn estimator(&self, name: &str) -> Result<&Arc<dyn TransformEstimator>> {
        self.estimators.get(name).ok_or_else(|| unknown("estimator", name, self.estimators.keys()))
    }

    /// Checks that every named strategy exists, that the descriptor can
    /// describe what the feature extractor produces, and all parameters.
    pub fn validate(&self, config: &RealizationConfig) -> Result<()> {
        let feature = self.feature(&config.feature)?;
        let descriptor = self.descriptor(&config.descriptor)?;
        self.estimator(&config.estimator)?;
        if !descriptor.accepts(feature.output()) {
            return Err(Error::InvalidConfig(format!(
                "descriptor {:?} cannot describe {:?} features",
                config.descriptor, config.feature
            )));
        }
        config.params.validate().map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

fn unknown<'a>(what: &str, name: &str, known: impl Iterator<Item = &'a String>) -> Error {
    let known: Vec<&str> = known.map(String::as_str).collect();
    Error::InvalidConfig(format!("unknown {what} {name:?} (known: {})", known.join(", ")))
}
