//! End-to-end registration: the named realizations and the strategy registry
//! that runs them.

mod config;
mod registry;
mod run;

pub use config::{enumerate_realizations, MatchingParams, PipelineParams, PreprocessParams, RealizationConfig};
pub use registry::{
    DescriptorExtractor, FeatureExtractor, FeatureOutput, Features, Registry, StageContext, TransformEstimator,
};
pub use run::run_registration;
