//! Error metrics, success criteria and the synthetic benchmark scene.

mod crop;
mod metrics;
mod scene;

pub use crop::{crop_global_map, LocalExtent, Regime};
pub use metrics::{
    alignment_error, classify_success, min_scans_from_outcomes, min_scans_to_reliable, AlignmentError, SuccessCriteria,
};
pub use scene::{
    generate_synthetic_scene, LocalMap, OdometryNoise, Patch, SceneParams, Shape, SyntheticScene,
};
