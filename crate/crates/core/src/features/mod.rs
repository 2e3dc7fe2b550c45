//! Local feature extraction: ISS keypoints, Euclidean segments and
//! RANSAC ground-plane removal.

mod ground;
mod iss;
mod segment;

pub use ground::{remove_ground_plane, GroundParams, GroundRemoval, PlaneModel, DOMINANT_PLANE_FRACTION};
pub use iss::{detect_iss_keypoints, IssParams, IssWeighting, KeypointSet};
pub use segment::{segment_euclidean, Segment, SegmentParams, SegmentSet};
