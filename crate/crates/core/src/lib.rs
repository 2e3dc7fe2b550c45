//! Global registration of a sparse, incrementally grown ground-robot LiDAR map
//! against a dense aerial photogrammetry point-cloud.
//!
//! The pipeline is feature extraction (ISS keypoints or Euclidean segments,
//! optionally after ground removal), description (FPFH, SHOT, ESF),
//! descriptor matching, robust transform estimation (RANSAC or FGR) and a final
//! point-to-point ICP refinement. [`eval`] holds the error metrics, success
//! classification and a synthetic multi-modal scene generator.

// `!(x > 0.0)` is how parameters reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod correspond;
pub mod descriptors;
pub mod error;
pub mod estimate;
pub mod eval;
pub mod features;
pub mod pipeline;

pub(crate) mod linalg;

pub use cloud::{Aabb, Point, PointCloud, RigidTransform, SpatialIndex, Vec3};
pub use error::{Error, Result};
pub use estimate::{RegistrationResult, Stage};

pub(crate) mod rng {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub type Rng = ChaCha8Rng;

    pub fn seeded(seed: u64) -> Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Mixes a base seed with a stream index (splitmix64 finalizer).
    pub fn derive(seed: u64, stream: u64) -> u64 {
        let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
