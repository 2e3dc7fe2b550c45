//! Local shape descriptors over keypoints or segments.

pub(crate) mod esf;
pub(crate) mod fpfh;
pub(crate) mod shot;

use std::fmt::Write as _;

pub use esf::{compute_esf, compute_esf_set, EsfParams, ESF_BINS, ESF_GROUPS};
pub use fpfh::{compute_fpfh, pair_features, FpfhParams, PairFeatures, FPFH_BINS};
pub use shot::{compute_shot, LocalFrame, ShotParams, SHOT_COS_BINS};

use crate::cloud::{PointCloud, Vec3};
use crate::features::{KeypointSet, SegmentSet};

/// Descriptor radius used when nothing else is configured.
pub const DEFAULT_DESCRIPTOR_RADIUS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Fpfh,
    Shot,
    Esf,
}

impl DescriptorKind {
    pub const fn dimension(self) -> usize {
        match self {
            DescriptorKind::Fpfh => 33,
            DescriptorKind::Shot => 352,
            DescriptorKind::Esf => 640,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            DescriptorKind::Fpfh => "FPFH",
            DescriptorKind::Shot => "SHOT",
            DescriptorKind::Esf => "ESF",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub kind: DescriptorKind,
    pub values: Vec<f64>,
    /// False for supports too sparse or degenerate to describe; values are then all zero.
    pub valid: bool,
}

impl Descriptor {
    pub fn new(kind: DescriptorKind, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), kind.dimension());
        Self { kind, values, valid: true }
    }

    pub fn invalid(kind: DescriptorKind) -> Self {
        Self { kind, values: vec![0.0; kind.dimension()], valid: false }
    }
}

/// Feature positions with a parallel list of descriptors of one kind.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub kind: DescriptorKind,
    pub positions: Vec<Vec3>,
    pub descriptors: Vec<Descriptor>,
}

impl FeatureSet {
    pub fn new(kind: DescriptorKind) -> Self {
        Self { kind, positions: Vec::new(), descriptors: Vec::new() }
    }

    pub fn push(&mut self, position: Vec3, descriptor: Descriptor) {
        assert_eq!(descriptor.kind, self.kind, "mixed descriptor kinds");
        self.positions.push(position);
        self.descriptors.push(descriptor);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.descriptors.iter().filter(|d| d.valid).count()
    }

    /// Debug dump: one row per feature, `x,y,z,valid,v0,...`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,valid");
        for i in 0..self.kind.dimension() {
            let _ = write!(out, ",v{i}");
        }
        out.push('\n');
        for (p, d) in self.positions.iter().zip(&self.descriptors) {
            let _ = write!(out, "{},{},{},{}", p.x, p.y, p.z, u8::from(d.valid));
            for v in &d.values {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Where to describe: a center, the reference normal at that center (if
/// known), the support radius and, when the center is a cloud point, its index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportQuery {
    pub center: Vec3,
    pub normal: Option<Vec3>,
    pub radius: f64,
    pub point_index: Option<usize>,
}

impl SupportQuery {
    pub fn at_keypoints(cloud: &PointCloud, keypoints: &KeypointSet, radius: f64) -> Vec<SupportQuery> {
        keypoints
            .indices
            .iter()
            .map(|&i| SupportQuery {
                center: cloud.position(i),
                normal: cloud.points[i].valid_normal(),
                radius,
                point_index: Some(i),
            })
            .collect()
    }

    /// Segment centroids with the bounding-sphere radius as support.
    pub fn at_segments(cloud: &PointCloud, segments: &SegmentSet) -> Vec<SupportQuery> {
        segments
            .segments
            .iter()
            .map(|s| SupportQuery {
                center: s.centroid,
                normal: segment_normal(cloud, &s.indices, &s.centroid),
                radius: s.bounding_radius(cloud).max(f64::EPSILON),
                point_index: None,
            })
            .collect()
    }
}

/// Smallest-variance direction of the segment, oriented upward (+z).
fn segment_normal(cloud: &PointCloud, indices: &[usize], centroid: &Vec3) -> Option<Vec3> {
    let cov = crate::linalg::weighted_scatter(indices.iter().map(|&i| (cloud.position(i), 1.0)), centroid);
    let eig = crate::linalg::sym_eigen(&cov);
    if !(eig.values[1] > 0.0) {
        return None;
    }
    let n = eig.vectors[2];
    Some(if n.z < 0.0 { -n } else { n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimensions() {
        assert_eq!(DescriptorKind::Fpfh.dimension(), 33);
        assert_eq!(DescriptorKind::Shot.dimension(), 352);
        assert_eq!(DescriptorKind::Esf.dimension(), 640);
        assert_eq!(Descriptor::invalid(DescriptorKind::Shot).values.len(), 352);
    }

    #[test]
    fn csv_dump_has_one_row_per_feature() {
        let mut set = FeatureSet::new(DescriptorKind::Fpfh);
        set.push(Vec3::new(1.0, 2.0, 3.0), Descriptor::invalid(DescriptorKind::Fpfh));
        let csv = set.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1].split(',').count(), 4 + 33);
        assert!(lines[1].starts_with("1,2,3,0,"));
    }
}
