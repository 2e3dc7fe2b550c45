//! Point-cloud representation and the primitives every later stage uses.

mod filter;
mod io;
mod kdtree;
mod normals;
mod transform;

pub use filter::voxel_downsample;
pub use io::{parse_cloud, read_cloud, write_cloud, write_cloud_file, write_cloud_to, CloudFormat};
pub use kdtree::{build_index, Neighbor, SpatialIndex};
pub use normals::{estimate_normals, DEFAULT_NORMAL_RADIUS};
pub use transform::RigidTransform;

pub type Vec3 = nalgebra::Vector3<f64>;

const UNIT_TOLERANCE: f64 = 1e-6;

/// Surface normal attached to a point. Degenerate neighborhoods yield
/// `Invalid` instead of a made-up direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normal {
    Valid(Vec3),
    Invalid,
}

impl Normal {
    /// Normalizes `v`; zero or non-finite vectors become `Invalid`.
    pub fn from_vector(v: Vec3) -> Self {
        let n = v.norm();
        if n.is_finite() && n > 1e-12 {
            Normal::Valid(v / n)
        } else {
            Normal::Invalid
        }
    }

    pub fn valid(&self) -> Option<Vec3> {
        match self {
            Normal::Valid(n) => Some(*n),
            Normal::Invalid => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub position: Vec3,
    pub normal: Option<Normal>,
    pub color: Option<[u8; 3]>,
}

impl Point {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self::from_position(Vec3::new(x, y, z))
    }

    pub fn from_position(position: Vec3) -> Self {
        Self {
            position,
            normal: None,
            color: None,
        }
    }

    pub fn valid_normal(&self) -> Option<Vec3> {
        self.normal.and_then(|n| n.valid())
    }
}

/// Ordered set of points in one coordinate frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>) -> Self {
        Self {
            points: Vec::new(),
            frame_id: frame_id.into(),
        }
    }

    pub fn from_positions(frame_id: impl Into<String>, positions: impl IntoIterator<Item = Vec3>) -> Self {
        Self {
            points: positions.into_iter().map(Point::from_position).collect(),
            frame_id: frame_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// True iff every point carries a normal (valid or flagged invalid).
    pub fn has_normals(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.normal.is_some())
    }

    pub fn has_colors(&self) -> bool {
        !self.points.is_empty() && self.points.iter().all(|p| p.color.is_some())
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn position(&self, i: usize) -> Vec3 {
        self.points[i].position
    }

    pub fn bounds(&self) -> Option<Aabb> {
        Aabb::from_points(self.points.iter().map(|p| p.position))
    }

    /// Points at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            frame_id: self.frame_id.clone(),
        }
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend(other.points.iter().cloned());
    }

    /// Maps positions `p ↦ Rp + t` and normals `n ↦ Rn`; colors are kept.
    pub fn transformed(&self, transform: &RigidTransform) -> PointCloud {
        let points = self
            .points
            .iter()
            .map(|p| Point {
                position: transform.apply_point(&p.position),
                normal: p.normal.map(|n| match n {
                    Normal::Valid(v) => Normal::Valid(transform.apply_vector(&v)),
                    Normal::Invalid => Normal::Invalid,
                }),
                color: p.color,
            })
            .collect();
        PointCloud {
            points,
            frame_id: self.frame_id.clone(),
        }
    }

    /// Checks the per-point invariants (finite positions, unit normals).
    pub fn validate(&self) -> crate::Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.position.iter().all(|c| c.is_finite()) {
                return Err(crate::Error::InvalidParameter(format!(
                    "point {i} has a non-finite coordinate"
                )));
            }
            if let Some(Normal::Valid(n)) = p.normal {
                if (n.norm() - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(crate::Error::InvalidParameter(format!(
                        "point {i} has a non-unit normal"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Free-function form used by the pipeline.
pub fn apply_transform(cloud: &PointCloud, transform: &RigidTransform) -> PointCloud {
    cloud.transformed(transform)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn from_points(points: impl IntoIterator<Item = Vec3>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let (min, max) = iter.fold((first, first), |(lo, hi), p| (lo.inf(&p), hi.sup(&p)));
        Some(Self { min, max })
    }

    pub fn is_valid(&self) -> bool {
        self.min.iter().chain(self.max.iter()).all(|c| c.is_finite())
            && (0..3).all(|k| self.min[k] <= self.max[k])
    }

    pub fn expanded(&self, margin: f64) -> Self {
        let m = Vec3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn union(&self, other: &Aabb) -> Self {
        Self {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Bounds of this box after a rigid motion (box of the 8 moved corners).
    pub fn transformed(&self, transform: &RigidTransform) -> Self {
        let corners = (0..8).map(|c| {
            let pick = |k: usize| if c & (1 << k) == 0 { self.min[k] } else { self.max[k] };
            transform.apply_point(&Vec3::new(pick(0), pick(1), pick(2)))
        });
        Aabb::from_points(corners).expect("eight corners")
    }
}
