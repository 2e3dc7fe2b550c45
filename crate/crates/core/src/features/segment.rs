use crate::cloud::{PointCloud, SpatialIndex, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    pub tolerance: f64,
    pub min_size: usize,
    pub max_size: usize,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self { tolerance: 0.5, min_size: 30, max_size: 50_000 }
    }
}

impl SegmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter("segmentation tolerance must be positive".into()));
        }
        if self.min_size == 0 || self.min_size > self.max_size {
            return Err(Error::InvalidParameter("segment sizes must satisfy 0 < min ≤ max".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    /// Sorted member indices.
    pub indices: Vec<usize>,
    pub centroid: Vec3,
}

impl Segment {
    /// Largest distance from the centroid to a member.
    pub fn bounding_radius(&self, cloud: &PointCloud) -> f64 {
        self.indices
            .iter()
            .map(|&i| (cloud.position(i) - self.centroid).norm())
            .fold(0.0, f64::max)
    }
}

/// Segments ordered by their smallest member index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SegmentSet {
    pub segments: Vec<Segment>,
}

impl SegmentSet {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Connected components of the "within `tolerance`" graph, size-filtered.
pub fn segment_euclidean(cloud: &PointCloud, params: &SegmentParams) -> Result<SegmentSet> {
    params.validate()?;
    let index = SpatialIndex::new(cloud.positions());
    let mut visited = vec![false; cloud.len()];
    let mut segments = Vec::new();
    let mut frontier = Vec::new();
    let mut buf = Vec::new();
    for seed in 0..cloud.len() {
        if visited[seed] {
            continue;
        }
        visited[seed] = true;
        let mut members = vec![seed];
        frontier.push(seed);
        while let Some(i) = frontier.pop() {
            index.radius_indices_into(index.point(i), params.tolerance, &mut buf);
            for &j in &buf {
                if !visited[j] {
                    visited[j] = true;
                    members.push(j);
                    frontier.push(j);
                }
            }
        }
        if (params.min_size..=params.max_size).contains(&members.len()) {
            members.sort_unstable();
            let centroid = members.iter().map(|&i| cloud.position(i)).sum::<Vec3>() / members.len() as f64;
            segments.push(Segment { indices: members, centroid });
        }
    }
    Ok(SegmentSet { segments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blob(center: Vec3, n: usize, rng: &mut impl Rng) -> Vec<Vec3> {
        (0..n)
            .map(|_| center + Vec3::new(rng.random(), rng.random(), rng.random()) * 0.5)
            .collect()
    }

    #[test]
    fn two_blobs() {
        let mut rng = crate::rng::seeded(1);
        let mut pts = blob(Vec3::zeros(), 100, &mut rng);
        pts.extend(blob(Vec3::new(10.0, 0.0, 0.0), 100, &mut rng));
        let cloud = PointCloud::from_positions("", pts);
        let params = SegmentParams { tolerance: 1.0, min_size: 10, max_size: 1000 };
        let segs = segment_euclidean(&cloud, &params).unwrap();
        assert_eq!(segs.len(), 2);
        assert!(segs.segments.iter().all(|s| s.indices.len() == 100));
        let merged = segment_euclidean(&cloud, &SegmentParams { tolerance: 20.0, ..params }).unwrap();
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.segments[0].indices.len(), 200);
    }

    #[test]
    fn size_filter() {
        let mut rng = crate::rng::seeded(2);
        let mut pts = blob(Vec3::zeros(), 50, &mut rng);
        pts.extend(blob(Vec3::new(10.0, 0.0, 0.0), 5, &mut rng));
        let cloud = PointCloud::from_positions("", pts);
        let segs = segment_euclidean(&cloud, &SegmentParams { tolerance: 1.0, min_size: 10, max_size: 40 }).unwrap();
        assert!(segs.is_empty());
    }
}
