use std::collections::BTreeMap;

use super::{Normal, Point, PointCloud, Vec3};
use crate::{Error, Result};

#[derive(Default)]
struct Accumulator {
    position: Vec3,
    normal: Vec3,
    normal_count: usize,
    color: [u32; 3],
    count: usize,
}

/// Replaces the points of every occupied voxel with their centroid.
///
/// Output is ordered by voxel key, so it does not depend on input order
/// beyond floating-point summation order within a voxel.
pub fn voxel_downsample(cloud: &PointCloud, leaf_size: f64) -> Result<PointCloud> {
    if !(leaf_size > 0.0) || !leaf_size.is_finite() {
        return Err(Error::InvalidParameter(format!("leaf size must be positive, got {leaf_size}")));
    }
    let has_normals = cloud.has_normals();
    let has_colors = cloud.has_colors();
    let mut voxels: BTreeMap<[i64; 3], Accumulator> = BTreeMap::new();
    for p in &cloud.points {
        let key = [0, 1, 2].map(|k| (p.position[k] / leaf_size).floor() as i64);
        let acc = voxels.entry(key).or_default();
        acc.position += p.position;
        acc.count += 1;
        if let Some(n) = p.valid_normal() {
            acc.normal += n;
            acc.normal_count += 1;
        }
        if let Some(c) = p.color {
            for (sum, v) in acc.color.iter_mut().zip(c) {
                *sum += v as u32;
            }
        }
    }
    let points = voxels
        .into_values()
        .map(|acc| {
            let n = acc.count as f64;
            Point {
                position: acc.position / n,
                normal: has_normals.then(|| {
                    if acc.normal_count > 0 {
                        Normal::from_vector(acc.normal)
                    } else {
                        Normal::Invalid
                    }
                }),
                color: has_colors.then(|| acc.color.map(|c| ((c as f64) / n).round() as u8)),
            }
        })
        .collect();
    Ok(PointCloud { points, frame_id: cloud.frame_id.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashMap;

    #[test]
    fn duplicates_collapse() {
        let cloud = PointCloud::from_positions("", [Vec3::new(0.3, 0.3, 0.3); 2]);
        let out = voxel_downsample(&cloud, 0.1).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.points[0].position, Vec3::new(0.3, 0.3, 0.3));
    }

    #[test]
    fn distinct_voxels_survive() {
        let cloud = PointCloud::from_positions("", [Vec3::zeros(), Vec3::new(10.0, 0.0, 0.0)]);
        assert_eq!(voxel_downsample(&cloud, 1.0).unwrap().len(), 2);
    }

    #[test]
    fn rejects_non_positive_leaf() {
        let cloud = PointCloud::from_positions("", [Vec3::zeros()]);
        assert!(matches!(voxel_downsample(&cloud, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(voxel_downsample(&cloud, -1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn unit_cube_octants_match_hash_grid() {
        let mut rng = crate::rng::seeded(3);
        let pts: Vec<Vec3> = (0..10_000).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let out = voxel_downsample(&PointCloud::from_positions("", pts.clone()), 0.5).unwrap();
        assert_eq!(out.len(), 8);

        let mut grid: HashMap<(bool, bool, bool), (Vec3, usize)> = HashMap::new();
        for p in &pts {
            let e = grid.entry((p.x >= 0.5, p.y >= 0.5, p.z >= 0.5)).or_insert((Vec3::zeros(), 0));
            e.0 += p;
            e.1 += 1;
        }
        for q in &out.points {
            let key = (q.position.x >= 0.5, q.position.y >= 0.5, q.position.z >= 0.5);
            let (sum, n) = grid[&key];
            assert!((q.position - sum / n as f64).norm() < 1e-12);
        }
    }

    #[test]
    fn idempotent_once_sparse() {
        let mut rng = crate::rng::seeded(4);
        let pts: Vec<Vec3> = (0..500).map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 10.0).collect();
        let once = voxel_downsample(&PointCloud::from_positions("", pts), 1.0).unwrap();
        let twice = voxel_downsample(&once, 1.0).unwrap();
        assert_eq!(once, twice);
    }
}
