use rayon::prelude::*;

use super::{Normal, PointCloud, SpatialIndex, Vec3};
use crate::linalg::{sym_eigen, weighted_scatter};
use crate::{Error, Result};

/// Half the default descriptor radius.
pub const DEFAULT_NORMAL_RADIUS: f64 = 1.0;

const MIN_NEIGHBORS: usize = 3;
/// Neighborhoods with `λ2 < MIN_PLANARITY·λ1` are lines (a single LiDAR ring,
/// say) and fix no plane.
const MIN_PLANARITY: f64 = 1e-2;

/// Fits a plane to every point's radius neighborhood and stores its normal.
/// A point that already carries a valid normal (for instance the direction
/// back to the sensor that observed it) keeps that side; others are oriented
/// toward `viewpoint`. Neighborhoods with fewer than three points or
/// near-collinear support get [`Normal::Invalid`].
pub fn estimate_normals(cloud: &PointCloud, radius: f64, viewpoint: Vec3) -> Result<PointCloud> {
    let index = SpatialIndex::new(cloud.positions());
    estimate_normals_with_index(cloud, &index, radius, viewpoint)
}

pub(crate) fn estimate_normals_with_index(
    cloud: &PointCloud,
    index: &SpatialIndex,
    radius: f64,
    viewpoint: Vec3,
) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(Error::InvalidParameter(format!("normal radius must be positive, got {radius}")));
    }
    let normals: Vec<Normal> = cloud
        .points
        .par_iter()
        .map_init(Vec::new, |buf, p| {
            index.radius_indices_into(&p.position, radius, buf);
            if buf.len() < MIN_NEIGHBORS {
                return Normal::Invalid;
            }
            let centroid = buf.iter().map(|&i| *index.point(i)).sum::<Vec3>() / buf.len() as f64;
            let cov = weighted_scatter(buf.iter().map(|&i| (*index.point(i), 1.0)), &centroid);
            let eig = sym_eigen(&cov);
            if !(eig.values[1] > MIN_PLANARITY * eig.values[0].max(f64::MIN_POSITIVE)) {
                return Normal::Invalid;
            }
            let mut n = eig.vectors[2];
            let toward = p.valid_normal().unwrap_or(viewpoint - p.position);
            if n.dot(&toward) < 0.0 {
                n = -n;
            }
            Normal::from_vector(n)
        })
        .collect();
    let mut out = cloud.clone();
    for (p, n) in out.points.iter_mut().zip(normals) {
        p.normal = Some(n);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_normals_point_up() {
        let pts: Vec<Vec3> = (0..20)
            .flat_map(|x| (0..20).map(move |y| Vec3::new(x as f64 * 0.2, y as f64 * 0.2, 0.0)))
            .collect();
        let out = estimate_normals(&PointCloud::from_positions("", pts), 0.5, Vec3::new(0.0, 0.0, 10.0)).unwrap();
        for p in &out.points {
            let n = p.valid_normal().expect("valid");
            assert!((n - Vec3::z()).norm() < 1e-6);
        }
    }

    #[test]
    fn isolated_point_is_flagged() {
        let pts = vec![Vec3::zeros(), Vec3::new(0.1, 0.0, 0.0), Vec3::new(0.0, 0.1, 0.0), Vec3::new(50.0, 0.0, 0.0)];
        let out = estimate_normals(&PointCloud::from_positions("", pts), 0.5, Vec3::z() * 10.0).unwrap();
        assert_eq!(out.points[3].normal, Some(Normal::Invalid));
        assert!(out.points[0].valid_normal().is_some());
        assert!(out.has_normals());
    }

    #[test]
    fn sphere_normals_are_radial() {
        // Fibonacci sphere sampling.
        let n = 4000;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                let r = (1.0 - z * z).sqrt();
                let t = golden * i as f64;
                Vec3::new(r * t.cos(), r * t.sin(), z)
            })
            .collect();
        let out = estimate_normals(&PointCloud::from_positions("", pts), 0.15, Vec3::new(0.0, 0.0, 100.0)).unwrap();
        let tol = 2f64.to_radians().cos();
        for p in out.points.iter().filter(|p| p.position.z.abs() > 0.9) {
            let n = p.valid_normal().unwrap();
            assert!(n.dot(&p.position.normalize()).abs() >= tol);
            assert!((n.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_radius() {
        let cloud = PointCloud::from_positions("", [Vec3::zeros()]);
        assert!(estimate_normals(&cloud, 0.0, Vec3::zeros()).is_err());
    }
}
