//! Oracles and fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use cloudreg::cloud::Normal;
use cloudreg::correspond::{Correspondence, CorrespondenceSet};
use cloudreg::eval::alignment_error;
use cloudreg::{PointCloud, RigidTransform, Vec3};
use nalgebra::{Quaternion, UnitQuaternion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as Gaussian, StandardNormal};

/// Bumpy surface patch with perturbed analytic normals, so no pair sits on a
/// bin edge or a frame ambiguity by construction.
pub fn bumpy_patch(seed: u64, n: usize, half: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cloud = PointCloud::new("patch");
    for _ in 0..n {
        let x = rng.random_range(-half..half);
        let y = rng.random_range(-half..half);
        let z = 0.4 * (1.3 * x).sin() * (0.9 * y).cos() + 0.15 * x * y;
        let gx = 0.52 * (1.3 * x).cos() * (0.9 * y).cos() + 0.15 * y;
        let gy = -0.36 * (1.3 * x).sin() * (0.9 * y).sin() + 0.15 * x;
        let jitter = Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
        let mut p = cloudreg::Point::from_position(Vec3::new(x, y, z));
        p.normal = Some(Normal::from_vector(Vec3::new(-gx, -gy, 1.0).normalize() + jitter));
        cloud.points.push(p);
    }
    cloud
}

pub fn oriented(cloud: &PointCloud) -> Vec<(Vec3, Vec3)> {
    cloud.points.iter().map(|p| (p.position, p.valid_normal().unwrap())).collect()
}

/// Darboux-frame angles straight from the definition: the source normal makes
/// the smaller angle with the connecting line.
pub fn oracle_pair(a: &(Vec3, Vec3), b: &(Vec3, Vec3)) -> [f64; 3] {
    let line = (b.0 - a.0).normalize();
    let angle_a = a.1.dot(&line).abs().acos();
    let angle_b = b.1.dot(&line).abs().acos();
    let (s, t, d) = if angle_b < angle_a { (b, a, -line) } else { (a, b, line) };
    let u = s.1;
    let v = u.cross(&d).normalize();
    let w = u.cross(&v);
    [v.dot(&t.1), u.dot(&d), w.dot(&t.1).atan2(u.dot(&t.1))]
}

pub fn oracle_bin(value: f64, lo: f64, hi: f64) -> usize {
    let mut b = 0;
    while b < 10 && value >= lo + (b + 1) as f64 * (hi - lo) / 11.0 {
        b += 1;
    }
    b
}

pub fn oracle_spfh(center: &(Vec3, Vec3), all: &[(Vec3, Vec3)], radius: f64) -> [f64; 33] {
    let nbrs: Vec<&(Vec3, Vec3)> =
        all.iter().filter(|p| (p.0 - center.0).norm() <= radius && p.0 != center.0).collect();
    let mut h = [0.0; 33];
    for p in &nbrs {
        let [alpha, phi, theta] = oracle_pair(center, p);
        h[oracle_bin(alpha, -1.0, 1.0)] += 100.0 / nbrs.len() as f64;
        h[11 + oracle_bin(phi, -1.0, 1.0)] += 100.0 / nbrs.len() as f64;
        h[22 + oracle_bin(theta, -PI, PI)] += 100.0 / nbrs.len() as f64;
    }
    h
}

pub fn oracle_fpfh(query: &(Vec3, Vec3), all: &[(Vec3, Vec3)], radius: f64, spfh_radius: f64) -> [f64; 33] {
    let support: Vec<&(Vec3, Vec3)> =
        all.iter().filter(|p| (p.0 - query.0).norm() <= radius && p.0 != query.0).collect();
    let mut h = oracle_spfh(query, all, radius);
    for p in &support {
        let weight = 1.0 / (support.len() as f64 * (p.0 - query.0).norm());
        let s = oracle_spfh(p, all, spfh_radius);
        for b in 0..33 {
            h[b] += weight * s[b];
        }
    }
    for block in h.chunks_mut(11) {
        let sum: f64 = block.iter().sum();
        block.iter_mut().for_each(|v| *v *= 100.0 / sum);
    }
    h
}

pub fn random_quaternion(rng: &mut ChaCha8Rng) -> UnitQuaternion<f64> {
    let q: [f64; 4] = std::array::from_fn(|_| StandardNormal.sample(rng));
    UnitQuaternion::from_quaternion(Quaternion::new(q[0], q[1], q[2], q[3]))
}

pub fn random_vec(rng: &mut ChaCha8Rng, half: f64) -> Vec3 {
    Vec3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
}

pub fn transform_from(q: &UnitQuaternion<f64>, t: Vec3) -> RigidTransform {
    RigidTransform::new(q.to_rotation_matrix().into_inner(), t).unwrap()
}

pub fn random_transform(rng: &mut ChaCha8Rng, half: f64) -> RigidTransform {
    let q = random_quaternion(rng);
    transform_from(&q, random_vec(rng, half))
}

/// Rotation angle and translation of `q_gt⁻¹ q_est` computed on quaternions.
pub fn quaternion_oracle(q_est: &UnitQuaternion<f64>, t_est: &Vec3, q_gt: &UnitQuaternion<f64>, t_gt: &Vec3) -> (f64, f64) {
    let dq = q_gt.inverse() * q_est;
    let e_t = (q_gt.inverse() * (t_est - t_gt)).norm();
    let e_r = 2.0 * dq.imag().norm().atan2(dq.w.abs());
    (e_t, e_r)
}

/// `inliers` pairs consistent with `truth` (with small noise), then
/// uniformly random outliers; correspondence i pairs source i with target i.
pub fn planted(rng: &mut ChaCha8Rng, truth: &RigidTransform, inliers: usize, outliers: usize, noise: f64) -> (Vec<Vec3>, Vec<Vec3>, CorrespondenceSet) {
    let gauss = Gaussian::new(0.0, noise).unwrap();
    let mut source = Vec::new();
    let mut target = Vec::new();
    for i in 0..inliers + outliers {
        let p = random_vec(rng, 25.0);
        source.push(p);
        if i < inliers {
            let jitter = Vec3::new(gauss.sample(rng), gauss.sample(rng), gauss.sample(rng));
            target.push(truth.apply_point(&p) + jitter);
        } else {
            target.push(truth.apply_point(&random_vec(rng, 25.0)));
        }
    }
    let n = source.len();
    let set = CorrespondenceSet { pairs: (0..n).map(|i| Correspondence { source: i, target: i, distance: 0.0 }).collect() };
    (source, target, set)
}

pub fn recovered(estimate: &RigidTransform, truth: &RigidTransform) -> bool {
    let err = alignment_error(estimate, truth);
    err.e_r.to_degrees() < 0.5 && err.e_t < 0.1
}

/// Irregular, non-symmetric surface: a wavy floor and two tilted slabs.
pub fn structured_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let points = (0..n).map(|i| {
        let (u, v) = (rng.random_range(-5.0..5.0), rng.random_range(-4.0..4.0));
        match i % 3 {
            0 => Vec3::new(u, v, 0.5 * (0.7 * u).sin() + 0.3 * (1.1 * v).cos()),
            1 => Vec3::new(2.0 + 0.2 * v, v * 0.5, 1.0 + u.abs() * 0.4),
            _ => Vec3::new(u * 0.6, -3.0 + 0.3 * u, 0.5 + v.abs() * 0.5),
        }
    });
    PointCloud::from_positions("structured", points.collect::<Vec<_>>())
}

