use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rayon::prelude::*;

use super::{Descriptor, DescriptorKind, FeatureSet, SupportQuery, DEFAULT_DESCRIPTOR_RADIUS};
use crate::cloud::{PointCloud, SpatialIndex, Vec3};
use crate::linalg::sym_eigen;

pub const SHOT_COS_BINS: usize = 11;
const AZIMUTH: usize = 8;
const ELEVATION: usize = 2;
const RADIAL: usize = 2;
const DIM: usize = AZIMUTH * ELEVATION * RADIAL * SHOT_COS_BINS;
const EIGEN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotParams {
    pub radius: f64,
    /// Soft-bin each neighbor across adjacent cells in all four dimensions.
    /// Hard binning is for debugging only.
    pub interpolate: bool,
}

impl Default for ShotParams {
    fn default() -> Self {
        Self { radius: DEFAULT_DESCRIPTOR_RADIUS, interpolate: true }
    }
}

/// Orthonormal, right-handed local reference frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl LocalFrame {
    /// From the `(R − dᵢ)`-weighted scatter around `center`; axes signed toward
    /// the majority of neighbors. `None` for repeated eigenvalues.
    pub fn estimate(center: &Vec3, neighbors: &[Vec3], radius: f64) -> Option<LocalFrame> {
        let mut cov = nalgebra::Matrix3::zeros();
        let mut total = 0.0;
        for p in neighbors {
            let d = p - center;
            let w = radius - d.norm();
            if w > 0.0 {
                cov += w * d * d.transpose();
                total += w;
            }
        }
        if !(total > 0.0) {
            return None;
        }
        let eig = sym_eigen(&(cov / total));
        let [l1, l2, l3] = eig.values;
        if !(l1 > 0.0) || l1 - l2 <= EIGEN_GAP * l1 || l2 - l3 <= EIGEN_GAP * l1 {
            return None;
        }
        // Sign toward the majority of neighbors. Zero projections (the center
        // itself) vote for neither side; an exact tie falls back to the sign of
        // the weighted mean projection so the solver's arbitrary sign never leaks.
        let disambiguate = |axis: Vec3| {
            let (mut positive, mut negative, mut mean) = (0usize, 0usize, 0.0);
            for p in neighbors {
                let d = p - center;
                let s = d.dot(&axis);
                positive += usize::from(s > 0.0);
                negative += usize::from(s < 0.0);
                mean += (radius - d.norm()).max(0.0) * s;
            }
            let flip = if positive == negative { mean < 0.0 } else { positive < negative };
            if flip { -axis } else { axis }
        };
        let x = disambiguate(eig.vectors[0]);
        let z = disambiguate(eig.vectors[2]);
        Some(LocalFrame { x, y: z.cross(&x), z })
    }

    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        Vec3::new(self.x.dot(v), self.y.dot(v), self.z.dot(v))
    }
}

/// Linear split of a continuous bin coordinate (bin centers at integers).
fn clamped_split(c: f64, bins: usize) -> [(usize, f64); 2] {
    let last = (bins - 1) as f64;
    if c <= 0.0 {
        [(0, 1.0), (0, 0.0)]
    } else if c >= last {
        [(bins - 1, 1.0), (bins - 1, 0.0)]
    } else {
        let b = c.floor();
        let f = c - b;
        [(b as usize, 1.0 - f), (b as usize + 1, f)]
    }
}

fn wrapped_split(c: f64, bins: usize) -> [(usize, f64); 2] {
    let b = c.floor();
    let f = c - b;
    let lo = (b as i64).rem_euclid(bins as i64) as usize;
    [(lo, 1.0 - f), ((lo + 1) % bins, f)]
}

fn hard(c: usize, bins: usize) -> [(usize, f64); 2] {
    let c = c.min(bins - 1);
    [(c, 1.0), (c, 0.0)]
}

/// Accumulates the unnormalized 352-bin signature of one support.
///
/// Cells: 8 azimuth × 2 elevation × 2 radial sectors of the frame, each an
/// 11-bin histogram of `cos(n_i, reference_normal)`.
pub(crate) fn accumulate(
    frame: &LocalFrame,
    center: &Vec3,
    reference_normal: &Vec3,
    neighbors: impl Iterator<Item = (Vec3, Vec3)>,
    radius: f64,
    interpolate: bool,
) -> Vec<f64> {
    let mut h = vec![0.0; DIM];
    for (p, n) in neighbors {
        let local = frame.to_local(&(p - center));
        let dist = local.norm();
        if dist == 0.0 || dist > radius {
            continue;
        }
        let cos = n.dot(reference_normal).clamp(-1.0, 1.0);
        let azimuth = local.y.atan2(local.x).rem_euclid(2.0 * PI);
        let elevation = local.z.atan2((local.x * local.x + local.y * local.y).sqrt());

        let (az, el, rad, cb) = if interpolate {
            (
                wrapped_split(azimuth / FRAC_PI_4 - 0.5, AZIMUTH),
                clamped_split((elevation + FRAC_PI_2) / FRAC_PI_2 - 0.5, ELEVATION),
                clamped_split(dist / (radius / 2.0) - 0.5, RADIAL),
                clamped_split((cos + 1.0) / 2.0 * SHOT_COS_BINS as f64 - 0.5, SHOT_COS_BINS),
            )
        } else {
            (
                hard((azimuth / FRAC_PI_4).floor() as usize % AZIMUTH, AZIMUTH),
                hard(usize::from(elevation >= 0.0), ELEVATION),
                hard(usize::from(dist > radius / 2.0), RADIAL),
                hard(((cos + 1.0) / 2.0 * SHOT_COS_BINS as f64).floor() as usize, SHOT_COS_BINS),
            )
        };
        for (a, wa) in az {
            for (e, we) in el {
                for (r, wr) in rad {
                    let volume = (r * ELEVATION + e) * AZIMUTH + a;
                    for (c, wc) in cb {
                        let w = wa * we * wr * wc;
                        if w > 0.0 {
                            h[volume * SHOT_COS_BINS + c] += w;
                        }
                    }
                }
            }
        }
    }
    h
}

/// SHOT signatures, L2-normalized. Degenerate frames or empty supports give
/// invalid descriptors. Queries without a normal use the frame's z axis as
/// the reference direction.
pub fn compute_shot(cloud: &PointCloud, queries: &[SupportQuery], params: &ShotParams) -> FeatureSet {
    let index = SpatialIndex::new(cloud.positions());
    compute_with_index(cloud, &index, queries, params)
}

pub(crate) fn compute_with_index(
    cloud: &PointCloud,
    index: &SpatialIndex,
    queries: &[SupportQuery],
    params: &ShotParams,
) -> FeatureSet {
    let descriptors = queries
        .par_iter()
        .map_init(Vec::new, |buf, q| {
            index.radius_indices_into(&q.center, q.radius, buf);
            buf.sort_unstable();
            let support: Vec<Vec3> = buf.iter().map(|&i| cloud.position(i)).collect();
            let Some(frame) = LocalFrame::estimate(&q.center, &support, q.radius) else {
                return Descriptor::invalid(DescriptorKind::Shot);
            };
            let reference = q.normal.unwrap_or(frame.z);
            let oriented = buf
                .iter()
                .filter_map(|&i| cloud.points[i].valid_normal().map(|n| (cloud.position(i), n)));
            let mut h = accumulate(&frame, &q.center, &reference, oriented, q.radius, params.interpolate);
            let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Descriptor::invalid(DescriptorKind::Shot);
            }
            h.iter_mut().for_each(|v| *v /= norm);
            Descriptor::new(DescriptorKind::Shot, h)
        })
        .collect();
    FeatureSet {
        kind: DescriptorKind::Shot,
        positions: queries.iter().map(|q| q.center).collect(),
        descriptors,
    }
}
