use std::f64::consts::PI;

use rayon::prelude::*;

use super::{Descriptor, DescriptorKind, FeatureSet, SupportQuery, DEFAULT_DESCRIPTOR_RADIUS};
use crate::cloud::{PointCloud, SpatialIndex, Vec3};

pub const FPFH_BINS: usize = 11;
const DIM: usize = 3 * FPFH_BINS;
const MIN_NEIGHBORS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FpfhParams {
    /// Support radius of the final histogram.
    pub radius: f64,
    /// Neighborhood radius of each point's simplified histogram.
    pub spfh_radius: f64,
}

impl Default for FpfhParams {
    fn default() -> Self {
        Self { radius: DEFAULT_DESCRIPTOR_RADIUS, spfh_radius: DEFAULT_DESCRIPTOR_RADIUS }
    }
}

/// Darboux-frame angles of an oriented point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    /// `v·n_t ∈ [−1, 1]`
    pub alpha: f64,
    /// `u·d̂ ∈ [−1, 1]`
    pub phi: f64,
    /// `atan2(w·n_t, u·n_t) ∈ [−π, π]`
    pub theta: f64,
}

/// The source is the point whose normal is closer to the connecting line;
/// frame `u = n_s`, `v = u × d̂`, `w = u × v`. `None` when the points coincide
/// or the normal is parallel to the connecting line.
pub fn pair_features(p1: &Vec3, n1: &Vec3, p2: &Vec3, n2: &Vec3) -> Option<PairFeatures> {
    let d = p2 - p1;
    let dist = d.norm();
    if dist == 0.0 {
        return None;
    }
    let mut dn = d / dist;
    let (mut ns, mut nt) = (n1, n2);
    if n1.dot(&dn).abs() < n2.dot(&dn).abs() {
        std::mem::swap(&mut ns, &mut nt);
        dn = -dn;
    }
    let u = *ns;
    let v = u.cross(&dn);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return None;
    }
    let v = v / v_norm;
    let w = u.cross(&v);
    Some(PairFeatures {
        alpha: v.dot(nt),
        phi: u.dot(&dn),
        theta: w.dot(nt).atan2(u.dot(nt)),
    })
}

fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * FPFH_BINS as f64).floor();
    b.clamp(0.0, (FPFH_BINS - 1) as f64) as usize
}

/// Simplified histogram of `center` against `neighbors` (positions with
/// valid normals, center excluded). Each pair adds `100/|neighbors|`.
fn spfh(center: &Vec3, normal: &Vec3, neighbors: &[(Vec3, Vec3)]) -> [f64; DIM] {
    let mut h = [0.0; DIM];
    if neighbors.is_empty() {
        return h;
    }
    let inc = 100.0 / neighbors.len() as f64;
    for (p, n) in neighbors {
        if let Some(f) = pair_features(center, normal, p, n) {
            h[bin(f.alpha, -1.0, 1.0)] += inc;
            h[FPFH_BINS + bin(f.phi, -1.0, 1.0)] += inc;
            h[2 * FPFH_BINS + bin(f.theta, -PI, PI)] += inc;
        }
    }
    h
}

fn oriented_neighbors(cloud: &PointCloud, index: &SpatialIndex, center: &Vec3, radius: f64) -> Vec<(usize, Vec3, Vec3)> {
    index
        .radius_search(center, radius)
        .into_iter()
        .filter(|nb| nb.distance > 0.0)
        .filter_map(|nb| {
            cloud.points[nb.index]
                .valid_normal()
                .map(|n| (nb.index, cloud.position(nb.index), n))
        })
        .collect()
}

/// FPFH at each query: `SPFH(q) + (1/k) Σ SPFH(pᵢ)/‖pᵢ − q‖` over the
/// valid-normal neighbors within the query radius, each 11-bin block then
/// scaled to sum to 100. Queries with fewer than two such neighbors or
/// without a normal yield an invalid zero descriptor.
pub fn compute_fpfh(cloud: &PointCloud, queries: &[SupportQuery], params: &FpfhParams) -> FeatureSet {
    let index = SpatialIndex::new(cloud.positions());
    compute_with_index(cloud, &index, queries, params)
}

pub(crate) fn compute_with_index(
    cloud: &PointCloud,
    index: &SpatialIndex,
    queries: &[SupportQuery],
    params: &FpfhParams,
) -> FeatureSet {
    let supports: Vec<Vec<(usize, Vec3, Vec3)>> = queries
        .par_iter()
        .map(|q| oriented_neighbors(cloud, index, &q.center, q.radius))
        .collect();

    let mut needed: Vec<usize> = supports.iter().flatten().map(|(i, _, _)| *i).collect();
    needed.sort_unstable();
    needed.dedup();
    let spfh_cache: Vec<[f64; DIM]> = needed
        .par_iter()
        .map(|&i| {
            let p = cloud.position(i);
            let n = cloud.points[i].valid_normal().expect("filtered to valid normals");
            let nbs: Vec<(Vec3, Vec3)> = oriented_neighbors(cloud, index, &p, params.spfh_radius)
                .into_iter()
                .map(|(_, q, m)| (q, m))
                .collect();
            spfh(&p, &n, &nbs)
        })
        .collect();
    let lookup = |i: usize| &spfh_cache[needed.binary_search(&i).expect("cached")];

    let descriptors: Vec<Descriptor> = queries
        .par_iter()
        .zip(&supports)
        .map(|(q, support)| {
            let Some(normal) = q.normal else {
                return Descriptor::invalid(DescriptorKind::Fpfh);
            };
            if support.len() < MIN_NEIGHBORS {
                return Descriptor::invalid(DescriptorKind::Fpfh);
            }
            let pairs: Vec<(Vec3, Vec3)> = support.iter().map(|(_, p, n)| (*p, *n)).collect();
            let mut h = spfh(&q.center, &normal, &pairs);
            let k = support.len() as f64;
            for (i, p, _) in support {
                let w = (p - q.center).norm();
                for (dst, src) in h.iter_mut().zip(lookup(*i)) {
                    *dst += src / (k * w);
                }
            }
            for block in h.chunks_mut(FPFH_BINS) {
                let sum: f64 = block.iter().sum();
                if sum > 0.0 {
                    block.iter_mut().for_each(|v| *v *= 100.0 / sum);
                }
            }
            Descriptor::new(DescriptorKind::Fpfh, h.to_vec())
        })
        .collect();

    FeatureSet {
        kind: DescriptorKind::Fpfh,
        positions: queries.iter().map(|q| q.center).collect(),
        descriptors,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Normal;

    #[test]
    fn coplanar_constant_normals_fill_one_bin_per_block() {
        let mut cloud = PointCloud::from_positions(
            "",
            (0..15).flat_map(|x| (0..15).map(move |y| Vec3::new(x as f64 * 0.3, y as f64 * 0.3, 0.0))),
        );
        for p in &mut cloud.points {
            p.normal = Some(Normal::Valid(Vec3::z()));
        }
        let q = SupportQuery { center: cloud.position(112), normal: Some(Vec3::z()), radius: 2.0, point_index: Some(112) };
        let set = compute_fpfh(&cloud, &[q], &FpfhParams::default());
        let d = &set.descriptors[0];
        assert!(d.valid);
        for block in d.values.chunks(FPFH_BINS) {
            let nonzero: Vec<&f64> = block.iter().filter(|v| **v != 0.0).collect();
            assert_eq!(nonzero.len(), 1);
            assert!((nonzero[0] - 100.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sparse_support_is_invalid() {
        let mut cloud = PointCloud::from_positions("", [Vec3::zeros(), Vec3::x()]);
        for p in &mut cloud.points {
            p.normal = Some(Normal::Valid(Vec3::z()));
        }
        let q = SupportQuery { center: Vec3::zeros(), normal: Some(Vec3::z()), radius: 2.0, point_index: Some(0) };
        let d = &compute_fpfh(&cloud, &[q], &FpfhParams::default()).descriptors[0];
        assert!(!d.valid);
        assert!(d.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pair_features_are_symmetric_in_argument_order() {
        let p1 = Vec3::new(0.1, 0.2, 0.3);
        let p2 = Vec3::new(1.0, -0.5, 0.7);
        let n1 = Vec3::new(0.2, 0.3, 1.0).normalize();
        let n2 = Vec3::new(-0.4, 0.1, 1.0).normalize();
        assert_eq!(pair_features(&p1, &n1, &p2, &n2), pair_features(&p2, &n2, &p1, &n1));
    }
}
