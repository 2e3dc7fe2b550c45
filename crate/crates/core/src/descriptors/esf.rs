use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use super::{Descriptor, DescriptorKind, FeatureSet};
use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};
use crate::features::SegmentSet;
use crate::rng;

/// Bins per sub-histogram.
pub const ESF_BINS: usize = 64;
/// Sub-histogram layout, in order: D2 in/out/mixed, D2 occupancy ratio,
/// D3 in/out/mixed, A3 in/out/mixed. Each named group sums to one.
pub const ESF_GROUPS: [(&str, usize); 4] = [("d2", 3), ("ratio", 1), ("d3", 3), ("a3", 3)];

const MIN_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EsfParams {
    pub samples: usize,
    /// Voxels per side of the occupancy grid.
    pub grid: usize,
    /// Distance and sqrt-area histograms span `[0, max_distance]` meters.
    pub max_distance: f64,
}

impl Default for EsfParams {
    fn default() -> Self {
        Self { samples: 20_000, grid: 64, max_distance: 20.0 }
    }
}

impl EsfParams {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.grid < 2 || !(self.max_distance > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid ESF parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Class {
    In,
    Out,
    Mixed,
}

impl Class {
    fn offset(self) -> usize {
        match self {
            Class::In => 0,
            Class::Out => 1,
            Class::Mixed => 2,
        }
    }
}

struct Grid {
    min: Vec3,
    cell: f64,
    side: usize,
    occupied: Vec<bool>,
}

impl Grid {
    fn new(points: &[Vec3], side: usize) -> Option<Grid> {
        let mut min = points[0];
        let mut max = points[0];
        for p in points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let extent = (max - min).max();
        if !(extent > 0.0) {
            return None;
        }
        let mut grid = Grid { min, cell: extent / side as f64, side, occupied: vec![false; side * side * side] };
        for p in points {
            let v = grid.voxel(p);
            let i = grid.flat(v);
            grid.occupied[i] = true;
        }
        Some(grid)
    }

    fn voxel(&self, p: &Vec3) -> [i64; 3] {
        let max = self.side as i64 - 1;
        let c = |x: f64, lo: f64| (((x - lo) / self.cell).floor() as i64).clamp(0, max);
        [c(p.x, self.min.x), c(p.y, self.min.y), c(p.z, self.min.z)]
    }

    fn flat(&self, v: [i64; 3]) -> usize {
        (v[0] as usize * self.side + v[1] as usize) * self.side + v[2] as usize
    }

    /// Fraction of occupied voxels strictly between the endpoint voxels along
    /// an integer 3D line. A line with no interior voxels counts as occupied.
    fn occupancy(&self, a: [i64; 3], b: [i64; 3]) -> f64 {
        let d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let steps = d.iter().map(|x| x.abs()).max().unwrap_or(0);
        if steps <= 1 {
            return 1.0;
        }
        let mut occupied = 0usize;
        for s in 1..steps {
            let t = s as f64 / steps as f64;
            let v = [0, 1, 2].map(|k| a[k] + (d[k] as f64 * t).round() as i64);
            if self.occupied[self.flat(v)] {
                occupied += 1;
            }
        }
        occupied as f64 / (steps - 1) as f64
    }
}

fn classify(ratio: f64) -> Class {
    if ratio >= 1.0 {
        Class::In
    } else if ratio <= 0.0 {
        Class::Out
    } else {
        Class::Mixed
    }
}

fn bin(value: f64, max: f64) -> usize {
    ((value / max * ESF_BINS as f64).floor().max(0.0) as usize).min(ESF_BINS - 1)
}

/// Ensemble of Shape Functions over a point set: distance, area and angle
/// distributions of random point triples, split by whether the connecting
/// lines run through occupied space.
pub fn compute_esf(points: &[Vec3], params: &EsfParams, seed: u64) -> Result<Descriptor> {
    params.validate()?;
    if points.len() < MIN_POINTS {
        return Err(Error::InvalidSegment(format!("{} points, need at least {MIN_POINTS}", points.len())));
    }
    let grid = Grid::new(points, params.grid)
        .ok_or_else(|| Error::InvalidSegment("all points coincide".into()))?;
    let voxels: Vec<[i64; 3]> = points.iter().map(|p| grid.voxel(p)).collect();

    const D2: usize = 0;
    const RATIO: usize = 3 * ESF_BINS;
    const D3: usize = 4 * ESF_BINS;
    const A3: usize = 7 * ESF_BINS;
    let mut h = vec![0.0; DescriptorKind::Esf.dimension()];
    let mut rng = rng::seeded(seed);
    let n = points.len();
    for _ in 0..params.samples {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n);
        while j == i {
            j = rng.random_range(0..n);
        }
        let mut k = rng.random_range(0..n);
        while k == i || k == j {
            k = rng.random_range(0..n);
        }
        let (a, b, c) = (points[i], points[j], points[k]);
        let edges = [(i, j), (j, k), (k, i)].map(|(s, t)| {
            let ratio = grid.occupancy(voxels[s], voxels[t]);
            (points[t] - points[s], ratio, classify(ratio))
        });
        for (v, ratio, class) in &edges {
            h[D2 + class.offset() * ESF_BINS + bin(v.norm(), params.max_distance)] += 1.0;
            h[RATIO + bin(*ratio, 1.0)] += 1.0;
        }

        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        let area_class = if edges.iter().all(|e| e.2 == Class::In) {
            Class::In
        } else if edges.iter().all(|e| e.2 == Class::Out) {
            Class::Out
        } else {
            Class::Mixed
        };
        h[D3 + area_class.offset() * ESF_BINS + bin(area.sqrt(), params.max_distance)] += 1.0;

        let (ab, ac) = (b - a, c - a);
        let denom = ab.norm() * ac.norm();
        if denom > 0.0 {
            let angle = (ab.dot(&ac) / denom).clamp(-1.0, 1.0).acos();
            // The angle at `a` is classified by the opposite edge.
            h[A3 + edges[1].2.offset() * ESF_BINS + bin(angle, PI)] += 1.0;
        }
    }

    let mut start = 0;
    for (_, count) in ESF_GROUPS {
        let group = &mut h[start..start + count * ESF_BINS];
        let sum: f64 = group.iter().sum();
        if sum > 0.0 {
            group.iter_mut().for_each(|v| *v /= sum);
        }
        start += count * ESF_BINS;
    }
    Ok(Descriptor::new(DescriptorKind::Esf, h))
}

/// ESF per segment, located at the segment centroid. Segment `i` draws its
/// samples from a stream derived from `(seed, i)`, so results do not depend
/// on scheduling.
pub fn compute_esf_set(cloud: &PointCloud, segments: &SegmentSet, params: &EsfParams, seed: u64) -> Result<FeatureSet> {
    params.validate()?;
    let descriptors = segments
        .segments
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let pts: Vec<Vec3> = s.indices.iter().map(|&j| cloud.position(j)).collect();
            match compute_esf(&pts, params, rng::derive(seed, i as u64)) {
                Ok(d) => Ok(d),
                Err(Error::InvalidSegment(_)) => Ok(Descriptor::invalid(DescriptorKind::Esf)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureSet {
        kind: DescriptorKind::Esf,
        positions: segments.segments.iter().map(|s| s.centroid).collect(),
        descriptors,
    })
}
