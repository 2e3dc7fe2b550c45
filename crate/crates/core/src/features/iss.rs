use rayon::prelude::*;

use crate::cloud::{PointCloud, SpatialIndex, Vec3};
use crate::linalg::{sym_eigen, weighted_scatter};
use crate::{Error, Result};

/// Below this fraction of λ1 the smallest eigenvalue counts as zero: a flat
/// neighborhood has no salience to compare.
const MIN_RELATIVE_SALIENCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssWeighting {
    /// Each neighbor weighted by the inverse of its own neighborhood size.
    InverseDensity,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IssParams {
    pub salient_radius: f64,
    pub nonmax_radius: f64,
    pub gamma21: f64,
    pub gamma32: f64,
    pub min_neighbors: usize,
    pub weighting: IssWeighting,
}

impl Default for IssParams {
    fn default() -> Self {
        Self {
            salient_radius: 2.5,
            nonmax_radius: 1.0,
            gamma21: 0.975,
            gamma32: 0.975,
            min_neighbors: 5,
            weighting: IssWeighting::InverseDensity,
        }
    }
}

impl IssParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.salient_radius > 0.0 && self.nonmax_radius > 0.0) {
            return Err(Error::InvalidParameter("ISS radii must be positive".into()));
        }
        let ratio_ok = |g: f64| g > 0.0 && g < 1.0;
        if !ratio_ok(self.gamma21) || !ratio_ok(self.gamma32) {
            return Err(Error::InvalidParameter("ISS eigenvalue ratios must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Keypoints as sorted, unique indices into the parent cloud.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KeypointSet {
    pub indices: Vec<usize>,
    pub positions: Vec<Vec3>,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Intrinsic Shape Signatures keypoints.
///
/// A point qualifies when its weighted scatter eigenvalues `λ1 ≥ λ2 ≥ λ3`
/// satisfy `λ2/λ1 < γ21`, `λ3/λ2 < γ32` and `λ3 > 0`; it is kept when its
/// salience `λ3` is the strict maximum among qualifying points within
/// `nonmax_radius` (equal salience goes to the lower index).
pub fn detect_iss_keypoints(cloud: &PointCloud, params: &IssParams) -> Result<KeypointSet> {
    params.validate()?;
    if cloud.is_empty() {
        return Ok(KeypointSet::default());
    }
    let index = SpatialIndex::new(cloud.positions());
    detect_with_index(&index, params)
}

pub(crate) fn detect_with_index(index: &SpatialIndex, params: &IssParams) -> Result<KeypointSet> {
    let n = index.len();
    let r = params.salient_radius;
    let weights: Vec<f64> = match params.weighting {
        IssWeighting::InverseDensity => (0..n)
            .into_par_iter()
            .map(|i| 1.0 / index.count_within(index.point(i), r) as f64)
            .collect(),
        IssWeighting::Uniform => vec![1.0; n],
    };

    let salience: Vec<Option<f64>> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let p = index.point(i);
            index.radius_indices_into(p, r, buf);
            // The point itself contributes nothing to its own scatter.
            if buf.len().saturating_sub(1) < params.min_neighbors {
                return None;
            }
            let cov = weighted_scatter(buf.iter().map(|&j| (*index.point(j), weights[j])), p);
            let [l1, l2, l3] = sym_eigen(&cov).values;
            let distinct = l2 / l1 < params.gamma21 && l3 / l2 < params.gamma32;
            (distinct && l3 > MIN_RELATIVE_SALIENCE * l1).then_some(l3)
        })
        .collect();

    let keep: Vec<bool> = (0..n)
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            let Some(s) = salience[i] else { return false };
            index.radius_indices_into(index.point(i), params.nonmax_radius, buf);
            buf.iter().all(|&j| {
                j == i
                    || match salience[j] {
                        None => true,
                        Some(o) => s > o || (s == o && i < j),
                    }
            })
        })
        .collect();

    let indices: Vec<usize> = keep.iter().enumerate().filter_map(|(i, &k)| k.then_some(i)).collect();
    let positions = indices.iter().map(|&i| *index.point(i)).collect();
    Ok(KeypointSet { indices, positions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_plane(n: usize, spacing: f64) -> PointCloud {
        PointCloud::from_positions(
            "",
            (0..n).flat_map(|x| (0..n).map(move |y| Vec3::new(x as f64 * spacing, y as f64 * spacing, 0.0))),
        )
    }

    #[test]
    fn plane_has_no_keypoints() {
        let kp = detect_iss_keypoints(&grid_plane(40, 0.25), &IssParams::default()).unwrap();
        assert!(kp.is_empty());
    }

    #[test]
    fn empty_cloud_gives_empty_set() {
        assert!(detect_iss_keypoints(&PointCloud::default(), &IssParams::default()).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_ratios() {
        let params = IssParams { gamma21: 1.0, ..Default::default() };
        assert!(detect_iss_keypoints(&grid_plane(3, 1.0), &params).is_err());
    }
}
