use std::collections::BTreeMap;
use std::time::Instant;

use super::{RealizationConfig, Registry, StageContext};
use crate::cloud::{estimate_normals, voxel_downsample, Normal, PointCloud, SpatialIndex, Vec3};
use crate::correspond::match_nn;
use crate::error::{Error, Result};
use crate::estimate::{geometric_consistency_filter, icp_refine, score, RegistrationResult, Stage};
use crate::features::remove_ground_plane;
use crate::rng::derive;

const MIN_POINTS: usize = 3;
/// Height of the fallback normal viewpoint above the global map's center.
const AERIAL_VIEW_HEIGHT: f64 = 1000.0;

fn in_stage<T>(stage: Stage, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage { stage: stage.label(), source: Box::new(other) },
    })
}

fn no_features(what: String) -> Error {
    Error::NoFeatures(what)
}

/// Registers `local` (source) against `global_map` (target) with the
/// built-in strategies. See [`Registry::run`].
pub fn run_registration(
    local: &PointCloud,
    global_map: &PointCloud,
    config: &RealizationConfig,
    seed: u64,
) -> Result<RegistrationResult> {
    Registry::builtin().run(local, global_map, config, seed)
}

impl Registry {
    /// Voxelize (and optionally strip the ground plane), extract features,
    /// describe them, match descriptors, filter for geometric consistency,
    /// estimate the transform and refine it with ICP. The result maps
    /// `local` into the frame of `global_map`; the stage errors carry the
    /// stage label.
    pub fn run(
        &self,
        local: &PointCloud,
        global_map: &PointCloud,
        config: &RealizationConfig,
        seed: u64,
    ) -> Result<RegistrationResult> {
        self.validate(config)?;
        let params = &config.params;
        let mut timings = BTreeMap::new();
        let ctx = |stream: u64| StageContext { params, seed: derive(seed, stream) };

        let start = Instant::now();
        let prepared = in_stage(Stage::Features, (|| {
            let mut prepared = Vec::with_capacity(2);
            for (k, (cloud, role)) in [(local, "local"), (global_map, "global")].into_iter().enumerate() {
                if cloud.len() < MIN_POINTS {
                    return Err(no_features(format!("{role} cloud has {} points", cloud.len())));
                }
                let mut c = voxel_downsample(cloud, params.preprocess.voxel_size)?;
                if config.ground_removal && c.len() >= MIN_POINTS {
                    let removal = remove_ground_plane(&c, &params.ground, derive(seed, 1 + k as u64))?;
                    if removal.dominant {
                        c = removal.filtered;
                    }
                }
                if c.len() < MIN_POINTS {
                    return Err(no_features(format!("{role} cloud has {} points after filtering", c.len())));
                }
                let features = self.feature(&config.feature)?.extract(&c, &ctx(3 + k as u64))?;
                if features.is_empty() {
                    return Err(no_features(format!("no {} in the {role} cloud", config.feature)));
                }
                prepared.push((c, features));
            }
            Ok(prepared)
        })())?;
        timings.insert(Stage::Features, elapsed_ms(start));

        let start = Instant::now();
        let descriptor = self.descriptor(&config.descriptor)?;
        let described = in_stage(Stage::Description, (|| {
            let mut out = Vec::with_capacity(2);
            for (k, (cloud, features)) in prepared.iter().enumerate() {
                let cloud = if descriptor.needs_normals() {
                    let mut c = estimate_normals(cloud, params.preprocess.normal_radius, viewpoint(cloud, k == 0))?;
                    orient_level_surfaces_up(&mut c);
                    c
                } else {
                    cloud.clone()
                };
                let index = SpatialIndex::new(cloud.positions());
                let set = descriptor.describe(&cloud, &index, features, &ctx(5 + k as u64))?;
                if set.valid_count() == 0 {
                    return Err(no_features(format!("no valid {} descriptors", config.descriptor)));
                }
                out.push(set);
            }
            Ok(out)
        })())?;
        timings.insert(Stage::Description, elapsed_ms(start));

        let start = Instant::now();
        let matches = in_stage(Stage::Matching, match_nn(&described[0], &described[1], params.matching.policy))?;
        timings.insert(Stage::Matching, elapsed_ms(start));

        let start = Instant::now();
        let coarse = in_stage(Stage::Estimation, (|| {
            let (src, tgt) = (&described[0].positions, &described[1].positions);
            let estimator = self.estimator(&config.estimator)?;
            let threshold = estimator.inlier_threshold(params);
            // Fit on the full match list and on its consistent core, and keep
            // whichever agrees with more of the full list.
            let mut candidates = vec![matches.clone()];
            if params.matching.consistency_eps > 0.0 {
                let filtered = geometric_consistency_filter(&matches, src, tgt, params.matching.consistency_eps);
                if filtered.len() >= 3 && filtered.len() < matches.len() {
                    candidates.push(filtered);
                }
            }
            let mut best: Option<Result<RegistrationResult>> = None;
            for set in &candidates {
                let attempt = estimator.estimate(set, src, tgt, &ctx(7)).map(|mut r| {
                    let pairs = matches.pairs.iter().map(|c| (src[c.source], tgt[c.target]));
                    (r.inlier_indices, r.rms_residual) = score(&r.transform, pairs, threshold);
                    r
                });
                best = match (best, attempt) {
                    (Some(Ok(b)), Ok(r)) if r.inlier_indices.len() <= b.inlier_indices.len() => Some(Ok(b)),
                    (Some(Ok(b)), Err(_)) => Some(Ok(b)),
                    (_, attempt) => Some(attempt),
                };
            }
            best.expect("at least one candidate")
        })())?;
        timings.insert(Stage::Estimation, elapsed_ms(start));

        let start = Instant::now();
        let refined = in_stage(Stage::Icp, (|| {
            let leaf = params.preprocess.icp_voxel_size;
            icp_refine(&voxel_downsample(local, leaf)?, &voxel_downsample(global_map, leaf)?, &coarse.transform, &params.icp)
        })())?;
        timings.insert(Stage::Icp, elapsed_ms(start));

        Ok(RegistrationResult {
            transform: refined.transform,
            inlier_indices: coarse.inlier_indices,
            rms_residual: refined.rms_residual,
            iterations: coarse.iterations,
            converged: coarse.converged,
            stage_timings: timings,
            trace: coarse.trace,
        })
    }
}

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Both maps are gravity-aligned, so any surface flatter than 45° is seen
/// from above. Grazing LiDAR returns on distant ground otherwise get their
/// sign from noise.
fn orient_level_surfaces_up(cloud: &mut PointCloud) {
    for p in &mut cloud.points {
        if let Some(Normal::Valid(n)) = &mut p.normal {
            if n.z < -std::f64::consts::FRAC_1_SQRT_2 {
                *n = -*n;
            }
        }
    }
}

/// Normals without a stored orientation face the local map's sensor origin,
/// or for the global map a point high above its center.
fn viewpoint(cloud: &PointCloud, is_local: bool) -> Vec3 {
    if is_local {
        return Vec3::zeros();
    }
    let center = cloud.bounds().map_or(Vec3::zeros(), |b| b.center());
    center + Vec3::new(0.0, 0.0, AERIAL_VIEW_HEIGHT)
}

