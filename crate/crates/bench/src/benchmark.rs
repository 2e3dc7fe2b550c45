use std::collections::BTreeMap;
use std::path::PathBuf;

use cloudreg::cloud::voxel_downsample;
use cloudreg::estimate::icp_refine;
use cloudreg::eval::{alignment_error, classify_success, crop_global_map, LocalExtent, LocalMap, Regime, SyntheticScene};
use cloudreg::pipeline::{run_registration, RealizationConfig};
use cloudreg::{PointCloud, RigidTransform};
use rayon::prelude::*;

use crate::config::BenchConfig;
use crate::report::{BenchmarkReport, RunRow};
use crate::{BenchError, Result};

/// Where scenes come from: one generated scene per seed, or one scene
/// directory shared by all seeds.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    Synthetic,
    Dir(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkPlan {
    pub realizations: Vec<RealizationConfig>,
    pub regimes: Vec<Regime>,
    pub scan_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub record_timings: bool,
}

/// Everything shared by the runs of one (seed, scan count).
struct Trial {
    seed: u64,
    scan_count: usize,
    local: LocalMap,
    extent: LocalExtent,
    /// Success criteria with this trial's baseline.
    criteria: cloudreg::eval::SuccessCriteria,
}

fn world_bounds(cloud: &PointCloud, to_world: &RigidTransform) -> Result<cloudreg::Aabb> {
    let b = cloud.bounds().ok_or_else(|| BenchError::Core(cloudreg::Error::EmptyInput("local map".into())))?;
    Ok(b.transformed(to_world))
}

fn prepare_trials(scene: &SyntheticScene, seed: u64, counts: &[usize], config: &BenchConfig) -> Result<Vec<Trial>> {
    let last = scene.local_map(scene.scan_count(), &config.odometry, seed)?;
    let last_bounds = world_bounds(&last.cloud, &last.ground_truth)?;
    let icp_leaf = config.pipeline.preprocess.icp_voxel_size;
    counts
        .iter()
        .map(|&k| {
            let local = scene.local_map(k, &config.odometry, seed)?;
            let current = world_bounds(&local.cloud, &local.ground_truth)?;
            let extent = LocalExtent { current, last: last_bounds, margin: config.crop_margin };
            // Baseline: ICP started at ground truth against the basic crop.
            let crop = crop_global_map(&scene.global_cloud, &extent, Regime::Basic)?;
            let baseline = icp_refine(
                &voxel_downsample(&local.cloud, icp_leaf)?,
                &voxel_downsample(&crop, icp_leaf)?,
                &local.ground_truth,
                &config.pipeline.icp,
            )
            .map(|r| alignment_error(&r.transform, &local.ground_truth))
            .map_or((0.0, 0.0), |e| (e.e_t, e.e_r));
            Ok(Trial { seed, scan_count: k, local, extent, criteria: config.success.criteria(baseline) })
        })
        .collect()
}

fn run_one(scene: &SyntheticScene, trial: &Trial, realization: &RealizationConfig, regime: Regime, record_timings: bool) -> RunRow {
    let mut row = RunRow {
        realization: realization.name.clone(),
        regime,
        scan_count: trial.scan_count,
        seed: trial.seed,
        errors: None,
        success: false,
        timings: None,
        failure: None,
    };
    let outcome = crop_global_map(&scene.global_cloud, &trial.extent, regime)
        .and_then(|global| run_registration(&trial.local.cloud, &global, realization, trial.seed));
    match outcome {
        Ok(result) => {
            let err = alignment_error(&result.transform, &trial.local.ground_truth);
            row.errors = Some((err.e_t, err.e_r_degrees()));
            row.success = classify_success(&err, &trial.criteria);
            if record_timings {
                row.timings = Some(result.stage_timings);
            }
        }
        Err(e) => row.failure = Some(e.to_string()),
    }
    row
}

/// Runs every (realization, regime, scan count, seed) of the plan and
/// collects the report. Failed registrations become unsuccessful rows.
/// Runs execute on the current rayon pool.
pub fn run_benchmark(source: &SceneSource, plan: &BenchmarkPlan, config: &BenchConfig) -> Result<BenchmarkReport> {
    config.validate()?;
    let max_count = plan.scan_counts.iter().copied().max().unwrap_or(0);
    if plan.scan_counts.contains(&0) || plan.realizations.is_empty() || plan.regimes.is_empty() || plan.seeds.is_empty() {
        return Err(BenchError::Config("plan needs realizations, regimes, seeds and positive scan counts".into()));
    }
    let registry = cloudreg::pipeline::Registry::builtin();
    let realizations: Vec<RealizationConfig> = plan
        .realizations
        .iter()
        .map(|r| {
            let r = RealizationConfig { params: config.pipeline.clone(), ..r.clone() };
            registry.validate(&r).map(|_| r)
        })
        .collect::<cloudreg::Result<_>>()?;

    let shared = match source {
        SceneSource::Dir(dir) => Some(SyntheticScene::read_dir(dir)?),
        SceneSource::Synthetic => None,
    };
    let scenes: Vec<(u64, SyntheticScene)> = plan
        .seeds
        .par_iter()
        .map(|&seed| {
            let scene = match &shared {
                Some(s) => s.clone(),
                None => {
                    let mut params = config.scene;
                    params.scan_count = params.scan_count.max(max_count);
                    cloudreg::eval::generate_synthetic_scene(seed, &params)?
                }
            };
            if scene.scan_count() < max_count {
                return Err(BenchError::Config(format!("scene has {} scans, plan needs {max_count}", scene.scan_count())));
            }
            Ok((seed, scene))
        })
        .collect::<Result<_>>()?;

    let trials: Vec<(usize, Trial)> = scenes
        .par_iter()
        .enumerate()
        .map(|(i, (seed, scene))| Ok(prepare_trials(scene, *seed, &plan.scan_counts, config)?.into_iter().map(move |t| (i, t))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let tasks: Vec<(&(usize, Trial), &RealizationConfig, Regime)> = trials
        .iter()
        .flat_map(|t| realizations.iter().flat_map(move |r| plan.regimes.iter().map(move |&g| (t, r, g))))
        .collect();
    let rows: Vec<RunRow> = tasks
        .par_iter()
        .map(|((scene_index, trial), realization, regime)| {
            run_one(&scenes[*scene_index].1, trial, realization, *regime, plan.record_timings)
        })
        .collect();
    Ok(BenchmarkReport::from_rows(rows, config.success.reliability))
}

/// Success flags per scan count for one (realization, regime), across seeds.
pub fn outcomes(report: &BenchmarkReport, realization: &str, regime: Regime) -> BTreeMap<usize, Vec<bool>> {
    let mut out: BTreeMap<usize, Vec<bool>> = BTreeMap::new();
    for r in report.rows.iter().filter(|r| r.realization == realization && r.regime == regime) {
        out.entry(r.scan_count).or_default().push(r.success);
    }
    out
}
