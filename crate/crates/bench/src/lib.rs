//! Benchmark harness for `cloudreg`: registers local maps against cropped
//! global maps over a grid of realizations, regimes, scan counts and seeds,
//! and writes raw, aggregate and summary reports.

mod benchmark;
mod config;
mod report;

use std::path::{Path, PathBuf};

use cloudreg::eval::{generate_synthetic_scene, Regime};
use cloudreg::pipeline::{enumerate_realizations, run_registration, RealizationConfig};
use cloudreg::{RegistrationResult, Stage};

pub use benchmark::{outcomes, run_benchmark, BenchmarkPlan, SceneSource};
pub use config::{load_realization, BenchConfig, SuccessParams};
pub use report::{
    aggregate, aggregate_csv, raw_csv, write_atomic, AggregateRow, BenchmarkReport, RunRow, Summary, TimingStats,
    AGGREGATE_COLUMNS, RAW_COLUMNS,
};

pub type Result<T, E = BenchError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] cloudreg::Error),
    #[error("configuration: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl BenchError {
    /// Process exit code: 2 when the data left nothing to register, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Core(e) if e.is_registration_failure() => 2,
            _ => 1,
        }
    }
}

/// Resolves a comma-separated list of realization names or slugs; `all`
/// selects the eleven built-in realizations.
pub fn parse_realizations(list: &str) -> Result<Vec<RealizationConfig>> {
    if list.trim() == "all" {
        return Ok(enumerate_realizations());
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| RealizationConfig::find(name).ok_or_else(|| BenchError::Config(format!("unknown realization {name:?}"))))
        .collect()
}

pub fn parse_regimes(list: &str) -> Result<Vec<Regime>> {
    let mut out: Vec<Regime> =
        list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<cloudreg::Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

/// JSON form of a single registration.
pub fn result_json(realization: &RealizationConfig, seed: u64, result: &RegistrationResult) -> serde_json::Value {
    let timings: serde_json::Map<String, serde_json::Value> = Stage::ALL
        .iter()
        .filter_map(|s| result.stage_timings.get(s).map(|ms| (s.label().to_string(), serde_json::json!(ms))))
        .collect();
    serde_json::json!({
        "realization": realization.name,
        "seed": seed,
        "transform": result.transform.to_row_major(),
        "inliers": result.inlier_indices,
        "rms_residual": result.rms_residual,
        "iterations": result.iterations,
        "converged": result.converged,
        "timings_ms": timings,
    })
}

/// Registers `local` against `global` and writes the result JSON to `out`.
pub fn cmd_register(local: &Path, global: &Path, realization: &RealizationConfig, seed: u64, out: &Path) -> Result<RegistrationResult> {
    let local_cloud = cloudreg::cloud::read_cloud(local)?;
    let global_cloud = cloudreg::cloud::read_cloud(global)?;
    let result = run_registration(&local_cloud, &global_cloud, realization, seed)?;
    let mut json = serde_json::to_string_pretty(&result_json(realization, seed, &result))?;
    json.push('\n');
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| BenchError::Io { path: parent.into(), source: e })?;
    }
    write_atomic(out, json.as_bytes())?;
    Ok(result)
}

/// Generates a synthetic scene with `scans` scans and writes it to `out`.
pub fn cmd_gen_scene(seed: u64, scans: usize, config: &BenchConfig, out: &Path) -> Result<()> {
    if scans == 0 {
        return Err(BenchError::Config("--scans must be at least 1".into()));
    }
    let params = cloudreg::eval::SceneParams { scan_count: scans, ..config.scene };
    let scene = generate_synthetic_scene(seed, &params)?;
    scene.write_dir(out)?;
    Ok(())
}

/// Runs the benchmark grid on a pool of `jobs` threads and writes the report.
pub fn cmd_benchmark(source: &SceneSource, plan: &BenchmarkPlan, config: &BenchConfig, jobs: usize, out: &Path) -> Result<BenchmarkReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| run_benchmark(source, plan, config))?;
    report.write(out)?;
    Ok(report)
}
