use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cloudreg::pipeline::RealizationConfig;
use cloudreg_bench::{
    cmd_benchmark, cmd_gen_scene, cmd_register, load_realization, parse_realizations, parse_regimes, BenchConfig,
    BenchError, BenchmarkPlan, SceneSource,
};

#[derive(Parser)]
#[command(name = "cloudreg", version, about = "Global registration of ground LiDAR maps against aerial point clouds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Register one local cloud against one global cloud.
    Register {
        #[arg(long)]
        local: PathBuf,
        #[arg(long)]
        global: PathBuf,
        /// Realization TOML file; takes precedence over --realization.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in realization name or slug.
        #[arg(long, default_value = "SHOT")]
        realization: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the realization × regime × scan count × seed grid.
    Benchmark {
        /// `synthetic` or a scene directory.
        #[arg(long, default_value = "synthetic")]
        scene: String,
        #[arg(long, default_value = "basic,intermediate,complex")]
        regimes: String,
        /// Comma-separated names or slugs, or `all`.
        #[arg(long, default_value = "all")]
        realizations: String,
        /// Number of seeds; seeds are 0..N.
        #[arg(long, default_value_t = 1)]
        seeds: u64,
        /// Largest scan count; defaults to the scene's scan count.
        #[arg(long)]
        max_scans: Option<usize>,
        /// Benchmark TOML file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fill the per-stage timing columns (makes outputs run-dependent).
        #[arg(long)]
        record_timings: bool,
        #[arg(long, env = "CLOUDREG_JOBS")]
        jobs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic scene directory.
    GenScene {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        scans: usize,
        /// Benchmark TOML file; only its `[scene]` section is used.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn bench_config(path: Option<&PathBuf>) -> Result<BenchConfig, BenchError> {
    path.map_or_else(|| Ok(BenchConfig::default()), |p| BenchConfig::load(p))
}

fn run(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Register { local, global, config, realization, seed, out } => {
            let realization = match config {
                Some(path) => load_realization(&path)?,
                None => RealizationConfig::find(&realization)
                    .ok_or_else(|| BenchError::Config(format!("unknown realization {realization:?}")))?,
            };
            let result = cmd_register(&local, &global, &realization, seed, &out)?;
            eprintln!("registered with {} inliers, rms {:.4} m", result.inlier_indices.len(), result.rms_residual);
        }
        Command::Benchmark { scene, regimes, realizations, seeds, max_scans, config, record_timings, jobs, out } => {
            let config = bench_config(config.as_ref())?;
            let source = if scene == "synthetic" { SceneSource::Synthetic } else { SceneSource::Dir(scene.into()) };
            let max_scans = match (max_scans, &source) {
                (Some(k), _) => k,
                (None, SceneSource::Synthetic) => config.scene.scan_count,
                (None, SceneSource::Dir(dir)) => cloudreg::eval::SyntheticScene::read_dir(dir)?.scan_count(),
            };
            let plan = BenchmarkPlan {
                realizations: parse_realizations(&realizations)?,
                regimes: parse_regimes(&regimes)?,
                scan_counts: (1..=max_scans).collect(),
                seeds: (0..seeds).collect(),
                record_timings,
            };
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
            let report = cmd_benchmark(&source, &plan, &config, jobs, &out)?;
            let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
            eprintln!("{} runs, {failed} without a transform; reports in {}", report.rows.len(), out.display());
        }
        Command::GenScene { seed, scans, config, out } => {
            cmd_gen_scene(seed, scans, &bench_config(config.as_ref())?, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
