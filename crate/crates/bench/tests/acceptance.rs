//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cloudreg::descriptors::{
    compute_esf, compute_fpfh, compute_shot, DescriptorKind, EsfParams, FpfhParams, ShotParams, SupportQuery,
};
use cloudreg::estimate::{fgr_register, icp_refine, kabsch_umeyama, ransac_register, FgrParams, IcpParams, RansacParams};
use cloudreg::eval::{alignment_error, Regime, SceneParams};
use cloudreg::pipeline::{enumerate_realizations, RealizationConfig};
use cloudreg::{PointCloud, RigidTransform, Vec3};
use cloudreg_bench::{run_benchmark, BenchConfig, BenchmarkPlan, SceneSource};
use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal as Gaussian};
use support::*;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cases: Vec<_> = (0..1000)
        .map(|_| (random_quaternion(&mut rng), random_vec(&mut rng, 50.0), random_quaternion(&mut rng), random_vec(&mut rng, 50.0)))
        .collect();
    let start = Instant::now();
    let (mut dt, mut dr) = (0.0f64, 0.0f64);
    for (q_est, t_est, q_gt, t_gt) in &cases {
        let err = alignment_error(&transform_from(q_est, *t_est), &transform_from(q_gt, *t_gt));
        let (e_t, e_r) = quaternion_oracle(q_est, t_est, q_gt, t_gt);
        dt = dt.max((err.e_t - e_t).abs());
        dr = dr.max((err.e_r - e_r).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(dt < 1e-9 && dr < 1e-9 && secs < 1.0, format!("1000 pairs, max |Δe_t| {dt:.1e} m, max |Δe_r| {dr:.1e} rad, {secs:.3} s"))
}

fn exact_solver() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let (mut worst_t, mut worst_r) = (0.0f64, 0.0f64);
    for _ in 0..500 {
        let truth = random_transform(&mut rng, 100.0);
        let pairs: Vec<(Vec3, Vec3)> = (0..rng.random_range(3..60))
            .map(|_| {
                let p = random_vec(&mut rng, 20.0);
                (p, truth.apply_point(&p))
            })
            .collect();
        let err = kabsch_umeyama(&pairs).map(|t| alignment_error(&t, &truth)).map_err(|e| e.to_string())?;
        worst_t = worst_t.max(err.e_t);
        worst_r = worst_r.max(err.e_r);
    }
    ensure(worst_t < 1e-9 && worst_r < 1e-9, format!("500 transforms, worst {worst_r:.1e} rad, {worst_t:.1e} m"))
}

fn queries(cloud: &PointCloud, indices: &[usize], radius: f64) -> Vec<SupportQuery> {
    indices
        .iter()
        .map(|&i| SupportQuery { center: cloud.position(i), normal: cloud.points[i].valid_normal(), radius, point_index: Some(i) })
        .collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn descriptor_contracts() -> Check {
    let cloud = bumpy_patch(103, 300, 1.5);
    let picked: Vec<usize> = (0..300).step_by(20).collect();

    let fp = FpfhParams { radius: 1.2, spfh_radius: 0.9 };
    let fpfh = compute_fpfh(&cloud, &queries(&cloud, &picked, fp.radius), &fp);
    let all = oriented(&cloud);
    let oracle_diff = fpfh
        .descriptors
        .iter()
        .zip(&picked)
        .map(|(d, &i)| max_diff(&d.values, &oracle_fpfh(&all[i], &all, fp.radius, fp.spfh_radius)))
        .fold(0.0, f64::max);

    let motion = RigidTransform::from_axis_angle(&Vec3::new(-0.2, 0.9, 0.4).normalize(), 2.7, Vec3::new(-40.0, 8.0, 2.5));
    let moved = cloud.transformed(&motion);
    let fpfh_moved = compute_fpfh(&moved, &queries(&moved, &picked, fp.radius), &fp);
    let sp = ShotParams { radius: 1.2, interpolate: true };
    let shot = compute_shot(&cloud, &queries(&cloud, &picked, sp.radius), &sp);
    let shot_moved = compute_shot(&moved, &queries(&moved, &picked, sp.radius), &sp);
    let invariance = |a: &cloudreg::descriptors::FeatureSet, b: &cloudreg::descriptors::FeatureSet| {
        a.descriptors.iter().zip(&b.descriptors).map(|(x, y)| max_diff(&x.values, &y.values)).fold(0.0, f64::max)
    };
    let (fpfh_inv, shot_inv) = (invariance(&fpfh, &fpfh_moved), invariance(&shot, &shot_moved));

    let esf_params = EsfParams { samples: 5000, ..EsfParams::default() };
    let positions = cloud.positions();
    let esf = compute_esf(&positions, &esf_params, 5).map_err(|e| e.to_string())?;
    let esf_again = compute_esf(&positions, &esf_params, 5).map_err(|e| e.to_string())?;

    let dims = [
        (DescriptorKind::Fpfh, fpfh.descriptors[0].values.len()),
        (DescriptorKind::Shot, shot.descriptors[0].values.len()),
        (DescriptorKind::Esf, esf.values.len()),
    ];
    let dims_ok = dims.iter().all(|(k, n)| k.dimension() == *n) && dims.map(|(_, n)| n) == [33, 352, 640];
    let valid = fpfh.valid_count() == picked.len() && shot.valid_count() == picked.len();
    ensure(
        dims_ok && valid && oracle_diff < 1e-9 && fpfh_inv < 1e-4 && shot_inv < 1e-4 && esf.values == esf_again.values,
        format!(
            "dims 33/352/640, FPFH vs oracle {oracle_diff:.1e}, invariance FPFH {fpfh_inv:.1e} SHOT {shot_inv:.1e}, ESF repeatable {}",
            esf.values == esf_again.values
        ),
    )
}

fn robust_estimation() -> Check {
    let mut ransac_ok = 0;
    for trial in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + trial);
        let truth = random_transform(&mut rng, 30.0);
        let (s, t, set) = planted(&mut rng, &truth, 40, 60, 0.02);
        let r = ransac_register(&set, &s, &t, &RansacParams { seed: trial, ..RansacParams::default() }).map_err(|e| e.to_string())?;
        ransac_ok += recovered(&r.transform, &truth) as usize;
    }
    let (mut fgr_ok, mut increases, mut steps) = (0, 0, 0);
    for trial in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(20_000 + trial);
        let truth = random_transform(&mut rng, 30.0);
        let (s, t, set) = planted(&mut rng, &truth, 50, 50, 0.02);
        let r = fgr_register(&set, &s, &t, &FgrParams { seed: trial, ..FgrParams::default() }).map_err(|e| e.to_string())?;
        fgr_ok += recovered(&r.transform, &truth) as usize;
        steps += r.trace.len();
        increases += r.trace.iter().filter(|s| s.after > s.before * (1.0 + 1e-12) + 1e-12).count();
    }
    ensure(
        ransac_ok >= 95 && fgr_ok >= 45 && increases == 0 && steps > 0,
        format!("RANSAC {ransac_ok}/100 at 60% outliers, FGR {fgr_ok}/50 at 50%, {increases} objective increases in {steps} steps"),
    )
}

fn end_to_end_protocol() -> Check {
    let seeds: Vec<u64> = (0..20).collect();
    let counts = vec![1, 3, 5, 10];
    let config = BenchConfig::default();
    let plan = BenchmarkPlan {
        realizations: vec![RealizationConfig::find("SHOT").expect("built-in")],
        regimes: vec![Regime::Basic, Regime::Complex],
        scan_counts: counts.clone(),
        seeds: seeds.clone(),
        record_timings: false,
    };
    let global_points = cloudreg::eval::generate_synthetic_scene(0, &config.scene).map_err(|e| e.to_string())?.global_cloud.len();
    let report = run_benchmark(&SceneSource::Synthetic, &plan, &config).map_err(|e| e.to_string())?;
    let rates = |regime: Regime| -> String {
        cloudreg_bench::outcomes(&report, "SHOT", regime)
            .iter()
            .map(|(k, flags)| format!("{k}:{}/{}", flags.iter().filter(|s| **s).count(), flags.len()))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let min = |regime: Regime| report.summary("SHOT", regime).and_then(|s| s.min_scans);
    let (basic, complex) = (min(Regime::Basic), min(Regime::Complex));
    let show = |m: Option<usize>| m.map_or("N/A".to_string(), |k| k.to_string());
    let monotone = match (basic, complex) {
        (Some(b), Some(c)) => b <= c,
        (Some(_), None) => true,
        (None, _) => false,
    };
    ensure(
        basic.is_some_and(|b| b <= 10) && monotone,
        format!(
            "SHOT, 20 seeds, global cloud {global_points} points; basic [{}] min {}; complex [{}] min {}",
            rates(Regime::Basic),
            show(basic),
            rates(Regime::Complex),
            show(complex)
        ),
    )
}

fn icp_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let source = structured_cloud(&mut rng, 3000);
    let truth = RigidTransform::from_axis_angle(&Vec3::new(0.1, 0.2, 1.0).normalize(), -0.7, Vec3::new(-4.0, 6.0, 0.3));
    let target = source.transformed(&truth);
    let initial = RigidTransform::from_translation(Vec3::new(0.1, 0.4, -0.2).normalize() * 0.5).compose(&truth);
    let params = IcpParams { max_iterations: 200, max_correspondence_distance: 2.0, convergence_eps: 1e-10 };
    let planted_err = icp_refine(&source, &target, &initial, &params).map_err(|e| e.to_string())?;
    let planted_err = alignment_error(&planted_err.transform, &truth).e_t;

    let mut increases = 0;
    let mut steps = 0;
    for trial in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(30_000 + trial);
        let source = structured_cloud(&mut rng, 600);
        let truth = random_transform(&mut rng, 5.0);
        let gauss = Gaussian::new(0.0, 0.02).unwrap();
        let mut target = source.transformed(&truth);
        for p in &mut target.points {
            p.position += Vec3::new(gauss.sample(&mut rng), gauss.sample(&mut rng), gauss.sample(&mut rng));
        }
        let perturb = UnitQuaternion::from_scaled_axis(random_vec(&mut rng, 0.1));
        let initial = transform_from(&perturb, random_vec(&mut rng, 0.8)).compose(&truth);
        let r = icp_refine(&source, &target, &initial, &IcpParams { max_correspondence_distance: 3.0, ..IcpParams::default() })
            .map_err(|e| e.to_string())?;
        steps += r.trace.len();
        increases += r.trace.iter().filter(|s| s.after > s.before * (1.0 + 1e-12) + 1e-15).count();
    }
    ensure(
        planted_err < 1e-3 && increases == 0 && steps > 0,
        format!("0.5 m offset recovered to {planted_err:.1e} m; {increases} increases in {steps} iterations over 50 trials"),
    )
}

fn run_cli_benchmark(out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_cloudreg"))
        .args(["benchmark", "--seeds", "1", "--max-scans", "2", "--regimes", "basic,complex"])
        .args(["--realizations", "SHOT,esf_seg", "--jobs", "1", "--out"])
        .arg(out)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("benchmark exited with {status}"))
    }
}

/// Aggregates recomputed from raw.csv text alone.
fn recompute_aggregates(raw: &str) -> String {
    let mut groups: BTreeMap<(String, usize, usize), (usize, usize)> = BTreeMap::new();
    let order = |regime: &str| ["basic", "intermediate", "complex"].iter().position(|r| *r == regime).unwrap();
    let mut names = BTreeMap::new();
    for line in raw.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let key = (f[0].to_string(), order(f[1]), f[2].parse::<usize>().unwrap());
        names.insert(order(f[1]), f[1].to_string());
        let g = groups.entry(key).or_default();
        g.0 += 1;
        g.1 += (f[6] == "true") as usize;
    }
    let mut out = String::from("realization,regime,scan_count,runs,successes,success_rate\n");
    for ((name, regime, k), (runs, ok)) in groups {
        out.push_str(&format!("{name},{},{k},{runs},{ok},{}\n", names[&regime], ok as f64 / runs as f64));
    }
    out
}

fn harness_determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_cli_benchmark(&a)?;
    run_cli_benchmark(&b)?;
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| e.to_string());
    let (raw_a, raw_b) = (read(&a.join("raw.csv"))?, read(&b.join("raw.csv"))?);
    let rows = raw_a.lines().count() - 1;
    let aggregate = read(&a.join("aggregate.csv"))?;
    let identical = raw_a.as_bytes() == raw_b.as_bytes();
    let recomputed = recompute_aggregates(&raw_a) == aggregate;
    ensure(
        identical && recomputed && rows == 2 * 2 * 2,
        format!("raw.csv byte-identical across runs: {identical}; {rows} rows; aggregate oracle matches: {recomputed}"),
    )
}

fn realization_coverage() -> Check {
    let config = BenchConfig { scene: SceneParams { scan_count: 5, ..SceneParams::default() }, ..BenchConfig::default() };
    let plan = BenchmarkPlan {
        realizations: enumerate_realizations(),
        regimes: vec![Regime::Basic],
        scan_counts: vec![5],
        seeds: vec![0],
        record_timings: true,
    };
    let report = run_benchmark(&SceneSource::Synthetic, &plan, &config).map_err(|e| e.to_string())?;
    let graceful = report.rows.iter().all(|r| r.errors.is_some() != r.failure.is_some());
    let timed = report.rows.iter().filter(|r| r.timings.is_some()).count();
    let failed: Vec<&str> = report.rows.iter().filter(|r| r.failure.is_some()).map(|r| r.realization.as_str()).collect();
    let succeeded = report.rows.iter().filter(|r| r.success).count();
    ensure(
        report.rows.len() == 11 && graceful,
        format!(
            "{} rows, {succeeded} successful, {timed} with a transform, failed gracefully: [{}]",
            report.rows.len(),
            failed.join(", ")
        ),
    )
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 8] = [
        ("metric correctness", metric_oracle),
        ("exact solver", exact_solver),
        ("descriptor contracts", descriptor_contracts),
        ("robust estimation", robust_estimation),
        ("end-to-end protocol", end_to_end_protocol),
        ("ICP properties", icp_properties),
        ("harness determinism", harness_determinism),
        ("realization coverage", realization_coverage),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {}. {name}: {detail} ({secs:.1} s)", i + 1);
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
