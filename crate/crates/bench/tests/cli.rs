use std::path::Path;
use std::process::{Command, Output};

fn cloudreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cloudreg")).args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn gen_scene(dir: &Path, scans: &str) {
    let out = cloudreg(&["gen-scene", "--seed", "1", "--scans", scans, "--out", path(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_scene_writes_the_directory_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scene");
    gen_scene(&dir, "3");
    for name in ["global.ply", "scan_0000.ply", "scan_0001.ply", "scan_0002.ply", "poses.csv"] {
        assert!(dir.join(name).exists(), "{name}");
    }
    let poses = std::fs::read_to_string(dir.join("poses.csv")).unwrap();
    assert_eq!(poses.lines().count(), 4);
    assert_eq!(poses.lines().nth(1).unwrap().split(',').count(), 13);
}

#[test]
fn register_writes_json_and_maps_failures_to_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scene");
    gen_scene(&dir, "1");
    let out_json = tmp.path().join("out/result.json");
    let global = dir.join("global.ply");
    let scan = dir.join("scan_0000.ply");

    let out = cloudreg(&["register", "--local", path(&scan), "--global", path(&global), "--out", path(&out_json)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out_json).unwrap()).unwrap();
    assert_eq!(json["realization"], "SHOT");
    assert_eq!(json["transform"].as_array().unwrap().len(), 12);
    assert_eq!(json["timings_ms"].as_object().unwrap().len(), 5);

    let lonely = tmp.path().join("lonely.xyz");
    std::fs::write(&lonely, "0 0 0\n").unwrap();
    let out = cloudreg(&["register", "--local", path(&lonely), "--global", path(&global), "--out", path(&out_json)]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let out = cloudreg(&["register", "--local", path(&scan), "--global", path(&global), "--realization", "SIFT", "--out", path(&out_json)]);
    assert_eq!(out.status.code(), Some(1));

    let missing = tmp.path().join("missing.ply");
    let out = cloudreg(&["register", "--local", path(&missing), "--global", path(&global), "--out", path(&out_json)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn realization_and_benchmark_configs_reject_unknown_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "[scene]\nscan_cont = 3\n").unwrap();
    let out = cloudreg(&["gen-scene", "--config", path(&bad), "--out", path(&tmp.path().join("s"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scan_cont"));

    let realization = tmp.path().join("r.toml");
    std::fs::write(&realization, "name = \"x\"\nfeature = \"keypoint\"\ndescriptor = \"esf\"\nestimator = \"ransac\"\n").unwrap();
    let lonely = tmp.path().join("p.xyz");
    std::fs::write(&lonely, "0 0 0\n1 0 0\n0 1 0\n").unwrap();
    let out = cloudreg(&[
        "register", "--local", path(&lonely), "--global", path(&lonely), "--config", path(&realization), "--out",
        path(&tmp.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn benchmark_on_a_scene_directory_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("scene");
    gen_scene(&dir, "2");
    let out_dir = tmp.path().join("report");
    let out = Command::new(env!("CARGO_BIN_EXE_cloudreg"))
        .args(["benchmark", "--scene", path(&dir), "--regimes", "basic,complex", "--realizations", "esf_seg"])
        .args(["--seeds", "1", "--out", path(&out_dir)])
        .env("CLOUDREG_JOBS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let raw = std::fs::read_to_string(out_dir.join("raw.csv")).unwrap();
    let mut lines = raw.lines();
    assert_eq!(
        lines.next().unwrap(),
        "realization,regime,scan_count,seed,e_t_m,e_r_deg,success,t_feature_ms,t_descr_ms,t_match_ms,t_estim_ms,t_icp_ms"
    );
    // One realization × two regimes × two scan counts × one seed.
    assert_eq!(lines.count(), 4);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["entries"].as_array().unwrap().len(), 2);
    assert!(out_dir.join("aggregate.csv").exists());

    let out = cloudreg(&["benchmark", "--regimes", "sideways", "--out", path(&out_dir)]);
    assert_eq!(out.status.code(), Some(1));
}
