use cloudreg::eval::{crop_global_map, generate_synthetic_scene, LocalExtent, OdometryNoise, Regime, SceneParams, SyntheticScene};
use cloudreg::Aabb;

fn small() -> SceneParams {
    SceneParams { scan_count: 4, ..SceneParams::default() }
}

#[test]
fn same_seed_gives_identical_scene() {
    let a = generate_synthetic_scene(11, &small()).unwrap();
    let b = generate_synthetic_scene(11, &small()).unwrap();
    assert_eq!(a, b);
    let c = generate_synthetic_scene(12, &small()).unwrap();
    assert_ne!(a.global_cloud, c.global_cloud);
}

#[test]
fn single_scan_scene_starts_the_trajectory() {
    let one = generate_synthetic_scene(5, &SceneParams { scan_count: 1, ..SceneParams::default() }).unwrap();
    let four = generate_synthetic_scene(5, &small()).unwrap();
    assert_eq!(one.scan_count(), 1);
    assert_eq!(one.gt_poses.len(), 1);
    assert_eq!(one.gt_poses[0], four.gt_poses[0]);
}

#[test]
fn default_scene_is_desk_scale_and_scans_lie_inside_it() {
    let scene = generate_synthetic_scene(0, &SceneParams::default()).unwrap();
    assert_eq!(scene.scan_count(), 20);
    let n = scene.global_cloud.len();
    assert!((150_000..300_000).contains(&n), "{n} global points");
    assert!(scene.global_cloud.has_normals());

    let bounds = scene.global_cloud.bounds().unwrap().expanded(0.5);
    for (scan, pose) in scene.scans.iter().zip(&scene.gt_poses) {
        assert!(!scan.is_empty());
        assert!(scan.len() < n / 10, "scans are much sparser than the global cloud");
        for p in &scan.points {
            assert!(bounds.contains(&pose.apply_point(&p.position)));
        }
    }
    for w in scene.gt_poses.windows(2) {
        let step = (w[1].translation() - w[0].translation()).norm();
        assert!(step <= SceneParams::default().scan_spacing + 1e-9);
    }
}

#[test]
fn local_maps_grow_by_prefix() {
    let scene = generate_synthetic_scene(3, &small()).unwrap();
    let noise = OdometryNoise::default();
    let two = scene.local_map(2, &noise, 9).unwrap();
    let four = scene.local_map(4, &noise, 9).unwrap();
    assert_eq!(two.ground_truth, scene.gt_poses[0]);
    assert_eq!(&four.cloud.points[..two.cloud.len()], &two.cloud.points[..]);
    assert_eq!(&four.poses[..2], &two.poses[..]);
    assert!(scene.local_map(0, &noise, 9).is_err());
    assert!(scene.local_map(5, &noise, 9).is_err());

    let exact = scene.local_map(4, &OdometryNoise { sigma_translation: 0.0, sigma_rotation_deg: 0.0 }, 9).unwrap();
    for (i, pose) in exact.poses.iter().enumerate() {
        let world = scene.gt_poses[0].compose(pose);
        assert!(cloudreg::eval::alignment_error(&world, &scene.gt_poses[i]).e_t < 1e-9);
    }
}

#[test]
fn regimes_nest_on_a_synthetic_scene() {
    let scene = generate_synthetic_scene(4, &small()).unwrap();
    let noise = OdometryNoise::default();
    let bounds = |k: usize| -> Aabb {
        let map = scene.local_map(k, &noise, 0).unwrap();
        map.cloud.bounds().unwrap().transformed(&map.ground_truth)
    };
    let extent = LocalExtent { current: bounds(1), last: bounds(4), margin: 2.0 };
    let basic = crop_global_map(&scene.global_cloud, &extent, Regime::Basic).unwrap();
    let inter = crop_global_map(&scene.global_cloud, &extent, Regime::Intermediate).unwrap();
    let complex = crop_global_map(&scene.global_cloud, &extent, Regime::Complex).unwrap();
    assert_eq!(complex, scene.global_cloud);
    let box_ = extent.current.expanded(extent.margin);
    assert!(basic.points.iter().all(|p| box_.contains(&p.position)));
    let inter_set: std::collections::HashSet<[u64; 3]> =
        inter.points.iter().map(|p| p.position.map(f64::to_bits).into()).collect();
    assert!(basic.points.iter().all(|p| inter_set.contains(&<[u64; 3]>::from(p.position.map(f64::to_bits)))));
    assert!(basic.len() <= inter.len() && inter.len() <= complex.len());
}

#[test]
fn scene_directory_round_trip() {
    let scene = generate_synthetic_scene(8, &SceneParams { scan_count: 2, ..SceneParams::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    scene.write_dir(dir.path()).unwrap();
    for name in ["global.ply", "scan_0000.ply", "scan_0001.ply", "poses.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let back = SyntheticScene::read_dir(dir.path()).unwrap();
    assert_eq!(back.gt_poses, scene.gt_poses);
    assert_eq!(back.scan_count(), 2);
    for (a, b) in [(&back.global_cloud, &scene.global_cloud), (&back.scans[1], &scene.scans[1])] {
        assert_eq!(a.len(), b.len());
        for (p, q) in a.points.iter().zip(&b.points) {
            assert_eq!(p.position, q.position);
            assert!((p.valid_normal().unwrap() - q.valid_normal().unwrap()).norm() < 1e-12);
        }
    }
}

#[test]
fn malformed_poses_are_rejected() {
    let scene = generate_synthetic_scene(8, &SceneParams { scan_count: 1, ..SceneParams::default() }).unwrap();
    let dir = tempfile::tempdir().unwrap();
    scene.write_dir(dir.path()).unwrap();
    std::fs::write(dir.path().join("poses.csv"), "scan_index,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n0,2,0,0,0,0,1,0,0,0,0,1,0\n").unwrap();
    assert!(SyntheticScene::read_dir(dir.path()).is_err());
}
