use std::f64::consts::{FRAC_PI_4, PI, TAU};
use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use nalgebra::Rotation3;
use rand_distr::{Distribution, Normal};

use crate::cloud::{self, read_cloud, write_cloud_file, Point, PointCloud, RigidTransform, Vec3};
use crate::error::{Error, Result};
use crate::rng;

/// Free space kept between the robot and any structure's bounding circle.
const ROBOT_CLEARANCE: f64 = 0.5;
const TURN_ATTEMPTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    /// Side of the square scene in meters.
    pub extent: f64,
    pub structure_count: usize,
    pub scan_count: usize,
    /// Distance the robot travels between scans.
    pub scan_spacing: f64,
    /// Small tilted boxes scattered between the structures.
    pub rubble_count: usize,
    /// Global samples per square meter of surface.
    pub global_density: f64,
    /// Scan samples per square meter of surface within `near_range`.
    pub local_density: f64,
    pub noise_sigma_global: f64,
    pub noise_sigma_local: f64,
    /// Scan range limit.
    pub max_range: f64,
    /// Beyond this range scan density falls off with the squared distance,
    /// as for a sensor with fixed angular resolution.
    pub near_range: f64,
    pub sensor_height: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            extent: 60.0,
            structure_count: 22,
            rubble_count: 250,
            scan_count: 20,
            scan_spacing: 0.8,
            global_density: 40.0,
            local_density: 4.0,
            noise_sigma_global: 0.05,
            noise_sigma_local: 0.02,
            max_range: 15.0,
            near_range: 8.0,
            sensor_height: 0.6,
        }
    }
}

impl SceneParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.extent > 2.0 * (self.max_range + ROBOT_CLEARANCE)
            && self.scan_count >= 1
            && self.scan_spacing > 0.0
            && self.global_density > 0.0
            && self.local_density > 0.0
            && self.noise_sigma_global >= 0.0
            && self.noise_sigma_local >= 0.0
            && self.near_range > 0.0
            && self.sensor_height >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid scene parameters {self:?}")));
        }
        Ok(())
    }
}

/// Scene geometry resting on or sunk into the ground plane `z = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Arbitrarily oriented box; the part below ground is buried.
    Cuboid { center: Vec3, half: Vec3, rotation: Rotation3<f64> },
    /// Wedge rising along its local x axis from 0 to `height`.
    Ramp { center: Vec3, half: (f64, f64), height: f64, yaw: f64 },
    /// Vertical capped cylinder.
    Cylinder { center: Vec3, radius: f64, height: f64 },
}

/// Planar or cylindrical piece of exposed surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Patch {
    Parallelogram { origin: Vec3, u: Vec3, v: Vec3 },
    Triangle { origin: Vec3, u: Vec3, v: Vec3 },
    /// Lateral surface of a vertical cylinder standing at `base`.
    Tube { base: Vec3, radius: f64, height: f64 },
    /// Horizontal disk facing up.
    Disk { center: Vec3, radius: f64 },
}

impl Patch {
    pub fn area(&self) -> f64 {
        match *self {
            Patch::Parallelogram { u, v, .. } => u.cross(&v).norm(),
            Patch::Triangle { u, v, .. } => u.cross(&v).norm() / 2.0,
            Patch::Tube { radius, height, .. } => TAU * radius * height,
            Patch::Disk { radius, .. } => PI * radius * radius,
        }
    }

    /// Uniform sample on the patch with its outward unit normal. Planar
    /// patches face along `u × v`.
    pub fn sample(&self, rng: &mut impl Rng) -> (Vec3, Vec3) {
        match *self {
            Patch::Parallelogram { origin, u, v } => {
                let (a, b): (f64, f64) = (rng.random(), rng.random());
                (origin + a * u + b * v, u.cross(&v).normalize())
            }
            Patch::Triangle { origin, u, v } => {
                let (mut a, mut b): (f64, f64) = (rng.random(), rng.random());
                if a + b > 1.0 {
                    (a, b) = (1.0 - a, 1.0 - b);
                }
                (origin + a * u + b * v, u.cross(&v).normalize())
            }
            Patch::Tube { base, radius, height } => {
                let t = rng.random_range(0.0..TAU);
                let n = Vec3::new(t.cos(), t.sin(), 0.0);
                (base + radius * n + Vec3::new(0.0, 0.0, rng.random_range(0.0..=height)), n)
            }
            Patch::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let t = rng.random_range(0.0..TAU);
                (center + Vec3::new(r * t.cos(), r * t.sin(), 0.0), Vec3::z())
            }
        }
    }
}

impl Shape {
    /// Box standing on the ground, rotated by `yaw` about the vertical.
    pub fn upright_box(base: Vec3, half: (f64, f64), height: f64, yaw: f64) -> Shape {
        Shape::Cuboid {
            center: base + Vec3::new(0.0, 0.0, height / 2.0),
            half: Vec3::new(half.0, half.1, height / 2.0),
            rotation: Rotation3::from_axis_angle(&Vec3::z_axis(), yaw),
        }
    }

    /// Center and radius of a vertical cylinder containing the shape.
    pub fn footprint(&self) -> (Vec3, f64) {
        match *self {
            Shape::Cuboid { center, half, .. } => (center, half.norm()),
            Shape::Ramp { center, half, .. } => (center, half.0.hypot(half.1)),
            Shape::Cylinder { center, radius, .. } => (center, radius),
        }
    }

    /// Whether `p` lies inside the solid, boundary included.
    pub fn contains(&self, p: &Vec3) -> bool {
        match *self {
            Shape::Cuboid { center, half, rotation } => {
                let q = rotation.inverse() * (p - center);
                (0..3).all(|k| q[k].abs() <= half[k])
            }
            Shape::Ramp { center, half, height, yaw } => {
                let q = Rotation3::from_axis_angle(&Vec3::z_axis(), -yaw) * (p - center);
                let top = height * (q.x + half.0) / (2.0 * half.0);
                q.x.abs() <= half.0 && q.y.abs() <= half.1 && (0.0..=top).contains(&q.z)
            }
            Shape::Cylinder { center, radius, height } => {
                (p.x - center.x).hypot(p.y - center.y) <= radius && (0.0..=height).contains(&(p.z - center.z))
            }
        }
    }

    /// Every face except those lying flat on the ground.
    pub fn surface(&self) -> Vec<Patch> {
        match *self {
            Shape::Cylinder { center, radius, height } => vec![
                Patch::Tube { base: center, radius, height },
                Patch::Disk { center: center + Vec3::new(0.0, 0.0, height), radius },
            ],
            Shape::Cuboid { center, half, rotation } => {
                let mut faces = Vec::with_capacity(6);
                for k in 0..3 {
                    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                    let axis = |m: usize, len: f64| rotation * (len * Vec3::ith(m, 1.0));
                    for sign in [1.0, -1.0] {
                        // Corner at (-i, -j) for the positive face; swap the
                        // edge order on the negative face to flip u × v.
                        let corner = center + axis(k, sign * half[k]) - axis(i, half[i]) - axis(j, half[j]);
                        let (u, v) = (axis(i, 2.0 * half[i]), axis(j, 2.0 * half[j]));
                        faces.push(if sign > 0.0 {
                            Patch::Parallelogram { origin: corner, u, v }
                        } else {
                            Patch::Parallelogram { origin: corner, u: v, v: u }
                        });
                    }
                }
                let resting = |p: &Patch| matches!(p, Patch::Parallelogram { origin, u, v } if origin.z.abs() < 1e-9 && u.z.abs() < 1e-9 && v.z.abs() < 1e-9);
                faces.retain(|p| !resting(p));
                faces
            }
            Shape::Ramp { center, half: (hx, hy), height: h, yaw } => {
                let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw);
                let at = |x, y, z| center + rot * Vec3::new(x, y, z);
                let dir = |x, y, z| rot * Vec3::new(x, y, z);
                vec![
                    Patch::Parallelogram { origin: at(-hx, -hy, 0.0), u: dir(2.0 * hx, 0.0, h), v: dir(0.0, 2.0 * hy, 0.0) },
                    Patch::Parallelogram { origin: at(hx, -hy, 0.0), u: dir(0.0, 2.0 * hy, 0.0), v: dir(0.0, 0.0, h) },
                    Patch::Triangle { origin: at(-hx, -hy, 0.0), u: dir(2.0 * hx, 0.0, 0.0), v: dir(2.0 * hx, 0.0, h) },
                    Patch::Triangle { origin: at(-hx, hy, 0.0), u: dir(2.0 * hx, 0.0, h), v: dir(2.0 * hx, 0.0, 0.0) },
                ]
            }
        }
    }
}

/// A generated world: dense global cloud, ground-robot scans in their sensor
/// frames, and each scan's exact sensor-to-world pose. Every point carries
/// the outward normal of the surface it was sampled from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub global_cloud: PointCloud,
    pub scans: Vec<PointCloud>,
    pub gt_poses: Vec<RigidTransform>,
    pub seed: Option<u64>,
}

/// Per-step odometry noise used when chaining scans into a local map.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdometryNoise {
    pub sigma_translation: f64,
    pub sigma_rotation_deg: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self { sigma_translation: 0.05, sigma_rotation_deg: 0.5 }
    }
}

/// The first `k` scans merged in the frame of scan 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    pub cloud: PointCloud,
    /// Local-map frame to world: the true pose of scan 0.
    pub ground_truth: RigidTransform,
    /// Odometry-estimated pose of each merged scan in the local-map frame.
    pub poses: Vec<RigidTransform>,
}

struct World {
    shapes: Vec<Shape>,
    /// Exposed surface of every shape, grouped per shape.
    surfaces: Vec<Vec<Patch>>,
    half_extent: f64,
}

impl World {
    fn new(shapes: Vec<Shape>, half_extent: f64) -> World {
        let surfaces = shapes.iter().map(Shape::surface).collect();
        World { shapes, surfaces, half_extent }
    }

    fn is_free(&self, p: &Vec3) -> bool {
        self.shapes.iter().all(|s| {
            let (c, r) = s.footprint();
            (p.x - c.x).hypot(p.y - c.y) > r + ROBOT_CLEARANCE
        })
    }

    fn inside_other(&self, own: usize, p: &Vec3) -> bool {
        self.shapes.iter().enumerate().any(|(j, s)| {
            let (c, r) = s.footprint();
            j != own && (p.x - c.x).hypot(p.y - c.y) <= r && s.contains(p)
        })
    }

    fn on_open_ground(&self, x: f64, y: f64) -> bool {
        x.abs() <= self.half_extent && y.abs() <= self.half_extent && !self.shapes.iter().any(|s| s.contains(&Vec3::new(x, y, 0.0)))
    }

    /// Samples every patch near `center` (all patches when `reach` is
    /// infinite) plus the open ground inside `ground`, at `density` samples
    /// per square meter, and hands each surface sample to `emit`.
    fn sample_surfaces(
        &self,
        rng: &mut rng::Rng,
        density: f64,
        center: &Vec3,
        reach: f64,
        ground: &Patch,
        mut emit: impl FnMut(&mut rng::Rng, Vec3, Vec3),
    ) {
        let mut draw = |rng: &mut rng::Rng, patch: &Patch, keep: &dyn Fn(&Vec3) -> bool| {
            let expected = density * patch.area();
            let count = (expected + rng.random::<f64>()).floor() as usize;
            for _ in 0..count {
                let (p, n) = patch.sample(rng);
                if keep(&p) {
                    emit(rng, p, n);
                }
            }
        };
        draw(rng, ground, &|p| self.on_open_ground(p.x, p.y));
        for (i, (shape, patches)) in self.shapes.iter().zip(&self.surfaces).enumerate() {
            let (c, r) = shape.footprint();
            if (c.x - center.x).hypot(c.y - center.y) > reach + r {
                continue;
            }
            let exposed = |p: &Vec3| p.z >= 0.0 && !self.inside_other(i, p);
            for patch in patches {
                draw(rng, patch, &exposed);
            }
        }
    }
}

fn random_structures(params: &SceneParams, rng: &mut rng::Rng) -> Vec<Shape> {
    let h = params.extent / 2.0;
    let mut shapes: Vec<Shape> = (0..params.structure_count)
        .map(|_| {
            let kind = rng.random_range(0..4);
            let yaw = rng.random_range(0.0..PI);
            let center = Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), 0.0);
            match kind {
                0 | 1 => {
                    let half = (rng.random_range(0.75..4.0), rng.random_range(0.75..4.0));
                    Shape::upright_box(center, half, rng.random_range(1.0..7.0), yaw)
                }
                2 => {
                    let half = (rng.random_range(1.5..4.0), rng.random_range(1.0..2.5));
                    Shape::Ramp { center, half, height: rng.random_range(1.0..3.5), yaw }
                }
                _ => Shape::Cylinder { center, radius: rng.random_range(0.3..1.5), height: rng.random_range(1.0..6.0) },
            }
        })
        .collect();
    for _ in 0..params.rubble_count {
        let half = Vec3::from_fn(|_, _| rng.random_range(0.2..1.0));
        let tilt_axis = rng.random_range(0.0..TAU);
        let tilt = Rotation3::from_axis_angle(
            &nalgebra::Unit::new_normalize(Vec3::new(tilt_axis.cos(), tilt_axis.sin(), 0.0)),
            rng.random_range(0.0..FRAC_PI_4),
        );
        let rotation = tilt * Rotation3::from_axis_angle(&Vec3::z_axis(), rng.random_range(0.0..PI));
        let center = Vec3::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(0.0..half.z));
        shapes.push(Shape::Cuboid { center, half, rotation });
    }
    shapes
}

fn trajectory(params: &SceneParams, world: &World, rng: &mut rng::Rng) -> Vec<RigidTransform> {
    let bound = params.extent / 2.0 - params.max_range - ROBOT_CLEARANCE;
    let start_region = (params.extent * 0.1).min(bound);
    let mut pos = loop {
        let p = Vec3::new(rng.random_range(-start_region..=start_region), rng.random_range(-start_region..=start_region), 0.0);
        if world.is_free(&p) {
            break p;
        }
    };
    let mut heading = rng.random_range(0.0..TAU);
    let wander = Normal::new(0.0, 8f64.to_radians()).expect("valid sigma");
    let pose =
        |p: &Vec3, yaw: f64| RigidTransform::from_axis_angle(&Vec3::z(), yaw, Vec3::new(p.x, p.y, params.sensor_height));
    let mut poses = vec![pose(&pos, heading)];
    for _ in 1..params.scan_count {
        let mut moved = false;
        for attempt in 0..TURN_ATTEMPTS {
            let candidate = if attempt == 0 {
                heading + wander.sample(rng)
            } else {
                heading + rng.random_range(-PI..PI)
            };
            let next = pos + params.scan_spacing * Vec3::new(candidate.cos(), candidate.sin(), 0.0);
            if next.x.abs() <= bound && next.y.abs() <= bound && world.is_free(&next) {
                pos = next;
                heading = candidate;
                moved = true;
                break;
            }
        }
        if !moved {
            // Boxed in: turn around on the spot.
            heading += PI;
        }
        poses.push(pose(&pos, heading));
    }
    poses
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("non-negative sigma")
}

fn jitter(rng: &mut rng::Rng, noise: &Normal<f64>) -> Vec3 {
    Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng))
}

fn surface_point(position: Vec3, normal: Vec3) -> Point {
    Point { position, normal: Some(cloud::Normal::Valid(normal)), color: None }
}

fn global_cloud(params: &SceneParams, world: &World, seed: u64) -> PointCloud {
    let mut rng = rng::seeded(seed);
    let noise = gaussian(params.noise_sigma_global);
    let h = params.extent / 2.0;
    let ground = Patch::Parallelogram {
        origin: Vec3::new(-h, -h, 0.0),
        u: Vec3::new(params.extent, 0.0, 0.0),
        v: Vec3::new(0.0, params.extent, 0.0),
    };
    let mut points = Vec::new();
    world.sample_surfaces(&mut rng, params.global_density, &Vec3::zeros(), f64::INFINITY, &ground, |rng, p, n| {
        points.push(surface_point(p + jitter(rng, &noise), n));
    });
    PointCloud { points, frame_id: "global".into() }
}

/// Samples the surfaces within range of `pose`, thinning beyond the near
/// range by the squared distance. Occlusion is not modeled.
fn scan(params: &SceneParams, world: &World, pose: &RigidTransform, seed: u64, name: String) -> PointCloud {
    let mut rng = rng::seeded(seed);
    let noise = gaussian(params.noise_sigma_local);
    let origin = *pose.translation();
    let r = params.max_range;
    let ground = Patch::Parallelogram {
        origin: Vec3::new(origin.x - r, origin.y - r, 0.0),
        u: Vec3::new(2.0 * r, 0.0, 0.0),
        v: Vec3::new(0.0, 2.0 * r, 0.0),
    };
    let to_sensor = pose.inverse();
    let mut points = Vec::new();
    world.sample_surfaces(&mut rng, params.local_density, &origin, r, &ground, |rng, p, n| {
        let d = (p - origin).norm();
        let keep = (params.near_range / d).powi(2).min(1.0);
        if d <= r && rng.random::<f64>() < keep {
            let p = to_sensor.apply_point(&p) + jitter(rng, &noise);
            points.push(surface_point(p, to_sensor.apply_vector(&n)));
        }
    });
    PointCloud { points, frame_id: name }
}

/// Builds a random world of boxes, ramps and cylinders on a square ground
/// plane, samples its surfaces densely for the global cloud, and drives a
/// ground robot through the free space taking range-limited scans.
/// Deterministic per seed.
pub fn generate_synthetic_scene(seed: u64, params: &SceneParams) -> Result<SyntheticScene> {
    params.validate()?;
    let mut rng = rng::seeded(seed);
    let world = World::new(random_structures(params, &mut rng), params.extent / 2.0);
    let gt_poses = trajectory(params, &world, &mut rng);
    let global_cloud = global_cloud(params, &world, rng::derive(seed, 1));
    let scan_seed = rng::derive(seed, 2);
    let scans = gt_poses
        .iter()
        .enumerate()
        .map(|(i, pose)| scan(params, &world, pose, rng::derive(scan_seed, i as u64), format!("scan_{i:04}")))
        .collect();
    Ok(SyntheticScene { global_cloud, scans, gt_poses, seed: Some(seed) })
}

impl SyntheticScene {
    pub fn scan_count(&self) -> usize {
        self.scans.len()
    }

    /// Chains the first `count` scans with odometry increments perturbed by
    /// `noise`. The perturbation of step `i` depends only on `(seed, i)`, so
    /// smaller maps are prefixes of larger ones.
    pub fn local_map(&self, count: usize, noise: &OdometryNoise, seed: u64) -> Result<LocalMap> {
        if count == 0 || count > self.scans.len() {
            return Err(Error::InvalidParameter(format!("scan count {count} outside 1..={}", self.scans.len())));
        }
        if !(noise.sigma_translation >= 0.0 && noise.sigma_rotation_deg >= 0.0) {
            return Err(Error::InvalidParameter("negative odometry noise".into()));
        }
        let t_noise = gaussian(noise.sigma_translation);
        let r_noise = gaussian(noise.sigma_rotation_deg.to_radians());
        let mut poses = vec![RigidTransform::identity()];
        for i in 1..count {
            let mut rng = rng::seeded(rng::derive(seed, i as u64));
            let step = self.gt_poses[i - 1].inverse().compose(&self.gt_poses[i]);
            let perturbation = RigidTransform::from_scaled_axis(jitter(&mut rng, &r_noise), jitter(&mut rng, &t_noise));
            let previous = poses[i - 1];
            poses.push(previous.compose(&step).compose(&perturbation));
        }
        let mut cloud = PointCloud::new("local");
        for (scan, pose) in self.scans.iter().zip(&poses) {
            cloud.extend(&scan.transformed(pose));
        }
        cloud.frame_id = "local".into();
        Ok(LocalMap { cloud, ground_truth: self.gt_poses[0], poses })
    }

    /// Writes `global.ply`, `scan_####.ply` and `poses.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_cloud_file(&dir.join("global.ply"), &self.global_cloud)?;
        for (i, scan) in self.scans.iter().enumerate() {
            write_cloud_file(&dir.join(format!("scan_{i:04}.ply")), scan)?;
        }
        let mut csv = String::from("scan_index,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n");
        for (i, pose) in self.gt_poses.iter().enumerate() {
            let _ = write!(csv, "{i}");
            for v in pose.to_row_major() {
                let _ = write!(csv, ",{v}");
            }
            csv.push('\n');
        }
        std::fs::write(dir.join("poses.csv"), csv)?;
        Ok(())
    }

    /// Loads a directory in the layout of [`SyntheticScene::write_dir`].
    /// Poses must be proper rigid transforms and indexed `0..n` in order.
    pub fn read_dir(dir: &Path) -> Result<SyntheticScene> {
        let global_cloud = read_cloud(&dir.join("global.ply"))?;
        let text = std::fs::read_to_string(dir.join("poses.csv"))?;
        let mut gt_poses = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no + 1, message };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let index: usize = fields[0].parse().map_err(|_| parse_err(format!("bad scan index {:?}", fields[0])))?;
            if index != gt_poses.len() {
                return Err(parse_err(format!("expected scan index {}, found {index}", gt_poses.len())));
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| parse_err(format!("bad number {f:?}"))))
                .collect::<Result<Vec<f64>>>()?;
            let pose = RigidTransform::from_row_major(&values).map_err(|e| parse_err(e.to_string()))?;
            gt_poses.push(pose);
        }
        if gt_poses.is_empty() {
            return Err(Error::EmptyInput("poses.csv lists no scans".into()));
        }
        let scans = (0..gt_poses.len())
            .map(|i| read_cloud(&dir.join(format!("scan_{i:04}.ply"))))
            .collect::<Result<Vec<_>>>()?;
        Ok(SyntheticScene { global_cloud, scans, gt_poses, seed: None })
    }
}
