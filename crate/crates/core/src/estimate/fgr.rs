use nalgebra::{Matrix6, Vector6};
use rand::Rng;

use super::{score, ObjectiveStep, RegistrationResult};
use crate::cloud::{Aabb, RigidTransform, Vec3};
use crate::correspond::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::rng;

const MIN_CORRESPONDENCES: usize = 4;
const INNER_ITERATIONS: usize = 4;
const MAX_BACKTRACKS: usize = 40;
const TUPLE_TRIALS_PER_CORRESPONDENCE: usize = 100;
const TUPLE_RATIO: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FgrParams {
    /// Initial robust scale in m². Unset: squared diagonal of the
    /// correspondence endpoints' bounding box.
    pub mu_init: Option<f64>,
    pub mu_min: f64,
    pub division_factor: f64,
    /// Number of annealing levels; each runs four alternation steps.
    pub max_outer_iterations: usize,
    pub tuple_test: bool,
    /// Residual bound for reporting inliers.
    pub inlier_threshold: f64,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for FgrParams {
    fn default() -> Self {
        Self {
            mu_init: None,
            mu_min: 0.01 * 0.01,
            division_factor: 1.4,
            max_outer_iterations: 64,
            tuple_test: true,
            inlier_threshold: 0.5,
            seed: 0,
        }
    }
}

impl FgrParams {
    pub fn validate(&self) -> Result<()> {
        let mu_ok = self.mu_init.is_none_or(|m| m > self.mu_min);
        if !(self.mu_min > 0.0) || !mu_ok || !(self.division_factor > 1.0) || self.max_outer_iterations == 0 || !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParameter(format!("invalid FGR parameters {self:?}")));
        }
        Ok(())
    }
}

/// Line-process weight minimizing the scaled Geman–McClure penalty for
/// squared residual `r2` at scale `mu`.
pub fn line_process_weight(r2: f64, mu: f64) -> f64 {
    let q = mu / (mu + r2);
    q * q
}

fn objective(residuals2: &[f64], weights: &[f64], mu: f64) -> f64 {
    residuals2
        .iter()
        .zip(weights)
        .map(|(r2, l)| l * r2 + mu * (l.sqrt() - 1.0).powi(2))
        .sum()
}

/// Indices of correspondences that appear in at least one triple whose
/// three edge lengths agree between source and target within 10%.
fn tuple_filter(pairs: &[(Vec3, Vec3)], seed: u64) -> Vec<usize> {
    let n = pairs.len();
    let mut rng = rng::seeded(seed);
    let mut keep = vec![false; n];
    let consistent = |a: usize, b: usize| {
        let ls = (pairs[a].0 - pairs[b].0).norm();
        let lt = (pairs[a].1 - pairs[b].1).norm();
        let ratio = ls / lt;
        ratio >= TUPLE_RATIO.0 && ratio <= TUPLE_RATIO.1
    };
    for _ in 0..n * TUPLE_TRIALS_PER_CORRESPONDENCE {
        let (a, b, c) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
        if a == b || b == c || a == c {
            continue;
        }
        if consistent(a, b) && consistent(b, c) && consistent(a, c) {
            keep[a] = true;
            keep[b] = true;
            keep[c] = true;
        }
    }
    (0..n).filter(|&i| keep[i]).collect()
}

/// Fast Global Registration: graduated non-convexity over the scaled
/// Geman–McClure cost, alternating closed-form line-process weights with a
/// Gauss–Newton step on SE(3). Each step is backtracked so the objective at
/// the current scale never increases; `trace` records one entry per step.
pub fn fgr_register(
    correspondences: &CorrespondenceSet,
    source_positions: &[Vec3],
    target_positions: &[Vec3],
    params: &FgrParams,
) -> Result<RegistrationResult> {
    params.validate()?;
    let all: Vec<(Vec3, Vec3)> = correspondences
        .pairs
        .iter()
        .map(|c| (source_positions[c.source], target_positions[c.target]))
        .collect();
    if all.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData { needed: MIN_CORRESPONDENCES, got: all.len() });
    }
    let active = if params.tuple_test { tuple_filter(&all, params.seed) } else { (0..all.len()).collect() };
    if active.len() < MIN_CORRESPONDENCES {
        return Err(Error::InsufficientData { needed: MIN_CORRESPONDENCES, got: active.len() });
    }
    let pairs: Vec<(Vec3, Vec3)> = active.iter().map(|&i| all[i]).collect();

    let mut mu = match params.mu_init {
        Some(m) => m,
        None => {
            let bounds = Aabb::from_points(pairs.iter().flat_map(|(s, t)| [*s, *t])).expect("non-empty");
            bounds.diagonal().powi(2).max(params.mu_min * params.division_factor)
        }
    };

    let residuals2 = |t: &RigidTransform| -> Vec<f64> {
        pairs.iter().map(|(s, q)| (t.apply_point(s) - q).norm_squared()).collect()
    };
    let mut transform = RigidTransform::identity();
    let mut r2 = residuals2(&transform);
    let mut weights = vec![1.0; pairs.len()];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..params.max_outer_iterations {
        let mut moved = 0.0;
        for _ in 0..INNER_ITERATIONS {
            iterations += 1;
            let before = objective(&r2, &weights, mu);
            for (l, r) in weights.iter_mut().zip(&r2) {
                *l = line_process_weight(*r, mu);
            }
            let weighted = objective(&r2, &weights, mu);
            let (next, next_r2) = gauss_newton_step(&pairs, &transform, &r2, &weights, mu);
            let after = objective(&next_r2, &weights, mu);
            if !after.is_finite() || !weighted.is_finite() {
                return Err(Error::NumericalFailure("non-finite FGR objective".into()));
            }
            moved += (next.translation() - transform.translation()).norm()
                + next.compose(&transform.inverse()).rotation_angle();
            trace.push(ObjectiveStep { mu: Some(mu), before, after });
            transform = next;
            r2 = next_r2;
        }
        if mu <= params.mu_min && moved < 1e-9 {
            converged = true;
            break;
        }
        mu = (mu / params.division_factor).max(params.mu_min);
    }
    converged |= mu <= params.mu_min;

    let (inliers, rms) = score(&transform, all.iter().copied(), params.inlier_threshold);
    let mut result = RegistrationResult::new(transform);
    result.inlier_indices = inliers;
    result.rms_residual = rms;
    result.iterations = iterations;
    result.converged = converged;
    result.trace = trace;
    Ok(result)
}

/// One Gauss–Newton step on `Σ lᵢ ‖T sᵢ − tᵢ‖²`, linearized about the
/// weighted centroid of the transformed sources. Halves the step until the
/// weighted objective does not increase; returns the input when no such step exists.
fn gauss_newton_step(
    pairs: &[(Vec3, Vec3)],
    transform: &RigidTransform,
    r2: &[f64],
    weights: &[f64],
    mu: f64,
) -> (RigidTransform, Vec<f64>) {
    let moved: Vec<Vec3> = pairs.iter().map(|(s, _)| transform.apply_point(s)).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return (*transform, r2.to_vec());
    }
    let center = moved.iter().zip(weights).map(|(p, w)| *w * p).sum::<Vec3>() / total;

    let mut jtj = Matrix6::<f64>::zeros();
    let mut jtr = Vector6::<f64>::zeros();
    for ((p, (_, q)), &w) in moved.iter().zip(pairs).zip(weights) {
        let x = p - center;
        let r = p - q;
        // Rows of J = [−[x]×  I] for the three residual components.
        let rows = [
            Vector6::new(0.0, x.z, -x.y, 1.0, 0.0, 0.0),
            Vector6::new(-x.z, 0.0, x.x, 0.0, 1.0, 0.0),
            Vector6::new(x.y, -x.x, 0.0, 0.0, 0.0, 1.0),
        ];
        for (k, j) in rows.iter().enumerate() {
            jtj += w * j * j.transpose();
            jtr += w * j * r[k];
        }
    }
    let Some(xi) = jtj.cholesky().map(|c| c.solve(&(-jtr))) else {
        return (*transform, r2.to_vec());
    };
    let current = objective(r2, weights, mu);
    let mut scale = 1.0;
    for _ in 0..MAX_BACKTRACKS {
        let step = xi * scale;
        let omega = Vec3::new(step[0], step[1], step[2]);
        let v = Vec3::new(step[3], step[4], step[5]);
        let about_center = RigidTransform::from_translation(center)
            .compose(&RigidTransform::from_scaled_axis(omega, v))
            .compose(&RigidTransform::from_translation(-center));
        let candidate = about_center.compose(transform);
        let cand_r2: Vec<f64> = pairs.iter().map(|(s, q)| (candidate.apply_point(s) - q).norm_squared()).collect();
        if objective(&cand_r2, weights, mu) <= current {
            return (candidate, cand_r2);
        }
        scale *= 0.5;
    }
    (*transform, r2.to_vec())
}
