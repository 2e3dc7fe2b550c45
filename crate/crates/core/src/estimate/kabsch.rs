use nalgebra::Matrix3;

use crate::cloud::{RigidTransform, Vec3};
use crate::error::{Error, Result};

/// Relative singular-value floor below which the cross-covariance is treated
/// as rank-deficient (collinear or coincident samples).
const RANK_TOLERANCE: f64 = 1e-10;

/// Least-squares rigid transform taking each source point onto its target.
pub fn kabsch_umeyama(pairs: &[(Vec3, Vec3)]) -> Result<RigidTransform> {
    weighted_kabsch(pairs.iter().map(|(s, t)| (*s, *t, 1.0)))
}

/// Minimizes `Σ wᵢ ‖R sᵢ + t − tᵢ‖²`.
fn weighted_kabsch(pairs: impl Iterator<Item = (Vec3, Vec3, f64)> + Clone) -> Result<RigidTransform> {
    let mut total = 0.0;
    let mut cs = Vec3::zeros();
    let mut ct = Vec3::zeros();
    let mut count = 0usize;
    for (s, t, w) in pairs.clone() {
        total += w;
        cs += w * s;
        ct += w * t;
        count += 1;
    }
    if count < 3 || !(total > 0.0) {
        return Err(Error::DegenerateSample(format!("{count} pairs with total weight {total}")));
    }
    cs /= total;
    ct /= total;
    let mut h = Matrix3::zeros();
    for (s, t, w) in pairs {
        h += w * (s - cs) * (t - ct).transpose();
    }
    if !h.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalFailure("non-finite cross-covariance".into()));
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let sv = svd.singular_values;
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    if !(sv[order[0]] > 0.0) || sv[order[1]] <= RANK_TOLERANCE * sv[order[0]] {
        return Err(Error::DegenerateSample("collinear or coincident points".into()));
    }
    let v = v_t.transpose();
    let mut correction = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        correction[(order[2], order[2])] = -1.0;
    }
    let rotation = v * correction * u.transpose();
    Ok(RigidTransform::from_parts(rotation, ct - rotation * cs))
}
