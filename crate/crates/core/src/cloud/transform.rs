use nalgebra::{Matrix3, Rotation3, Unit};

use super::Vec3;
use crate::{Error, Result};

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Element of SE(3): `p ↦ R p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validates `‖RᵀR − I‖∞ < 1e−9` and `det R > 0`.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite transform entry".into()));
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        if err >= ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "rotation is not orthonormal (‖RᵀR − I‖∞ = {err:e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::InvalidParameter("rotation has non-positive determinant".into()));
        }
        Ok(Self { rotation, translation })
    }

    /// For rotations orthonormal by construction (SVD products, exponentials).
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn from_rotation(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        Self {
            rotation: rotation.into_inner(),
            translation,
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: &Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle);
        Self::from_rotation(rotation, translation)
    }

    /// Rotation from a rotation vector (axis · angle) via the exponential map.
    pub fn from_scaled_axis(omega: Vec3, translation: Vec3) -> Self {
        Self::from_rotation(Rotation3::new(omega), translation)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in `[0, π]`, computed as `atan2(‖vee(R − Rᵀ)‖/2, (tr R − 1)/2)`,
    /// which equals `arccos((tr R − 1)/2)` but stays accurate near 0 and π.
    pub fn rotation_angle(&self) -> f64 {
        rotation_angle(&self.rotation)
    }

    /// Row-major `[R | t]`, 12 values.
    pub fn to_row_major(&self) -> [f64; 12] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t[0],
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t[1],
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t[2],
        ]
    }

    pub fn from_row_major(values: &[f64]) -> Result<Self> {
        if values.len() != 12 {
            return Err(Error::InvalidParameter(format!(
                "expected 12 transform values, got {}",
                values.len()
            )));
        }
        let rotation = Matrix3::new(
            values[0], values[1], values[2], values[4], values[5], values[6], values[8], values[9], values[10],
        );
        Self::new(rotation, Vec3::new(values[3], values[7], values[11]))
    }
}

pub(crate) fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = (r.trace() - 1.0) * 0.5;
    let axis = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    let sin = axis.norm() * 0.5;
    // atan2 tolerates |cos| slightly above 1 from rounding.
    sin.atan2(cos)
}
