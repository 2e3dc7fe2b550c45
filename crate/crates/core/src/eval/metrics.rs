use std::collections::BTreeMap;

use crate::cloud::RigidTransform;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentError {
    /// Translational error in meters.
    pub e_t: f64,
    /// Rotational error in radians, within `[0, π]`.
    pub e_r: f64,
    /// `T_gt⁻¹ ∘ T_est`.
    pub delta: RigidTransform,
}

impl AlignmentError {
    pub fn e_r_degrees(&self) -> f64 {
        self.e_r.to_degrees()
    }
}

/// Error of an estimate against ground truth: the translation norm and the
/// rotation angle of `ΔT = T_gt⁻¹ ∘ T_est`. The angle equals
/// `arccos((tr ΔR − 1)/2)`, evaluated in a form that stays accurate near 0 and π.
pub fn alignment_error(estimate: &RigidTransform, ground_truth: &RigidTransform) -> AlignmentError {
    let delta = ground_truth.inverse().compose(estimate);
    AlignmentError { e_t: delta.translation().norm(), e_r: delta.rotation_angle(), delta }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessCriteria {
    /// Meters allowed above the baseline translational error.
    pub t_threshold: f64,
    /// Radians allowed above the baseline rotational error.
    pub r_threshold: f64,
    /// Baseline errors `(e_t, e_r)`, typically those of ICP from ground truth.
    pub baseline: (f64, f64),
    /// Fraction of successful trials that makes a scan count reliable.
    pub reliability: f64,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        Self { t_threshold: 3.0, r_threshold: 5f64.to_radians(), baseline: (0.0, 0.0), reliability: 0.9 }
    }
}

impl SuccessCriteria {
    pub fn with_baseline(baseline: &AlignmentError) -> Self {
        Self { baseline: (baseline.e_t, baseline.e_r), ..Self::default() }
    }
}

pub fn classify_success(err: &AlignmentError, criteria: &SuccessCriteria) -> bool {
    err.e_t <= criteria.baseline.0 + criteria.t_threshold && err.e_r <= criteria.baseline.1 + criteria.r_threshold
}

/// Smallest scan count whose trials succeed at least `criteria.reliability`
/// of the time.
pub fn min_scans_to_reliable(trials: &BTreeMap<usize, Vec<AlignmentError>>, criteria: &SuccessCriteria) -> Option<usize> {
    let outcomes = trials
        .iter()
        .map(|(&k, errs)| (k, errs.iter().map(|e| classify_success(e, criteria)).collect()))
        .collect();
    min_scans_from_outcomes(&outcomes, criteria.reliability)
}

/// As [`min_scans_to_reliable`], from precomputed success flags.
pub fn min_scans_from_outcomes(outcomes: &BTreeMap<usize, Vec<bool>>, reliability: f64) -> Option<usize> {
    outcomes
        .iter()
        .find(|(_, flags)| {
            !flags.is_empty() && flags.iter().filter(|s| **s).count() as f64 >= reliability * flags.len() as f64
        })
        .map(|(&k, _)| k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn pythagorean_translation() {
        let e = alignment_error(&RigidTransform::from_translation(Vec3::new(3.0, 4.0, 0.0)), &RigidTransform::identity());
        assert_eq!(e.e_t, 5.0);
        assert_eq!(e.e_r, 0.0);
    }

    #[test]
    fn quarter_turn() {
        let est = RigidTransform::from_axis_angle(&Vec3::z(), FRAC_PI_2, Vec3::zeros());
        let e = alignment_error(&est, &RigidTransform::identity());
        assert!((e.e_r - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn thresholds_are_relative_to_baseline() {
        let c = SuccessCriteria { baseline: (0.2, 2f64.to_radians()), ..Default::default() };
        let err = |t: f64, r: f64| AlignmentError { e_t: t, e_r: r.to_radians(), delta: RigidTransform::identity() };
        assert!(classify_success(&err(3.1, 6.0), &c));
        assert!(!classify_success(&err(3.3, 1.0), &c));
        assert!(classify_success(&err(0.2, 2.0), &c));
    }

    #[test]
    fn reliability_cutoff() {
        let mut m = BTreeMap::new();
        m.insert(4, [vec![true; 8], vec![false; 2]].concat());
        m.insert(5, [vec![true; 9], vec![false; 1]].concat());
        assert_eq!(min_scans_from_outcomes(&m, 0.9), Some(5));
        m.insert(5, vec![false; 10]);
        assert_eq!(min_scans_from_outcomes(&m, 0.9), None);
    }
}
