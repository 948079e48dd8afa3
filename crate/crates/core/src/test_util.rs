//! Shared helpers for unit tests.

use nalgebra::{Rotation3, Unit, UnitQuaternion, Vector3};
use rand::Rng;

use crate::transform::RigidTransform;
use crate::Point3;

/// Rotation angle between two transforms in radians, via the quaternion
/// path. Unlike the trace formula this stays accurate near zero.
pub fn rotation_gap(a: &RigidTransform<f64>, b: &RigidTransform<f64>) -> f64 {
    let rel = a.rotation().transpose() * b.rotation();
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(rel)).angle()
}

pub fn translation_gap(a: &RigidTransform<f64>, b: &RigidTransform<f64>) -> f64 {
    (a.translation() - b.translation()).norm()
}

pub fn random_point<R: Rng>(rng: &mut R, extent: f64) -> Point3<f64> {
    Point3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    )
}

pub fn random_unit_vector<R: Rng>(rng: &mut R) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    }
}

pub fn random_transform<R: Rng>(rng: &mut R) -> RigidTransform<f64> {
    let axis = random_unit_vector(rng);
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let translation = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    );
    RigidTransform::from_axis_angle(axis, angle, translation)
}

/// Composes a small random rotation/translation offset onto `t`.
pub fn perturbed_transform<R: Rng>(
    rng: &mut R,
    t: &RigidTransform<f64>,
    max_angle: f64,
    max_shift: f64,
) -> RigidTransform<f64> {
    let axis = random_unit_vector(rng);
    let angle = rng.random_range(-max_angle..max_angle);
    let shift = random_unit_vector(rng).into_inner() * rng.random_range(0.0..max_shift);
    let delta = RigidTransform::from_axis_angle(axis, angle, shift);
    delta.compose(t)
}
