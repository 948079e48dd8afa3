//! SE(3) rigid transforms.

use nalgebra::{Matrix3, Matrix4, Unit, Vector3};

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::Point3;

/// Elementwise tolerance for the orthonormality and determinant checks.
const ROTATION_TOL: f64 = 1e-9;

/// A rigid motion: rotation followed by translation, mapping source-frame
/// points into the target frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<S: Real> {
    rotation: Matrix3<S>,
    translation: Vector3<S>,
}

impl<S: Real> RigidTransform<S> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a transform, checking that `rotation` is a proper rotation
    /// (orthonormal, determinant +1) within `1e-9`.
    pub fn new(rotation: Matrix3<S>, translation: Vector3<S>) -> Result<Self> {
        let t = Self {
            rotation,
            translation,
        };
        t.validate()?;
        Ok(t)
    }

    /// Builds a transform without validating the rotation. Callers must
    /// guarantee the rotation invariants themselves.
    pub fn from_parts_unchecked(rotation: Matrix3<S>, translation: Vector3<S>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_axis_angle(axis: Unit<Vector3<S>>, angle: S, translation: Vector3<S>) -> Self {
        Self {
            rotation: nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<S> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<S> {
        &self.translation
    }

    /// Checks the rotation invariants: `RᵀR = I` and `det R = +1`, both
    /// elementwise within `1e-9`, and all entries finite.
    pub fn validate(&self) -> Result<()> {
        let tol = real::<S>(ROTATION_TOL);
        for v in self.rotation.iter().chain(self.translation.iter()) {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(
                    "transform contains non-finite values".into(),
                ));
            }
        }
        let gram = self.rotation.transpose() * self.rotation;
        let identity = Matrix3::<S>::identity();
        for (a, b) in gram.iter().zip(identity.iter()) {
            if (*a - *b).abs() > tol {
                return Err(Error::InvalidArgument(
                    "rotation is not orthonormal within 1e-9".into(),
                ));
            }
        }
        if (self.rotation.determinant() - S::one()).abs() > tol {
            return Err(Error::InvalidArgument(
                "rotation determinant is not +1 within 1e-9".into(),
            ));
        }
        Ok(())
    }

    /// Applies the transform to a point: `R·p + t`.
    #[inline]
    pub fn apply(&self, p: &Point3<S>) -> Point3<S> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// Rotates a direction vector (no translation).
    #[inline]
    pub fn rotate(&self, v: &Vector3<S>) -> Vector3<S> {
        self.rotation * v
    }

    /// Composition: `self.compose(other)` applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Self {
        let rot_inv = self.rotation.transpose();
        Self {
            rotation: rot_inv,
            translation: -(rot_inv * self.translation),
        }
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> Matrix4<S> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Extracts the rotation and translation blocks of a homogeneous matrix.
    pub fn from_homogeneous(m: &Matrix4<S>) -> Result<Self> {
        Self::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Rotation angle in radians, from the trace.
    pub fn rotation_angle(&self) -> S {
        let c = (self.rotation.trace() - S::one()) / real(2.0);
        c.clamp(-S::one(), S::one()).acos()
    }
}
