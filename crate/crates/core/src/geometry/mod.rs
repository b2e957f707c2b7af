//! Linear-algebra aliases, rigid transforms, STL ingestion and particle sampling.

mod sampling;
mod stl;

pub use sampling::{
    make_box_cloud, voxel_sample_volume, voxel_sample_volume_with_stats, ParticleCloud,
    SamplingStats,
};
pub use stl::{parse_stl, write_stl_binary, TriangleMesh};

use crate::error::GeometryError;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

/// Tolerance used when validating user-supplied rotations.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Checks `R Rᵀ = I` and `det R = +1` to `tol`.
pub fn is_rotation(r: &Mat3, tol: f64) -> bool {
    let err = (r * r.transpose() - Mat3::identity()).abs().max();
    err <= tol && (r.determinant() - 1.0).abs() <= tol
}

/// Rotation by `angle` radians about +z.
pub fn rotation_z(angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Proper rigid motion `x ↦ R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Mat3,
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
            rotation: Mat3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validating constructor for rotations coming from user input.
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::NonFiniteTransform);
        }
        if !is_rotation(&rotation, ORTHONORMAL_TOL) {
            return Err(GeometryError::NotARotation {
                det: rotation.determinant(),
            });
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Mat3::identity(),
            translation,
        }
    }

    /// Rotation about the vertical axis through `pivot`, followed by `translation`.
    pub fn rotation_about_z(angle: f64, pivot: Vec3, translation: Vec3) -> Self {
        let rotation = rotation_z(angle);
        Self {
            rotation,
            translation: pivot - rotation * pivot + translation,
        }
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn apply(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
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
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rot(ax: f64, ay: f64, az: f64) -> Mat3 {
        *nalgebra::Rotation3::from_euler_angles(ax, ay, az).matrix()
    }

    #[test]
    fn rejects_reflection() {
        let r = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(
            RigidTransform::new(r, Vec3::zeros()),
            Err(GeometryError::NotARotation { .. })
        ));
    }

    #[test]
    fn rejects_non_orthonormal() {
        let r = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, 1.0 + 1e-6));
        assert!(RigidTransform::new(r, Vec3::zeros()).is_err());
    }

    #[test]
    fn rotation_about_z_keeps_pivot_fixed() {
        let pivot = Vec3::new(0.3, -0.2, 1.0);
        let t = RigidTransform::rotation_about_z(0.7, pivot, Vec3::zeros());
        assert!((t.apply(&pivot) - pivot).norm() < 1e-15);
    }

    #[test]
    fn inverse_roundtrip() {
        let t = RigidTransform::new(rot(0.1, 0.2, 0.3), Vec3::new(1.0, 2.0, 3.0)).unwrap();
        let x = Vec3::new(-0.4, 0.5, 7.0);
        assert!((t.inverse().apply(&t.apply(&x)) - x).norm() < 1e-12);
    }

    proptest! {
        #[test]
        fn compositions_stay_orthonormal(angles in proptest::collection::vec((-3.2f64..3.2, -3.2f64..3.2, -3.2f64..3.2), 1..40)) {
            let mut acc = RigidTransform::identity();
            for (a, b, c) in angles {
                let t = RigidTransform::new(rot(a, b, c), Vec3::new(a, b, c)).unwrap();
                acc = acc.compose(&t);
                prop_assert!(is_rotation(acc.rotation(), 1e-9));
            }
        }
    }
}
