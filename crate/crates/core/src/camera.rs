//! Ideal pinhole camera: world → camera by `R x + t`, camera → pixel by the
//! intrinsics `fx, fy, cx, cy`.
//!
//! Calibration files are TOML:
//!
//! ```toml
//! rotation = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]  # row-major
//! translation = [0.0, 0.0, 0.015]                          # meters
//! fx = 240.0
//! fy = 240.0
//! cx = 114.0
//! cy = 114.0
//! width = 228
//! height = 228
//! ```
//!
//! Lens distortion is not modelled; files carrying distortion coefficients
//! are rejected.

use std::path::Path;

use crate::error::CameraError;
use crate::geometry::{is_rotation, Mat3, Vec3, ORTHONORMAL_TOL};

/// Points closer to the image plane than this are behind the camera.
pub const Z_EPSILON: f64 = 1e-6;

const DISTORTION_KEYS: &[&str] = &[
    "distortion",
    "dist_coeffs",
    "distortion_coefficients",
    "k1",
    "k2",
    "k3",
    "p1",
    "p2",
];
const FIELDS: &[&str] = &["rotation", "translation", "fx", "fy", "cx", "cy", "width", "height"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    rotation: Mat3,
    translation: Vec3,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// Pixel coordinates of one point; `visible` is false for points behind the
/// camera (whose `u`, `v` are NaN) and for points outside the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub visible: bool,
}

fn schema(field: &str, message: impl Into<String>) -> CameraError {
    CameraError::Schema {
        field: field.to_string(),
        message: message.into(),
    }
}

impl CameraModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        rotation: Mat3,
        translation: Vec3,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        if !rotation.iter().all(|v| v.is_finite()) || !is_rotation(&rotation, ORTHONORMAL_TOL) {
            return Err(schema(
                "rotation",
                format!(
                    "must be orthonormal with determinant +1 (det = {})",
                    rotation.determinant()
                ),
            ));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(schema("translation", "must be finite"));
        }
        for (name, f) in [("fx", fx), ("fy", fy)] {
            if !(f > 0.0 && f.is_finite()) {
                return Err(schema(name, format!("focal length must be positive, got {f}")));
            }
        }
        if width == 0 {
            return Err(schema("width", "must be positive"));
        }
        if height == 0 {
            return Err(schema("height", "must be positive"));
        }
        if !(0.0..width as f64).contains(&cx) {
            return Err(schema("cx", format!("must lie in [0, {width}), got {cx}")));
        }
        if !(0.0..height as f64).contains(&cy) {
            return Err(schema("cy", format!("must lie in [0, {height}), got {cy}")));
        }
        Ok(Self {
            rotation,
            translation,
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Intrinsic matrix `K`.
    pub fn intrinsics(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn world_to_camera(&self, x: &Vec3) -> Vec3 {
        self.rotation * x + self.translation
    }

    pub fn camera_to_pixel(&self, xc: &Vec3) -> Result<(f64, f64), CameraError> {
        if !(xc.z > Z_EPSILON) {
            return Err(CameraError::BehindCamera {
                point: [xc.x, xc.y, xc.z],
            });
        }
        Ok((
            self.fx * xc.x / xc.z + self.cx,
            self.fy * xc.y / xc.z + self.cy,
        ))
    }

    pub fn project(&self, x: &Vec3) -> Projection {
        match self.camera_to_pixel(&self.world_to_camera(x)) {
            Ok((u, v)) => Projection {
                u,
                v,
                visible: (0.0..self.width as f64).contains(&u) && (0.0..self.height as f64).contains(&v),
            },
            Err(_) => Projection {
                u: f64::NAN,
                v: f64::NAN,
                visible: false,
            },
        }
    }

    pub fn project_points(&self, points: &[Vec3]) -> Vec<Projection> {
        points.iter().map(|p| self.project(p)).collect()
    }

    pub fn parse(text: &str) -> Result<Self, CameraError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| schema("<file>", e.message().to_string()))?;
        for key in table.keys() {
            if DISTORTION_KEYS.contains(&key.as_str()) {
                return Err(schema(
                    key,
                    "lens distortion is not supported; provide an undistorted pinhole calibration",
                ));
            }
            if !FIELDS.contains(&key.as_str()) {
                return Err(schema(key, "unknown field"));
            }
        }
        let number = |v: &toml::Value| v.as_float().or_else(|| v.as_integer().map(|i| i as f64));
        let scalar = |field: &str| -> Result<f64, CameraError> {
            let v = table.get(field).ok_or_else(|| schema(field, "missing field"))?;
            number(v).ok_or_else(|| schema(field, "expected a number"))
        };
        let array = |field: &str, len: usize| -> Result<Vec<f64>, CameraError> {
            let v = table.get(field).ok_or_else(|| schema(field, "missing field"))?;
            let arr = v
                .as_array()
                .ok_or_else(|| schema(field, format!("expected an array of {len} numbers")))?;
            if arr.len() != len {
                return Err(schema(field, format!("expected {len} numbers, got {}", arr.len())));
            }
            arr.iter()
                .map(|x| number(x).ok_or_else(|| schema(field, "expected numbers")))
                .collect()
        };
        let size = |field: &str| -> Result<u32, CameraError> {
            let v = table.get(field).ok_or_else(|| schema(field, "missing field"))?;
            v.as_integer()
                .and_then(|i| u32::try_from(i).ok())
                .ok_or_else(|| schema(field, "expected a non-negative integer"))
        };
        let r = array("rotation", 9)?;
        let t = array("translation", 3)?;
        Self::new(
            Mat3::from_row_slice(&r),
            Vec3::new(t[0], t[1], t[2]),
            scalar("fx")?,
            scalar("fy")?,
            scalar("cx")?,
            scalar("cy")?,
            size("width")?,
            size("height")?,
        )
    }

    pub fn to_toml(&self) -> String {
        let r = &self.rotation;
        let fmt = |v: f64| format!("{v:?}");
        format!(
            "rotation = [{}]\ntranslation = [{}]\nfx = {}\nfy = {}\ncx = {}\ncy = {}\nwidth = {}\nheight = {}\n",
            (0..9).map(|i| fmt(r[(i / 3, i % 3)])).collect::<Vec<_>>().join(", "),
            self.translation.iter().map(|v| fmt(*v)).collect::<Vec<_>>().join(", "),
            fmt(self.fx),
            fmt(self.fy),
            fmt(self.cx),
            fmt(self.cy),
            self.width,
            self.height,
        )
    }
}

pub fn load_calibration(path: impl AsRef<Path>) -> Result<CameraModel, CameraError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CameraError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    CameraModel::parse(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_z;
    use proptest::prelude::*;

    fn fixture() -> CameraModel {
        CameraModel::new(Mat3::identity(), Vec3::new(0.0, 0.0, 0.05), 200.0, 200.0, 114.0, 114.0, 228, 228).unwrap()
    }

    const FIXTURE: &str = "rotation = [1, 0, 0, 0, 1, 0, 0, 0, 1]\ntranslation = [0, 0, 0.05]\nfx = 200\nfy = 200\ncx = 114\ncy = 114\nwidth = 228\nheight = 228\n";

    #[test]
    fn parses_fixture() {
        assert_eq!(CameraModel::parse(FIXTURE).unwrap(), fixture());
        assert_eq!(CameraModel::parse(&fixture().to_toml()).unwrap(), fixture());
    }

    fn field_of(err: CameraError) -> String {
        match err {
            CameraError::Schema { field, .. } => field,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn schema_errors_name_the_field() {
        let reflect = FIXTURE.replace("0, 0, 0, 1]", "0, 0, 0, -1]");
        assert_eq!(field_of(CameraModel::parse(&reflect).unwrap_err()), "rotation");
        let zero_fx = FIXTURE.replace("fx = 200", "fx = 0");
        assert_eq!(field_of(CameraModel::parse(&zero_fx).unwrap_err()), "fx");
        let missing = FIXTURE.replace("cy = 114\n", "");
        assert_eq!(field_of(CameraModel::parse(&missing).unwrap_err()), "cy");
        let distorted = format!("{FIXTURE}k1 = 0.1\n");
        assert_eq!(field_of(CameraModel::parse(&distorted).unwrap_err()), "k1");
        let off_frame = FIXTURE.replace("cx = 114", "cx = 228");
        assert_eq!(field_of(CameraModel::parse(&off_frame).unwrap_err()), "cx");
    }

    #[test]
    fn world_to_camera_cases() {
        let id = CameraModel::new(Mat3::identity(), Vec3::zeros(), 1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
        assert_eq!(id.world_to_camera(&Vec3::new(1.0, 2.0, 3.0)), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(fixture().world_to_camera(&Vec3::zeros()), Vec3::new(0.0, 0.0, 0.05));
        let rz = CameraModel::new(rotation_z(std::f64::consts::FRAC_PI_2), Vec3::zeros(), 1.0, 1.0, 0.0, 0.0, 1, 1).unwrap();
        assert!((rz.world_to_camera(&Vec3::x()) - Vec3::y()).norm() < 1e-15);
    }

    #[test]
    fn pixel_cases() {
        let cam = fixture();
        assert_eq!(cam.camera_to_pixel(&Vec3::new(0.0, 0.0, 0.3)).unwrap(), (114.0, 114.0));
        let (u, v) = cam.camera_to_pixel(&Vec3::new(0.01, -0.02, 0.05)).unwrap();
        assert!((u - 154.0).abs() < 1e-9 && (v - 34.0).abs() < 1e-9);
        assert!(matches!(
            cam.camera_to_pixel(&Vec3::new(0.01, 0.0, -0.05)),
            Err(CameraError::BehindCamera { .. })
        ));
    }

    #[test]
    fn visibility_flags() {
        let cam = fixture();
        assert!(cam.project_points(&[]).is_empty());
        let p = cam.project_points(&[Vec3::new(0.0, 0.0, -0.1), Vec3::new(1.0, 0.0, 0.0), Vec3::zeros()]);
        assert!(!p[0].visible && p[0].u.is_nan());
        assert!(!p[1].visible);
        assert!(p[2].visible);
    }

    #[test]
    fn intrinsics_matrix_form() {
        let cam = fixture();
        let xc = Vec3::new(0.013, -0.004, 0.041);
        let h = cam.intrinsics() * xc / xc.z;
        let (u, v) = cam.camera_to_pixel(&xc).unwrap();
        assert!((h.x - u).abs() < 1e-12 && (h.y - v).abs() < 1e-12 && (h.z - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projection_is_scale_invariant(x in -1.0f64..1.0, y in -1.0f64..1.0, z in 0.01f64..2.0, s in 0.01f64..100.0) {
            let cam = fixture();
            let a = cam.camera_to_pixel(&Vec3::new(x, y, z)).unwrap();
            let b = cam.camera_to_pixel(&(Vec3::new(x, y, z) * s)).unwrap();
            prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
        }

        #[test]
        fn fronto_parallel_distances_scale(ax in -0.01f64..0.01, ay in -0.01f64..0.01, bx in -0.01f64..0.01, by in -0.01f64..0.01) {
            let cam = fixture();
            let pa = cam.project(&Vec3::new(ax, ay, 0.0));
            let pb = cam.project(&Vec3::new(bx, by, 0.0));
            let world = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
            prop_assume!(world > 1e-6);
            let pixel = ((pa.u - pb.u).powi(2) + (pa.v - pb.v).powi(2)).sqrt();
            prop_assert!((pixel / world / (200.0 / 0.05) - 1.0).abs() < 1e-9);
        }
    }
}
