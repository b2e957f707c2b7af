//! Marker ellipses, binary masks, depth and joint images.

mod depth;
mod ellipse;
mod joint;
mod raster;

use std::io::Write;

pub use depth::render_depth_map;
pub use ellipse::{fit_ellipse, fit_ellipse_or_disc, EllipseFit};
pub use joint::{compose_joint_image, Colormap};
pub use raster::{label_components, rasterize_mask};

use crate::camera::CameraModel;
use crate::error::ImagingError;
use crate::geometry::Vec3;

/// Binary raster, row-major, one byte per pixel holding 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl MaskImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            pixels: vec![0; width as usize * height as usize],
        }
    }

    pub fn get(&self, i: u32, j: u32) -> bool {
        self.pixels[(j * self.width + i) as usize] != 0
    }

    pub fn set(&mut self, i: u32, j: u32, on: bool) {
        self.pixels[(j * self.width + i) as usize] = on as u8;
    }

    pub fn count_set(&self) -> usize {
        self.pixels.iter().filter(|&&p| p != 0).count()
    }

    /// 8-bit grayscale PNG with set pixels at 255.
    pub fn to_png(&self) -> Result<Vec<u8>, ImagingError> {
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| if p != 0 { 255 } else { 0 }).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &bytes)
    }
}

/// Single-channel float raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<f64>,
}

impl GrayImage {
    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn to_png(&self) -> Result<Vec<u8>, ImagingError> {
        let bytes: Vec<u8> = self.pixels.iter().map(|&p| to_byte(p)).collect();
        encode_png(self.width, self.height, png::ColorType::Grayscale, &bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<[u8; 3]>,
}

impl RgbImage {
    pub fn to_png(&self) -> Result<Vec<u8>, ImagingError> {
        let bytes: Vec<u8> = self.pixels.iter().flatten().copied().collect();
        encode_png(self.width, self.height, png::ColorType::Rgb, &bytes)
    }
}

pub(crate) fn to_byte(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_png(width: u32, height: u32, color: png::ColorType, data: &[u8]) -> Result<Vec<u8>, ImagingError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width, height);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(data)?;
        writer.finish()?;
    }
    out.flush()?;
    Ok(out)
}

/// Projects every marker group and fits an ellipse to the visible points.
/// Groups that fit degenerately are replaced by discs; the second value
/// counts them.
pub fn fit_marker_groups(groups: &[Vec<Vec3>], camera: &CameraModel) -> Result<(Vec<EllipseFit>, usize), ImagingError> {
    let mut fits = Vec::with_capacity(groups.len());
    let mut fallbacks = 0;
    for g in groups {
        let pts: Vec<[f64; 2]> = camera
            .project_points(g)
            .into_iter()
            .filter(|p| p.visible)
            .map(|p| [p.u, p.v])
            .collect();
        let (fit, fallback) = fit_ellipse_or_disc(&pts)?;
        fallbacks += fallback as usize;
        fits.push(fit);
    }
    Ok((fits, fallbacks))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>) {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info, buf)
    }

    #[test]
    fn mask_png_round_trip() {
        let mut m = MaskImage::new(5, 3);
        m.set(4, 2, true);
        m.set(0, 0, true);
        let (info, data) = decode(&m.to_png().unwrap());
        assert_eq!((info.width, info.height), (5, 3));
        assert_eq!(info.color_type, png::ColorType::Grayscale);
        assert_eq!(data[0], 255);
        assert_eq!(data[14], 255);
        assert_eq!(data.iter().filter(|&&b| b != 0).count(), 2);
    }

    #[test]
    fn rgb_png_round_trip() {
        let img = RgbImage {
            width: 2,
            height: 1,
            pixels: vec![[1, 2, 3], [250, 128, 0]],
        };
        let (info, data) = decode(&img.to_png().unwrap());
        assert_eq!(info.color_type, png::ColorType::Rgb);
        assert_eq!(data, vec![1, 2, 3, 250, 128, 0]);
    }

    #[test]
    fn encoding_is_repeatable() {
        let img = GrayImage {
            width: 16,
            height: 16,
            pixels: (0..256).map(|i| i as f64 / 255.0).collect(),
        };
        let a = img.to_png().unwrap();
        assert_eq!(a, img.to_png().unwrap());
        let (_, data) = decode(&a);
        assert_eq!(data, (0..=255u8).collect::<Vec<_>>());
    }

    #[test]
    fn marker_groups_project_to_discs() {
        let camera = CameraModel::new(crate::geometry::Mat3::identity(), Vec3::new(0.0, 0.0, 0.015), 240.0, 240.0, 114.0, 114.0, 228, 228).unwrap();
        let ring: Vec<Vec3> = (0..12)
            .map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 12.0;
                Vec3::new(0.0008 * t.cos(), 0.0008 * t.sin(), 0.005)
            })
            .collect();
        let line: Vec<Vec3> = (0..6).map(|k| Vec3::new(0.001 * k as f64, 0.0, 0.005)).collect();
        let (fits, fallbacks) = fit_marker_groups(&[ring, line], &camera).unwrap();
        assert_eq!(fallbacks, 1);
        // 0.8 mm at a range of 20 mm with f = 240 px
        assert!((fits[0].semi_axes[0] - 9.6).abs() < 1e-9);
        assert!((fits[0].center[0] - 114.0).abs() < 1e-9);
    }
}
