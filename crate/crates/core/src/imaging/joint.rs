use super::{GrayImage, MaskImage, RgbImage};
use crate::error::ImagingError;

/// Piecewise-linear color ramp over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Colormap {
    stops: Vec<(f64, [f64; 3])>,
}

impl Colormap {
    /// Stops must be sorted by position; colors are 0..1 per channel.
    pub fn new(stops: Vec<(f64, [f64; 3])>) -> Option<Self> {
        let sorted = stops.windows(2).all(|w| w[0].0 < w[1].0);
        (!stops.is_empty() && sorted).then_some(Self { stops })
    }

    pub fn gray() -> Self {
        Self {
            stops: vec![(0.0, [0.0; 3]), (1.0, [1.0; 3])],
        }
    }

    /// Dark blue-gray at rest brightening to a warm tint in deep contact,
    /// loosely resembling a lit gel pad.
    pub fn gel() -> Self {
        Self {
            stops: vec![
                (0.0, [0.18, 0.20, 0.30]),
                (0.5, [0.45, 0.42, 0.55]),
                (1.0, [0.95, 0.80, 0.70]),
            ],
        }
    }

    pub fn sample(&self, t: f64) -> [u8; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let first = self.stops[0];
        let last = self.stops[self.stops.len() - 1];
        let rgb = if t <= first.0 {
            first.1
        } else if t >= last.0 {
            last.1
        } else {
            let k = self.stops.partition_point(|s| s.0 <= t);
            let (t0, c0) = self.stops[k - 1];
            let (t1, c1) = self.stops[k];
            let s = (t - t0) / (t1 - t0);
            [0, 1, 2].map(|i| c0[i] + s * (c1[i] - c0[i]))
        };
        rgb.map(super::to_byte)
    }
}

/// Colormapped depth with marker pixels painted over in `marker_color`.
pub fn compose_joint_image(
    depth: &GrayImage,
    mask: &MaskImage,
    marker_color: [u8; 3],
    colormap: &Colormap,
) -> Result<RgbImage, ImagingError> {
    if depth.dims() != (mask.width, mask.height) {
        return Err(ImagingError::DimensionMismatch {
            a: depth.dims(),
            b: (mask.width, mask.height),
        });
    }
    let pixels = depth
        .pixels
        .iter()
        .zip(&mask.pixels)
        .map(|(&d, &m)| if m != 0 { marker_color } else { colormap.sample(d) })
        .collect();
    Ok(RgbImage {
        width: depth.width,
        height: depth.height,
        pixels,
    })
}
