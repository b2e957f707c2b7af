use super::GrayImage;
use crate::camera::CameraModel;
use crate::error::ImagingError;
use crate::geometry::Vec3;

/// Depth ranges below this are treated as flat and rendered as zeros.
const FLAT_RANGE: f64 = 1e-6;

/// Renders the camera-facing surface as a normalized depth image.
///
/// Each surface particle is splatted over a square of one particle spacing
/// (projected at its own depth), keeping the nearest camera-space Z per
/// pixel. Uncovered pixels are filled by repeated 4-neighbor averaging of
/// already known pixels. Intensity is `(z_max − z) / (z_max − z_min)`, so
/// surface pushed toward the camera is bright.
pub fn render_depth_map(surface: &[Vec3], spacing: f64, camera: &CameraModel) -> Result<GrayImage, ImagingError> {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let mut z = vec![f64::INFINITY; w * h];
    for x in surface {
        let xc = camera.world_to_camera(x);
        let Ok((u, v)) = camera.camera_to_pixel(&xc) else { continue };
        let hu = 0.5 * camera.fx * spacing / xc.z;
        let hv = 0.5 * camera.fy * spacing / xc.z;
        let i0 = (u - hu).ceil().max(0.0);
        let i1 = (u + hu).floor().min(w as f64 - 1.0);
        let j0 = (v - hv).ceil().max(0.0);
        let j1 = (v + hv).floor().min(h as f64 - 1.0);
        if i0 > i1 || j0 > j1 {
            continue;
        }
        for j in j0 as usize..=j1 as usize {
            for i in i0 as usize..=i1 as usize {
                let cell = &mut z[j * w + i];
                if xc.z < *cell {
                    *cell = xc.z;
                }
            }
        }
    }
    if z.iter().all(|v| v.is_infinite()) {
        return Err(ImagingError::EmptyFrame);
    }
    fill_holes(&mut z, w, h);

    let (lo, hi) = z
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    let pixels = if range < FLAT_RANGE {
        vec![0.0; w * h]
    } else {
        z.iter().map(|&v| (hi - v) / range).collect()
    };
    Ok(GrayImage {
        width: camera.width,
        height: camera.height,
        pixels,
    })
}

/// Jacobi sweeps: an unknown pixel takes the mean of its known 4-neighbors
/// from the previous sweep, until every pixel is known.
fn fill_holes(z: &mut [f64], w: usize, h: usize) {
    loop {
        let prev = z.to_vec();
        let mut changed = false;
        for j in 0..h {
            for i in 0..w {
                if prev[j * w + i].is_finite() {
                    continue;
                }
                let mut sum = 0.0;
                let mut n = 0;
                let mut visit = |idx: usize| {
                    if prev[idx].is_finite() {
                        sum += prev[idx];
                        n += 1;
                    }
                };
                if i > 0 {
                    visit(j * w + i - 1);
                }
                if i + 1 < w {
                    visit(j * w + i + 1);
                }
                if j > 0 {
                    visit((j - 1) * w + i);
                }
                if j + 1 < h {
                    visit((j + 1) * w + i);
                }
                if n > 0 {
                    z[j * w + i] = sum / n as f64;
                    changed = true;
                }
            }
        }
        if !changed {
            return;
        }
    }
}
