use super::ellipse::EllipseFit;
use super::MaskImage;

/// Sets every pixel whose center lies inside any of the ellipses. Pixel
/// `(i, j)` has its center at `(u, v) = (i, j)`.
pub fn rasterize_mask(fits: &[EllipseFit], width: u32, height: u32) -> MaskImage {
    let mut mask = MaskImage::new(width, height);
    for fit in fits {
        if !fit.center.iter().chain(&fit.semi_axes).all(|v| v.is_finite()) {
            continue;
        }
        let [hw, hh] = [0.5 * fit.bounding_rect[0], 0.5 * fit.bounding_rect[1]];
        let u0 = (fit.center[0] - hw).floor().max(0.0);
        let u1 = (fit.center[0] + hw).ceil().min(width as f64 - 1.0);
        let v0 = (fit.center[1] - hh).floor().max(0.0);
        let v1 = (fit.center[1] + hh).ceil().min(height as f64 - 1.0);
        if u0 > u1 || v0 > v1 {
            continue;
        }
        for j in v0 as u32..=v1 as u32 {
            for i in u0 as u32..=u1 as u32 {
                if fit.contains(i as f64, j as f64) {
                    mask.set(i, j, true);
                }
            }
        }
    }
    mask
}

/// Connected components of the set pixels (8-connectivity). Returns the
/// component count and a label per pixel (0 = background).
pub fn label_components(mask: &MaskImage) -> (usize, Vec<u32>) {
    let (w, h) = (mask.width as i64, mask.height as i64);
    let mut labels = vec![0u32; mask.pixels.len()];
    let mut count = 0u32;
    let mut stack = Vec::new();
    for start in 0..mask.pixels.len() {
        if mask.pixels[start] == 0 || labels[start] != 0 {
            continue;
        }
        count += 1;
        labels[start] = count;
        stack.push(start);
        while let Some(idx) = stack.pop() {
            let (x, y) = ((idx as i64) % w, (idx as i64) / w);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w || ny >= h {
                        continue;
                    }
                    let n = (ny * w + nx) as usize;
                    if mask.pixels[n] != 0 && labels[n] == 0 {
                        labels[n] = count;
                        stack.push(n);
                    }
                }
            }
        }
    }
    (count as usize, labels)
}
