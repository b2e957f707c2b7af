use nalgebra::{Matrix3, Vector3};

use crate::error::ImagingError;

/// Fitted marker ellipse in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipseFit {
    pub center: [f64; 2],
    /// Semi-axes `(a, b)` with `a >= b > 0`.
    pub semi_axes: [f64; 2],
    /// Orientation of the major axis in `[0, π)`.
    pub angle: f64,
    /// Width and height of the axis-aligned bounding rectangle.
    pub bounding_rect: [f64; 2],
}

impl EllipseFit {
    pub fn new(center: [f64; 2], a: f64, b: f64, angle: f64) -> Self {
        let (a, b, angle) = if a >= b {
            (a, b, angle)
        } else {
            (b, a, angle + std::f64::consts::FRAC_PI_2)
        };
        let angle = angle.rem_euclid(std::f64::consts::PI);
        let (s, c) = angle.sin_cos();
        let w = 2.0 * (a * a * c * c + b * b * s * s).sqrt();
        let h = 2.0 * (a * a * s * s + b * b * c * c).sqrt();
        Self {
            center,
            semi_axes: [a, b],
            angle,
            bounding_rect: [w, h],
        }
    }

    /// Disc at the centroid with radius equal to the RMS distance from it.
    pub fn disc(points: &[[f64; 2]]) -> Self {
        let n = points.len().max(1) as f64;
        let cu = points.iter().map(|p| p[0]).sum::<f64>() / n;
        let cv = points.iter().map(|p| p[1]).sum::<f64>() / n;
        let r = (points
            .iter()
            .map(|p| (p[0] - cu).powi(2) + (p[1] - cv).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        Self::new([cu, cv], r, r, 0.0)
    }

    /// `true` when the point lies inside or on the ellipse.
    pub fn contains(&self, u: f64, v: f64) -> bool {
        let (s, c) = self.angle.sin_cos();
        let (du, dv) = (u - self.center[0], v - self.center[1]);
        let x = (du * c + dv * s) / self.semi_axes[0];
        let y = (-du * s + dv * c) / self.semi_axes[1];
        x * x + y * y <= 1.0
    }
}

/// Direct least-squares ellipse fit under the constraint `4AC − B² = 1`
/// (Halíř–Flusser partitioning of the scatter matrix).
///
/// Points are centered and scaled to unit RMS radius before fitting, which
/// makes the result equivariant under translation and rotation of the input.
pub fn fit_ellipse(points: &[[f64; 2]]) -> Result<EllipseFit, ImagingError> {
    if points.len() < 5 {
        return Err(ImagingError::InsufficientPoints { got: points.len() });
    }
    let n = points.len() as f64;
    let mu = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let mv = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let scale = (points
        .iter()
        .map(|p| (p[0] - mu).powi(2) + (p[1] - mv).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(ImagingError::DegenerateFit("coincident points"));
    }

    let mut s1 = Matrix3::<f64>::zeros();
    let mut s2 = Matrix3::<f64>::zeros();
    let mut s3 = Matrix3::<f64>::zeros();
    for p in points {
        let (x, y) = ((p[0] - mu) / scale, (p[1] - mv) / scale);
        let quad = Vector3::new(x * x, x * y, y * y);
        let lin = Vector3::new(x, y, 1.0);
        s1 += quad * quad.transpose();
        s2 += quad * lin.transpose();
        s3 += lin * lin.transpose();
    }
    let s3_inv = s3
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(ImagingError::DegenerateFit("collinear points"))?;
    if s3.determinant().abs() < 1e-12 * s3.norm().powi(3) {
        return Err(ImagingError::DegenerateFit("collinear points"));
    }
    let t = -(s3_inv * s2.transpose());
    let m = s1 + s2 * t;
    // premultiply by the inverse of the constraint block [[0,0,2],[0,-1,0],[2,0,0]]
    let reduced = Matrix3::from_rows(&[
        (m.row(2) * 0.5),
        (-m.row(1)),
        (m.row(0) * 0.5),
    ]);

    let mut best: Option<(f64, [f64; 6])> = None;
    for lambda in reduced.complex_eigenvalues().iter() {
        if lambda.im.abs() > 1e-9 * (1.0 + lambda.re.abs()) {
            continue;
        }
        let Some(a1) = null_vector(&(reduced - Matrix3::identity() * lambda.re)) else {
            continue;
        };
        let cond = 4.0 * a1[0] * a1[2] - a1[1] * a1[1];
        if !(cond > 0.0) {
            continue;
        }
        let a2 = t * a1;
        let coeffs = [a1[0], a1[1], a1[2], a2[0], a2[1], a2[2]];
        let residual = (a1.transpose() * m * a1)[0].abs() / cond;
        if best.is_none_or(|(r, _)| residual < r) {
            best = Some((residual, coeffs));
        }
    }
    let (_, coeffs) = best.ok_or(ImagingError::DegenerateFit("no elliptic solution"))?;
    let (center, a, b, angle) = conic_to_geometry(coeffs)?;
    Ok(EllipseFit::new(
        [mu + scale * center[0], mv + scale * center[1]],
        a * scale,
        b * scale,
        angle,
    ))
}

/// Fits an ellipse, substituting [`EllipseFit::disc`] for degenerate input.
/// The flag reports whether the fallback was used.
pub fn fit_ellipse_or_disc(points: &[[f64; 2]]) -> Result<(EllipseFit, bool), ImagingError> {
    match fit_ellipse(points) {
        Ok(fit) => Ok((fit, false)),
        Err(ImagingError::DegenerateFit(_)) => Ok((EllipseFit::disc(points), true)),
        Err(e) => Err(e),
    }
}

fn null_vector(a: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let rows = [a.row(0).transpose(), a.row(1).transpose(), a.row(2).transpose()];
    let candidates = [
        rows[0].cross(&rows[1]),
        rows[0].cross(&rows[2]),
        rows[1].cross(&rows[2]),
    ];
    let best = candidates
        .iter()
        .max_by(|x, y| x.norm_squared().total_cmp(&y.norm_squared()))?;
    let norm = best.norm();
    (norm > 0.0 && norm.is_finite()).then(|| best / norm)
}

/// Center, semi-axes and major-axis angle of `Ax² + Bxy + Cy² + Dx + Ey + F = 0`.
fn conic_to_geometry(c: [f64; 6]) -> Result<([f64; 2], f64, f64, f64), ImagingError> {
    let [mut a, mut b, mut cc, mut d, mut e, mut f] = c;
    if a + cc < 0.0 {
        [a, b, cc, d, e, f] = [-a, -b, -cc, -d, -e, -f];
    }
    let det = 4.0 * a * cc - b * b;
    if !(det > 0.0) {
        return Err(ImagingError::DegenerateFit("not an ellipse"));
    }
    let x0 = (b * e - 2.0 * cc * d) / det;
    let y0 = (b * d - 2.0 * a * e) / det;
    let f0 = f + 0.5 * (d * x0 + e * y0);
    let h = 0.5 * b;
    let mean = 0.5 * (a + cc);
    let spread = (0.25 * (a - cc) * (a - cc) + h * h).sqrt();
    let (l1, l2) = (mean - spread, mean + spread);
    if !(l1 > 0.0 && f0 < 0.0) {
        return Err(ImagingError::DegenerateFit("imaginary ellipse"));
    }
    let major = (-f0 / l1).sqrt();
    let minor = (-f0 / l2).sqrt();
    let v1 = (l1 - cc, h);
    let v2 = (h, l1 - a);
    let dir = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let angle = if dir.0 == 0.0 && dir.1 == 0.0 {
        0.0
    } else {
        dir.1.atan2(dir.0)
    };
    Ok(([x0, y0], major, minor, angle))
}
