use super::Material;
use crate::error::MpmError;
use crate::geometry::Mat3;

const POLAR_MAX_ITERS: usize = 40;
/// Newton converges quadratically, so once a step moves less than this the
/// remaining error is below roundoff.
const POLAR_TOL: f64 = 1e-8;

/// Rotation factor `R` of the polar decomposition `F = R S`, for `det F > 0`.
///
/// Scaled Newton iteration `X ← (γX + X⁻ᵀ/γ) / 2`; the scaling is dropped once
/// the iterate is close so the fixed point is reached exactly for rotations.
pub fn polar_rotation(f: &Mat3) -> Option<Mat3> {
    let mut x = *f;
    for _ in 0..POLAR_MAX_ITERS {
        let inv_t = x.try_inverse()?.transpose();
        let step = x - inv_t;
        let change = step.norm();
        let next = if change > 1e-3 {
            let gamma = (inv_t.norm() / x.norm()).sqrt();
            (x * gamma + inv_t / gamma) * 0.5
        } else {
            (x + inv_t) * 0.5
        };
        let moved = (next - x).norm();
        x = next;
        if moved <= POLAR_TOL {
            break;
        }
    }
    Some(x)
}

/// Fixed-corotated Kirchhoff stress `2μ(F − R)Fᵀ + λ(J − 1)J I`.
///
/// Fails with [`MpmError::InvertedElement`] (particle index 0; callers re-tag)
/// when `det F <= 0`.
pub fn compute_stress(f: &Mat3, material: &Material) -> Result<Mat3, MpmError> {
    let j = f.determinant();
    if j <= 0.0 || !j.is_finite() {
        return Err(MpmError::InvertedElement { particle: 0, det: j });
    }
    let r = polar_rotation(f).ok_or(MpmError::InvertedElement { particle: 0, det: j })?;
    Ok((f - r) * f.transpose() * (2.0 * material.mu)
        + Mat3::identity() * (material.lambda * (j - 1.0) * j))
}

/// Strain energy density `μ‖F − R‖² + λ/2 (J − 1)²` whose first
/// Piola-Kirchhoff stress times `Fᵀ` is [`compute_stress`].
pub fn energy_density(f: &Mat3, material: &Material) -> Option<f64> {
    let r = polar_rotation(f)?;
    let j = f.determinant();
    Some(material.mu * (f - r).norm_squared() + 0.5 * material.lambda * (j - 1.0) * (j - 1.0))
}
