use super::{TriangleMesh, Vec3};
use crate::error::GeometryError;

/// Fraction of voxels with disagreeing ray parities above which the mesh is
/// reported as not watertight.
pub const WATERTIGHT_DISAGREEMENT: f64 = 0.05;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParticleCloud {
    pub positions: Vec<Vec3>,
    /// Nominal lattice spacing in meters.
    pub spacing: f64,
}

impl ParticleCloud {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn translated(mut self, offset: Vec3) -> Self {
        for p in &mut self.positions {
            *p += offset;
        }
        self
    }

    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.positions.first()?;
        Some(self.positions.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SamplingStats {
    pub voxels: usize,
    /// Voxels whose three ray parities were not unanimous.
    pub disagreements: usize,
}

impl SamplingStats {
    pub fn disagreement_fraction(&self) -> f64 {
        if self.voxels == 0 {
            0.0
        } else {
            self.disagreements as f64 / self.voxels as f64
        }
    }

    pub fn is_watertight(&self) -> bool {
        self.disagreement_fraction() <= WATERTIGHT_DISAGREEMENT
    }
}

fn lattice_count(extent: f64, spacing: f64) -> usize {
    // absorb the rounding of e.g. 0.02 / 0.0005
    ((extent / spacing) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

fn check_spacing(spacing: f64) -> Result<(), GeometryError> {
    if spacing > 0.0 && spacing.is_finite() {
        Ok(())
    } else {
        Err(GeometryError::InvalidSpacing(spacing))
    }
}

/// Regular lattice of `⌈e/s⌉` points per axis, centered in the box `[0, extent]`.
pub fn make_box_cloud(extent: Vec3, spacing: f64) -> Result<ParticleCloud, GeometryError> {
    check_spacing(spacing)?;
    if !extent.iter().all(|e| *e > 0.0 && e.is_finite()) {
        return Err(GeometryError::InvalidExtent([extent.x, extent.y, extent.z]));
    }
    let n = [0, 1, 2].map(|k| lattice_count(extent[k], spacing));
    let start = Vec3::from_fn(|k, _| 0.5 * (extent[k] - (n[k] - 1) as f64 * spacing));
    let mut positions = Vec::with_capacity(n[0] * n[1] * n[2]);
    // same x-major order as the grid nodes, for locality in the transfers
    for i in 0..n[0] {
        for j in 0..n[1] {
            for k in 0..n[2] {
                positions.push(start + Vec3::new(i as f64, j as f64, k as f64) * spacing);
            }
        }
    }
    Ok(ParticleCloud { positions, spacing })
}

/// Samples the solid enclosed by `mesh` at voxel centers.
///
/// Each voxel center is classified by the crossing parity of three rays along
/// +x, +y and +z; the majority decides. A warning is logged when the rays
/// disagree on more than 5% of voxels.
pub fn voxel_sample_volume(mesh: &TriangleMesh, spacing: f64) -> Result<ParticleCloud, GeometryError> {
    voxel_sample_volume_with_stats(mesh, spacing).map(|(cloud, _)| cloud)
}

pub fn voxel_sample_volume_with_stats(
    mesh: &TriangleMesh,
    spacing: f64,
) -> Result<(ParticleCloud, SamplingStats), GeometryError> {
    check_spacing(spacing)?;
    let (lo, hi) = mesh.bounds().ok_or(GeometryError::EmptyMesh)?;
    let extent = hi - lo;
    let n = [0, 1, 2].map(|k| lattice_count(extent[k].max(spacing), spacing));
    let start = Vec3::from_fn(|k, _| lo[k] + 0.5 * (extent[k] - (n[k] - 1) as f64 * spacing));
    let center = |idx: [usize; 3]| {
        Vec3::from_fn(|k, _| start[k] + idx[k] as f64 * spacing)
    };
    let total = n[0] * n[1] * n[2];
    let flat = |idx: [usize; 3]| (idx[2] * n[1] + idx[1]) * n[0] + idx[0];

    // votes[v] counts rays reporting "inside"
    let mut votes = vec![0u8; total];
    let mut crossings = Vec::new();
    for axis in 0..3 {
        let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
        for cu in 0..n[ua] {
            for cv in 0..n[va] {
                let mut idx = [0usize; 3];
                idx[ua] = cu;
                idx[va] = cv;
                let origin = center(idx);
                crossings.clear();
                for tri in mesh.triangles() {
                    if let Some(t) = axis_ray_hit(&tri, &origin, axis) {
                        crossings.push(t);
                    }
                }
                if crossings.is_empty() {
                    continue;
                }
                for ca in 0..n[axis] {
                    idx[axis] = ca;
                    let along = start[axis] + ca as f64 * spacing;
                    let ahead = crossings.iter().filter(|t| **t > along).count();
                    if ahead % 2 == 1 {
                        votes[flat(idx)] += 1;
                    }
                }
            }
        }
    }

    let mut positions = Vec::new();
    let mut disagreements = 0;
    for k in 0..n[2] {
        for j in 0..n[1] {
            for i in 0..n[0] {
                let v = votes[flat([i, j, k])];
                if v == 1 || v == 2 {
                    disagreements += 1;
                }
                if v >= 2 {
                    positions.push(center([i, j, k]));
                }
            }
        }
    }
    let stats = SamplingStats {
        voxels: total,
        disagreements,
    };
    if !stats.is_watertight() {
        log::warn!(
            "mesh does not look watertight: ray parities disagree on {:.1}% of voxels",
            100.0 * stats.disagreement_fraction()
        );
    }
    Ok((ParticleCloud { positions, spacing }, stats))
}

/// Coordinate along `axis` where the ray through `origin` parallel to `axis`
/// meets the triangle, or `None` if the projected point is outside.
///
/// Points on a shared edge or vertex belong to exactly one triangle of a
/// planar fan (half-open edge rule), so grazing rays are not double counted.
fn axis_ray_hit(tri: &[Vec3; 3], origin: &Vec3, axis: usize) -> Option<f64> {
    let (ua, va) = ((axis + 1) % 3, (axis + 2) % 3);
    let p = (origin[ua], origin[va]);
    let a = (tri[0][ua], tri[0][va], tri[0][axis]);
    let mut b = (tri[1][ua], tri[1][va], tri[1][axis]);
    let mut c = (tri[2][ua], tri[2][va], tri[2][axis]);
    let edge = |s: (f64, f64, f64), e: (f64, f64, f64), q: (f64, f64)| {
        (e.0 - s.0) * (q.1 - s.1) - (e.1 - s.1) * (q.0 - s.0)
    };
    let mut area = edge(a, b, (c.0, c.1));
    if area == 0.0 {
        return None;
    }
    if area < 0.0 {
        std::mem::swap(&mut b, &mut c);
        area = -area;
    }
    let owns = |s: (f64, f64, f64), e: (f64, f64, f64), w: f64| {
        if w > 0.0 {
            return true;
        }
        if w < 0.0 {
            return false;
        }
        let (dx, dy) = (e.0 - s.0, e.1 - s.1);
        dy < 0.0 || (dy == 0.0 && dx < 0.0)
    };
    let wa = edge(b, c, p);
    let wb = edge(c, a, p);
    let wc = edge(a, b, p);
    if !(owns(b, c, wa) && owns(c, a, wb) && owns(a, b, wc)) {
        return None;
    }
    let t = (wa * a.2 + wb * b.2 + wc * c.2) / area;
    Some(t)
}
