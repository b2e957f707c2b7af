//! Marker dots represented as persistent groups of elastomer particles.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::MarkerError;
use crate::geometry::{ParticleCloud, Vec3};
use crate::mpm::Particle;

/// Smallest group that still supports a conic fit.
pub const MIN_GROUP_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MarkerId {
    pub row: u32,
    pub col: u32,
}

impl MarkerId {
    pub fn new(row: u32, col: u32) -> Self {
        Self { row, col }
    }
}

impl fmt::Display for MarkerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// Regular array of printed dots. Rows run along +y, columns along +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarkerLayout {
    pub rows: u32,
    pub cols: u32,
    /// Center-to-center distance, meters.
    pub pitch: f64,
    pub dot_radius: f64,
    /// Distance of the marker plane below the contact surface, meters.
    #[serde(default)]
    pub depth: f64,
    /// Horizontal position of the array center.
    #[serde(default)]
    pub center: [f64; 2],
}

impl MarkerLayout {
    pub fn validate(&self) -> Result<(), MarkerError> {
        let bad = |m: String| Err(MarkerError::InvalidLayout(m));
        if self.rows == 0 || self.cols == 0 {
            return bad(format!("need at least one row and column, got {}x{}", self.rows, self.cols));
        }
        if !(self.dot_radius > 0.0) {
            return bad(format!("dot_radius must be positive, got {}", self.dot_radius));
        }
        if !(self.pitch > 2.0 * self.dot_radius) {
            return bad(format!(
                "pitch {} must exceed the dot diameter {}",
                self.pitch,
                2.0 * self.dot_radius
            ));
        }
        if !(self.depth >= 0.0 && self.depth.is_finite()) {
            return bad(format!("depth must be non-negative, got {}", self.depth));
        }
        Ok(())
    }

    /// Nominal horizontal center of marker `(row, col)`.
    pub fn marker_center(&self, row: u32, col: u32) -> [f64; 2] {
        [
            self.center[0] + (col as f64 - (self.cols - 1) as f64 / 2.0) * self.pitch,
            self.center[1] + (row as f64 - (self.rows - 1) as f64 / 2.0) * self.pitch,
        ]
    }

    pub fn ids(&self) -> impl Iterator<Item = MarkerId> + '_ {
        (0..self.rows).flat_map(move |r| (0..self.cols).map(move |c| MarkerId::new(r, c)))
    }

    pub fn count(&self) -> usize {
        (self.rows * self.cols) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerGroup {
    pub id: MarkerId,
    pub particle_indices: Vec<usize>,
}

/// Tags the particles forming each dot.
///
/// A particle belongs to dot `(r, c)` when its horizontal distance to the dot
/// center is at most `dot_radius` and it lies in the one-spacing-thick band
/// centered on the marker plane (`depth` below the topmost particle layer).
/// Ties go to the nearest center, then to the lower `(row, col)`.
pub fn assign_markers(cloud: &ParticleCloud, layout: &MarkerLayout) -> Result<Vec<MarkerGroup>, MarkerError> {
    layout.validate()?;
    let top = cloud
        .positions
        .iter()
        .map(|p| p.z)
        .fold(f64::NEG_INFINITY, f64::max);
    let plane = top - layout.depth;
    let half_band = 0.5 * cloud.spacing * (1.0 + 1e-9);
    let r2 = (layout.dot_radius * (1.0 + 1e-9)).powi(2);

    let mut groups: Vec<MarkerGroup> = layout
        .ids()
        .map(|id| MarkerGroup {
            id,
            particle_indices: Vec::new(),
        })
        .collect();
    for (i, p) in cloud.positions.iter().enumerate() {
        if (p.z - plane).abs() > half_band {
            continue;
        }
        let mut best: Option<(f64, usize)> = None;
        for (g, group) in groups.iter().enumerate() {
            let c = layout.marker_center(group.id.row, group.id.col);
            let d2 = (p.x - c[0]).powi(2) + (p.y - c[1]).powi(2);
            // strict comparison keeps the lower (row, col) on exact ties
            if d2 <= r2 && best.is_none_or(|(b, _)| d2 < b) {
                best = Some((d2, g));
            }
        }
        if let Some((_, g)) = best {
            groups[g].particle_indices.push(i);
        }
    }
    if let Some(g) = groups.iter().find(|g| g.particle_indices.len() < MIN_GROUP_SIZE) {
        return Err(MarkerError::LayoutResolution {
            id: g.id,
            count: g.particle_indices.len(),
        });
    }
    Ok(groups)
}

/// Current member positions of every group.
pub fn extract_groups(particles: &[Particle], groups: &[MarkerGroup]) -> Vec<Vec<Vec3>> {
    groups
        .iter()
        .map(|g| g.particle_indices.iter().map(|&i| particles[i].x).collect())
        .collect()
}

pub fn centroid(points: &[Vec3]) -> Vec3 {
    points.iter().sum::<Vec3>() / points.len().max(1) as f64
}
