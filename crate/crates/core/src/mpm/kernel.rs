use super::grid::SimGrid;
use crate::error::MpmError;
use crate::geometry::Vec3;

/// Quadratic B-spline stencil of one particle: the 3×3×3 block of nodes
/// starting at `base` with separable per-axis weights.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stencil {
    pub base: [usize; 3],
    pub weights: [[f64; 3]; 3],
    /// Particle position relative to `base`, in cells.
    pub frac: [f64; 3],
}

impl Stencil {
    /// Builds the stencil, failing when any of the 27 nodes would fall
    /// outside the grid (particle within 1.5 cells of the boundary).
    pub fn new(x: &Vec3, grid: &SimGrid) -> Option<Self> {
        let inv_dx = 1.0 / grid.dx;
        let mut base = [0usize; 3];
        let mut weights = [[0.0; 3]; 3];
        let mut frac = [0.0; 3];
        for k in 0..3 {
            let local = (x[k] - grid.origin[k]) * inv_dx;
            let last = grid.dims[k] as f64 - 1.0;
            if !(local >= 1.5 && local <= last - 1.5) {
                return None;
            }
            let b = (local - 0.5).floor();
            let fx = local - b;
            base[k] = b as usize;
            frac[k] = fx;
            weights[k] = [
                0.5 * (1.5 - fx) * (1.5 - fx),
                0.75 - (fx - 1.0) * (fx - 1.0),
                0.5 * (fx - 0.5) * (fx - 0.5),
            ];
        }
        Some(Self {
            base,
            weights,
            frac,
        })
    }

    /// Visits the 27 nodes as `(node index, weight, X_i - x_p)`.
    #[inline]
    pub fn for_each(&self, grid: &SimGrid, mut f: impl FnMut(usize, f64, Vec3)) {
        let [ny, nz] = [grid.dims[1], grid.dims[2]];
        for a in 0..3 {
            let ox = (a as f64 - self.frac[0]) * grid.dx;
            let wa = self.weights[0][a];
            for b in 0..3 {
                let oy = (b as f64 - self.frac[1]) * grid.dx;
                let wab = wa * self.weights[1][b];
                let row = ((self.base[0] + a) * ny + self.base[1] + b) * nz + self.base[2];
                for c in 0..3 {
                    let oz = (c as f64 - self.frac[2]) * grid.dx;
                    f(row + c, wab * self.weights[2][c], Vec3::new(ox, oy, oz));
                }
            }
        }
    }
}

/// The 27 `(node index, weight, X_i − x_p)` triples of the quadratic B-spline
/// kernel at `x`.
pub fn kernel_weights(
    x: &Vec3,
    grid: &SimGrid,
    particle: usize,
) -> Result<Vec<(usize, f64, Vec3)>, MpmError> {
    let stencil = Stencil::new(x, grid).ok_or(MpmError::OutOfDomain {
        particle,
        position: [x.x, x.y, x.z],
    })?;
    let mut out = Vec::with_capacity(27);
    stencil.for_each(grid, |i, w, d| out.push((i, w, d)));
    Ok(out)
}
