use crate::geometry::Vec3;

/// Boundary condition of a grid node, applied after the momentum division.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum NodeBc {
    #[default]
    Free,
    Sticky,
    RigidVelocity(Vec3),
}

/// Mass and momentum accumulated at one node during P2G.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridNode {
    pub mass: f64,
    pub momentum: Vec3,
}

impl std::ops::AddAssign for GridNode {
    fn add_assign(&mut self, rhs: Self) {
        self.mass += rhs.mass;
        self.momentum += rhs.momentum;
    }
}

/// Dense background grid. Nodes are stored x-major
/// (`index = (i * ny + j) * nz + k`) so a range of x-planes is contiguous.
#[derive(Debug, Clone)]
pub struct SimGrid {
    pub origin: Vec3,
    pub dx: f64,
    pub dims: [usize; 3],
    pub nodes: Vec<GridNode>,
    pub velocity: Vec<Vec3>,
    pub bc: Vec<NodeBc>,
    /// Conditions that persist across steps (the sticky base).
    pub fixed_bc: Vec<NodeBc>,
}

impl SimGrid {
    pub fn new(origin: Vec3, dx: f64, dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            dx,
            dims,
            nodes: vec![GridNode::default(); n],
            velocity: vec![Vec3::zeros(); n],
            bc: vec![NodeBc::Free; n],
            fixed_bc: vec![NodeBc::Free; n],
        }
    }

    /// Grid covering `[lo, hi]` plus `margin` cells on every side. When the
    /// box is not a whole number of cells the slack is split evenly, so a
    /// symmetric body sits symmetrically in the grid.
    pub fn around(lo: Vec3, hi: Vec3, dx: f64, margin: usize) -> Self {
        let cells = [0, 1, 2].map(|k| ((hi[k] - lo[k]) / dx * (1.0 - 1e-12)).ceil().max(0.0) as usize);
        let slack = Vec3::from_fn(|k, _| cells[k] as f64 * dx - (hi[k] - lo[k]));
        let origin = lo - Vec3::repeat(margin as f64 * dx) - 0.5 * slack;
        Self::new(origin, dx, cells.map(|c| c + 2 * margin + 1))
    }

    /// Node interval giving at least `min_nodes` intervals along the longest
    /// axis of `extent`.
    pub fn auto_dx(extent: Vec3, min_nodes: usize) -> f64 {
        extent.max() / min_nodes.max(1) as f64
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn plane_len(&self) -> usize {
        self.dims[1] * self.dims[2]
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    pub fn coords(&self, index: usize) -> [usize; 3] {
        let k = index % self.dims[2];
        let rest = index / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    pub fn node_position(&self, index: usize) -> Vec3 {
        let [i, j, k] = self.coords(index);
        self.origin + Vec3::new(i as f64, j as f64, k as f64) * self.dx
    }

    pub fn clear(&mut self) {
        self.nodes.fill(GridNode::default());
        self.velocity.fill(Vec3::zeros());
        self.bc.copy_from_slice(&self.fixed_bc);
    }

    /// Marks every node with `z <= z_max` as sticky for the rest of the run.
    pub fn set_sticky_below(&mut self, z_max: f64) {
        for idx in 0..self.len() {
            if self.node_position(idx).z <= z_max {
                self.fixed_bc[idx] = NodeBc::Sticky;
            }
        }
        self.bc.copy_from_slice(&self.fixed_bc);
    }

    pub fn total_mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.mass).sum()
    }

    pub fn total_momentum(&self) -> Vec3 {
        self.nodes.iter().map(|n| n.momentum).sum()
    }
}
