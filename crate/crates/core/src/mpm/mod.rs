//! MLS-MPM elastomer solver with APIC transfers and a prescribed rigid indenter.
//!
//! One [`Scene::step`] runs clear → particle-to-grid → grid update →
//! grid-to-particle → deformation update and advection. The kernel is the
//! quadratic B-spline, whose inertia tensor is `(Δx²/4) I`; that is where the
//! `4/Δx²` factors in the force and affine transfers come from.

mod dump;
mod grid;
mod kernel;
mod scene;
mod stress;
mod transfer;

pub use dump::{read_particle_dump, write_particle_dump};
pub use grid::{GridNode, NodeBc, SimGrid};
pub use kernel::{kernel_weights, Stencil};
pub use scene::{RigidBody, RigidMotion, RigidState, Scene, StaticPose};
pub use stress::{compute_stress, energy_density, polar_rotation};
pub use transfer::{grid_to_particle, grid_update, particle_to_grid, update_deformation_and_advect};

use serde::{Deserialize, Serialize};

use crate::error::MpmError;
use crate::geometry::{Mat3, Vec3};

/// Nodes lighter than this are treated as empty in the momentum division.
/// Fringe nodes of a 0.5 mm particle carry ~1e-13 kg, and zeroing them would
/// disturb uniform motion, so this only guards against dividing by zero.
pub const MASS_EPSILON: f64 = 1e-30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Elastomer,
    RigidIndenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub x: Vec3,
    pub v: Vec3,
    /// Affine velocity (APIC), 1/s.
    pub c: Mat3,
    /// Deformation gradient.
    pub f: Mat3,
    pub mass: f64,
    /// Rest volume.
    pub volume: f64,
    pub role: Role,
    /// Index of the marker group this particle belongs to.
    pub marker: Option<u32>,
}

impl Particle {
    pub fn elastomer(x: Vec3, mass: f64, volume: f64) -> Self {
        Self {
            x,
            v: Vec3::zeros(),
            c: Mat3::zeros(),
            f: Mat3::identity(),
            mass,
            volume,
            role: Role::Elastomer,
            marker: None,
        }
    }

    pub fn rigid(x: Vec3, mass: f64, volume: f64) -> Self {
        Self {
            role: Role::RigidIndenter,
            ..Self::elastomer(x, mass, volume)
        }
    }

    pub fn is_elastomer(&self) -> bool {
        self.role == Role::Elastomer
    }
}

/// Lamé parameters derived from Young's modulus and Poisson's ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub mu: f64,
    pub lambda: f64,
}

impl Material {
    pub fn new(youngs_modulus: f64, poisson_ratio: f64) -> Self {
        let (e, nu) = (youngs_modulus, poisson_ratio);
        Self {
            mu: e / (2.0 * (1.0 + nu)),
            lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        }
    }
}

/// How P2G contributions are accumulated when running in parallel.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScatterMode {
    /// Particles are bucketed into x-slabs; alternating slabs write disjoint
    /// node ranges, so summation order is fixed and results are bit-identical
    /// for any thread count.
    #[default]
    Deterministic,
    /// Per-thread private grids merged by a parallel reduction. The merge tree
    /// depends on scheduling, so results can differ in the last bits.
    ThreadLocal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Step interval in seconds.
    pub dt: f64,
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub density: f64,
    pub gravity: [f64; 3],
    /// Engine steps between output frames.
    pub substeps: usize,
    /// Include the elastic momentum term in P2G.
    pub elastic_forces: bool,
    pub scatter: ScatterMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            youngs_modulus: 1.45e5,
            poisson_ratio: 0.45,
            density: 1070.0,
            gravity: [0.0; 3],
            substeps: 50,
            elastic_forces: true,
            scatter: ScatterMode::Deterministic,
        }
    }
}

impl SimConfig {
    pub fn material(&self) -> Material {
        Material::new(self.youngs_modulus, self.poisson_ratio)
    }

    pub fn gravity(&self) -> Vec3 {
        Vec3::from(self.gravity)
    }

    /// Dilatational wave speed `sqrt((λ + 2μ) / ρ)`.
    pub fn wave_speed(&self) -> f64 {
        let m = self.material();
        ((m.lambda + 2.0 * m.mu) / self.density).sqrt()
    }

    pub fn validate(&self) -> Result<(), MpmError> {
        let bad = |msg: String| Err(MpmError::InvalidConfig(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.youngs_modulus > 0.0 && self.youngs_modulus.is_finite()) {
            return bad(format!("youngs_modulus must be positive, got {}", self.youngs_modulus));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return bad(format!("poisson_ratio must lie in [0, 0.5), got {}", self.poisson_ratio));
        }
        if !(self.density > 0.0 && self.density.is_finite()) {
            return bad(format!("density must be positive, got {}", self.density));
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            return bad("gravity must be finite".into());
        }
        if self.substeps == 0 {
            return bad("substeps must be at least 1".into());
        }
        Ok(())
    }
}
