use rayon::prelude::*;

use super::grid::{NodeBc, SimGrid};
use super::kernel::Stencil;
use super::transfer::{compute_affine, compute_stencils, deform_and_advect_one, gather_one, grid_update, scatter};
use super::{Particle, SimConfig};
use crate::error::MpmError;
use crate::geometry::{Mat3, RigidTransform, Vec3};

/// Kinematic state of the rigid indenter at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidState {
    /// Maps rest positions to current positions.
    pub pose: RigidTransform,
    pub velocity: Vec3,
    pub angular_velocity: Vec3,
    /// Current point on the rotation axis.
    pub pivot: Vec3,
}

impl RigidState {
    pub fn at_rest(pose: RigidTransform) -> Self {
        Self {
            pose,
            velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
            pivot: Vec3::zeros(),
        }
    }

    /// Rigid velocity field `v + ω × (x − pivot)`.
    pub fn velocity_at(&self, x: &Vec3) -> Vec3 {
        self.velocity + self.angular_velocity.cross(&(x - self.pivot))
    }
}

/// Prescribed indenter trajectory, sampled per engine step.
pub trait RigidMotion: Send + Sync + std::fmt::Debug {
    fn state(&self, step: u64) -> RigidState;
}

/// An indenter that never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct StaticPose(pub RigidTransform);

impl RigidMotion for StaticPose {
    fn state(&self, _step: u64) -> RigidState {
        RigidState::at_rest(self.0)
    }
}

#[derive(Debug)]
pub struct RigidBody {
    pub indices: Vec<usize>,
    pub rest: Vec<Vec3>,
    pub motion: Box<dyn RigidMotion>,
}

#[derive(Debug, Default)]
struct Scratch {
    stencils: Vec<Option<Stencil>>,
    affine: Vec<Mat3>,
}

/// One simulation: particles, background grid, configuration and the
/// optional prescribed indenter.
#[derive(Debug)]
pub struct Scene {
    pub particles: Vec<Particle>,
    pub grid: SimGrid,
    pub config: SimConfig,
    pub rigid: Option<RigidBody>,
    pub step_index: u64,
    scratch: Scratch,
}

impl Scene {
    pub fn new(particles: Vec<Particle>, grid: SimGrid, config: SimConfig) -> Result<Self, MpmError> {
        config.validate()?;
        Ok(Self {
            particles,
            grid,
            config,
            rigid: None,
            step_index: 0,
            scratch: Scratch::default(),
        })
    }

    /// Attaches the rigid particles to `motion`. Their current positions are
    /// taken as the rest configuration and moved to the step-0 pose.
    pub fn attach_rigid(&mut self, motion: Box<dyn RigidMotion>) {
        let indices: Vec<usize> = self
            .particles
            .iter()
            .enumerate()
            .filter(|(_, p)| !p.is_elastomer())
            .map(|(i, _)| i)
            .collect();
        let rest: Vec<Vec3> = indices.iter().map(|&i| self.particles[i].x).collect();
        let state = motion.state(self.step_index);
        for (&i, r) in indices.iter().zip(&rest) {
            let p = &mut self.particles[i];
            p.x = state.pose.apply(r);
            p.v = state.velocity_at(&p.x);
        }
        self.rigid = Some(RigidBody {
            indices,
            rest,
            motion,
        });
    }

    pub fn elastomer_mass(&self) -> f64 {
        self.particles.iter().filter(|p| p.is_elastomer()).map(|p| p.mass).sum()
    }

    pub fn rigid_state(&self) -> Option<RigidState> {
        self.rigid.as_ref().map(|r| r.motion.state(self.step_index))
    }

    /// Advances one step; errors carry the step index.
    pub fn step(&mut self) -> Result<(), MpmError> {
        let k = self.step_index;
        self.advance().map_err(|e| e.at_step(k))
    }

    pub fn run(&mut self, steps: usize) -> Result<(), MpmError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    fn advance(&mut self) -> Result<(), MpmError> {
        let state = self.rigid_state();
        if let (Some(rigid), Some(state)) = (&self.rigid, &state) {
            for &i in &rigid.indices {
                let p = &mut self.particles[i];
                p.v = state.velocity_at(&p.x);
            }
        }

        let Scratch { stencils, affine } = &mut self.scratch;
        compute_stencils(&self.particles, &self.grid, stencils)?;
        compute_affine(&self.particles, &self.grid, &self.config, affine)?;

        self.grid.clear();
        if let (Some(rigid), Some(state)) = (&self.rigid, &state) {
            tag_rigid_nodes(&mut self.grid, &rigid.indices, stencils, state);
        }
        scatter(&self.particles, stencils, affine, &mut self.grid, self.config.scatter);
        grid_update(&mut self.grid, &self.config);

        let grid = &self.grid;
        let dt = self.config.dt;
        let failed = self
            .particles
            .par_iter_mut()
            .zip(stencils.par_iter())
            .enumerate()
            .filter_map(|(i, (p, s))| {
                if !p.is_elastomer() {
                    return None;
                }
                let s = s.as_ref().expect("elastomer stencils are checked");
                (p.v, p.c) = gather_one(s, grid);
                let travel = p.v.norm() * dt;
                if travel >= grid.dx || !travel.is_finite() {
                    return Some((i, MpmError::Cfl { particle: i, travel, dx: grid.dx }));
                }
                deform_and_advect_one(p, i, dt).err().map(|e| (i, e))
            })
            .min_by_key(|(i, _)| *i);
        if let Some((_, e)) = failed {
            return Err(e);
        }

        self.step_index += 1;
        if let Some(rigid) = &self.rigid {
            let next = rigid.motion.state(self.step_index);
            for (&i, r) in rigid.indices.iter().zip(&rigid.rest) {
                self.particles[i].x = next.pose.apply(r);
            }
        }
        Ok(())
    }
}

/// Overwrites nodes within one cell of any in-domain rigid particle with the
/// rigid velocity field. Sticky nodes keep priority.
fn tag_rigid_nodes(
    grid: &mut SimGrid,
    indices: &[usize],
    stencils: &[Option<Stencil>],
    state: &RigidState,
) {
    let reach = grid.dx * (1.0 + 1e-12);
    let mut hits = Vec::new();
    for &i in indices {
        let Some(s) = &stencils[i] else { continue };
        s.for_each(grid, |idx, _, d| {
            if d.norm() <= reach {
                hits.push(idx);
            }
        });
    }
    for idx in hits {
        if grid.bc[idx] != NodeBc::Sticky {
            let x = grid.node_position(idx);
            grid.bc[idx] = NodeBc::RigidVelocity(state.velocity_at(&x));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_box_cloud;

    fn block(config: &SimConfig, velocity: Vec3) -> Scene {
        let cloud = make_box_cloud(Vec3::new(0.004, 0.004, 0.002), 0.0005).unwrap();
        let vol = cloud.spacing.powi(3);
        let particles: Vec<Particle> = cloud
            .positions
            .iter()
            .map(|x| {
                let mut p = Particle::elastomer(*x, config.density * vol, vol);
                p.v = velocity;
                p
            })
            .collect();
        let (lo, hi) = cloud.bounds().unwrap();
        let grid = SimGrid::around(lo, hi, 0.0005, 8);
        Scene::new(particles, grid, *config).unwrap()
    }

    #[test]
    fn static_scene_is_unchanged() {
        let config = SimConfig {
            dt: 1e-5,
            ..Default::default()
        };
        let mut scene = block(&config, Vec3::zeros());
        let before: Vec<Vec3> = scene.particles.iter().map(|p| p.x).collect();
        scene.run(10).unwrap();
        for (p, x) in scene.particles.iter().zip(&before) {
            assert_eq!(p.x, *x);
            assert_eq!(p.f, Mat3::identity());
        }
    }

    #[test]
    fn out_of_domain_reports_step() {
        let config = SimConfig {
            dt: 1e-3,
            elastic_forces: false,
            ..Default::default()
        };
        let mut scene = block(&config, Vec3::new(0.2, 0.0, 0.0));
        let err = scene.run(100).unwrap_err();
        match err {
            MpmError::AtStep { step, source } => {
                assert!(step > 0);
                assert!(matches!(*source, MpmError::OutOfDomain { .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cfl_violation_aborts() {
        let config = SimConfig {
            dt: 1e-2,
            ..Default::default()
        };
        let mut scene = block(&config, Vec3::new(0.1, 0.0, 0.0));
        let err = scene.step().unwrap_err();
        assert!(matches!(err, MpmError::AtStep { step: 0, ref source } if matches!(**source, MpmError::Cfl { .. })));
    }

    #[test]
    fn static_indenter_tags_nodes() {
        let config = SimConfig::default();
        let mut scene = block(&config, Vec3::zeros());
        let top = scene.particles.iter().map(|p| p.x.z).fold(f64::MIN, f64::max);
        scene
            .particles
            .push(Particle::rigid(Vec3::new(0.002, 0.002, top + 0.0005), 1e-6, 1e-10));
        let lift = RigidTransform::from_translation(Vec3::new(0.0, 0.0, 0.0));
        scene.attach_rigid(Box::new(StaticPose(lift)));
        scene.step().unwrap();
        let tagged = scene
            .grid
            .bc
            .iter()
            .filter(|b| matches!(b, NodeBc::RigidVelocity(_)))
            .count();
        assert!(tagged > 0 && tagged <= 27);
    }
}
