use rayon::prelude::*;

use super::grid::{GridNode, NodeBc, SimGrid};
use super::kernel::Stencil;
use super::stress::compute_stress;
use super::{Particle, ScatterMode, SimConfig, MASS_EPSILON};
use crate::error::MpmError;
use crate::geometry::{Mat3, Vec3};

/// Width of a P2G slab in cells; a slab's stencils touch `SLAB + 2` planes.
const SLAB: usize = 4;

/// Stencils of all particles. Elastomer particles must be in the domain;
/// rigid particles outside it get `None` and take no part in transfers.
pub(crate) fn compute_stencils(
    particles: &[Particle],
    grid: &SimGrid,
    out: &mut Vec<Option<Stencil>>,
) -> Result<(), MpmError> {
    out.clear();
    particles
        .par_iter()
        .map(|p| Stencil::new(&p.x, grid))
        .collect_into_vec(out);
    let bad = particles
        .par_iter()
        .zip(out.par_iter())
        .enumerate()
        .filter(|(_, (p, s))| p.is_elastomer() && s.is_none())
        .map(|(i, _)| i)
        .min();
    match bad {
        Some(i) => {
            let x = particles[i].x;
            Err(MpmError::OutOfDomain {
                particle: i,
                position: [x.x, x.y, x.z],
            })
        }
        None => Ok(()),
    }
}

/// Per-particle matrix `m C − Δt V⁰ (4/Δx²) τ` multiplying `X_i − x_p` in P2G.
pub(crate) fn compute_affine(
    particles: &[Particle],
    grid: &SimGrid,
    config: &SimConfig,
    out: &mut Vec<Mat3>,
) -> Result<(), MpmError> {
    let material = config.material();
    let force_scale = config.dt * 4.0 / (grid.dx * grid.dx);
    out.resize(particles.len(), Mat3::zeros());
    let failed = out
        .par_iter_mut()
        .zip(particles.par_iter())
        .enumerate()
        .filter_map(|(i, (affine, p))| {
            if !p.is_elastomer() {
                *affine = Mat3::zeros();
                return None;
            }
            *affine = p.c * p.mass;
            if config.elastic_forces {
                match compute_stress(&p.f, &material) {
                    Ok(stress) => *affine -= stress * (force_scale * p.volume),
                    Err(MpmError::InvertedElement { det, .. }) => {
                        return Some((i, MpmError::InvertedElement { particle: i, det }))
                    }
                    Err(e) => return Some((i, e)),
                }
            }
            None
        })
        .min_by_key(|(i, _)| *i);
    failed.map_or(Ok(()), |(_, e)| Err(e))
}

#[inline]
fn scatter_one(
    p: &Particle,
    stencil: &Stencil,
    affine: &Mat3,
    grid: &SimGrid,
    nodes: &mut [GridNode],
    offset: usize,
) {
    // affine * (X_i - x_p) expanded per axis: q + a*ca + b*cb + c*cc
    let dx = grid.dx;
    let frac = Vec3::from(stencil.frac);
    let q = p.v * p.mass - affine * frac * dx;
    let [ca, cb, cc] = [0, 1, 2].map(|k| affine.column(k) * dx);
    let [ny, nz] = [grid.dims[1], grid.dims[2]];
    let [wx, wy, wz] = &stencil.weights;
    for a in 0..3 {
        let qa = q + ca * a as f64;
        for b in 0..3 {
            let qab = qa + cb * b as f64;
            let wab = wx[a] * wy[b];
            let row = ((stencil.base[0] + a) * ny + stencil.base[1] + b) * nz + stencil.base[2] - offset;
            for c in 0..3 {
                let w = wab * wz[c];
                let node = &mut nodes[row + c];
                node.mass += w * p.mass;
                node.momentum += (qab + cc * c as f64) * w;
            }
        }
    }
}

/// Accumulates mass and momentum from all particles with a stencil.
pub(crate) fn scatter(
    particles: &[Particle],
    stencils: &[Option<Stencil>],
    affine: &[Mat3],
    grid: &mut SimGrid,
    mode: ScatterMode,
) {
    match mode {
        ScatterMode::Deterministic => scatter_slabs(particles, stencils, affine, grid),
        ScatterMode::ThreadLocal => scatter_thread_local(particles, stencils, affine, grid),
    }
}

fn scatter_slabs(
    particles: &[Particle],
    stencils: &[Option<Stencil>],
    affine: &[Mat3],
    grid: &mut SimGrid,
) {
    let planes = grid.dims[0];
    let plane_len = grid.plane_len();
    let slabs = planes.div_ceil(SLAB);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); slabs];
    for (i, s) in stencils.iter().enumerate() {
        if let Some(s) = s {
            buckets[s.base[0] / SLAB].push(i as u32);
        }
    }
    let mut nodes = std::mem::take(&mut grid.nodes);
    let view: &SimGrid = grid;
    for color in 0..2 {
        let mut chunks: Vec<(usize, usize, &mut [GridNode])> = Vec::new();
        let mut rest: &mut [GridNode] = &mut nodes;
        let mut consumed = 0;
        for slab in (color..slabs).step_by(2) {
            let start = slab * SLAB;
            let end = (start + SLAB + 2).min(planes);
            let tail = std::mem::take(&mut rest);
            let (_, tail) = tail.split_at_mut((start - consumed) * plane_len);
            let (chunk, tail) = tail.split_at_mut((end - start) * plane_len);
            chunks.push((slab, start * plane_len, chunk));
            rest = tail;
            consumed = end;
        }
        chunks.into_par_iter().for_each(|(slab, offset, chunk)| {
            for &pi in &buckets[slab] {
                let pi = pi as usize;
                let stencil = stencils[pi].as_ref().expect("bucketed particles have stencils");
                scatter_one(&particles[pi], stencil, &affine[pi], view, chunk, offset);
            }
        });
    }
    grid.nodes = nodes;
}

fn scatter_thread_local(
    particles: &[Particle],
    stencils: &[Option<Stencil>],
    affine: &[Mat3],
    grid: &mut SimGrid,
) {
    let n = grid.len();
    let view: &SimGrid = grid;
    let summed = (0..particles.len())
        .into_par_iter()
        .with_min_len(1024)
        .fold(
            || vec![GridNode::default(); n],
            |mut acc, pi| {
                if let Some(s) = &stencils[pi] {
                    scatter_one(&particles[pi], s, &affine[pi], view, &mut acc, 0);
                }
                acc
            },
        )
        .reduce(
            || vec![GridNode::default(); n],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    grid.nodes = summed;
}

/// Particle-to-grid transfer into a cleared grid.
///
/// Rigid particles contribute `m v` and mass only. Elastomer particles add the
/// APIC term `m C (X − x)` and, when enabled, the elastic term
/// `−Δt V⁰ (4/Δx²) τ (X − x)`.
pub fn particle_to_grid(
    particles: &[Particle],
    grid: &mut SimGrid,
    config: &SimConfig,
) -> Result<(), MpmError> {
    let mut stencils = Vec::new();
    let mut affine = Vec::new();
    compute_stencils(particles, grid, &mut stencils)?;
    compute_affine(particles, grid, config, &mut affine)?;
    scatter(particles, &stencils, &affine, grid, config.scatter);
    Ok(())
}

/// Momentum division, gravity and boundary conditions.
pub fn grid_update(grid: &mut SimGrid, config: &SimConfig) {
    let gdt = config.gravity() * config.dt;
    grid.velocity
        .par_iter_mut()
        .zip(grid.nodes.par_iter())
        .zip(grid.bc.par_iter())
        .for_each(|((v, node), bc)| {
            *v = if node.mass > MASS_EPSILON {
                node.momentum / node.mass + gdt
            } else {
                Vec3::zeros()
            };
            match bc {
                NodeBc::Free => {}
                NodeBc::Sticky => *v = Vec3::zeros(),
                NodeBc::RigidVelocity(rv) => *v = *rv,
            }
        });
}

/// Gathers `v = Σ w V` and `C = (4/Δx²) Σ w V ⊗ (X − x)`.
#[inline]
pub(crate) fn gather_one(stencil: &Stencil, grid: &SimGrid) -> (Vec3, Mat3) {
    // Σ w V (X_i - x_p)ᵀ = Σ w V [a b c]ᵀ dx - (Σ w V) fracᵀ dx
    let [ny, nz] = [grid.dims[1], grid.dims[2]];
    let [wx, wy, wz] = &stencil.weights;
    let mut v = Vec3::zeros();
    let mut moment = [Vec3::zeros(); 3];
    for a in 0..3 {
        for b in 0..3 {
            let wab = wx[a] * wy[b];
            let row = ((stencil.base[0] + a) * ny + stencil.base[1] + b) * nz + stencil.base[2];
            let mut col = Vec3::zeros();
            for c in 0..3 {
                let wv = grid.velocity[row + c] * (wab * wz[c]);
                col += wv;
                moment[2] += wv * c as f64;
            }
            v += col;
            moment[0] += col * a as f64;
            moment[1] += col * b as f64;
        }
    }
    let b = Mat3::from_columns(&moment) - v * Vec3::from(stencil.frac).transpose();
    (v, b * (4.0 / grid.dx))
}

/// Grid-to-particle gather for elastomer particles; rigid particles keep
/// their prescribed velocity.
pub fn grid_to_particle(
    particles: &mut [Particle],
    grid: &SimGrid,
    _config: &SimConfig,
) -> Result<(), MpmError> {
    let failed = particles
        .par_iter_mut()
        .enumerate()
        .filter(|(_, p)| p.is_elastomer())
        .filter_map(|(i, p)| match Stencil::new(&p.x, grid) {
            Some(s) => {
                (p.v, p.c) = gather_one(&s, grid);
                None
            }
            None => Some((i, p.x)),
        })
        .min_by_key(|(i, _)| *i);
    match failed {
        Some((particle, x)) => Err(MpmError::OutOfDomain {
            particle,
            position: [x.x, x.y, x.z],
        }),
        None => Ok(()),
    }
}

/// `F ← (I + Δt C) F` and `x ← x + Δt v` for one elastomer particle.
#[inline]
pub(crate) fn deform_and_advect_one(p: &mut Particle, index: usize, dt: f64) -> Result<(), MpmError> {
    let f = (Mat3::identity() + p.c * dt) * p.f;
    let det = f.determinant();
    if det <= 0.0 || !det.is_finite() {
        return Err(MpmError::InvertedElement { particle: index, det });
    }
    p.f = f;
    p.x += p.v * dt;
    Ok(())
}

/// Applies the deformation update and advection to every particle. Rigid
/// particles keep `F = I` and move with their prescribed velocity.
pub fn update_deformation_and_advect(
    particles: &mut [Particle],
    config: &SimConfig,
) -> Result<(), MpmError> {
    let dt = config.dt;
    let failed = particles
        .par_iter_mut()
        .enumerate()
        .filter_map(|(i, p)| {
            if p.is_elastomer() {
                deform_and_advect_one(p, i, dt).err().map(|e| (i, e))
            } else {
                p.x += p.v * dt;
                None
            }
        })
        .min_by_key(|(i, _)| *i);
    failed.map_or(Ok(()), |(_, e)| Err(e))
}
