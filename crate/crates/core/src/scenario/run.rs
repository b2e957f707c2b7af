use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{IndenterMotion, MotionKind, Scenario};
use crate::camera::CameraModel;
use crate::error::{ImagingError, MpmError, ScenarioError};
use crate::geometry::{make_box_cloud, voxel_sample_volume, TriangleMesh, Vec3};
use crate::imaging::{
    compose_joint_image, fit_marker_groups, rasterize_mask, render_depth_map, Colormap, EllipseFit, GrayImage,
    MaskImage, RgbImage,
};
use crate::markers::{assign_markers, centroid, extract_groups, MarkerGroup, MarkerId};
use crate::metrics::write_marker_table;
use crate::mpm::{Particle, ScatterMode, Scene, SimGrid};

/// A scenario turned into a live simulation plus the bookkeeping needed to
/// render frames from it.
#[derive(Debug)]
pub struct SensorSim {
    pub scene: Scene,
    pub groups: Vec<MarkerGroup>,
    /// Top-layer elastomer particles, rendered into the depth image.
    pub surface: Vec<usize>,
    pub elastomer_count: usize,
    pub spacing: f64,
    pub camera: CameraModel,
    marker_color: [u8; 3],
    colormap: Colormap,
}

impl SensorSim {
    pub fn build(scenario: &Scenario, scatter: Option<ScatterMode>) -> Result<Self, ScenarioError> {
        let f = &scenario.file;
        let extent = scenario.elastomer_extent();
        let spacing = f.elastomer.spacing;
        let cloud = make_box_cloud(extent, spacing)?.translated(Vec3::new(-0.5 * extent.x, -0.5 * extent.y, 0.0));
        let groups = assign_markers(&cloud, &f.markers)?;

        let mut config = f.sim;
        if let Some(mode) = scatter {
            config.scatter = mode;
        }
        let vol = spacing.powi(3);
        let mut particles: Vec<Particle> = cloud
            .positions
            .iter()
            .map(|x| Particle::elastomer(*x, config.density * vol, vol))
            .collect();
        for (g, group) in groups.iter().enumerate() {
            for &i in &group.particle_indices {
                particles[i].marker = Some(g as u32);
            }
        }
        let (lo, hi) = cloud.bounds().expect("non-empty elastomer");
        let surface: Vec<usize> = (0..cloud.len())
            .filter(|&i| cloud.positions[i].z >= hi.z - 0.5 * spacing)
            .collect();
        let elastomer_count = particles.len();

        let rigid_spacing = scenario.indenter_spacing();
        let rigid = voxel_sample_volume(&scenario.indenter, rigid_spacing)?;
        let rigid_vol = rigid_spacing.powi(3);
        particles.extend(
            rigid
                .positions
                .iter()
                .map(|x| Particle::rigid(*x, config.density * rigid_vol, rigid_vol)),
        );

        let dx = SimGrid::auto_dx(extent, f.grid.min_nodes);
        let mut grid = SimGrid::around(lo, hi, dx, f.grid.margin);
        // the pad is glued to the sensor shell along its bottom layer
        grid.set_sticky_below(lo.z);

        let mut scene = Scene::new(particles, grid, config).map_err(|e| ScenarioError::invalid("sim", e.to_string()))?;
        if !rigid.positions.is_empty() {
            let (rlo, rhi) = scenario.indenter.bounds().expect("validated mesh");
            let pivot = Vec3::new(0.5 * (rlo.x + rhi.x), 0.5 * (rlo.y + rhi.y), rlo.z);
            scene.attach_rigid(Box::new(IndenterMotion {
                trajectory: f.trajectory,
                dt: config.dt,
                pivot,
            }));
        }
        log::info!(
            "{}: {} elastomer + {} indenter particles, grid {:?} at dx = {:.3e} m",
            scenario.name,
            elastomer_count,
            rigid.positions.len(),
            scene.grid.dims,
            dx
        );
        Ok(Self {
            scene,
            groups,
            surface,
            elastomer_count,
            spacing,
            camera: scenario.camera,
            marker_color: f.render.marker_color,
            colormap: f.render.colormap(),
        })
    }

    pub fn marker_ids(&self) -> Vec<MarkerId> {
        self.groups.iter().map(|g| g.id).collect()
    }

    pub fn marker_centroids(&self) -> Vec<Vec3> {
        extract_groups(&self.scene.particles, &self.groups)
            .iter()
            .map(|g| centroid(g))
            .collect()
    }

    pub fn advance_frame(&mut self) -> Result<(), MpmError> {
        self.scene.run(self.scene.config.substeps)
    }

    pub fn render(&self, index: usize) -> Result<FrameOutput, ImagingError> {
        let positions = extract_groups(&self.scene.particles, &self.groups);
        let (fits, fallbacks) = fit_marker_groups(&positions, &self.camera)?;
        let mask = rasterize_mask(&fits, self.camera.width, self.camera.height);
        let surface: Vec<Vec3> = self.surface.iter().map(|&i| self.scene.particles[i].x).collect();
        let depth = render_depth_map(&surface, self.spacing, &self.camera)?;
        let joint = compose_joint_image(&depth, &mask, self.marker_color, &self.colormap)?;
        let table = write_marker_table(&self.marker_ids(), &fits);
        Ok(FrameOutput {
            index,
            centroids: positions.iter().map(|g| centroid(g)).collect(),
            fits,
            fallbacks,
            mask,
            depth,
            joint,
            table,
        })
    }
}

#[derive(Debug, Clone)]
pub struct FrameOutput {
    pub index: usize,
    /// World-space marker centroids.
    pub centroids: Vec<Vec3>,
    pub fits: Vec<EllipseFit>,
    /// Markers drawn as discs because their ellipse fit was degenerate.
    pub fallbacks: usize,
    pub mask: MaskImage,
    pub depth: GrayImage,
    pub joint: RgbImage,
    /// CSV marker table.
    pub table: String,
}

impl FrameOutput {
    /// `(file name, bytes)` of every artifact of this frame.
    pub fn files(&self) -> Result<Vec<(String, Vec<u8>)>, ImagingError> {
        let stem = format!("frame_{:04}", self.index);
        Ok(vec![
            (format!("{stem}_mask.png"), self.mask.to_png()?),
            (format!("{stem}_depth.png"), self.depth.to_png()?),
            (format!("{stem}_joint.png"), self.joint.to_png()?),
            (format!("{stem}_markers.csv"), self.table.clone().into_bytes()),
        ])
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub setup_s: f64,
    pub simulate_s: f64,
    pub render_s: f64,
    pub write_s: f64,
    pub total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub motion: MotionKind,
    pub config_hash: String,
    pub frames_requested: usize,
    pub frames_written: usize,
    pub complete: bool,
    pub error: Option<String>,
    pub elastomer_particles: usize,
    pub indenter_particles: usize,
    pub grid_dims: [usize; 3],
    pub grid_nodes: usize,
    pub dx: f64,
    pub dt: f64,
    pub substeps: usize,
    pub scatter: ScatterMode,
    pub threads: usize,
    pub markers: usize,
    pub fallback_fits: usize,
    pub timings: Timings,
    /// Steady-state simulated frames per second (physics only; the first
    /// stepped frame is treated as warm-up when there are at least two).
    pub sim_fps: f64,
    /// Steady-state frames per second including rendering and writing.
    pub fps: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where to write frames and the manifest; `None` keeps everything in
    /// memory.
    pub out_dir: Option<PathBuf>,
    pub frames: Option<usize>,
    pub scatter: Option<ScatterMode>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub frames: Vec<FrameOutput>,
    pub manifest: Manifest,
    pub ids: Vec<MarkerId>,
    /// Per marker, whether its rest centroid lies under the indenter.
    pub in_contact: Vec<bool>,
    /// Pixel position of the indenter's rotation axis at rest.
    pub contact_center: [f64; 2],
}

/// Writes `bytes` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ScenarioError + '_ {
    move |source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), ScenarioError> {
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&path, text.as_bytes()).map_err(io_err(&path))
}

/// Markers whose rest centroid lies inside the indenter footprint projected
/// along z.
pub fn in_contact_markers(indenter: &TriangleMesh, centroids: &[Vec3]) -> Vec<bool> {
    let tris: Vec<[Vec3; 3]> = indenter
        .triangles()
        .filter(|[a, b, c]| ((b - a).cross(&(c - a))).z.abs() > 1e-18)
        .collect();
    centroids
        .iter()
        .map(|p| {
            tris.iter().any(|[a, b, c]| {
                let side = |u: &Vec3, v: &Vec3| (v.x - u.x) * (p.y - u.y) - (v.y - u.y) * (p.x - u.x);
                let (s0, s1, s2) = (side(a, b), side(b, c), side(c, a));
                (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
            })
        })
        .collect()
}

fn steady_fps(times: &[f64]) -> f64 {
    let steady = if times.len() >= 2 { &times[1..] } else { times };
    let total: f64 = steady.iter().sum();
    if total > 0.0 {
        steady.len() as f64 / total
    } else {
        0.0
    }
}

/// Runs every frame of `scenario`: frame 0 is the rest state, each later
/// frame follows `substeps` engine steps.
///
/// With an output directory, frames go to `<dir>/frames/` and a manifest to
/// `<dir>/manifest.json`. The manifest is first written as incomplete and
/// rewritten after the last frame; an engine failure leaves the frames
/// written so far and a manifest naming the error.
pub fn run_scenario(scenario: &Scenario, options: &RunOptions) -> Result<RunOutput, ScenarioError> {
    let start = Instant::now();
    let frames = options.frames.unwrap_or(scenario.file.output.frames);
    if frames == 0 {
        return Err(ScenarioError::invalid("output.frames", "must be at least 1"));
    }
    let mut sim = SensorSim::build(scenario, options.scatter)?;
    let frames_dir = options.out_dir.as_ref().map(|d| d.join("frames"));
    if let Some(fd) = &frames_dir {
        if fd.exists() {
            std::fs::remove_dir_all(fd).map_err(io_err(fd))?;
        }
        std::fs::create_dir_all(fd).map_err(io_err(fd))?;
    }

    let rest = sim.marker_centroids();
    let in_contact = in_contact_markers(&scenario.indenter, &rest);
    let pivot = sim.scene.rigid_state().map_or(Vec3::zeros(), |s| s.pivot);
    let axis = scenario.camera.project(&Vec3::new(pivot.x, pivot.y, rest.iter().map(|c| c.z).fold(0.0, f64::max)));

    let mut manifest = Manifest {
        name: scenario.name.clone(),
        motion: scenario.file.trajectory.kind,
        config_hash: scenario.config_hash.clone(),
        frames_requested: frames,
        frames_written: 0,
        complete: false,
        error: None,
        elastomer_particles: sim.elastomer_count,
        indenter_particles: sim.scene.particles.len() - sim.elastomer_count,
        grid_dims: sim.scene.grid.dims,
        grid_nodes: sim.scene.grid.len(),
        dx: sim.scene.grid.dx,
        dt: sim.scene.config.dt,
        substeps: sim.scene.config.substeps,
        scatter: sim.scene.config.scatter,
        threads: rayon::current_num_threads(),
        markers: sim.groups.len(),
        fallback_fits: 0,
        timings: Timings::default(),
        sim_fps: 0.0,
        fps: 0.0,
    };
    manifest.timings.setup_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &options.out_dir {
        write_manifest(dir, &manifest)?;
    }

    let mut outputs = Vec::with_capacity(frames);
    let mut sim_times = Vec::new();
    let mut frame_times = Vec::new();
    for k in 0..frames {
        let frame_start = Instant::now();
        if k > 0 {
            if let Err(source) = sim.advance_frame() {
                manifest.error = Some(source.to_string());
                manifest.timings.total_s = start.elapsed().as_secs_f64();
                if let Some(dir) = &options.out_dir {
                    write_manifest(dir, &manifest)?;
                }
                return Err(ScenarioError::Engine { frame: k, source });
            }
            let t = frame_start.elapsed().as_secs_f64();
            sim_times.push(t);
            manifest.timings.simulate_s += t;
        }
        let render_start = Instant::now();
        let frame = sim.render(k)?;
        manifest.timings.render_s += render_start.elapsed().as_secs_f64();
        manifest.fallback_fits += frame.fallbacks;
        if let Some(fd) = &frames_dir {
            let write_start = Instant::now();
            for (name, bytes) in frame.files()? {
                let path = fd.join(name);
                write_atomic(&path, &bytes).map_err(io_err(&path))?;
            }
            manifest.timings.write_s += write_start.elapsed().as_secs_f64();
        }
        if k > 0 {
            frame_times.push(frame_start.elapsed().as_secs_f64());
        }
        manifest.frames_written = k + 1;
        log::debug!("{}: frame {k} done", scenario.name);
        outputs.push(frame);
    }
    manifest.complete = true;
    manifest.sim_fps = steady_fps(&sim_times);
    manifest.fps = steady_fps(&frame_times);
    manifest.timings.total_s = start.elapsed().as_secs_f64();
    if let Some(dir) = &options.out_dir {
        write_manifest(dir, &manifest)?;
    }
    Ok(RunOutput {
        frames: outputs,
        manifest,
        ids: sim.marker_ids(),
        in_contact,
        contact_center: [axis.u, axis.v],
    })
}
