//! Bundled indenter meshes, calibration and example scenarios.
//!
//! The indenters are extruded 2-D profiles (millimeters) that stand in for
//! the usual probe set: a small round dot, a hexagon, a pacman and a wide
//! cylinder.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::path::{Path, PathBuf};

use super::{
    CameraSpec, ElastomerSpec, GridSpec, IndenterSpec, MotionKind, OutputSpec, RenderSpec, ScenarioFile, Trajectory,
};
use crate::camera::CameraModel;
use crate::error::ScenarioError;
use crate::geometry::{write_stl_binary, Mat3, TriangleMesh, Vec3};
use crate::markers::MarkerLayout;
use crate::mpm::SimConfig;

/// Height of the extruded indenters, mm.
pub const INDENTER_HEIGHT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndenterShape {
    DotIn,
    Hexagon,
    Pacman,
    Cylinder,
}

impl IndenterShape {
    pub const ALL: [IndenterShape; 4] = [
        IndenterShape::DotIn,
        IndenterShape::Hexagon,
        IndenterShape::Pacman,
        IndenterShape::Cylinder,
    ];

    pub fn file_name(&self) -> String {
        format!("{self}.stl")
    }
}

impl fmt::Display for IndenterShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IndenterShape::DotIn => "dot_in",
            IndenterShape::Hexagon => "hexagon",
            IndenterShape::Pacman => "pacman",
            IndenterShape::Cylinder => "cylinder",
        })
    }
}

fn arc(radius: f64, from: f64, to: f64, segments: usize) -> impl Iterator<Item = [f64; 2]> {
    (0..segments).map(move |i| {
        let t = from + (to - from) * i as f64 / segments as f64;
        [radius * t.cos(), radius * t.sin()]
    })
}

/// Counter-clockwise outline (mm) and a point from which every outline
/// vertex is visible, used as the cap fan center.
pub fn indenter_profile(shape: IndenterShape) -> (Vec<[f64; 2]>, [f64; 2]) {
    match shape {
        IndenterShape::DotIn => (arc(3.0, 0.0, TAU, 48).collect(), [0.0, 0.0]),
        IndenterShape::Cylinder => (arc(4.0, 0.0, TAU, 64).collect(), [0.0, 0.0]),
        IndenterShape::Hexagon => (arc(4.0, 0.0, TAU, 6).collect(), [0.0, 0.0]),
        IndenterShape::Pacman => {
            // 60 degree mouth opening towards +x
            let mouth = PI / 6.0;
            let mut pts = vec![[0.0, 0.0]];
            pts.extend(arc(4.0, mouth, TAU - mouth, 50));
            pts.push([4.0 * (TAU - mouth).cos(), 4.0 * (TAU - mouth).sin()]);
            (pts, [-1.0, 0.0])
        }
    }
}

/// Closed prism over `profile` from `z = 0` to `z = height`.
pub fn extrude_profile(profile: &[[f64; 2]], fan: [f64; 2], height: f64) -> TriangleMesh {
    let n = profile.len();
    let at = |p: [f64; 2], z: f64| Vec3::new(p[0], p[1], z);
    let mut tris = Vec::with_capacity(4 * n);
    for i in 0..n {
        let (a, b) = (profile[i], profile[(i + 1) % n]);
        tris.push([at(fan, height), at(a, height), at(b, height)]);
        tris.push([at(fan, 0.0), at(b, 0.0), at(a, 0.0)]);
        tris.push([at(a, 0.0), at(b, 0.0), at(b, height)]);
        tris.push([at(a, 0.0), at(b, height), at(a, height)]);
    }
    TriangleMesh::from_triangles(tris)
}

pub fn indenter_mesh(shape: IndenterShape) -> TriangleMesh {
    let (profile, fan) = indenter_profile(shape);
    extrude_profile(&profile, fan, INDENTER_HEIGHT)
}

/// Camera below the pad looking up through it: the contact surface sits
/// 20 mm in front of the lens and a 20 mm pad fills the 228 px frame.
pub fn default_camera() -> CameraModel {
    CameraModel::new(Mat3::identity(), Vec3::new(0.0, 0.0, 0.015), 240.0, 240.0, 114.0, 114.0, 228, 228)
        .expect("valid calibration")
}

fn base_file(name: &str, shape: IndenterShape, trajectory: Trajectory, frames: usize) -> ScenarioFile {
    ScenarioFile {
        name: Some(name.to_string()),
        elastomer: ElastomerSpec {
            extent: [0.02, 0.02, 0.005],
            spacing: 0.0005,
        },
        indenter: IndenterSpec {
            mesh: PathBuf::from("indenters").join(shape.file_name()),
            mesh_scale: 0.001,
            position: [0.0, 0.0, 0.005],
            yaw: 0.0,
            spacing: None,
        },
        markers: MarkerLayout {
            rows: 9,
            cols: 9,
            pitch: 0.002,
            dot_radius: 0.0008,
            depth: 0.0,
            center: [0.0, 0.0],
        },
        camera: CameraSpec {
            calibration: PathBuf::from("camera.toml"),
        },
        sim: SimConfig {
            dt: 2e-5,
            substeps: 50,
            ..SimConfig::default()
        },
        grid: GridSpec::default(),
        trajectory,
        output: OutputSpec {
            frames,
            dir: PathBuf::from("out").join(name),
        },
        render: RenderSpec::default(),
    }
}

const PRESS_DEPTH: f64 = 0.001;
const SPEED: f64 = 0.1;

fn slip() -> Trajectory {
    Trajectory {
        kind: MotionKind::Slip,
        press_depth: PRESS_DEPTH,
        speed: SPEED,
        slip: [0.0015, 0.0],
        rotate_angle: 0.0,
        angular_speed: 0.0,
        dwell_steps: 0,
    }
}

fn rotate() -> Trajectory {
    Trajectory {
        kind: MotionKind::Rotate,
        press_depth: PRESS_DEPTH,
        speed: SPEED,
        slip: [0.0; 2],
        rotate_angle: 0.25,
        angular_speed: 25.0,
        dwell_steps: 0,
    }
}

/// Example scenarios shipped next to the fixtures.
pub fn example_scenarios() -> Vec<ScenarioFile> {
    let press = Trajectory::press(PRESS_DEPTH, SPEED);
    let mut out = vec![
        base_file("press_dotin", IndenterShape::DotIn, press, 12),
        base_file("slip_dotin", IndenterShape::DotIn, slip(), 26),
        base_file("press_hexagon", IndenterShape::Hexagon, press, 12),
        base_file("press_pacman", IndenterShape::Pacman, press, 12),
        base_file("press_cylinder", IndenterShape::Cylinder, press, 12),
    ];
    // axis off the marker lattice so every contact marker has a tangential direction
    let mut twist = base_file("rotate_hexagon", IndenterShape::Hexagon, rotate(), 24);
    twist.indenter.position = [0.001, 0.001, 0.005];
    out.insert(2, twist);
    let mut wide = base_file("press_dotin_9x7", IndenterShape::DotIn, press, 12);
    wide.markers.rows = 7;
    out.push(wide);
    out.push(base_file(
        "static_dotin",
        IndenterShape::DotIn,
        Trajectory::press(PRESS_DEPTH, 0.0),
        4,
    ));
    // about 48k particles for throughput measurements
    let mut dense = base_file("throughput_48k", IndenterShape::DotIn, press, 6);
    dense.elastomer.spacing = 0.000347;
    out.push(dense);
    out
}

/// One entry of the depth × indenter × motion dataset recipe.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchEntry {
    pub name: String,
    pub file: ScenarioFile,
}

/// `depths` press depths (evenly spaced from `min_depth` to `max_depth`) ×
/// the four indenters × press/slip/rotate. Sim, marker and camera settings
/// are copied from `base`; output directories are `<base output>/<name>`.
pub fn batch_recipe(base: &ScenarioFile, depths: usize, min_depth: f64, max_depth: f64) -> Vec<BatchEntry> {
    let mut out = Vec::with_capacity(depths * 12);
    for d in 0..depths {
        let depth = if depths > 1 {
            min_depth + (max_depth - min_depth) * d as f64 / (depths - 1) as f64
        } else {
            min_depth
        };
        for shape in IndenterShape::ALL {
            for motion in MotionKind::ALL {
                let name = format!("{motion}_{shape}_d{d:02}");
                let mut file = base.clone();
                file.name = Some(name.clone());
                file.indenter.mesh = PathBuf::from("indenters").join(shape.file_name());
                file.trajectory = match motion {
                    MotionKind::Press => Trajectory::press(depth, base.trajectory.speed),
                    MotionKind::Slip => Trajectory { press_depth: depth, speed: base.trajectory.speed, ..slip() },
                    MotionKind::Rotate => Trajectory { press_depth: depth, speed: base.trajectory.speed, ..rotate() },
                };
                file.trajectory.dwell_steps = base.trajectory.dwell_steps;
                file.output.dir = base.output.dir.join(&name);
                out.push(BatchEntry { name, file });
            }
        }
    }
    out
}

/// Writes `indenters/*.stl`, `camera.toml` and the example `*.cfg` files
/// into `dir`. Returns the written paths.
pub fn write_fixtures(dir: &Path) -> Result<Vec<PathBuf>, ScenarioError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| ScenarioError::Io { path, source }
    };
    let mut written = Vec::new();
    let indenters = dir.join("indenters");
    std::fs::create_dir_all(&indenters).map_err(io(&indenters))?;
    for shape in IndenterShape::ALL {
        let path = indenters.join(shape.file_name());
        std::fs::write(&path, write_stl_binary(&indenter_mesh(shape))).map_err(io(&path))?;
        written.push(path);
    }
    let calib = dir.join("camera.toml");
    std::fs::write(&calib, default_camera().to_toml()).map_err(io(&calib))?;
    written.push(calib);
    for file in example_scenarios() {
        let path = dir.join(format!("{}.cfg", file.name.as_deref().unwrap_or("scenario")));
        let text = toml::to_string(&file).map_err(|e| ScenarioError::invalid("<scenario>", e.to_string()))?;
        std::fs::write(&path, text).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
