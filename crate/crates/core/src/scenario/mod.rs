//! Scenario files, indenter trajectories, the frame loop and bundled fixtures.
//!
//! A scenario is a TOML file. Paths inside it are resolved against the
//! directory containing the file.
//!
//! ```toml
//! name = "press_dotin"
//!
//! [elastomer]
//! extent = [0.02, 0.02, 0.005]   # box, meters; x/y centered on 0, z from 0
//! spacing = 0.0005
//!
//! [indenter]
//! mesh = "indenters/dot_in.stl"
//! mesh_scale = 0.001             # STL units to meters
//! position = [0.0, 0.0, 0.005]   # where the mesh origin is placed
//! yaw = 0.0                      # radians about +z
//!
//! [markers]
//! rows = 9
//! cols = 9
//! pitch = 0.002
//! dot_radius = 0.0008
//!
//! [camera]
//! calibration = "camera.toml"
//!
//! [sim]                          # any SimConfig field
//! dt = 2e-5
//! substeps = 50
//!
//! [grid]                         # optional
//! min_nodes = 32
//! margin = 4
//!
//! [trajectory]
//! kind = "press"                 # press | slip | rotate
//! press_depth = 0.001
//! speed = 0.05
//!
//! [output]
//! frames = 20
//! dir = "out/press_dotin"
//!
//! [render]                       # optional
//! marker_color = [24, 24, 24]
//! colormap = "gel"               # gel | gray
//! ```

mod fixtures;
mod run;
mod trajectory;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use fixtures::{batch_recipe, extrude_profile, indenter_profile, write_fixtures, BatchEntry, IndenterShape};
pub use run::{
    in_contact_markers, run_scenario, write_atomic, FrameOutput, Manifest, RunOptions, RunOutput, SensorSim,
};
pub use trajectory::{trajectory_pose, IndenterMotion, MotionKind, Trajectory};

use crate::camera::{load_calibration, CameraModel};
use crate::error::ScenarioError;
use crate::geometry::{parse_stl, rotation_z, TriangleMesh, Vec3};
use crate::imaging::Colormap;
use crate::markers::MarkerLayout;
use crate::mpm::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElastomerSpec {
    pub extent: [f64; 3],
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndenterSpec {
    pub mesh: PathBuf,
    #[serde(default = "unit")]
    pub mesh_scale: f64,
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    /// Sampling spacing of the indenter; defaults to the elastomer's.
    #[serde(default)]
    pub spacing: Option<f64>,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    pub calibration: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Minimum number of cells along the longest elastomer axis.
    pub min_nodes: usize,
    /// Extra cells around the elastomer on every side.
    pub margin: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { min_nodes: 32, margin: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub frames: usize,
    #[serde(default = "default_out")]
    pub dir: PathBuf,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColormapName {
    #[default]
    Gel,
    Gray,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderSpec {
    pub marker_color: [u8; 3],
    pub colormap: ColormapName,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self {
            marker_color: [24, 24, 24],
            colormap: ColormapName::Gel,
        }
    }
}

impl RenderSpec {
    pub fn colormap(&self) -> Colormap {
        match self.colormap {
            ColormapName::Gel => Colormap::gel(),
            ColormapName::Gray => Colormap::gray(),
        }
    }
}

/// On-disk scenario layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default)]
    pub name: Option<String>,
    pub elastomer: ElastomerSpec,
    pub indenter: IndenterSpec,
    pub markers: MarkerLayout,
    pub camera: CameraSpec,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub grid: GridSpec,
    pub trajectory: Trajectory,
    pub output: OutputSpec,
    #[serde(default)]
    pub render: RenderSpec,
}

/// A validated scenario with its referenced files loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub file: ScenarioFile,
    /// Directory the relative paths were resolved against.
    pub base_dir: PathBuf,
    /// Indenter mesh in world coordinates at its rest placement.
    pub indenter: TriangleMesh,
    pub camera: CameraModel,
    /// SHA-256 over the scenario text, mesh and calibration bytes.
    pub config_hash: String,
}

impl Scenario {
    pub fn elastomer_extent(&self) -> Vec3 {
        Vec3::from(self.file.elastomer.extent)
    }

    pub fn indenter_spacing(&self) -> f64 {
        self.file.indenter.spacing.unwrap_or(self.file.elastomer.spacing)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.file.output.dir)
    }
}

fn invalid(field: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::invalid(field, message)
}

fn positive(field: &str, v: f64) -> Result<(), ScenarioError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, format!("must be positive, got {v}")))
    }
}

fn read_referenced(field: &str, path: &Path) -> Result<Vec<u8>, ScenarioError> {
    if !path.is_file() {
        return Err(ScenarioError::MissingFile {
            field: field.to_string(),
            path: path.to_path_buf(),
        });
    }
    std::fs::read(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_scenario(&text, path, &base)
}

/// Parses and validates scenario text; `origin` is only used in messages.
pub fn parse_scenario(text: &str, origin: &Path, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse {
        path: origin.to_path_buf(),
        message: e.message().to_string(),
    })?;
    from_file(file, text.as_bytes(), origin, base_dir)
}

/// Validates an in-memory scenario (as produced by [`batch_recipe`]).
pub fn scenario_from_file(file: ScenarioFile, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let text = toml::to_string(&file).map_err(|e| invalid("<scenario>", e.to_string()))?;
    let origin = PathBuf::from(format!("{}.cfg", file.name.as_deref().unwrap_or("scenario")));
    from_file(file, text.as_bytes(), &origin, base_dir)
}

fn from_file(file: ScenarioFile, raw: &[u8], origin: &Path, base_dir: &Path) -> Result<Scenario, ScenarioError> {
    let e = &file.elastomer;
    for (k, v) in e.extent.iter().enumerate() {
        positive(&format!("elastomer.extent[{k}]"), *v)?;
    }
    positive("elastomer.spacing", e.spacing)?;
    positive("indenter.mesh_scale", file.indenter.mesh_scale)?;
    if let Some(s) = file.indenter.spacing {
        positive("indenter.spacing", s)?;
    }
    if !file.indenter.position.iter().all(|v| v.is_finite()) || !file.indenter.yaw.is_finite() {
        return Err(invalid("indenter.position", "must be finite"));
    }
    file.markers.validate()?;
    file.sim
        .validate()
        .map_err(|err| invalid("sim", err.to_string()))?;
    if file.grid.min_nodes == 0 {
        return Err(invalid("grid.min_nodes", "must be at least 1"));
    }
    if file.grid.margin < 2 {
        return Err(invalid("grid.margin", "must be at least 2 cells"));
    }
    file.trajectory
        .check()
        .map_err(|(field, msg)| invalid(&format!("trajectory.{field}"), msg))?;
    if file.output.frames == 0 {
        return Err(invalid("output.frames", "must be at least 1"));
    }

    let mesh_path = base_dir.join(&file.indenter.mesh);
    let mesh_bytes = read_referenced("indenter.mesh", &mesh_path)?;
    let mesh = parse_stl(&mesh_bytes).map_err(|source| ScenarioError::Mesh {
        path: mesh_path.clone(),
        source,
    })?;
    if mesh.faces.is_empty() {
        return Err(invalid("indenter.mesh", format!("{} has no triangles", mesh_path.display())));
    }
    let rot = rotation_z(file.indenter.yaw);
    let offset = Vec3::from(file.indenter.position);
    let scale = file.indenter.mesh_scale;
    let indenter = TriangleMesh::from_triangles(mesh.triangles().map(|t| t.map(|v| rot * (v * scale) + offset)));

    let calib_path = base_dir.join(&file.camera.calibration);
    let calib_bytes = read_referenced("camera.calibration", &calib_path)?;
    let camera = load_calibration(&calib_path)?;

    let mut hasher = Sha256::new();
    for part in [raw, &mesh_bytes, &calib_bytes] {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let config_hash = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();

    let name = file.name.clone().unwrap_or_else(|| {
        origin
            .file_stem()
            .map_or_else(|| "scenario".into(), |s| s.to_string_lossy().into_owned())
    });
    Ok(Scenario {
        name,
        file,
        base_dir: base_dir.to_path_buf(),
        indenter,
        camera,
        config_hash,
    })
}
