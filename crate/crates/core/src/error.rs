use std::path::PathBuf;

use thiserror::Error;

use crate::markers::MarkerId;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("rotation is not orthonormal with determinant +1 (det = {det})")]
    NotARotation { det: f64 },
    #[error("transform contains non-finite values")]
    NonFiniteTransform,
    #[error("spacing must be positive and finite, got {0}")]
    InvalidSpacing(f64),
    #[error("box extents must be positive, got {0:?}")]
    InvalidExtent([f64; 3]),
    #[error("mesh has no vertices")]
    EmptyMesh,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("binary STL header truncated: {len} bytes, need 84")]
    TruncatedHeader { len: usize },
    #[error("truncated STL at facet {facet} of {declared} (byte offset {offset})")]
    TruncatedFacet {
        facet: usize,
        declared: usize,
        offset: usize,
    },
    #[error("STL declares {facets} facets at byte offset {offset}; vertex count overflows")]
    VertexCountOverflow { offset: usize, facets: u64 },
    #[error("ASCII STL syntax error at byte offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpmError {
    #[error("particle {particle} at {position:?} is within 1.5 cells of the grid boundary")]
    OutOfDomain { particle: usize, position: [f64; 3] },
    #[error("particle {particle} inverted (det F = {det})")]
    InvertedElement { particle: usize, det: f64 },
    #[error("CFL violated by particle {particle}: dt * |v| = {travel} >= dx = {dx}")]
    Cfl {
        particle: usize,
        travel: f64,
        dx: f64,
    },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("step {step}: {source}")]
    AtStep {
        step: u64,
        #[source]
        source: Box<MpmError>,
    },
}

impl MpmError {
    pub fn at_step(self, step: u64) -> Self {
        MpmError::AtStep {
            step,
            source: Box::new(self),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkerError {
    #[error("invalid marker layout: {0}")]
    InvalidLayout(String),
    #[error(
        "marker {id} has only {count} particles (need at least 5); use a smaller particle spacing or a larger dot radius"
    )]
    LayoutResolution { id: MarkerId, count: usize },
}

#[derive(Debug, Error)]
pub enum CameraError {
    #[error("cannot read calibration {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("calibration field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("point {point:?} is behind the camera (Z <= 1e-6 m)")]
    BehindCamera { point: [f64; 3] },
}

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("ellipse fit needs at least 5 points, got {got}")]
    InsufficientPoints { got: usize },
    #[error("degenerate ellipse fit: {0}")]
    DegenerateFit(&'static str),
    #[error("no visible particles in frame")]
    EmptyFrame,
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (u32, u32), b: (u32, u32) },
    #[error("png encoding failed: {0}")]
    Png(#[from] png::EncodingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("marker ids differ: missing from prediction {missing_in_pred:?}, missing from truth {missing_in_truth:?}")]
    Pairing {
        missing_in_pred: Vec<MarkerId>,
        missing_in_truth: Vec<MarkerId>,
    },
    #[error("duplicate marker id {0}")]
    DuplicateId(MarkerId),
    #[error("sequence length mismatch: prediction {pred}, truth {truth}")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("empty sequence")]
    Empty,
    #[error("{path}: {message}")]
    Table { path: PathBuf, message: String },
    #[error("run {run}, frame {frame}: {source}")]
    InFrame {
        run: String,
        frame: usize,
        source: Box<MetricsError>,
    },
}

impl MetricsError {
    /// Malformed or unreadable tables, as opposed to tables that parse but
    /// do not correspond.
    pub fn is_input_error(&self) -> bool {
        match self {
            MetricsError::Table { .. } => true,
            MetricsError::InFrame { source, .. } => source.is_input_error(),
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("scenario field `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("missing file referenced by `{field}`: {path}")]
    MissingFile { field: String, path: PathBuf },
    #[error("indenter mesh {path}: {source}")]
    Mesh {
        path: PathBuf,
        #[source]
        source: StlError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Marker(#[from] MarkerError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error("engine failed at frame {frame}: {source}")]
    Engine {
        frame: usize,
        #[source]
        source: MpmError,
    },
    #[error(transparent)]
    Mpm(#[from] MpmError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

impl ScenarioError {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        ScenarioError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }

    /// Whether the failure is an input/configuration problem (as opposed to a
    /// failure while simulating or writing outputs).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            ScenarioError::Io { .. }
                | ScenarioError::Parse { .. }
                | ScenarioError::Invalid { .. }
                | ScenarioError::MissingFile { .. }
                | ScenarioError::Mesh { .. }
                | ScenarioError::Geometry(_)
                | ScenarioError::Marker(_)
                | ScenarioError::Camera(_)
        )
    }
}
