//! Simulation of marker-based vision tactile sensors.
//!
//! The elastomer pad is discretized into particles and advanced with MLS-MPM
//! while a rigid indenter follows a scripted press, slip or rotate trajectory.
//! Particle groups tagged as marker dots are projected through a pinhole
//! camera, fitted with ellipses and rasterized into binary marker masks;
//! depth and joint images are rendered from the same particle state.
//!
//! - [`geometry`]: vectors, rigid transforms, STL ingestion, particle sampling
//! - [`mpm`]: the particle/grid solver
//! - [`markers`]: marker dot tagging and extraction
//! - [`camera`]: calibrated pinhole projection
//! - [`imaging`]: ellipse fitting, masks, depth and joint images
//! - [`scenario`]: config files, indenter trajectories, run loop, fixtures
//! - [`metrics`]: marker displacement and shape error metrics

pub mod camera;
pub mod error;
pub mod geometry;
pub mod imaging;
pub mod markers;
pub mod metrics;
pub mod mpm;
pub mod scenario;

pub use error::{CameraError, GeometryError, ImagingError, MarkerError, MetricsError, MpmError, ScenarioError, StlError};
