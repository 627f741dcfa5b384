//! Planning and control toolkit for under-actuated twin-hull surface vessels.
//!
//! The crate covers the full pipeline from an aerial obstacle mask to a tracked
//! trajectory:
//!
//! * [`camera`] projects a segmentation mask onto the water plane and rasterizes
//!   it into an [`grid::OccupancyGrid`].
//! * [`hybrid_astar`] searches that grid with forward/reverse motion primitives
//!   and [`reeds_shepp`] terminal connections.
//! * [`optimizer`] time-parameterizes the searched path and refines it by direct
//!   transcription with the in-house [`nlp`] solver.
//! * [`control`] tracks the result in closed loop, either with a receding-horizon
//!   controller or with a pure-pursuit PID baseline.
//! * [`scenario`] and [`harness`] tie everything together for benchmark runs.
//!
//! All pipeline stages are deterministic: identical inputs (including seeds)
//! produce bit-identical outputs.

pub mod angle;
pub mod camera;
pub mod control;
pub mod dynamics;
pub mod error;
pub mod grid;
pub mod harness;
pub mod hybrid_astar;
pub mod nlp;
pub mod optimizer;
pub mod reeds_shepp;
pub mod scenario;
pub mod svg;
pub mod trajectory;

pub use error::{Error, Result};
