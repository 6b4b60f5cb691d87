//! Coarse-to-fine multi-view stereo with non-parametric depth distributions.
//!
//! A reference image and its sources are turned into feature pyramids. The
//! coarsest level sweeps inverse-depth planes through a dense group-wise
//! correlation volume. Each finer level keeps the top-K samples of every
//! pixel distribution, subdivides them and evaluates only those hypotheses
//! in a sparse cost volume.

pub mod cost;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod npdist;
pub mod pipeline;
pub mod scene;
pub mod sparse;
pub mod supervision;
pub mod synth;
pub mod workflow;

pub use error::{MvsError, Result};
pub use grid::{DepthMap, Grid, Image};
