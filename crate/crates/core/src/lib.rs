//! Music-driven dance skeleton synthesis.
//!
//! Pose fragments are retrieved from a database through a learned audio/pose
//! embedding, stitched together, repaired in space and snapped to the musical
//! beat in time. The crate also carries the evaluation metrics, a stick-figure
//! renderer and a synthetic data generator used by the tests.

pub mod alignment;
pub mod audio;
pub mod config;
pub mod crossmodal;
pub mod error;
pub mod metrics;
pub mod pipeline;
pub mod pose;
pub mod render;
pub mod skeleton;
pub mod synth;

pub use error::{Error, Result};

/// Default video frame rate.
pub const DEFAULT_FPS: u32 = 24;
