//! Building blocks for a gaze-driven cursor pipeline and the analysis tools
//! around it: head-pose compensation of eye vectors, a shrinking-marker
//! calibration routine, a small feedforward network that maps gaze to screen
//! coordinates, a thresholded cursor engine with nearest-target activation,
//! Fitts-law pointing sessions with path-efficiency metrics, failure audits
//! for recorded tracker streams, and a Hough-based circle detector for
//! desk-check imagery.
//!
//! Everything that consumes randomness takes an explicit seed and all file
//! emitters are byte-deterministic, so runs can be reproduced and diffed.

pub mod calib;
pub mod cursor;
pub mod error;
pub mod fitts;
pub mod formats;
pub mod geometry;
pub mod houghvision;
pub mod nnmap;
pub mod pathmetrics;
pub mod plot;
pub mod raster;
pub mod synth;
pub mod tracelab;

pub use error::{Error, Result};
