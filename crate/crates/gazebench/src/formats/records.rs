//! Line-delimited record streams produced by the tracker logger.
//!
//! Each line is one JSON object. The gaze stream carries the tracker's
//! native fields: presentation timestamp in microseconds, the device gaze
//! index, a status word (zero means valid), the normalised 2-D gaze point,
//! both 3-D gaze directions, and the head orientation in degrees. Frame
//! manifests pair a timestamp with the image file recorded at that moment.
//!
//! Parsers report 1-based line numbers on failure and skip blank lines so
//! hand-edited fixtures stay usable.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One record of the raw gaze stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGazeRecord {
    /// Presentation timestamp, microseconds.
    pub pts_us: i64,
    /// Monotonically increasing index assigned by the tracker.
    pub gidx: u64,
    /// Status word; zero is a valid sample.
    pub s: u32,
    /// Normalised on-screen gaze point. The device pins this to [0, 0]
    /// whenever the status word is non-zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gp: Option<[f64; 2]>,
    /// Left eye gaze direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd_l: Option<[f64; 3]>,
    /// Right eye gaze direction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gd_r: Option<[f64; 3]>,
    /// Head yaw, pitch, roll in degrees.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head: Option<[f64; 3]>,
}

impl RawGazeRecord {
    pub fn is_valid(&self) -> bool {
        self.s == 0
    }
}

/// One entry of the eye-camera frame manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameManifestEntry {
    /// Presentation timestamp, microseconds.
    pub pts_us: i64,
    /// Image file recorded for this frame, relative to the manifest.
    pub file: String,
}

fn parse_lines<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let rec: T = serde_json::from_str(trimmed)
            .map_err(|e| Error::parse(idx + 1, format!("bad {what} record: {e}")))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn parse_gaze_stream(text: &str) -> Result<Vec<RawGazeRecord>> {
    parse_lines(text, "gaze")
}

pub fn parse_frame_manifest(text: &str) -> Result<Vec<FrameManifestEntry>> {
    parse_lines(text, "frame manifest")
}

pub fn write_gaze_stream(records: &[RawGazeRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("gaze record serializes"));
        out.push('\n');
    }
    out
}

pub fn write_frame_manifest(entries: &[FrameManifestEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("manifest entry serializes"));
        out.push('\n');
    }
    out
}
