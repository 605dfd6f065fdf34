//! On-disk formats: binary PGM frames, line-delimited gaze and manifest
//! records, CSV tables, the model file, and key-value run configuration.
//!
//! Every writer in here is byte-deterministic for a given input so that
//! repeated runs can be compared with a plain diff.

pub mod config;
pub mod csvio;
pub mod model;
pub mod pgm;
pub mod records;

use crate::error::Result;
use std::path::Path;

/// Writes a file atomically: the content lands in a sibling temporary file
/// first and is renamed over the destination, so readers never observe a
/// half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let stem = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = dir.join(format!(".{stem}.tmp-{}", std::process::id()));
    std::fs::write(&tmp, bytes)?;
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e.into())
        }
    }
}

/// Formats a float with enough digits that parsing the text recovers the
/// exact bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_text_round_trips_exactly() {
        for v in [0.0, -0.0, 1.0, 2.2 / 59.0, std::f64::consts::PI, 1e-300, -3.5e208] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = std::env::temp_dir().join(format!("gazebench-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
