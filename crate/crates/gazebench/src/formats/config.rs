//! Key-value run configuration.
//!
//! The format is deliberately plain: one `key = value` pair per line, `#`
//! starts a comment, keys are lower_snake_case. Values stay strings until a
//! typed getter pulls them out, so unknown keys survive a round trip.
//!
//! Precedence when assembling an effective configuration is defaults, then
//! file, then `GAZEBENCH_*` environment variables, then explicit command
//! line flags; the merge helpers here implement the middle two layers.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

pub const ENV_PREFIX: &str = "GAZEBENCH_";

/// Ordered string-to-string parameter map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamMap {
    entries: BTreeMap<String, String>,
}

impl ParamMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut map = ParamMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(cut) => &raw[..cut],
                None => raw,
            };
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(idx + 1, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            if key.is_empty() {
                return Err(Error::parse(idx + 1, "empty key"));
            }
            if !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                return Err(Error::parse(
                    idx + 1,
                    format!("key `{key}` must be lower_snake_case"),
                ));
            }
            map.entries.insert(key.to_string(), value.to_string());
        }
        Ok(map)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    /// Overlays `GAZEBENCH_FOO_BAR=x` style environment variables as
    /// `foo_bar = x`, overriding file values.
    pub fn apply_env<I>(&mut self, vars: I)
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (name, value) in vars {
            if let Some(rest) = name.strip_prefix(ENV_PREFIX) {
                if rest.is_empty() {
                    continue;
                }
                self.entries.insert(rest.to_ascii_lowercase(), value);
            }
        }
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => {
                let parsed: f64 = v.parse().map_err(|_| {
                    Error::InvalidParams(format!("`{key}` = `{v}` is not a number"))
                })?;
                if !parsed.is_finite() {
                    return Err(Error::InvalidParams(format!("`{key}` must be finite")));
                }
                Ok(Some(parsed))
            }
        }
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidParams(format!("`{key}` = `{v}` is not a count"))),
        }
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::InvalidParams(format!("`{key}` = `{v}` is not an integer"))),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_and_comments() {
        let text = "# run settings\npixel_threshold = 15\n\nangle_step_deg = 2.0 # degrees\n";
        let map = ParamMap::parse(text).unwrap();
        assert_eq!(map.get("pixel_threshold"), Some("15"));
        assert_eq!(map.get_f64("angle_step_deg").unwrap(), Some(2.0));
    }

    #[test]
    fn bad_lines_report_their_number() {
        let err = ParamMap::parse("a = 1\nnot a pair\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn uppercase_keys_are_rejected() {
        assert!(ParamMap::parse("Pixel = 3\n").is_err());
    }

    #[test]
    fn env_overrides_file_values() {
        let mut map = ParamMap::parse("seed = 1\n").unwrap();
        map.apply_env(vec![
            ("GAZEBENCH_SEED".to_string(), "9".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ]);
        assert_eq!(map.get("seed"), Some("9"));
        assert_eq!(map.get("unrelated"), None);
    }

    #[test]
    fn typed_getters_validate() {
        let map = ParamMap::parse("count = -3\nratio = nope\n").unwrap();
        assert!(map.get_usize("count").is_err());
        assert!(map.get_f64("ratio").is_err());
        assert_eq!(map.get_f64("missing").unwrap(), None);
    }

    #[test]
    fn render_is_sorted_and_round_trips() {
        let mut map = ParamMap::new();
        map.set("zeta", "1");
        map.set("alpha", "2");
        let text = map.render();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
        assert_eq!(ParamMap::parse(&text).unwrap(), map);
    }
}
