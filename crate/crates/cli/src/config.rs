//! Chain configuration: `[section]` headers with `key = value` lines.
//! `#` and `;` start comments. The `[chain]` section's `pipeline` key lists
//! the component order.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ekrt_core::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ChainConfig {
    sections: HashMap<String, HashMap<String, String>>,
    /// Directory of the config file; relative paths resolve against it.
    base_dir: PathBuf,
}

impl ChainConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ChainConfig::default();
        let mut current = String::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = match raw.find(['#', ';']) {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                current = name.trim().to_string();
                cfg.sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("line {}: expected 'key = value', got '{line}'", ln + 1))
            })?;
            if current.is_empty() {
                return Err(Error::config(format!(
                    "line {}: key '{}' appears before any [section]",
                    ln + 1,
                    key.trim()
                )));
            }
            cfg.sections
                .get_mut(&current)
                .unwrap()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Ok(cfg)
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    pub fn get_str(&self, section: &str, key: &str, default: &str) -> String {
        self.get(section, key).unwrap_or(default).to_string()
    }

    pub fn require(&self, section: &str, key: &str) -> Result<&str> {
        self.get(section, key)
            .ok_or_else(|| Error::config(format!("[{section}] is missing required key '{key}'")))
    }

    pub fn get_f64(&self, section: &str, key: &str, default: f64) -> Result<f64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(format!("[{section}] {key} = '{v}' is not a number"))
            }),
        }
    }

    pub fn get_usize(&self, section: &str, key: &str, default: usize) -> Result<usize> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(format!("[{section}] {key} = '{v}' is not a non-negative integer"))
            }),
        }
    }

    pub fn get_u64(&self, section: &str, key: &str, default: u64) -> Result<u64> {
        match self.get(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                Error::config(format!("[{section}] {key} = '{v}' is not a non-negative integer"))
            }),
        }
    }

    pub fn get_bool(&self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.get(section, key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(Error::config(format!(
                "[{section}] {key} = '{v}' is not a boolean"
            ))),
        }
    }

    /// Resolve a path value against the config file's directory.
    pub fn resolve_path(&self, section: &str, key: &str) -> Result<PathBuf> {
        let raw = self.require(section, key)?;
        let p = PathBuf::from(raw);
        if p.is_absolute() {
            Ok(p)
        } else {
            Ok(self.base_dir.join(p))
        }
    }

    /// Replace the `[chain] pipeline` component list.
    pub fn set_pipeline(&mut self, names: &[String]) {
        self.sections
            .entry("chain".to_string())
            .or_default()
            .insert("pipeline".to_string(), names.join(" "));
    }

    /// Truncate the pipeline after the first occurrence of `name`.
    pub fn truncate_pipeline_after(&mut self, name: &str) -> Result<()> {
        let names = self.pipeline()?;
        let idx = names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::config(format!("pipeline has no '{name}' component")))?;
        self.set_pipeline(&names[..=idx]);
        Ok(())
    }

    /// Truncate the pipeline before the first back-end component (scorer,
    /// decoder, or sender), keeping the feature front end.
    pub fn truncate_pipeline_to_features(&mut self) -> Result<()> {
        let names = self.pipeline()?;
        let idx = names
            .iter()
            .position(|n| matches!(n.as_str(), "scorer" | "decoder" | "sender"))
            .unwrap_or(names.len());
        if idx == 0 {
            return Err(Error::config("pipeline has no feature front end"));
        }
        self.set_pipeline(&names[..idx]);
        Ok(())
    }

    /// Ordered component names from `[chain] pipeline`.
    pub fn pipeline(&self) -> Result<Vec<String>> {
        let raw = self.require("chain", "pipeline")?;
        let names: Vec<String> = raw.split_whitespace().map(|s| s.to_string()).collect();
        if names.is_empty() {
            return Err(Error::config("[chain] pipeline is empty"));
        }
        Ok(names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_comments() {
        let cfg = ChainConfig::parse(
            "# top comment\n[chain]\npipeline = replay cutter\n\n[frame]\nsample_rate = 16000 ; inline\n",
        )
        .unwrap();
        assert_eq!(cfg.pipeline().unwrap(), vec!["replay", "cutter"]);
        assert_eq!(cfg.get_usize("frame", "sample_rate", 0).unwrap(), 16000);
    }

    #[test]
    fn errors_name_section_and_key() {
        let cfg = ChainConfig::parse("[vad]\nenergy_threshold = loud\n").unwrap();
        let err = cfg.get_f64("vad", "energy_threshold", -9.0).unwrap_err();
        assert!(err.to_string().contains("[vad] energy_threshold"), "{err}");
        let err = cfg.require("decoder", "graph").unwrap_err();
        assert!(err.to_string().contains("[decoder]"), "{err}");
    }

    #[test]
    fn key_outside_section_rejected() {
        assert!(ChainConfig::parse("stray = 1\n").is_err());
    }

    #[test]
    fn empty_pipeline_rejected() {
        let cfg = ChainConfig::parse("[chain]\npipeline =\n").unwrap();
        assert!(cfg.pipeline().is_err());
        let cfg = ChainConfig::parse("").unwrap();
        assert!(cfg.pipeline().is_err());
    }
}
