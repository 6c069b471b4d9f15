//! Flat `key = value` configuration files.
//!
//! ```text
//! # comments start with '#'
//! include = base.cfg          # resolved relative to this file
//! learning_rate = 0.001795    # bare keys are TrainConfig fields
//! prune.mm_window = 7         # prefixed keys target other sections
//! synth.ballistic_range = [0.01, 0.02]
//! ```
//!
//! Later assignments override earlier ones, and an include takes effect at the
//! line where it appears. Values are parsed as JSON literals where possible and
//! as plain strings otherwise.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use reentry_core::features::{FeatureConfig, FitOptions};
use reentry_core::hypersearch::{AshaConfig, SearchSpace};
use reentry_core::synthetic::SyntheticSpec;
use reentry_core::tle::{PruneConfig, SelectionCriteria};
use reentry_core::train::TrainConfig;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::io::{read_text, sha256_hex};

/// Section prefixes. The empty prefix holds the training keys.
pub const SECTIONS: [&str; 8] = ["", "prune", "select", "fit", "feature", "synth", "asha", "space"];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
    /// Files read, in include order.
    pub sources: Vec<PathBuf>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.read_file(path, &mut Vec::new())?;
        cfg.validate_keys()?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        cfg.read_text(text, Path::new("."), "<inline>", &mut Vec::new())?;
        cfg.validate_keys()?;
        Ok(cfg)
    }

    fn read_file(&mut self, path: &Path, stack: &mut Vec<PathBuf>) -> Result<()> {
        let canonical = path.canonicalize().map_err(|e| Error::io(path, e))?;
        if stack.contains(&canonical) {
            return Err(Error::config(format!("include cycle through {}", path.display())));
        }
        let text = read_text(path)?;
        stack.push(canonical);
        self.sources.push(path.to_path_buf());
        let dir = path.parent().unwrap_or(Path::new("."));
        self.read_text(&text, dir, &path.display().to_string(), stack)?;
        stack.pop();
        Ok(())
    }

    fn read_text(&mut self, text: &str, dir: &Path, name: &str, stack: &mut Vec<PathBuf>) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| Error::config(format!("{name}:{}: expected `key = value`", n + 1)))?;
            if key == "include" {
                self.read_file(&dir.join(value), stack)?;
            } else {
                self.entries.insert(key.to_string(), value.to_string());
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolved `key = value` lines in key order.
    pub fn canonical(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }

    fn section(key: &str) -> (&str, &str) {
        key.split_once('.').unwrap_or(("", key))
    }

    /// Overrides the fields of `base` with the keys of `section`.
    pub fn apply<T: Serialize + DeserializeOwned>(&self, section: &str, base: T) -> Result<T> {
        let mut value = serde_json::to_value(base).map_err(Error::config)?;
        let Value::Object(obj) = &mut value else {
            return Err(Error::config("config section must be a struct"));
        };
        for (key, raw) in &self.entries {
            let (sec, field) = Self::section(key);
            if sec != section {
                continue;
            }
            let slot = obj.get_mut(field).ok_or_else(|| Error::config(format!("unknown config key `{key}`")))?;
            *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
        }
        serde_json::from_value(value).map_err(|e| Error::config(format!("section `{section}`: {e}")))
    }

    /// Every key must name a field of a known section.
    pub fn validate_keys(&self) -> Result<()> {
        for key in self.entries.keys() {
            let (sec, _) = Self::section(key);
            if !SECTIONS.contains(&sec) {
                return Err(Error::config(format!("unknown config section in `{key}`")));
            }
        }
        self.train(TrainConfig::default())?;
        self.apply("prune", PruneConfig::default())?;
        self.apply("select", SelectionCriteria::default())?;
        self.apply("fit", FitOptions::default())?;
        self.apply("feature", FeatureConfig::default())?;
        self.apply("synth", SyntheticSpec::default())?;
        self.apply("asha", AshaConfig::default())?;
        self.apply("space", SearchSpace::default())?;
        Ok(())
    }

    pub fn train(&self, base: TrainConfig) -> Result<TrainConfig> {
        self.apply("", base)
    }
}
