//! TOML run configuration.
//!
//! A config names an optional preset (and level), the output options and an
//! `[experiment]` table. Keys given in the file override the preset values;
//! without a preset the experiment must be complete. Unknown keys are
//! rejected. [`RunConfig::to_toml`] writes the fully resolved config, which
//! parses back to the same value.
//!
//! ```toml
//! preset = "catenoid"
//! deterministic = true
//!
//! [experiment.flow]
//! tol_pp = 0.025
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::presets::{preset, ExperimentSpec};

/// Resolved run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<u32>,
    /// Output directory; relative paths are resolved against the output root.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Write zero wall times so repeated runs give identical logs.
    #[serde(default)]
    pub deterministic: bool,
    pub experiment: ExperimentSpec,
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_table() && v.is_table() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

impl RunConfig {
    /// Config of a preset without overrides.
    pub fn from_preset(name: &str, level: Option<u32>) -> Result<Self> {
        Ok(Self {
            preset: Some(name.to_string()),
            level,
            output_dir: None,
            deterministic: false,
            experiment: preset(name, level)?,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let name = match user.get("preset") {
            None => None,
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(_) => return Err(Error::Config("`preset` must be a string".into())),
        };
        let level = match user.get("level") {
            None => None,
            Some(toml::Value::Integer(l)) if *l >= 0 => Some(*l as u32),
            Some(_) => {
                return Err(Error::Config(
                    "`level` must be a non-negative integer".into(),
                ))
            }
        };
        let Some(name) = name else {
            return toml::from_str(text).map_err(|e| Error::Config(e.to_string()));
        };
        let base = Self::from_preset(&name, level)?;
        let mut value = toml::Value::try_from(&base).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut value, toml::Value::Table(user));
        value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fully resolved config as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.material.validate()?;
        self.experiment.flow.validate()?;
        if self.experiment.perturbation < 0.0 || !self.experiment.perturbation.is_finite() {
            return Err(Error::Config(
                "perturbation must be a finite non-negative amplitude".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_roundtrip() {
        for &name in crate::presets::PRESETS {
            let c = RunConfig::from_preset(name, None).unwrap();
            let text = c.to_toml().unwrap();
            let back = RunConfig::from_toml_str(&text).unwrap();
            assert_eq!(c, back, "{name}\n{text}");
        }
    }

    #[test]
    fn overrides_apply_and_unknown_keys_fail() {
        let c =
            RunConfig::from_toml_str("preset = \"catenoid\"\n[experiment.flow]\ntol_pp = 0.025\n")
                .unwrap();
        assert_eq!(c.experiment.flow.tol_pp, 0.025);
        assert_eq!(
            c.experiment.flow.tau,
            crate::presets::preset("catenoid", None).unwrap().flow.tau
        );
        let e = RunConfig::from_toml_str("preset = \"catenoid\"\n[experiment.flow]\ntoll = 1\n")
            .unwrap_err();
        assert!(e.to_string().contains("toll"), "{e}");
        assert!(RunConfig::from_toml_str("preset = \"nope\"").is_err());
        assert!(RunConfig::from_toml_str("colour = 1").is_err());
    }

    #[test]
    fn level_changes_vertical_load_mesh() {
        let c = RunConfig::from_toml_str("preset = \"vertical_load\"\nlevel = 4\n").unwrap();
        match c.experiment.domain {
            crate::presets::DomainSpec::Rectangle { nx, ny, .. } => assert_eq!((nx, ny), (16, 16)),
            _ => panic!("rectangle expected"),
        }
        let back = RunConfig::from_toml_str(&c.to_toml().unwrap()).unwrap();
        assert_eq!(c, back);
    }
}
