//! TOML run configuration.
//!
//! ```toml
//! seed = 0
//! scenes = 1
//! out = "runs"
//!
//! [scene]
//! preset = "dynamic"        # static | dynamic | still-camera
//! # file = "scene.toml"     # a full scene description, relative to this file
//!
//! [optim]
//! loss_mode = "full"        # baseline | temporal | distill | full
//! weight_mode = "mlra"      # sum-up | mlra
//! ```
//!
//! Omitted keys take their defaults; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::OptimConfig;
use crate::scenesim::{presets, SceneConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Static,
    #[default]
    Dynamic,
    StillCamera,
}

impl Preset {
    pub fn config(&self, seed: u64) -> SceneConfig {
        match self {
            Preset::Static => presets::static_scene(seed),
            Preset::Dynamic => presets::dynamic_scene(seed),
            Preset::StillCamera => presets::still_camera_scene(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    #[serde(default)]
    pub preset: Preset,
    /// Scene description file; takes precedence over `preset`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn d_scenes() -> usize {
    1
}
fn d_out() -> PathBuf {
    PathBuf::from("runs")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the first scene; scene `k` uses `seed + k`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_scenes")]
    pub scenes: usize,
    #[serde(default = "d_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub scene: SceneSpec,
    #[serde(default)]
    pub optim: OptimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenes: d_scenes(),
            out: d_out(),
            scene: SceneSpec::default(),
            optim: OptimConfig::default(),
        }
    }
}

fn config_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

impl RunConfig {
    /// Parses `text`; `path` is used for diagnostics and to resolve relative scene files.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(path, e.to_string()))?;
        if let Some(f) = &cfg.scene.file {
            if f.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.scene.file = Some(dir.join(f));
                }
            }
        }
        cfg.check(path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(path, format!("cannot read: {e}")))?;
        Self::parse(&text, path)
    }

    /// Field-level checks, reported as configuration errors against `path`.
    pub fn check(&self, path: &Path) -> Result<()> {
        if self.scenes == 0 {
            return Err(config_err(path, "scenes: must be at least 1"));
        }
        if let Some(f) = &self.scene.file {
            if !f.is_file() {
                return Err(config_err(path, format!("scene.file: {} does not exist", f.display())));
            }
        }
        self.optim
            .validate()
            .map_err(|e| config_err(path, format!("optim: {e}")))
    }

    /// Scene description for scene `k`.
    pub fn scene_config(&self, k: usize) -> Result<SceneConfig> {
        let seed = self.seed + k as u64;
        let cfg = match &self.scene.file {
            Some(f) => {
                let text = fs::read_to_string(f).map_err(|e| config_err(f, format!("cannot read: {e}")))?;
                let mut c: SceneConfig = toml::from_str(&text).map_err(|e| config_err(f, e.to_string()))?;
                c.seed = c.seed.wrapping_add(k as u64);
                c
            }
            None => self.scene.preset.config(seed),
        };
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::WeightMode;
    use crate::optimizer::LossMode;

    #[test]
    fn defaults_from_empty_document() {
        let c = RunConfig::parse("", Path::new("x.toml")).unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn nested_fields() {
        let text = "seed = 4\nscenes = 2\n[scene]\npreset = \"static\"\n[optim]\nloss_mode = \"temporal\"\nweight_mode = \"sum-up\"\niterations = 7\n";
        let c = RunConfig::parse(text, Path::new("x.toml")).unwrap();
        assert_eq!(c.seed, 4);
        assert_eq!(c.scene.preset, Preset::Static);
        assert_eq!(c.optim.loss_mode, LossMode::Temporal);
        assert_eq!(c.optim.weight_mode, WeightMode::SumUp);
        assert_eq!(c.optim.iterations, 7);
        assert_eq!(c.scene_config(1).unwrap(), presets::static_scene(5));
    }

    #[test]
    fn diagnostics_name_line_and_field() {
        let err = RunConfig::parse("seed = 1\n[optim]\nstep_sise = 0.1\n", Path::new("bad.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::Config { .. }));
        assert!(msg.contains("line 3") && msg.contains("step_sise"), "{msg}");
        let err = RunConfig::parse("[optim]\nstep_size = -1.0\n", Path::new("bad.toml")).unwrap_err();
        assert!(err.to_string().contains("step_size"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn missing_scene_file_is_rejected() {
        let err = RunConfig::parse("[scene]\nfile = \"nope.toml\"\n", Path::new("/tmp/cfg.toml")).unwrap_err();
        assert!(err.to_string().contains("does not exist"));
    }

    #[test]
    fn round_trip() {
        let c = RunConfig {
            seed: 9,
            ..Default::default()
        };
        assert_eq!(RunConfig::parse(&c.to_toml(), Path::new("x.toml")).unwrap(), c);
    }
}
