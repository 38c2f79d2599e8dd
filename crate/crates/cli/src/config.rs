//! JSON run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::Result;
use phvox::nn::{CaptionerConfig, SamplerConfig, TrainConfig};
use phvox::voxel::GridSpec;
use phvox::workflows::GenerationConfig;
use serde::{Deserialize, Serialize};

use crate::io::{read_text, InputContext};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub validation: Option<PathBuf>,
    pub baseline: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub grid: Option<GridSpec>,
    pub model: Option<CaptionerConfig>,
    pub train: Option<TrainConfig>,
    pub sampler: Option<SamplerConfig>,
    pub generation: Option<GenerationConfig>,
    pub conformers: Option<usize>,
    pub budget: Option<usize>,
    pub baseline_sample: Option<usize>,
    pub n_g: Option<usize>,
    pub n_a: Option<usize>,
    pub k: Option<usize>,
    pub nbits: Option<usize>,
    pub paths: Paths,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(p) = path else { return Ok(RunConfig::default()) };
        let text = read_text(Some(p))?;
        serde_json::from_str(&text).input(format!("config {}", p.display()))
    }
}

/// Flag, else config value, else default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

/// Flag, else config path; errors naming `what` when neither is set.
pub fn need_path(flag: &Option<PathBuf>, config: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.clone()
        .or_else(|| config.clone())
        .ok_or_else(|| crate::io::input_error(format!("missing {what} (flag or config paths.{what})")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"seed": 1, "colour": 2}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"grid": {"d": 16, "resolution": 1.0, "radius": 1.0, "x": 0}}"#).is_err());
        assert!(serde_json::from_str::<RunConfig>(r#"{"paths": {"inptu": "a"}}"#).is_err());
        let c: RunConfig = serde_json::from_str(r#"{"seed": 4, "sampler": {"temperature": 1.5}}"#).unwrap();
        assert_eq!(c.seed, Some(4));
        assert_eq!(c.sampler.unwrap().max_length, SamplerConfig::default().max_length);
    }

    #[test]
    fn flags_win() {
        assert_eq!(pick(Some(1), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2), 3), 2);
        assert_eq!(pick(None, None, 3), 3);
    }
}
