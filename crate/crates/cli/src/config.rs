//! Optional run configuration file (TOML or JSON, auto-detected by
//! extension). Command-line flags always win over file values.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub corpus: Option<PathBuf>,
    pub gaming: Option<Vec<PathBuf>>,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub generate: GenerateSection,
    #[serde(default)]
    pub llm: LlmSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub real_train_fraction: Option<f64>,
    pub gaming_train_fraction: Option<f64>,
    pub validation_fraction: Option<f64>,
    pub tau_default: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub stop_words: Option<PathBuf>,
    pub medical_terms: Option<PathBuf>,
    pub subsample_rate: Option<f64>,
    pub per_item_s1a: Option<usize>,
    pub per_item_s1b: Option<usize>,
    pub per_item_s1c: Option<usize>,
    pub per_item_s3: Option<usize>,
    pub summary_counts: Option<Vec<usize>>,
    pub k_min: Option<usize>,
    pub k_max: Option<usize>,
    pub mixed_separator: Option<String>,
    pub mixed_incorrect_parts: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmSection {
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub temperature: Option<f64>,
    pub api_key_env: Option<String>,
    pub max_in_flight: Option<usize>,
    pub max_retries: Option<u32>,
    pub timeout_secs: Option<u64>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let content = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => {
                toml::from_str(&content).with_context(|| format!("malformed TOML config {}", path.display()))
            }
            Some("json") =>serde_json::from_str(&content)
                .with_context(|| format!("malformed JSON config {}", path.display())),
            other => bail!(
                "config file {} must end in .toml or .json (got {:?})",
                path.display(),
                other
            ),
        }
    }

    pub fn load_opt(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            Some(p) => Self::load(p),
            None => Ok(Self::default()),
        }
    }
}

/// Flag wins, then file value, then default.
pub fn pick<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_toml_and_json() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(&toml_path, "seed = 7\n[experiment]\nreal_train_fraction = 0.8\n").unwrap();
        let cfg = FileConfig::load(&toml_path).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.experiment.real_train_fraction, Some(0.8));

        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, r#"{"seed": 9, "llm": {"model": "gpt-4"}}"#).unwrap();
        let cfg = FileConfig::load(&json_path).unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.llm.model.as_deref(), Some("gpt-4"));
    }

    #[test]
    fn unknown_extension_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.yaml");
        std::fs::write(&path, "seed: 1").unwrap();
        assert!(FileConfig::load(&path).is_err());
    }

    #[test]
    fn flags_override_file_values() {
        assert_eq!(pick(Some(1u64), Some(2), 3), 1);
        assert_eq!(pick(None, Some(2u64), 3), 2);
        assert_eq!(pick::<u64>(None, None, 3), 3);
    }
}
