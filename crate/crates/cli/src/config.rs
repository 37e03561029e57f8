//! The TOML run configuration shared by every subcommand.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use bugcast_core::eval::SplitSpec;
use bugcast_core::models::ForecasterSpec;
use bugcast_core::series::SeriesLabel;
use bugcast_core::{Error, Result};

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_label() -> SeriesLabel {
    SeriesLabel::Arrival
}

fn default_page_size() -> usize {
    500
}

/// Data sources and sinks: where the series comes from and which covariate
/// files accompany it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Weekly snapshot consumed by `diagnose`, `evaluate` and `forecast`.
    pub series_csv: Option<PathBuf>,
    /// Whether the snapshot counts arrivals or resolutions.
    #[serde(default = "default_label")]
    pub label: SeriesLabel,
    /// Tracker base URL for `fetch`; `BUGCAST_ENDPOINT` still takes
    /// precedence so tests can point at a mock without editing the config.
    pub endpoint: Option<String>,
    /// Release calendar feeding the exogenous covariates, if any.
    pub releases_csv: Option<PathBuf>,
    /// Outlier replacements applied right after loading the series.
    pub outliers_csv: Option<PathBuf>,
    /// Page cache directory for `fetch`; system temp dir when unset.
    pub cache_dir: Option<PathBuf>,
    /// Bugs per tracker page.
    #[serde(default = "default_page_size")]
    pub page_size: usize,
}

/// One parsed `--config` file: seed, output directory, data sources, the
/// evaluation split and the model roster.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Offset added to every model seed; `--seed` overrides it.
    #[serde(default)]
    pub seed: u64,
    /// Where outputs land; `--out-dir` overrides it.
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub data: DataConfig,
    pub split: SplitSpec,
    #[serde(default, rename = "models")]
    pub models: Vec<ForecasterSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidSpec(format!("config {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Structural checks that need no data, run before any side effect.
    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.data.page_size == 0 {
            return Err(Error::InvalidSpec("data.page_size must be ≥ 1".into()));
        }
        let mut seen = HashSet::new();
        for spec in &self.models {
            spec.validate()?;
            let label = spec.label();
            if label.is_empty()
                || !label
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || "._-".contains(c))
            {
                return Err(Error::InvalidSpec(format!(
                    "model label `{label}` is not filename-safe (use letters, digits, `.`, `_`, `-`)"
                )));
            }
            if label == "Base" {
                return Err(Error::InvalidSpec(
                    "model label `Base` is reserved for the naive baseline".into(),
                ));
            }
            if !seen.insert(label.clone()) {
                return Err(Error::InvalidSpec(format!("duplicate model label `{label}`")));
            }
        }
        Ok(())
    }

    /// The model roster with the global seed offset folded into each model
    /// seed. `override_seed` (from `--seed`) replaces the config-file offset.
    pub fn seeded_models(&self, override_seed: Option<u64>) -> Vec<ForecasterSpec> {
        let offset = self.effective_seed(override_seed);
        self.models
            .iter()
            .cloned()
            .map(|mut spec| {
                spec.seed = spec.seed.wrapping_add(offset);
                spec
            })
            .collect()
    }

    pub fn effective_seed(&self, override_seed: Option<u64>) -> u64 {
        override_seed.unwrap_or(self.seed)
    }
}
