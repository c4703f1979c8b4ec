//! Declarative run configuration: one TOML section per pipeline stage.
//! Command-line flags override individual keys; the effective value is
//! snapshotted into every run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cohmark::biomarker::{default_bins, Bin, BinSpec, Biomarker};
use cohmark::marker::DeltaLongMode;
use cohmark::models::{ParamPool, ScorerConfig};
use cohmark::stats::StdConvention;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub ingest: IngestConfig,
    pub pairs: PairsConfig,
    pub model: ScorerConfig,
    pub grid: GridConfig,
    pub marker: MarkerConfig,
    pub associate: AssociateConfig,
    /// Bin overrides keyed by biomarker name, e.g. `[bins.mmse_delta]`.
    pub bins: BTreeMap<String, BinsOverride>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 0,
            ingest: IngestConfig::default(),
            pairs: PairsConfig::default(),
            model: ScorerConfig::default(),
            grid: GridConfig::default(),
            marker: MarkerConfig::default(),
            associate: AssociateConfig::default(),
            bins: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub dialect: String,
    pub speakers: Vec<String>,
    pub metadata: Option<PathBuf>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            dialect: "chat".into(),
            speakers: vec!["PAR".into()],
            metadata: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsConfig {
    /// Train, validation and test fractions of subjects.
    pub split: [f64; 3],
}

impl Default for PairsConfig {
    fn default() -> Self {
        PairsConfig { split: [0.8, 0.1, 0.1] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Sampled configurations; 0 trains the model config as given.
    pub trials: usize,
    pub pool: ParamPool,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            trials: cohmark::models::grid::DEFAULT_TRIALS,
            pool: ParamPool::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MarkerConfig {
    pub delta_long: DeltaLongMode,
    pub std: StdConvention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssociateConfig {
    /// Diagnosis whose subjects are binned, or `all`.
    pub cohort: String,
}

impl Default for AssociateConfig {
    fn default() -> Self {
        AssociateConfig { cohort: "ad".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinsOverride {
    pub bins: Vec<Bin>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let config: Config = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for b in Biomarker::ALL {
            self.bin_spec(b)?;
        }
        for key in self.bins.keys() {
            key.parse::<Biomarker>()?;
        }
        Ok(())
    }

    /// The configured bins for `biomarker`, or the defaults.
    pub fn bin_spec(&self, biomarker: Biomarker) -> Result<BinSpec> {
        let found = self
            .bins
            .iter()
            .find(|(k, _)| k.parse::<Biomarker>().ok() == Some(biomarker));
        Ok(match found {
            Some((_, o)) => BinSpec::new(biomarker, o.bins.clone())?,
            None => default_bins(biomarker),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let c = Config::default();
        let text = toml::to_string(&c).unwrap();
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sections_and_bin_override() {
        let text = r#"
seed = 9
[model]
family = "classifier"
margin = 3.0
[grid]
trials = 2
[grid.pool]
learning_rates = [0.0001]
[bins.cdr_delta]
bins = [{ label = "Any", lo = 0.0, hi = 3.0 }]
"#;
        let c: Config = toml::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.grid.pool.learning_rates, vec![1e-4]);
        assert_eq!(c.grid.pool.batch_sizes.len(), 4);
        assert_eq!(c.bin_spec(Biomarker::CdrDelta).unwrap().labels(), vec!["Any"]);
        assert_eq!(c.bin_spec(Biomarker::MmseDelta).unwrap(), default_bins(Biomarker::MmseDelta));
    }

    #[test]
    fn unknown_keys_and_bad_bins_rejected() {
        assert!(toml::from_str::<Config>("[model]\nmargn = 3.0\n").is_err());
        let overlap: Config =
            toml::from_str("[bins.hdr_last]\nbins = [{ label = \"a\", lo = 0.0, hi = 5.0 }, { label = \"b\", lo = 4.0, hi = 9.0 }]\n")
                .unwrap();
        assert!(overlap.validate().is_err());
        let unknown: Config = toml::from_str("[bins.gait]\nbins = [{ label = \"a\", lo = 0.0, hi = 5.0 }]\n").unwrap();
        assert!(unknown.validate().is_err());
    }
}
