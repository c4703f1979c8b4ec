//! Random search over the hyperparameter grid, scored by validation loss.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::encoder::EncoderBackend;
use super::optim::OptimizerKind;
use super::train::train_run;
use super::{Family, ScorerConfig, BATCH_SIZES, LEARNING_RATES, MARGINS};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::seed;

pub const DEFAULT_TRIALS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParamPool {
    pub learning_rates: Vec<f64>,
    pub batch_sizes: Vec<usize>,
    pub optimizers: Vec<OptimizerKind>,
    /// Only searched for the discriminative family.
    pub margins: Vec<f64>,
}

impl Default for ParamPool {
    fn default() -> Self {
        ParamPool {
            learning_rates: LEARNING_RATES.to_vec(),
            batch_sizes: BATCH_SIZES.to_vec(),
            optimizers: vec![OptimizerKind::Adam, OptimizerKind::AdamW],
            margins: MARGINS.to_vec(),
        }
    }
}

impl ParamPool {
    /// Every combination, in a fixed order, applied on top of `base`.
    pub fn candidates(&self, base: &ScorerConfig) -> Vec<ScorerConfig> {
        let margins = if base.family == Family::Discriminative {
            self.margins.clone()
        } else {
            vec![base.margin]
        };
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rates {
            for &batch_size in &self.batch_sizes {
                for &optimizer in &self.optimizers {
                    for &margin in &margins {
                        out.push(ScorerConfig {
                            learning_rate,
                            batch_size,
                            optimizer,
                            margin,
                            ..base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub margin: f64,
    pub validation_loss: f64,
    pub epochs_run: usize,
}

/// Samples up to `trials` distinct configurations from the pool, trains one
/// run of each from the same initialization seed, and returns the one with
/// the lowest validation loss (first sampled wins ties) with the full trial
/// log.
pub fn grid_search(
    base: &ScorerConfig,
    pool: &ParamPool,
    trials: usize,
    backend: &dyn EncoderBackend,
    train: &Corpus,
    validation: &Corpus,
    seed: u64,
) -> Result<(ScorerConfig, Vec<Trial>)> {
    let mut candidates = pool.candidates(base);
    if candidates.is_empty() || trials == 0 {
        return Err(Error::Empty("hyperparameter pool".into()));
    }
    candidates.shuffle(&mut seed::rng(seed::derive(seed, "grid")));
    candidates.truncate(trials);
    // A shared run seed keeps initialization noise out of the comparison.
    let run_seed = seed::derive(seed, "trial");
    let mut log = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, usize)> = None;
    for (i, cfg) in candidates.iter().enumerate() {
        let ckpt = train_run(cfg, backend, train, validation, run_seed)?;
        log::info!(
            "trial {i}: lr={} batch={} optimizer={} margin={} validation_loss={:.6}",
            cfg.learning_rate,
            cfg.batch_size,
            cfg.optimizer.as_str(),
            cfg.margin,
            ckpt.validation_loss
        );
        if best.is_none_or(|(l, _)| ckpt.validation_loss < l) {
            best = Some((ckpt.validation_loss, i));
        }
        log.push(Trial {
            trial: i,
            learning_rate: cfg.learning_rate,
            batch_size: cfg.batch_size,
            optimizer: cfg.optimizer,
            margin: cfg.margin,
            validation_loss: ckpt.validation_loss,
            epochs_run: ckpt.epochs_run(),
        });
    }
    let (_, i) = best.expect("at least one trial");
    Ok((candidates.swap_remove(i), log))
}

/// Tab-delimited trial log with a header row.
pub fn write_trials(trials: &[Trial], path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    for t in trials {
        w.serialize(t)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::super::encoder::HashEncoder;
    use super::*;
    use crate::synthetic::{generate, SyntheticSpec};

    fn base() -> ScorerConfig {
        ScorerConfig {
            family: Family::Discriminative,
            backend: "hash:dim=8,seed=1".into(),
            max_epochs: 3,
            runs: 1,
            ..ScorerConfig::default()
        }
    }

    #[test]
    fn pool_size() {
        assert_eq!(ParamPool::default().candidates(&base()).len(), 5 * 4 * 2 * 3);
        let cls = ScorerConfig {
            family: Family::Classifier,
            ..base()
        };
        assert_eq!(ParamPool::default().candidates(&cls).len(), 5 * 4 * 2);
    }

    #[test]
    fn single_config_pool() {
        let data = generate(&SyntheticSpec {
            narratives: 10,
            ..SyntheticSpec::default()
        });
        let pool = ParamPool {
            learning_rates: vec![1e-4],
            batch_sizes: vec![16],
            optimizers: vec![OptimizerKind::Adam],
            margins: vec![5.0],
        };
        let e = HashEncoder::new(8, 1);
        let (cfg, log) = grid_search(&base(), &pool, 20, &e, &data, &data, 1).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!((cfg.learning_rate, cfg.batch_size, cfg.margin), (1e-4, 16, 5.0));
    }

    #[test]
    fn empty_pool_is_error() {
        let data = generate(&SyntheticSpec {
            narratives: 4,
            ..SyntheticSpec::default()
        });
        let pool = ParamPool {
            learning_rates: vec![],
            ..ParamPool::default()
        };
        let e = HashEncoder::new(8, 1);
        assert!(matches!(
            grid_search(&base(), &pool, 20, &e, &data, &data, 1),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn deterministic_trial_sequence() {
        let data = generate(&SyntheticSpec {
            narratives: 8,
            ..SyntheticSpec::default()
        });
        let e = HashEncoder::new(8, 1);
        let cfg = ScorerConfig {
            max_epochs: 1,
            ..base()
        };
        let a = grid_search(&cfg, &ParamPool::default(), 4, &e, &data, &data, 5).unwrap();
        let b = grid_search(&cfg, &ParamPool::default(), 4, &e, &data, &data, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 4);
    }

    /// With few epochs only the largest learning rate moves the parameters
    /// far enough to cut the validation loss.
    #[test]
    fn planted_optimum_is_selected() {
        let data = generate(&SyntheticSpec {
            narratives: 30,
            ..SyntheticSpec::default()
        });
        let pool = ParamPool {
            learning_rates: vec![1e-5, 2e-4],
            batch_sizes: vec![16],
            optimizers: vec![OptimizerKind::Adam],
            margins: vec![5.0],
        };
        let e = HashEncoder::new(8, 1);
        let (cfg, log) = grid_search(&base(), &pool, 20, &e, &data, &data, 2).unwrap();
        assert_eq!(log.len(), 2);
        assert_eq!(cfg.learning_rate, 2e-4);
    }

    #[test]
    fn trial_log_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trials.tsv");
        let t = Trial {
            trial: 0,
            learning_rate: 1e-4,
            batch_size: 32,
            optimizer: OptimizerKind::AdamW,
            margin: 3.0,
            validation_loss: 1.25,
            epochs_run: 7,
        };
        write_trials(&[t], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "trial\tlearning_rate\tbatch_size\toptimizer\tmargin\tvalidation_loss\tepochs_run\n0\t0.0001\t32\tadamw\t3.0\t1.25\t7\n"
        );
    }
}
