//! Coherence scorers for utterance pairs and their training loop.
//!
//! Five families share the [`PairScorer`] interface: a sequence-pair
//! classifier with a feed-forward head, its convolutional variant, a
//! discriminative margin model over sentence vectors, a zero-shot (or
//! fine-tuned) generative perplexity scorer, and a cosine-similarity
//! baseline. Encoders and language models are pluggable by identifier.

pub mod cnn;
pub mod encoder;
pub mod features;
pub mod generative;
pub mod grid;
pub mod nn;
pub mod optim;
pub mod scorer;
pub mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cnn::{build_cnn_input, CnnInput};
pub use encoder::{encoder_from_id, EncoderBackend, HashEncoder, VectorTableEncoder};
pub use features::concat_features;
pub use generative::{
    finetune_generative, generative_from_id, generative_score, sequence_perplexity, GenerativeBackend,
    PerplexityOptions, UniformLm,
};
pub use grid::{grid_search, ParamPool, Trial};
pub use optim::OptimizerKind;
pub use scorer::{
    baseline_similarity_score, build_scorer, classifier_score, discriminative_score, margin_loss, score_pairs,
    PairScorer,
};
pub use train::{corpus_texts, evaluate_loss, train, train_generative, train_run, Checkpoint, EarlyStopping, EpochLog, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Classifier,
    Cnn,
    Discriminative,
    Generative,
    SimilarityBaseline,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Classifier,
        Family::Cnn,
        Family::Discriminative,
        Family::Generative,
        Family::SimilarityBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Classifier => "classifier",
            Family::Cnn => "cnn",
            Family::Discriminative => "discriminative",
            Family::Generative => "generative",
            Family::SimilarityBaseline => "similarity_baseline",
        }
    }

    /// Families whose parameters come from gradient training on pairs.
    pub fn is_trained(self) -> bool {
        matches!(self, Family::Classifier | Family::Cnn | Family::Discriminative)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Family::ALL
            .into_iter()
            .find(|f| f.as_str() == norm || (norm == "similarity" && *f == Family::SimilarityBaseline))
            .ok_or_else(|| Error::Config(format!("unknown scorer family {s:?}")))
    }
}

/// Which argument order the discriminative model scores at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
    Mean,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "mean" => Ok(Direction::Mean),
            other => Err(Error::Config(format!("unknown direction {other:?}"))),
        }
    }
}

pub const LEARNING_RATES: [f64; 5] = [1e-5, 2e-5, 5e-5, 1e-4, 2e-4];
pub const BATCH_SIZES: [usize; 4] = [16, 32, 64, 128];
pub const MARGINS: [f64; 3] = [3.0, 5.0, 7.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScorerConfig {
    pub family: Family,
    /// Encoder identifier for classifier, cnn, discriminative and similarity
    /// families; language-model identifier for the generative family.
    pub backend: String,
    /// Margin of the ranking loss (discriminative only).
    pub margin: f64,
    /// Hidden width of the feed-forward head; defaults to the encoder
    /// dimension.
    pub hidden: Option<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Decoupled weight decay, used by AdamW only.
    pub weight_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub runs: usize,
    /// Resampled negatives per positive for the classifier families; the
    /// discriminative family always matches one negative per positive.
    pub negatives_per_positive: usize,
    pub cnn_filters: usize,
    pub cnn_width: usize,
    pub direction: Direction,
    /// Generative family: fine-tune on coherent training pairs first.
    pub finetune: bool,
    pub finetune_epochs: usize,
    pub finetune_learning_rate: f64,
    /// Probability floor for perplexity; `None` makes zero-probability
    /// tokens an error.
    pub perplexity_floor: Option<f64>,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig {
            family: Family::Discriminative,
            backend: "hash:dim=32,seed=0".into(),
            margin: 5.0,
            hidden: None,
            learning_rate: 1e-4,
            batch_size: 16,
            optimizer: OptimizerKind::Adam,
            weight_decay: 0.01,
            max_epochs: 50,
            patience: 4,
            runs: 3,
            negatives_per_positive: 1,
            cnn_filters: 32,
            cnn_width: 2,
            direction: Direction::Forward,
            finetune: false,
            finetune_epochs: 3,
            finetune_learning_rate: 0.1,
            perplexity_floor: Some(generative::DEFAULT_FLOOR),
        }
    }
}

impl ScorerConfig {
    pub fn for_family(family: Family) -> Self {
        let backend = match family {
            Family::Generative => "neural-bigram".to_string(),
            _ => ScorerConfig::default().backend,
        };
        ScorerConfig {
            family,
            backend,
            ..ScorerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.margin > 0.0) {
            return bad(format!("margin must be positive, got {}", self.margin));
        }
        if self.max_epochs == 0 || self.runs == 0 {
            return bad("max_epochs and runs must be positive".into());
        }
        if self.hidden == Some(0) || self.cnn_filters == 0 || self.cnn_width == 0 {
            return bad("layer sizes must be positive".into());
        }
        if self.negatives_per_positive == 0 {
            return bad("negatives_per_positive must be positive".into());
        }
        if let Some(f) = self.perplexity_floor {
            if !(f > 0.0 && f < 1.0) {
                return bad(format!("perplexity_floor must lie in (0, 1), got {f}"));
            }
        }
        Ok(())
    }

    pub fn perplexity_options(&self) -> PerplexityOptions {
        PerplexityOptions {
            floor: self.perplexity_floor,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert_eq!("similarity".parse::<Family>().unwrap(), Family::SimilarityBaseline);
        assert!("lstm".parse::<Family>().is_err());
    }

    #[test]
    fn default_config_is_valid_and_in_pool() {
        let c = ScorerConfig::default();
        c.validate().unwrap();
        assert!(LEARNING_RATES.contains(&c.learning_rate));
        assert!(BATCH_SIZES.contains(&c.batch_size));
        assert!(MARGINS.contains(&c.margin));
        assert_eq!((c.max_epochs, c.patience, c.runs), (50, 4, 3));
    }

    #[test]
    fn config_rejects_nonsense() {
        for c in [
            ScorerConfig {
                learning_rate: 0.0,
                ..Default::default()
            },
            ScorerConfig {
                margin: -1.0,
                ..Default::default()
            },
            ScorerConfig {
                batch_size: 0,
                ..Default::default()
            },
            ScorerConfig {
                perplexity_floor: Some(0.0),
                ..Default::default()
            },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn config_json_round_trip() {
        let c = ScorerConfig::for_family(Family::Cnn);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ScorerConfig>(&s).unwrap(), c);
        let partial: ScorerConfig = serde_json::from_str(r#"{"family":"generative"}"#).unwrap();
        assert_eq!(partial.family, Family::Generative);
    }
}
