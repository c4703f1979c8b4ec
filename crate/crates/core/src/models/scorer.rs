use std::sync::Arc;

use rayon::prelude::*;

use super::cnn::{build_cnn_input, Cnn};
use super::encoder::{encoder_from_id, EncoderBackend};
use super::features::concat_features;
use super::generative::{generative_from_id, generative_score, GenerativeBackend, PerplexityOptions};
use super::nn::{dot, norm, sigmoid, Mlp};
use super::train::{Checkpoint, ModelParams};
use super::{Direction, Family, ScorerConfig};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::pairs::UtterancePair;

/// Scores an ordered utterance pair; higher means more coherent.
pub trait PairScorer: Send + Sync {
    fn id(&self) -> String;

    fn family(&self) -> Family;

    fn score(&self, first: &[String], second: &[String]) -> Result<f64>;

    /// Whether `score` may run concurrently from several threads.
    fn concurrent(&self) -> bool {
        true
    }
}

/// `max(0, n - f_pos + f_neg)`.
pub fn margin_loss(f_pos: f64, f_neg: f64, n: f64) -> f64 {
    (n - f_pos + f_neg).max(0.0)
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `sigmoid(head(pair_representation))`, strictly inside (0, 1) for finite
/// logits.
pub fn classifier_score(
    first: &[String],
    second: &[String],
    backend: &dyn EncoderBackend,
    head: &Mlp,
    params: &[f64],
) -> Result<f64> {
    check_dim(head.input, backend.pair_dim())?;
    check_dim(head.n_params(), params.len())?;
    Ok(sigmoid(head.output(params, &backend.pair_representation(first, second))))
}

/// Unbounded score of the MLP over `concat_features` of the two sentence
/// vectors, in the requested argument order.
pub fn discriminative_score(
    first: &[String],
    second: &[String],
    backend: &dyn EncoderBackend,
    mlp: &Mlp,
    params: &[f64],
    direction: Direction,
) -> Result<f64> {
    check_dim(mlp.input, 5 * backend.dim())?;
    check_dim(mlp.n_params(), params.len())?;
    let u1 = backend.sentence_vector(first);
    let u2 = backend.sentence_vector(second);
    let fwd = || -> Result<f64> { Ok(mlp.output(params, &concat_features(&u1, &u2)?)) };
    let bwd = || -> Result<f64> { Ok(mlp.output(params, &concat_features(&u2, &u1)?)) };
    match direction {
        Direction::Forward => fwd(),
        Direction::Backward => bwd(),
        Direction::Mean => Ok(0.5 * (fwd()? + bwd()?)),
    }
}

/// Cosine similarity of the two sentence vectors.
pub fn baseline_similarity_score(first: &[String], second: &[String], backend: &dyn EncoderBackend) -> Result<f64> {
    let a = backend.sentence_vector(first);
    let b = backend.sentence_vector(second);
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 {
        return Err(Error::ZeroNorm(first.join(" ")));
    }
    if nb == 0.0 {
        return Err(Error::ZeroNorm(second.join(" ")));
    }
    Ok((dot(&a, &b) / (na * nb)).clamp(-1.0, 1.0))
}

struct ClassifierScorer {
    backend: Arc<dyn EncoderBackend>,
    head: Mlp,
    params: Vec<f64>,
}

impl PairScorer for ClassifierScorer {
    fn id(&self) -> String {
        format!("classifier[{}]", self.backend.name())
    }

    fn family(&self) -> Family {
        Family::Classifier
    }

    fn score(&self, first: &[String], second: &[String]) -> Result<f64> {
        classifier_score(first, second, self.backend.as_ref(), &self.head, &self.params)
    }

    fn concurrent(&self) -> bool {
        self.backend.supports_concurrent_inference()
    }
}

struct CnnScorer {
    backend: Arc<dyn EncoderBackend>,
    cnn: Cnn,
    params: Vec<f64>,
}

impl PairScorer for CnnScorer {
    fn id(&self) -> String {
        format!("cnn[{}]", self.backend.name())
    }

    fn family(&self) -> Family {
        Family::Cnn
    }

    fn score(&self, first: &[String], second: &[String]) -> Result<f64> {
        check_dim(self.cnn.dim, self.backend.dim())?;
        let x = build_cnn_input(first, second, self.backend.as_ref())?;
        Ok(sigmoid(self.cnn.logit(&self.params, &x)))
    }

    fn concurrent(&self) -> bool {
        self.backend.supports_concurrent_inference()
    }
}

struct DiscriminativeScorer {
    backend: Arc<dyn EncoderBackend>,
    mlp: Mlp,
    params: Vec<f64>,
    direction: Direction,
}

impl PairScorer for DiscriminativeScorer {
    fn id(&self) -> String {
        format!("discriminative[{}]", self.backend.name())
    }

    fn family(&self) -> Family {
        Family::Discriminative
    }

    fn score(&self, first: &[String], second: &[String]) -> Result<f64> {
        discriminative_score(first, second, self.backend.as_ref(), &self.mlp, &self.params, self.direction)
    }

    fn concurrent(&self) -> bool {
        self.backend.supports_concurrent_inference()
    }
}

struct GenerativeScorer {
    backend: Box<dyn GenerativeBackend>,
    opts: PerplexityOptions,
}

impl PairScorer for GenerativeScorer {
    fn id(&self) -> String {
        format!("generative[{}]", self.backend.name())
    }

    fn family(&self) -> Family {
        Family::Generative
    }

    fn score(&self, first: &[String], second: &[String]) -> Result<f64> {
        generative_score(first, second, self.backend.as_ref(), self.opts)
    }

    fn concurrent(&self) -> bool {
        self.backend.supports_concurrent_inference()
    }
}

struct SimilarityScorer {
    backend: Arc<dyn EncoderBackend>,
}

impl PairScorer for SimilarityScorer {
    fn id(&self) -> String {
        format!("similarity_baseline[{}]", self.backend.name())
    }

    fn family(&self) -> Family {
        Family::SimilarityBaseline
    }

    fn score(&self, first: &[String], second: &[String]) -> Result<f64> {
        baseline_similarity_score(first, second, self.backend.as_ref())
    }

    fn concurrent(&self) -> bool {
        self.backend.supports_concurrent_inference()
    }
}

/// Wraps a generative backend (for example a fine-tuned one) as a scorer.
pub fn generative_scorer(backend: Box<dyn GenerativeBackend>, opts: PerplexityOptions) -> Box<dyn PairScorer> {
    Box::new(GenerativeScorer { backend, opts })
}

/// Builds the scorer for `config`. Trained families need a checkpoint, whose
/// own config then takes precedence; data-driven language models take their
/// vocabulary from `training_texts`.
pub fn build_scorer(
    config: &ScorerConfig,
    checkpoint: Option<&Checkpoint>,
    training_texts: &[Vec<String>],
) -> Result<Box<dyn PairScorer>> {
    let config = checkpoint.map(|c| &c.config).unwrap_or(config);
    let encoder = || -> Result<Arc<dyn EncoderBackend>> {
        let e = encoder_from_id(&config.backend)?;
        if let Some(c) = checkpoint {
            if c.encoder_digest != e.parameters_digest() {
                return Err(Error::Config(format!(
                    "encoder {} differs from the one the checkpoint was trained with",
                    config.backend
                )));
            }
        }
        Ok(e)
    };
    match config.family {
        Family::SimilarityBaseline => Ok(Box::new(SimilarityScorer { backend: encoder()? })),
        Family::Generative => {
            let backend: Box<dyn GenerativeBackend> = match checkpoint.map(|c| &c.model) {
                Some(ModelParams::Generative { lm }) => {
                    let mut lm = lm.clone();
                    lm.reindex();
                    Box::new(lm)
                }
                Some(_) => return Err(Error::Config("checkpoint does not hold a language model".into())),
                None => generative_from_id(&config.backend, training_texts)?,
            };
            Ok(generative_scorer(backend, config.perplexity_options()))
        }
        family => {
            let ckpt = checkpoint.ok_or(Error::Untrained)?;
            let backend = encoder()?;
            match (&ckpt.model, family) {
                (ModelParams::Classifier { head, params }, Family::Classifier) => Ok(Box::new(ClassifierScorer {
                    backend,
                    head: *head,
                    params: params.clone(),
                })),
                (ModelParams::Cnn { cnn, params }, Family::Cnn) => Ok(Box::new(CnnScorer {
                    backend,
                    cnn: *cnn,
                    params: params.clone(),
                })),
                (ModelParams::Discriminative { mlp, params }, Family::Discriminative) => {
                    Ok(Box::new(DiscriminativeScorer {
                        backend,
                        mlp: *mlp,
                        params: params.clone(),
                        direction: config.direction,
                    }))
                }
                _ => Err(Error::Config(format!("checkpoint parameters do not match family {family}"))),
            }
        }
    }
}

/// Scores `pairs` against `corpus`, in parallel when the scorer allows it.
/// Output is aligned with `pairs`; a failure names its narrative.
pub fn score_pairs(scorer: &dyn PairScorer, corpus: &Corpus, pairs: &[UtterancePair]) -> Result<Vec<f64>> {
    let one = |p: &UtterancePair| -> Result<f64> {
        let wrap = |e: Error| Error::Scoring {
            narrative: p.narrative_ref.clone(),
            source: Box::new(e),
        };
        let n = corpus
            .get(&p.narrative_ref)
            .ok_or_else(|| wrap(Error::InvalidArgument("narrative not in corpus".into())))?;
        if p.partner_index >= n.len() {
            return Err(wrap(Error::InvalidArgument(format!(
                "utterance index {} out of range",
                p.partner_index
            ))));
        }
        let (a, b) = p.texts(n);
        scorer.score(a, b).map_err(wrap)
    };
    if scorer.concurrent() {
        pairs.par_iter().map(one).collect()
    } else {
        pairs.iter().map(one).collect()
    }
}
