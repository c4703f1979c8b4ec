//! Training loop shared by the gradient-trained families: per-epoch
//! negative resampling, minibatch Adam/AdamW, early stopping on validation
//! loss, and best-epoch checkpoints.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cnn::{build_cnn_input, Cnn, CnnInput};
use super::encoder::{encoder_from_id, EncoderBackend};
use super::features::concat_features;
use super::generative::{build_vocab, finetune_generative, ConditionalTrainable, NeuralBigramLm};
use super::nn::{bce_with_logit, Mlp};
use super::optim::Optimizer;
use super::scorer::margin_loss;
use super::{Family, ScorerConfig};
use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::pairs::{enumerate_pairs, resample_negatives};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Classifier { head: Mlp, params: Vec<f64> },
    Cnn { cnn: Cnn, params: Vec<f64> },
    Discriminative { mlp: Mlp, params: Vec<f64> },
    Generative { lm: NeuralBigramLm },
}

/// The best epoch of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: ScorerConfig,
    pub model: ModelParams,
    /// Minimum validation loss over the run's epochs.
    pub validation_loss: f64,
    /// Epoch that reached it (1-based).
    pub epoch: usize,
    pub run_seed: u64,
    /// Validation loss of the initial parameters.
    pub initial_validation_loss: f64,
    /// Digest of the frozen encoder the parameters were fitted against.
    pub encoder_digest: String,
    pub log: Vec<EpochLog>,
}

impl Checkpoint {
    pub fn epochs_run(&self) -> usize {
        self.log.len()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub improved: bool,
    pub stop: bool,
}

/// Stops once `patience` consecutive epochs fail to improve on the best
/// validation loss (strictly lower counts as improvement).
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Observation {
        let improved = loss < self.best;
        if improved {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Observation {
            improved,
            stop: self.stale >= self.patience,
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

enum Example {
    Vector { x: Vec<f64>, y: f64 },
    Matrix { x: CnnInput, y: f64 },
    /// Forward and backward feature vectors of a positive and its
    /// anchor-sharing negative.
    Ranked { pos: [Vec<f64>; 2], neg: [Vec<f64>; 2] },
}

#[derive(Clone, Copy)]
enum Arch {
    Classifier(Mlp),
    Cnn(Cnn),
    Discriminative(Mlp, f64),
}

impl Arch {
    fn from_config(config: &ScorerConfig, backend: &dyn EncoderBackend) -> Result<Arch> {
        let hidden = config.hidden.unwrap_or(backend.dim());
        match config.family {
            Family::Classifier => Ok(Arch::Classifier(Mlp::new(backend.pair_dim(), hidden))),
            Family::Cnn => Ok(Arch::Cnn(Cnn::new(backend.dim(), config.cnn_filters, config.cnn_width, hidden))),
            Family::Discriminative => Ok(Arch::Discriminative(Mlp::new(5 * backend.dim(), hidden), config.margin)),
            f => Err(Error::Config(format!("family {f} is not trained by gradient descent"))),
        }
    }

    fn n_params(&self) -> usize {
        match self {
            Arch::Classifier(m) | Arch::Discriminative(m, _) => m.n_params(),
            Arch::Cnn(c) => c.n_params(),
        }
    }

    fn init(&self, s: u64) -> Vec<f64> {
        match self {
            Arch::Classifier(m) | Arch::Discriminative(m, _) => m.init(s),
            Arch::Cnn(c) => c.init(s),
        }
    }

    fn into_params(self, params: Vec<f64>) -> ModelParams {
        match self {
            Arch::Classifier(head) => ModelParams::Classifier { head, params },
            Arch::Cnn(cnn) => ModelParams::Cnn { cnn, params },
            Arch::Discriminative(mlp, _) => ModelParams::Discriminative { mlp, params },
        }
    }

    /// Loss of one example; accumulates its gradient when `grad` is given.
    fn loss(&self, params: &[f64], ex: &Example, grad: Option<&mut [f64]>) -> f64 {
        match (self, ex) {
            (Arch::Classifier(m), Example::Vector { x, y }) => {
                let (z, cache) = m.forward(params, x);
                let (loss, dz) = bce_with_logit(z, *y);
                if let Some(g) = grad {
                    m.backward(params, x, &cache, dz, g, None);
                }
                loss
            }
            (Arch::Cnn(c), Example::Matrix { x, y }) => {
                let (z, cache) = c.forward(params, x);
                let (loss, dz) = bce_with_logit(z, *y);
                if let Some(g) = grad {
                    c.backward(params, x, &cache, dz, g);
                }
                loss
            }
            (Arch::Discriminative(m, n), Example::Ranked { pos, neg }) => {
                let mut total = 0.0;
                let mut grad = grad;
                for d in 0..2 {
                    let (fp, cp) = m.forward(params, &pos[d]);
                    let (fnn, cn) = m.forward(params, &neg[d]);
                    let l = margin_loss(fp, fnn, *n);
                    total += l;
                    if l > 0.0 {
                        if let Some(g) = grad.as_deref_mut() {
                            m.backward(params, &pos[d], &cp, -1.0, g, None);
                            m.backward(params, &neg[d], &cn, 1.0, g, None);
                        }
                    }
                }
                total
            }
            _ => unreachable!("example kind always matches the architecture"),
        }
    }
}

/// Training examples of one epoch; negatives are drawn with `negative_seed`.
fn build_examples(
    arch: &Arch,
    config: &ScorerConfig,
    backend: &dyn EncoderBackend,
    corpus: &Corpus,
    negative_seed: u64,
) -> Result<Vec<Example>> {
    let per_narrative: Vec<Result<Vec<Example>>> = corpus
        .narratives()
        .par_iter()
        .filter(|n| n.len() >= 2)
        .map(|n| -> Result<Vec<Example>> {
            let mut out = Vec::new();
            match arch {
                Arch::Classifier(_) | Arch::Cnn(_) => {
                    let pos = enumerate_pairs(n)?.coherent;
                    let neg = resample_negatives(n, config.negatives_per_positive, negative_seed);
                    for (p, y) in pos.iter().map(|p| (p, 1.0)).chain(neg.iter().map(|p| (p, 0.0))) {
                        let (a, b) = p.texts(n);
                        out.push(match arch {
                            Arch::Cnn(_) => Example::Matrix {
                                x: build_cnn_input(a, b, backend)?,
                                y,
                            },
                            _ => Example::Vector {
                                x: backend.pair_representation(a, b),
                                y,
                            },
                        });
                    }
                }
                Arch::Discriminative(..) => {
                    let u: Vec<Vec<f64>> = n.utterances.iter().map(|t| backend.sentence_vector(&t.words)).collect();
                    for neg in resample_negatives(n, 1, negative_seed) {
                        let (i, j) = (neg.anchor_index, neg.partner_index);
                        out.push(Example::Ranked {
                            pos: [concat_features(&u[i], &u[i + 1])?, concat_features(&u[i + 1], &u[i])?],
                            neg: [concat_features(&u[i], &u[j])?, concat_features(&u[j], &u[i])?],
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_narrative {
        out.extend(r?);
    }
    Ok(out)
}

fn mean_loss(arch: &Arch, params: &[f64], examples: &[Example]) -> f64 {
    let losses: Vec<f64> = examples.par_iter().map(|e| arch.loss(params, e, None)).collect();
    losses.iter().sum::<f64>() / examples.len() as f64
}

/// One seeded training run on a frozen encoder. Returns the checkpoint of
/// the epoch with the lowest validation loss.
pub fn train_run(
    config: &ScorerConfig,
    backend: &dyn EncoderBackend,
    train: &Corpus,
    validation: &Corpus,
    run_seed: u64,
) -> Result<Checkpoint> {
    config.validate()?;
    let arch = Arch::from_config(config, backend)?;
    let mut params = arch.init(seed::derive(run_seed, "init"));
    let mut opt = Optimizer::new(config.optimizer, config.learning_rate, config.weight_decay, arch.n_params());
    let val = build_examples(&arch, config, backend, validation, seed::derive(run_seed, "validation"))?;
    if val.is_empty() {
        return Err(Error::Empty("validation pairs".into()));
    }
    let initial = mean_loss(&arch, &params, &val);
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut log = Vec::new();
    let mut grad = vec![0.0; arch.n_params()];
    for epoch in 1..=config.max_epochs {
        let tag = format!("epoch-{epoch}");
        let examples = build_examples(&arch, config, backend, train, seed::derive(run_seed, &tag))?;
        if examples.is_empty() {
            return Err(Error::Empty("training pairs".into()));
        }
        let mut order: Vec<usize> = (0..examples.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive(run_seed, &format!("order-{epoch}"))));
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                total += arch.loss(&params, &examples[i], Some(&mut grad));
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(&mut params, &grad);
        }
        let train_loss = total / examples.len() as f64;
        let validation_loss = mean_loss(&arch, &params, &val);
        if !train_loss.is_finite() || !validation_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!(
                    "family={} train_loss={train_loss} validation_loss={validation_loss} learning_rate={} run_seed={run_seed}",
                    config.family, config.learning_rate
                ),
            });
        }
        log::debug!("run {run_seed:#x} epoch {epoch}: train {train_loss:.6} validation {validation_loss:.6}");
        log.push(EpochLog {
            epoch,
            train_loss,
            validation_loss,
        });
        let obs = stopper.observe(epoch, validation_loss);
        if obs.improved {
            best.clone_from(&params);
        }
        if obs.stop {
            break;
        }
    }
    Ok(Checkpoint {
        config: config.clone(),
        model: arch.into_params(best),
        validation_loss: stopper.best(),
        epoch: stopper.best_epoch(),
        run_seed,
        initial_validation_loss: initial,
        encoder_digest: backend.parameters_digest(),
        log,
    })
}

/// Mean training objective of a checkpoint on `corpus`, with negatives
/// drawn from `seed`. Language-model checkpoints report the mean
/// conditional loss of the coherent pairs.
pub fn evaluate_loss(checkpoint: &Checkpoint, corpus: &Corpus, seed: u64) -> Result<f64> {
    if let ModelParams::Generative { lm } = &checkpoint.model {
        let mut lm = lm.clone();
        lm.reindex();
        let pairs = coherent_texts(corpus);
        if pairs.is_empty() {
            return Err(Error::Empty("coherent pairs".into()));
        }
        return Ok(pairs.iter().map(|(s, t)| lm.conditional_loss(s, t)).sum::<f64>() / pairs.len() as f64);
    }
    let backend = encoder_from_id(&checkpoint.config.backend)?;
    if backend.parameters_digest() != checkpoint.encoder_digest {
        return Err(Error::Config(format!(
            "encoder {} differs from the one the checkpoint was trained with",
            checkpoint.config.backend
        )));
    }
    let backend = backend.as_ref();
    let arch = Arch::from_config(&checkpoint.config, backend)?;
    let params = match &checkpoint.model {
        ModelParams::Classifier { params, .. } | ModelParams::Cnn { params, .. } | ModelParams::Discriminative { params, .. } => {
            params
        }
        ModelParams::Generative { .. } => unreachable!("handled above"),
    };
    if params.len() != arch.n_params() {
        return Err(Error::DimensionMismatch {
            expected: arch.n_params(),
            actual: params.len(),
        });
    }
    let examples = build_examples(&arch, &checkpoint.config, backend, corpus, seed)?;
    if examples.is_empty() {
        return Err(Error::Empty("evaluation pairs".into()));
    }
    Ok(mean_loss(&arch, params, &examples))
}

/// `config.runs` independent runs with seeds derived from `seed`.
pub fn train(
    config: &ScorerConfig,
    backend: &dyn EncoderBackend,
    train: &Corpus,
    validation: &Corpus,
    seed: u64,
) -> Result<Vec<Checkpoint>> {
    (0..config.runs)
        .into_par_iter()
        .map(|r| train_run(config, backend, train, validation, run_seed(seed, r)))
        .collect()
}

pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed::derive(seed, &format!("run-{run}"))
}

/// Word lists of every utterance, the training text for data-driven
/// language models.
pub fn corpus_texts(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .narratives()
        .iter()
        .flat_map(|n| n.utterances.iter().map(|u| u.words.clone()))
        .collect()
}

fn coherent_texts(corpus: &Corpus) -> Vec<(Vec<String>, Vec<String>)> {
    corpus
        .narratives()
        .iter()
        .flat_map(|n| n.utterances.windows(2).map(|w| (w[0].words.clone(), w[1].words.clone())))
        .collect()
}

/// Fine-tunes a trainable language model on the coherent training pairs,
/// conditioning each second utterance on the first.
pub fn train_generative(config: &ScorerConfig, train: &Corpus, validation: &Corpus) -> Result<Checkpoint> {
    config.validate()?;
    let (kind, rest) = config.backend.split_once(':').unwrap_or((config.backend.as_str(), ""));
    if kind != "neural-bigram" {
        return Err(Error::Capability(config.backend.clone()));
    }
    let max_vocab = match rest.strip_prefix("vocab=") {
        Some(v) => v
            .parse()
            .map_err(|_| Error::Config(format!("bad vocabulary size in {:?}", config.backend)))?,
        None => 2000,
    };
    let texts = corpus_texts(train);
    let mut lm = NeuralBigramLm::new(build_vocab(texts.iter().map(|t| t.as_slice()), max_vocab));
    let pairs = coherent_texts(train);
    let val_pairs = coherent_texts(validation);
    if pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::Empty("coherent pairs for fine-tuning".into()));
    }
    let val_loss =
        |lm: &NeuralBigramLm| val_pairs.iter().map(|(s, t)| lm.conditional_loss(s, t)).sum::<f64>() / val_pairs.len() as f64;
    let initial = val_loss(&lm);
    let mut log = Vec::new();
    for epoch in 1..=config.finetune_epochs {
        let train_loss = finetune_generative(&mut lm, &pairs, 1, config.finetune_learning_rate)?[0];
        log.push(EpochLog {
            epoch,
            train_loss,
            validation_loss: val_loss(&lm),
        });
    }
    Ok(Checkpoint {
        config: config.clone(),
        validation_loss: log.last().map_or(initial, |l| l.validation_loss),
        epoch: config.finetune_epochs,
        run_seed: 0,
        initial_validation_loss: initial,
        encoder_digest: String::new(),
        model: ModelParams::Generative { lm },
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::super::encoder::HashEncoder;
    use super::super::nn::testing::gradient_check;
    use super::super::OptimizerKind;
    use super::*;
    use crate::ingest::{Diagnosis, Narrative, SessionMeta, Utterance};

    /// Narratives whose utterance `i` mentions entities `e_i` and `e_{i+1}`,
    /// so adjacent utterances share a word and distant ones do not.
    fn chained(subjects: usize, len: usize) -> Corpus {
        let mut ns = Vec::new();
        for s in 0..subjects {
            let utterances = (0..len)
                .map(|i| {
                    let words = vec![format!("e{s}x{i}"), "and".to_string(), format!("e{s}x{}", i + 1)];
                    Utterance {
                        index: i,
                        speaker: "PAR".into(),
                        raw: words.join(" "),
                        words,
                        disruptive: false,
                    }
                })
                .collect();
            ns.push(Narrative {
                meta: SessionMeta {
                    subject_id: format!("s{s:03}"),
                    visit_index: 1,
                    diagnosis: Diagnosis::Healthy,
                    mmse: None,
                    cdr: None,
                    hdr: None,
                },
                utterances,
                source: None,
            });
        }
        Corpus::new(ns).unwrap()
    }

    fn quick(family: Family) -> ScorerConfig {
        ScorerConfig {
            family,
            backend: "hash:dim=8,seed=1".into(),
            learning_rate: 2e-4,
            max_epochs: 6,
            runs: 1,
            cnn_filters: 4,
            ..ScorerConfig::default()
        }
    }

    #[test]
    fn patience_stops_at_epoch_five() {
        let mut es = EarlyStopping::new(4);
        let mut stopped = None;
        for (epoch, loss) in [(1, 1.0), (2, 1.0), (3, 1.2), (4, 1.0), (5, 1.1), (6, 0.5)] {
            if es.observe(epoch, loss).stop {
                stopped = Some(epoch);
                break;
            }
        }
        assert_eq!(stopped, Some(5));
        assert_eq!(es.best_epoch(), 1);
    }

    #[test]
    fn improvement_resets_patience() {
        let mut es = EarlyStopping::new(2);
        assert!(es.observe(1, 3.0).improved);
        assert!(!es.observe(2, 3.0).stop);
        assert!(es.observe(3, 2.0).improved);
        assert!(!es.observe(4, 2.5).stop);
        assert!(es.observe(5, 2.5).stop);
        assert_eq!((es.best(), es.best_epoch()), (2.0, 3));
    }

    #[test]
    fn checkpoint_is_minimum_of_its_log() {
        let data = chained(12, 6);
        let e = HashEncoder::new(8, 1);
        for family in [Family::Classifier, Family::Cnn, Family::Discriminative] {
            let c = train_run(&quick(family), &e, &data, &data, 3).unwrap();
            let min = c.log.iter().map(|l| l.validation_loss).fold(f64::INFINITY, f64::min);
            assert_eq!(c.validation_loss, min, "{family}");
            assert_eq!(c.log[c.epoch - 1].validation_loss, min);
            assert!(c.epochs_run() <= 6);
        }
    }

    #[test]
    fn training_is_deterministic_and_runs_differ() {
        let data = chained(8, 5);
        let e = HashEncoder::new(8, 1);
        let cfg = ScorerConfig {
            runs: 2,
            ..quick(Family::Discriminative)
        };
        let a = train(&cfg, &e, &data, &data, 9).unwrap();
        let b = train(&cfg, &e, &data, &data, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.len(), 2);
        assert_ne!(a[0].run_seed, a[1].run_seed);
    }

    #[test]
    fn encoder_is_untouched() {
        let data = chained(6, 5);
        let e = HashEncoder::new(8, 1);
        let before = e.parameters_digest();
        let probe = e.word_vector("e0x1");
        train_run(&quick(Family::Discriminative), &e, &data, &data, 1).unwrap();
        assert_eq!(e.parameters_digest(), before);
        assert_eq!(e.word_vector("e0x1"), probe);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let data = chained(6, 5);
        let e = HashEncoder::new(8, 1);
        let cfg = ScorerConfig {
            learning_rate: 1e308,
            optimizer: OptimizerKind::AdamW,
            weight_decay: 10.0,
            ..quick(Family::Classifier)
        };
        assert!(matches!(
            train_run(&cfg, &e, &data, &data, 1),
            Err(Error::NonFiniteLoss { epoch: 1, .. })
        ));
    }

    #[test]
    fn untrainable_family_and_empty_data() {
        let data = chained(4, 4);
        let e = HashEncoder::new(8, 1);
        assert!(matches!(
            train_run(&quick(Family::SimilarityBaseline), &e, &data, &data, 1),
            Err(Error::Config(_))
        ));
        // Two-utterance narratives have no non-adjacent pairs to rank against.
        let short = chained(4, 2);
        assert!(matches!(
            train_run(&quick(Family::Discriminative), &e, &data, &short, 1),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn classifier_objective_gradient() {
        let data = chained(2, 4);
        let e = HashEncoder::new(4, 2);
        let cfg = quick(Family::Classifier);
        let arch = Arch::from_config(&cfg, &e).unwrap();
        let exs = build_examples(&arch, &cfg, &e, &data, 4).unwrap();
        for (s, ex) in exs.iter().take(10).enumerate() {
            let p = arch.init(s as u64);
            let mut g = vec![0.0; arch.n_params()];
            arch.loss(&p, ex, Some(&mut g));
            assert!(gradient_check(&p, &g, |q| arch.loss(q, ex, None)) < 1e-4);
        }
    }

    #[test]
    fn finetuning_lowers_validation_loss() {
        let data = chained(6, 5);
        let cfg = ScorerConfig {
            finetune: true,
            finetune_epochs: 5,
            ..ScorerConfig::for_family(Family::Generative)
        };
        let c = train_generative(&cfg, &data, &data).unwrap();
        assert!(c.validation_loss < c.initial_validation_loss);
        let uniform = ScorerConfig {
            backend: "uniform:10".into(),
            ..cfg
        };
        assert!(matches!(train_generative(&uniform, &data, &data), Err(Error::Capability(_))));
    }

    #[test]
    fn evaluate_loss_matches_validation_loss() {
        let data = chained(6, 6);
        let cfg = quick(Family::Discriminative);
        let e = encoder_from_id(&cfg.backend).unwrap();
        let c = train_run(&cfg, e.as_ref(), &data, &data, 9).unwrap();
        let l = evaluate_loss(&c, &data, seed::derive(9, "validation")).unwrap();
        assert!((l - c.validation_loss).abs() < 1e-12);
    }

    #[test]
    fn checkpoint_file_round_trip() {
        let data = chained(6, 5);
        let e = HashEncoder::new(8, 1);
        let c = train_run(&quick(Family::Classifier), &e, &data, &data, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        c.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), serde_json::to_string(&c).unwrap());
    }
}
