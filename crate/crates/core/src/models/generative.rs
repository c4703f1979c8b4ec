//! Language-model scorers: a pair `(u1, u2)` is serialized as
//! `u1 <sep> u2`, scored token by token, and turned into a coherence score
//! `f = 1 - PPL`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SEP: &str = "<sep>";
pub const UNK: &str = "<unk>";

/// Default probability floor applied to zero-probability tokens.
pub const DEFAULT_FLOOR: f64 = 1e-12;

pub fn pair_sequence(first: &[String], second: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(first.len() + second.len() + 1);
    out.extend_from_slice(first);
    out.push(SEP.to_string());
    out.extend_from_slice(second);
    out
}

pub trait GenerativeBackend: Send + Sync {
    fn name(&self) -> String;

    /// `log p(w_i | w_<i)` for every token, conditioning the first token on
    /// the start of sequence. Entries are `<= 0`; `-inf` marks a token the
    /// model cannot produce.
    fn token_loglik(&self, tokens: &[String]) -> Vec<f64>;

    fn supports_concurrent_inference(&self) -> bool {
        true
    }

    /// Conditional (source -> target) training access, if supported.
    fn trainable(&mut self) -> Option<&mut dyn ConditionalTrainable> {
        None
    }
}

pub trait ConditionalTrainable {
    /// Mean negative log-likelihood of `target` given `source`, counting the
    /// target tokens only.
    fn conditional_loss(&self, source: &[String], target: &[String]) -> f64;

    /// One gradient step on `conditional_loss`; returns the loss before the
    /// step.
    fn train_step(&mut self, source: &[String], target: &[String], lr: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerplexityOptions {
    /// Probability substituted for tokens below it; `None` makes a
    /// zero-probability token an error.
    pub floor: Option<f64>,
}

impl Default for PerplexityOptions {
    fn default() -> Self {
        PerplexityOptions {
            floor: Some(DEFAULT_FLOOR),
        }
    }
}

/// `exp(-(1/t) * sum log p(w_i | w_<i))`.
pub fn sequence_perplexity(
    tokens: &[String],
    backend: &dyn GenerativeBackend,
    opts: PerplexityOptions,
) -> Result<f64> {
    if tokens.is_empty() {
        return Err(Error::Empty("token sequence".into()));
    }
    let ll = backend.token_loglik(tokens);
    debug_assert_eq!(ll.len(), tokens.len());
    let mut sum = 0.0;
    for (i, &lp) in ll.iter().enumerate() {
        let lp = match opts.floor {
            Some(f) => lp.max(f.ln()),
            None if lp == f64::NEG_INFINITY => return Err(Error::ZeroProbability(i)),
            None => lp,
        };
        sum += lp;
    }
    Ok((-sum / ll.len() as f64).exp())
}

pub fn pair_perplexity(
    first: &[String],
    second: &[String],
    backend: &dyn GenerativeBackend,
    opts: PerplexityOptions,
) -> Result<f64> {
    sequence_perplexity(&pair_sequence(first, second), backend, opts)
}

/// `f = 1 - PPL`; never positive for a normalized backend.
pub fn generative_score(
    first: &[String],
    second: &[String],
    backend: &dyn GenerativeBackend,
    opts: PerplexityOptions,
) -> Result<f64> {
    Ok(1.0 - pair_perplexity(first, second, backend, opts)?)
}

/// Fine-tunes on coherent `(source, target)` pairs for `epochs` passes of
/// per-pair SGD. Returns the mean pre-step loss of each epoch.
pub fn finetune_generative(
    backend: &mut dyn GenerativeBackend,
    pairs: &[(Vec<String>, Vec<String>)],
    epochs: usize,
    lr: f64,
) -> Result<Vec<f64>> {
    let name = backend.name();
    let model = backend.trainable().ok_or(Error::Capability(name))?;
    let mut losses = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let mut total = 0.0;
        for (s, t) in pairs {
            total += model.train_step(s, t, lr);
        }
        let mean = total / pairs.len().max(1) as f64;
        if !mean.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!("generative fine-tuning loss {mean}"),
            });
        }
        losses.push(mean);
    }
    Ok(losses)
}

/// Every token has probability `1 / vocab_size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformLm {
    pub vocab_size: usize,
}

impl GenerativeBackend for UniformLm {
    fn name(&self) -> String {
        format!("uniform:{}", self.vocab_size)
    }

    fn token_loglik(&self, tokens: &[String]) -> Vec<f64> {
        vec![-(self.vocab_size as f64).ln(); tokens.len()]
    }
}

/// Builds a vocabulary from texts: the `max_size` most frequent words (ties
/// alphabetical) plus `<sep>` and `<unk>`.
pub fn build_vocab<'a>(texts: impl IntoIterator<Item = &'a [String]>, max_size: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for t in texts {
        for w in t {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    let mut words: Vec<(&str, usize)> = counts.into_iter().filter(|(w, _)| *w != SEP && *w != UNK).collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    words.truncate(max_size);
    let mut vocab: Vec<String> = words.into_iter().map(|(w, _)| w.to_string()).collect();
    vocab.sort();
    vocab.push(SEP.to_string());
    vocab.push(UNK.to_string());
    vocab
}

fn index_of(index: &HashMap<String, usize>, w: &str) -> usize {
    index.get(w).copied().unwrap_or_else(|| index[UNK])
}

/// Count-based bigram model with add-`k` smoothing over a closed vocabulary.
/// The start-of-sequence context has its own row.
#[derive(Debug, Clone)]
pub struct BigramLm {
    k: f64,
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    /// `(context, word) -> count`; context `vocab.len()` is start-of-sequence.
    pairs: HashMap<(usize, usize), f64>,
    contexts: HashMap<usize, f64>,
}

impl BigramLm {
    /// Counts bigrams over `sequences`, each preceded by start-of-sequence.
    pub fn fit(sequences: &[Vec<String>], k: f64, max_vocab: usize) -> Self {
        let vocab = build_vocab(sequences.iter().map(|s| s.as_slice()), max_vocab);
        let index: HashMap<String, usize> = vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let bos = vocab.len();
        let mut pairs = HashMap::new();
        let mut contexts = HashMap::new();
        for s in sequences {
            let mut prev = bos;
            for w in s {
                let cur = index_of(&index, w);
                *pairs.entry((prev, cur)).or_insert(0.0) += 1.0;
                *contexts.entry(prev).or_insert(0.0) += 1.0;
                prev = cur;
            }
        }
        BigramLm {
            k,
            vocab,
            index,
            pairs,
            contexts,
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }
}

impl GenerativeBackend for BigramLm {
    fn name(&self) -> String {
        format!("bigram:k={}", self.k)
    }

    fn token_loglik(&self, tokens: &[String]) -> Vec<f64> {
        let v = self.vocab.len() as f64;
        let mut prev = self.vocab.len();
        tokens
            .iter()
            .map(|w| {
                let cur = index_of(&self.index, w);
                let c = self.pairs.get(&(prev, cur)).copied().unwrap_or(0.0);
                let n = self.contexts.get(&prev).copied().unwrap_or(0.0);
                prev = cur;
                let denom = n + self.k * v;
                if denom == 0.0 {
                    return -v.ln();
                }
                ((c + self.k) / denom).ln()
            })
            .collect()
    }
}

/// Trainable log-linear bigram model with source triggers:
/// `logits(w | prev, src) = B[prev] + mean_{s in src} T[s]`, where `src` is
/// the part of the sequence before `<sep>` (empty until `<sep>` is seen).
/// Zero-initialized, so the untrained model is uniform over the vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NeuralBigramLm {
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    /// `(V + 1) x V`; the last row is the start-of-sequence context.
    bigram: Vec<f64>,
    /// `V x V`.
    trigger: Vec<f64>,
}

impl NeuralBigramLm {
    pub fn new(vocab: Vec<String>) -> Self {
        let v = vocab.len();
        let mut m = NeuralBigramLm {
            vocab,
            index: HashMap::new(),
            bigram: vec![0.0; (v + 1) * v],
            trigger: vec![0.0; v * v],
        };
        m.reindex();
        m
    }

    /// Restores the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn ids(&self, words: &[String]) -> Vec<usize> {
        words.iter().map(|w| index_of(&self.index, w)).collect()
    }

    fn logits(&self, prev: usize, src: &[usize]) -> Vec<f64> {
        let v = self.vocab.len();
        let mut z = self.bigram[prev * v..(prev + 1) * v].to_vec();
        if !src.is_empty() {
            let scale = 1.0 / src.len() as f64;
            for &s in src {
                for (zi, t) in z.iter_mut().zip(&self.trigger[s * v..(s + 1) * v]) {
                    *zi += scale * t;
                }
            }
        }
        z
    }

    fn log_softmax(z: &[f64]) -> Vec<f64> {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        z.iter().map(|x| x - lse).collect()
    }

    /// Target positions with their `(prev, word)` ids, conditioned on
    /// `<sep>` then the target prefix.
    fn target_steps(&self, target: &[usize]) -> Vec<(usize, usize)> {
        let mut prev = self.index[SEP];
        target
            .iter()
            .map(|&w| {
                let step = (prev, w);
                prev = w;
                step
            })
            .collect()
    }
}

impl GenerativeBackend for NeuralBigramLm {
    fn name(&self) -> String {
        format!("neural-bigram:vocab={}", self.vocab.len())
    }

    fn token_loglik(&self, tokens: &[String]) -> Vec<f64> {
        let ids = self.ids(tokens);
        let sep = self.index[SEP];
        let split = ids.iter().position(|&t| t == sep);
        let mut prev = self.vocab.len();
        ids.iter()
            .enumerate()
            .map(|(i, &w)| {
                let src: &[usize] = match split {
                    Some(s) if i > s => &ids[..s],
                    _ => &[],
                };
                let lp = Self::log_softmax(&self.logits(prev, src))[w];
                prev = w;
                lp
            })
            .collect()
    }

    fn trainable(&mut self) -> Option<&mut dyn ConditionalTrainable> {
        Some(self)
    }
}

impl ConditionalTrainable for NeuralBigramLm {
    fn conditional_loss(&self, source: &[String], target: &[String]) -> f64 {
        let src = self.ids(source);
        let steps = self.target_steps(&self.ids(target));
        if steps.is_empty() {
            return 0.0;
        }
        let total: f64 = steps
            .iter()
            .map(|&(prev, w)| -Self::log_softmax(&self.logits(prev, &src))[w])
            .sum();
        total / steps.len() as f64
    }

    fn train_step(&mut self, source: &[String], target: &[String], lr: f64) -> f64 {
        let v = self.vocab.len();
        let src = self.ids(source);
        let steps = self.target_steps(&self.ids(target));
        if steps.is_empty() {
            return 0.0;
        }
        let t = steps.len() as f64;
        let mut loss = 0.0;
        let mut grads: Vec<(usize, Vec<f64>)> = Vec::with_capacity(steps.len());
        for &(prev, w) in &steps {
            let lp = Self::log_softmax(&self.logits(prev, &src));
            loss -= lp[w];
            let mut g: Vec<f64> = lp.iter().map(|x| x.exp() / t).collect();
            g[w] -= 1.0 / t;
            grads.push((prev, g));
        }
        let src_scale = if src.is_empty() { 0.0 } else { 1.0 / src.len() as f64 };
        for (prev, g) in grads {
            for (b, gi) in self.bigram[prev * v..(prev + 1) * v].iter_mut().zip(&g) {
                *b -= lr * gi;
            }
            for &s in &src {
                for (tw, gi) in self.trigger[s * v..(s + 1) * v].iter_mut().zip(&g) {
                    *tw -= lr * src_scale * gi;
                }
            }
        }
        loss / t
    }
}

/// Builds a generative backend from its identifier. Data-driven backends
/// take their vocabulary (and counts) from `training_texts`:
/// `uniform:<V>`, `bigram[:k=<k>]`, `neural-bigram[:vocab=<max>]`.
pub fn generative_from_id(id: &str, training_texts: &[Vec<String>]) -> Result<Box<dyn GenerativeBackend>> {
    let (kind, rest) = id.split_once(':').unwrap_or((id, ""));
    let option = |key: &str| -> Result<Option<f64>> {
        for kv in rest.split(',').filter(|s| !s.is_empty()) {
            match kv.split_once('=') {
                Some((k, v)) if k == key => {
                    return v
                        .parse::<f64>()
                        .map(Some)
                        .map_err(|_| Error::Config(format!("bad value {v:?} for {k} in {id:?}")))
                }
                Some((k, _)) if kind != "uniform" => {
                    return Err(Error::Config(format!("unknown option {k:?} in {id:?}")))
                }
                _ => {}
            }
        }
        Ok(None)
    };
    match kind {
        "uniform" => {
            let v: usize = rest
                .parse()
                .map_err(|_| Error::Config(format!("uniform backend needs a vocabulary size: {id:?}")))?;
            if v == 0 {
                return Err(Error::Config("uniform vocabulary must be non-empty".into()));
            }
            Ok(Box::new(UniformLm { vocab_size: v }))
        }
        "bigram" => {
            let k = option("k")?.unwrap_or(1.0);
            Ok(Box::new(BigramLm::fit(training_texts, k, usize::MAX)))
        }
        "neural-bigram" => {
            let max = option("vocab")?.unwrap_or(2000.0) as usize;
            let vocab = build_vocab(training_texts.iter().map(|t| t.as_slice()), max);
            Ok(Box::new(NeuralBigramLm::new(vocab)))
        }
        _ => Err(Error::Config(format!("unknown generative backend {id:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    struct Certain;

    impl GenerativeBackend for Certain {
        fn name(&self) -> String {
            "certain".into()
        }

        fn token_loglik(&self, tokens: &[String]) -> Vec<f64> {
            vec![0.0; tokens.len()]
        }
    }

    struct Impossible;

    impl GenerativeBackend for Impossible {
        fn name(&self) -> String {
            "impossible".into()
        }

        fn token_loglik(&self, tokens: &[String]) -> Vec<f64> {
            vec![f64::NEG_INFINITY; tokens.len()]
        }
    }

    #[test]
    fn uniform_sixteen() {
        let lm = UniformLm { vocab_size: 16 };
        let ppl = pair_perplexity(&w("a b c"), &w("d e"), &lm, Default::default()).unwrap();
        assert!((ppl - 16.0).abs() < 1e-9);
        let f = generative_score(&w("a"), &w("b"), &lm, Default::default()).unwrap();
        assert!((f + 15.0).abs() < 1e-9);
    }

    #[test]
    fn certain_backend() {
        let ppl = sequence_perplexity(&w("x y"), &Certain, Default::default()).unwrap();
        assert_eq!(ppl, 1.0);
        assert_eq!(generative_score(&w("x"), &w("y"), &Certain, Default::default()).unwrap(), 0.0);
    }

    #[test]
    fn zero_probability_floor_or_error() {
        let toks = w("a b");
        let floored = sequence_perplexity(&toks, &Impossible, Default::default()).unwrap();
        assert!((floored - 1e12).abs() / 1e12 < 1e-9);
        assert!(matches!(
            sequence_perplexity(&toks, &Impossible, PerplexityOptions { floor: None }),
            Err(Error::ZeroProbability(0))
        ));
        assert!(matches!(
            sequence_perplexity(&[], &Certain, Default::default()),
            Err(Error::Empty(_))
        ));
    }

    /// Corpus "a b a c a" (5 tokens), no smoothing. Counts by hand:
    /// from <s>: a 1; from a: b 1, c 1 (a appears 3 times as context but is
    /// followed by a token twice); from b: a 1; from c: a 1.
    #[test]
    fn bigram_hand_oracle() {
        let lm = BigramLm::fit(&[w("a b a c a")], 0.0, usize::MAX);
        // "a b a c": p(a|<s>)=1, p(b|a)=1/2, p(a|b)=1, p(c|a)=1/2
        let ppl = sequence_perplexity(&w("a b a c"), &lm, PerplexityOptions { floor: None }).unwrap();
        let want = (-(1f64.ln() + 0.5f64.ln() + 1f64.ln() + 0.5f64.ln()) / 4.0).exp();
        assert!((ppl - want).abs() < 1e-9);
        assert!((ppl - 2f64.sqrt()).abs() < 1e-9);

        // add-one: vocabulary {a, b, c, <sep>, <unk>} has size 5.
        let lm = BigramLm::fit(&[w("a b a c a")], 1.0, usize::MAX);
        assert_eq!(lm.vocab_size(), 5);
        let ll = lm.token_loglik(&w("a b"));
        assert!((ll[0] - (2.0f64 / 6.0).ln()).abs() < 1e-12);
        assert!((ll[1] - (2.0f64 / 7.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn neural_bigram_starts_uniform() {
        let lm = NeuralBigramLm::new(build_vocab([w("a b c").as_slice()], 100));
        assert_eq!(lm.vocab_size(), 5);
        let ppl = pair_perplexity(&w("a b"), &w("c"), &lm, Default::default()).unwrap();
        assert!((ppl - 5.0).abs() < 1e-9);
    }

    #[test]
    fn zero_steps_is_noop() {
        let mut lm = NeuralBigramLm::new(build_vocab([w("a b c d").as_slice()], 100));
        let before = pair_perplexity(&w("a b"), &w("c d"), &lm, Default::default()).unwrap();
        let losses = finetune_generative(&mut lm, &[(w("a b"), w("c d"))], 0, 0.5).unwrap();
        assert!(losses.is_empty());
        assert_eq!(pair_perplexity(&w("a b"), &w("c d"), &lm, Default::default()).unwrap(), before);
    }

    #[test]
    fn overfits_repeated_pair() {
        let mut lm = NeuralBigramLm::new(build_vocab([w("the boy takes a cookie").as_slice()], 100));
        let pair = (w("the boy"), w("takes a cookie"));
        let losses = finetune_generative(&mut lm, &vec![pair.clone(); 1], 20, 0.5).unwrap();
        for win in losses.windows(2) {
            assert!(win[1] < win[0], "{losses:?}");
        }
        assert!(lm.conditional_loss(&pair.0, &pair.1) < losses[0]);
    }

    #[test]
    fn conditional_gradient_matches_finite_differences() {
        let vocab = build_vocab([w("a b c d").as_slice()], 100);
        let mut lm = NeuralBigramLm::new(vocab);
        let mut rng = crate::seed::rng(5);
        use rand::Rng;
        lm.bigram.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        lm.trigger.iter_mut().for_each(|x| *x = rng.random_range(-1.0..1.0));
        let (s, t) = (w("a b"), w("c a d"));
        // A step with lr = h moves parameters by -h * grad, so the loss
        // drop over the step approximates h * |grad|^2.
        let h = 1e-6;
        let mut stepped = lm.clone();
        stepped.train_step(&s, &t, 1.0);
        let grad: Vec<f64> = lm
            .bigram
            .iter()
            .chain(&lm.trigger)
            .zip(stepped.bigram.iter().chain(&stepped.trigger))
            .map(|(a, b)| a - b)
            .collect();
        let sq: f64 = grad.iter().map(|g| g * g).sum();
        let mut small = lm.clone();
        let before = small.conditional_loss(&s, &t);
        small.train_step(&s, &t, h);
        let drop = before - small.conditional_loss(&s, &t);
        assert!(((drop / h) - sq).abs() / sq < 1e-4, "{} vs {sq}", drop / h);
    }

    #[test]
    fn capability_error_for_untrainable() {
        let mut lm = UniformLm { vocab_size: 4 };
        assert!(matches!(
            finetune_generative(&mut lm, &[(w("a"), w("b"))], 1, 0.1),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn registry() {
        let texts = vec![w("a b"), w("c")];
        assert_eq!(generative_from_id("uniform:16", &texts).unwrap().name(), "uniform:16");
        assert_eq!(generative_from_id("bigram:k=0.5", &texts).unwrap().name(), "bigram:k=0.5");
        assert_eq!(generative_from_id("neural-bigram", &texts).unwrap().name(), "neural-bigram:vocab=5");
        assert!(generative_from_id("gpt", &texts).is_err());
        assert!(generative_from_id("uniform", &texts).is_err());
        assert!(generative_from_id("bigram:q=1", &texts).is_err());
    }

    proptest! {
        #[test]
        fn perplexity_at_least_one(seq in prop::collection::vec("[abcxyz]", 1..12)) {
            let lm = BigramLm::fit(&[w("a b c a b x")], 0.5, usize::MAX);
            let ppl = sequence_perplexity(&seq, &lm, Default::default()).unwrap();
            prop_assert!(ppl >= 1.0);
            prop_assert!(lm.token_loglik(&seq).iter().all(|&l| l <= 0.0));
        }
    }
}
