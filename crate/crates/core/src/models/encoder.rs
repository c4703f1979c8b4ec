//! Frozen text encoders: word vectors, sentence vectors and a pooled pair
//! representation, selected by identifier string.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::seed;

pub trait EncoderBackend: Send + Sync {
    /// Registry identifier that reconstructs this backend.
    fn name(&self) -> String;

    fn dim(&self) -> usize;

    /// One `dim()`-vector per word, in order.
    fn word_vectors(&self, words: &[String]) -> Vec<Vec<f64>>;

    /// Mean of the word vectors; zeros for an empty text.
    fn sentence_vector(&self, words: &[String]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        let vs = self.word_vectors(words);
        if vs.is_empty() {
            return out;
        }
        for v in &vs {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        let n = vs.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    fn pair_dim(&self) -> usize {
        3 * self.dim()
    }

    /// Pooled joint representation `[s1, s2, s1 * s2]` of an ordered pair.
    fn pair_representation(&self, first: &[String], second: &[String]) -> Vec<f64> {
        let s1 = self.sentence_vector(first);
        let s2 = self.sentence_vector(second);
        let mut out = Vec::with_capacity(self.pair_dim());
        out.extend_from_slice(&s1);
        out.extend_from_slice(&s2);
        out.extend(s1.iter().zip(&s2).map(|(a, b)| a * b));
        out
    }

    fn supports_concurrent_inference(&self) -> bool {
        true
    }

    /// Hex SHA-256 over everything that determines the backend's outputs.
    fn parameters_digest(&self) -> String;
}

/// Deterministic pseudo-random word vectors keyed by `(seed, word)`, entries
/// uniform on `[-sqrt 3, sqrt 3]` (unit variance). Needs no data files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HashEncoder {
    dim: usize,
    seed: u64,
}

impl HashEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        assert!(dim > 0, "encoder dimension must be positive");
        HashEncoder { dim, seed }
    }

    pub fn word_vector(&self, word: &str) -> Vec<f64> {
        let base = seed::derive(self.seed, word);
        let scale = 3f64.sqrt();
        (0..self.dim as u64)
            .map(|k| {
                let bits = seed::splitmix(base.wrapping_add(k.wrapping_mul(0x9e37_79b9_7f4a_7c15)));
                let u = (bits >> 11) as f64 / (1u64 << 53) as f64;
                (2.0 * u - 1.0) * scale
            })
            .collect()
    }
}

impl EncoderBackend for HashEncoder {
    fn name(&self) -> String {
        format!("hash:dim={},seed={}", self.dim, self.seed)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn word_vectors(&self, words: &[String]) -> Vec<Vec<f64>> {
        words.iter().map(|w| self.word_vector(w)).collect()
    }

    fn parameters_digest(&self) -> String {
        hex::encode(Sha256::digest(self.name().as_bytes()))
    }
}

/// Pre-trained word vectors from a whitespace-separated text file
/// (`word v1 .. vd` per line; an optional `count dim` header is skipped).
/// Out-of-vocabulary words are ignored when pooling and map to zeros in
/// `word_vectors`.
#[derive(Debug, Clone)]
pub struct VectorTableEncoder {
    source: String,
    dim: usize,
    table: HashMap<String, Vec<f64>>,
}

impl VectorTableEncoder {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string()).map_err(|e| match e {
            Error::Parse { line, message } => Error::File {
                path: path.to_path_buf(),
                message: format!("line {line}: {message}"),
            },
            other => other,
        })
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut dim = None;
        let mut table = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            if i == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<usize>().is_ok()) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Parse {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            match dim {
                None => dim = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("expected {d} values, found {}", values.len()),
                    })
                }
                _ => {}
            }
            table.insert(fields[0].to_lowercase(), values);
        }
        match dim {
            Some(d) if d > 0 => Ok(VectorTableEncoder {
                source: source.to_string(),
                dim: d,
                table,
            }),
            _ => Err(Error::Empty(format!("no word vectors in {source}"))),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.len()
    }
}

impl EncoderBackend for VectorTableEncoder {
    fn name(&self) -> String {
        format!("vectors:{}", self.source)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn word_vectors(&self, words: &[String]) -> Vec<Vec<f64>> {
        words
            .iter()
            .map(|w| self.table.get(w).cloned().unwrap_or_else(|| vec![0.0; self.dim]))
            .collect()
    }

    fn sentence_vector(&self, words: &[String]) -> Vec<f64> {
        let known: Vec<String> = words.iter().filter(|w| self.table.contains_key(*w)).cloned().collect();
        let mut out = vec![0.0; self.dim];
        for w in &known {
            for (o, x) in out.iter_mut().zip(&self.table[w]) {
                *o += x;
            }
        }
        if !known.is_empty() {
            let n = known.len() as f64;
            out.iter_mut().for_each(|o| *o /= n);
        }
        out
    }

    fn parameters_digest(&self) -> String {
        let mut keys: Vec<&String> = self.table.keys().collect();
        keys.sort();
        let mut h = Sha256::new();
        for k in keys {
            h.update(k.as_bytes());
            for v in &self.table[k] {
                h.update(v.to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

/// Builds a backend from its identifier: `hash[:dim=D,seed=S]` or
/// `vectors:<path>`.
pub fn encoder_from_id(id: &str) -> Result<Arc<dyn EncoderBackend>> {
    let (kind, rest) = id.split_once(':').unwrap_or((id, ""));
    match kind {
        "hash" => {
            let mut dim = 32;
            let mut s = 0;
            for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("bad encoder option {kv:?} in {id:?}")))?;
                let parse = |v: &str| {
                    v.parse::<u64>()
                        .map_err(|_| Error::Config(format!("bad value {v:?} for {k} in {id:?}")))
                };
                match k {
                    "dim" => dim = parse(v)? as usize,
                    "seed" => s = parse(v)?,
                    _ => return Err(Error::Config(format!("unknown encoder option {k:?} in {id:?}"))),
                }
            }
            if dim == 0 {
                return Err(Error::Config(format!("encoder dimension must be positive in {id:?}")));
            }
            Ok(Arc::new(HashEncoder::new(dim, s)))
        }
        "vectors" if !rest.is_empty() => Ok(Arc::new(VectorTableEncoder::load(Path::new(rest))?)),
        _ => Err(Error::Config(format!("unknown encoder backend {id:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn hash_vectors_are_deterministic_and_distinct() {
        let e = HashEncoder::new(16, 3);
        assert_eq!(e.word_vector("cookie"), e.word_vector("cookie"));
        assert_ne!(e.word_vector("cookie"), e.word_vector("jar"));
        assert_ne!(e.word_vector("cookie"), HashEncoder::new(16, 4).word_vector("cookie"));
        assert!(e.word_vector("x").iter().all(|v| v.abs() <= 3f64.sqrt()));
    }

    #[test]
    fn sentence_vector_is_mean() {
        let e = HashEncoder::new(4, 0);
        let a = e.word_vector("a");
        let b = e.word_vector("b");
        let s = e.sentence_vector(&w("a b"));
        for i in 0..4 {
            assert!((s[i] - (a[i] + b[i]) / 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_representation_layout() {
        let e = HashEncoder::new(3, 1);
        let p = e.pair_representation(&w("a"), &w("b"));
        assert_eq!(p.len(), 9);
        let a = e.word_vector("a");
        let b = e.word_vector("b");
        assert_eq!(&p[..3], &a[..]);
        assert_eq!(&p[3..6], &b[..]);
        assert_eq!(p[6], a[0] * b[0]);
    }

    #[test]
    fn registry_ids() {
        let e = encoder_from_id("hash:dim=8,seed=2").unwrap();
        assert_eq!(e.dim(), 8);
        assert_eq!(e.name(), "hash:dim=8,seed=2");
        assert_eq!(encoder_from_id("hash").unwrap().dim(), 32);
        assert!(matches!(encoder_from_id("bert"), Err(Error::Config(_))));
        assert!(matches!(encoder_from_id("hash:dim=0"), Err(Error::Config(_))));
        assert!(matches!(encoder_from_id("hash:width=3"), Err(Error::Config(_))));
    }

    #[test]
    fn vector_table() {
        let e = VectorTableEncoder::parse("2 2\ncat 1 0\ndog 0 1\n", "mem").unwrap();
        assert_eq!(e.dim(), 2);
        assert_eq!(e.vocab_size(), 2);
        assert_eq!(e.sentence_vector(&w("cat unknown")), vec![1.0, 0.0]);
        assert_eq!(e.word_vectors(&w("unknown dog")), vec![vec![0.0, 0.0], vec![0.0, 1.0]]);
        assert!(matches!(
            VectorTableEncoder::parse("a 1 2\nb 1\n", "mem"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(VectorTableEncoder::parse("", "mem").is_err());
    }

    #[test]
    fn digest_tracks_parameters() {
        assert_eq!(
            HashEncoder::new(4, 1).parameters_digest(),
            HashEncoder::new(4, 1).parameters_digest()
        );
        assert_ne!(
            HashEncoder::new(4, 1).parameters_digest(),
            HashEncoder::new(4, 2).parameters_digest()
        );
    }
}
