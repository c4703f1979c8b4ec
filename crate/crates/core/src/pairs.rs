//! Coherent/incoherent utterance pairs, subject-level splits and per-epoch
//! negative resampling.
//!
//! A coherent pair is adjacent, `(i, i + 1)`. An incoherent pair is a forward
//! non-adjacent pair from the same narrative, `(i, j)` with `j >= i + 2`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Corpus, Narrative};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairLabel {
    Coherent,
    Incoherent,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Coherent => "coherent",
            PairLabel::Incoherent => "incoherent",
        }
    }

    pub fn is_coherent(self) -> bool {
        self == PairLabel::Coherent
    }
}

impl FromStr for PairLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coherent" => Ok(PairLabel::Coherent),
            "incoherent" => Ok(PairLabel::Incoherent),
            other => Err(Error::InvalidArgument(format!("unknown pair label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct UtterancePair {
    pub narrative_ref: String,
    pub anchor_index: usize,
    pub partner_index: usize,
    pub label: PairLabel,
}

impl UtterancePair {
    /// Builds a pair, deriving the label from the index distance. Returns
    /// `None` for backward or self pairs.
    pub fn new(narrative_ref: impl Into<String>, anchor: usize, partner: usize) -> Option<Self> {
        let label = match partner.checked_sub(anchor)? {
            0 => return None,
            1 => PairLabel::Coherent,
            _ => PairLabel::Incoherent,
        };
        Some(UtterancePair {
            narrative_ref: narrative_ref.into(),
            anchor_index: anchor,
            partner_index: partner,
            label,
        })
    }

    pub fn texts<'a>(&self, narrative: &'a Narrative) -> (&'a [String], &'a [String]) {
        (
            &narrative.utterances[self.anchor_index].words,
            &narrative.utterances[self.partner_index].words,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairSet {
    pub coherent: Vec<UtterancePair>,
    pub incoherent: Vec<UtterancePair>,
}

impl PairSet {
    pub fn all(&self) -> impl Iterator<Item = &UtterancePair> {
        self.coherent.iter().chain(&self.incoherent)
    }
}

/// All adjacent pairs and all forward non-adjacent pairs of a narrative:
/// `k - 1` and `(k - 1)(k - 2) / 2` of them for `k` utterances.
pub fn enumerate_pairs(narrative: &Narrative) -> Result<PairSet> {
    let k = narrative.len();
    if k < 2 {
        return Err(Error::EmptyNarrative(narrative.id()));
    }
    let id = narrative.id();
    let coherent = (0..k - 1)
        .map(|i| UtterancePair {
            narrative_ref: id.clone(),
            anchor_index: i,
            partner_index: i + 1,
            label: PairLabel::Coherent,
        })
        .collect();
    let incoherent = (0..k)
        .flat_map(|i| (i + 2..k).map(move |j| (i, j)))
        .map(|(i, j)| UtterancePair {
            narrative_ref: id.clone(),
            anchor_index: i,
            partner_index: j,
            label: PairLabel::Incoherent,
        })
        .collect();
    Ok(PairSet {
        coherent,
        incoherent,
    })
}

/// Pairs for every narrative with at least two utterances.
pub fn enumerate_corpus(corpus: &Corpus) -> PairSet {
    let mut out = PairSet::default();
    for n in corpus.narratives().iter().filter(|n| n.len() >= 2) {
        let p = enumerate_pairs(n).expect("length checked");
        out.coherent.extend(p.coherent);
        out.incoherent.extend(p.incoherent);
    }
    out
}

/// For each coherent pair `(i, i + 1)`, up to `per_positive` incoherent pairs
/// `(i, j)` sharing its anchor, drawn without replacement. The draw depends
/// on `epoch_seed` and the narrative identifier only. Output is sorted.
pub fn resample_negatives(
    narrative: &Narrative,
    per_positive: usize,
    epoch_seed: u64,
) -> Vec<UtterancePair> {
    let k = narrative.len();
    let id = narrative.id();
    let mut rng = seed::rng(seed::derive(epoch_seed, &id));
    let mut out = Vec::new();
    for anchor in 0..k.saturating_sub(1) {
        let pool = k.saturating_sub(anchor + 2);
        if pool == 0 {
            continue;
        }
        let take = per_positive.min(pool);
        let mut picks: Vec<usize> = index::sample(&mut rng, pool, take).into_vec();
        picks.sort_unstable();
        out.extend(picks.into_iter().map(|off| UtterancePair {
            narrative_ref: id.clone(),
            anchor_index: anchor,
            partner_index: anchor + 2 + off,
            label: PairLabel::Incoherent,
        }));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub assignment: BTreeMap<String, Split>,
}

impl SplitManifest {
    pub fn split_of(&self, subject_id: &str) -> Option<Split> {
        self.assignment.get(subject_id).copied()
    }

    pub fn subjects(&self, split: Split) -> Vec<&str> {
        self.assignment
            .iter()
            .filter(|(_, s)| **s == split)
            .map(|(k, _)| k.as_str())
            .collect()
    }

    /// Narratives of `corpus` whose subject is assigned to `split`.
    pub fn select(&self, corpus: &Corpus, split: Split) -> Corpus {
        corpus.filter(|n| self.split_of(&n.meta.subject_id) == Some(split))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Largest-remainder apportionment of `n` items to `ratios`, then at least
/// one item for every split with a positive ratio (taken from the largest).
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: [usize; 3] = [0; 3];
    for (c, q) in counts.iter_mut().zip(&quotas) {
        *c = q.floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().take(n - assigned) {
        counts[i] += 1;
    }
    for i in 0..3 {
        if ratios[i] > 0.0 && counts[i] == 0 {
            let donor = (0..3).max_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap();
            counts[donor] -= 1;
            counts[i] += 1;
        }
    }
    counts
}

/// Partitions subjects (not narratives) into train/validation/test.
pub fn split_by_subject(corpus: &Corpus, ratios: [f64; 3], seed: u64) -> Result<SplitManifest> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split ratios must be non-negative and sum to 1, got {ratios:?}"
        )));
    }
    let mut subjects: Vec<String> = corpus.subject_ids().into_iter().map(str::to_owned).collect();
    let splits = ratios.iter().filter(|r| **r > 0.0).count();
    if subjects.len() < splits {
        return Err(Error::TooFewSubjects {
            subjects: subjects.len(),
            splits,
        });
    }
    subjects.shuffle(&mut seed::rng(seed));
    let counts = apportion(subjects.len(), ratios);
    let mut assignment = BTreeMap::new();
    let mut it = subjects.into_iter();
    for (split, count) in Split::ALL.into_iter().zip(counts) {
        for s in it.by_ref().take(count) {
            assignment.insert(s, split);
        }
    }
    Ok(SplitManifest {
        seed,
        ratios,
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub narrative_ref: String,
    pub anchor_index: usize,
    pub partner_index: usize,
    pub label: PairLabel,
    pub text_1: String,
    pub text_2: String,
}

/// Writes one tab-separated record per pair, ordered by
/// `(narrative, anchor, partner)`.
pub fn export_pairs(pairs: &[UtterancePair], corpus: &Corpus, path: &Path) -> Result<()> {
    let by_id: BTreeMap<String, &Narrative> =
        corpus.narratives().iter().map(|n| (n.id(), n)).collect();
    let mut sorted: Vec<&UtterancePair> = pairs.iter().collect();
    sorted.sort();

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .has_headers(false)
        .from_writer(std::io::BufWriter::new(file));
    w.write_record(["narrative_ref", "anchor_index", "partner_index", "label", "text_1", "text_2"])?;
    for p in sorted {
        let n = by_id.get(&p.narrative_ref).ok_or_else(|| {
            Error::InvalidArgument(format!("pair refers to unknown narrative {}", p.narrative_ref))
        })?;
        let (a, b) = p.texts(n);
        w.write_record([
            p.narrative_ref.as_str(),
            &p.anchor_index.to_string(),
            &p.partner_index.to_string(),
            p.label.as_str(),
            &a.join(" "),
            &b.join(" "),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    r.deserialize().map(|x| x.map_err(Error::from)).collect()
}
