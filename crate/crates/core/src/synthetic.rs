//! Synthetic narratives with planted local order, for tests and demos.
//!
//! Utterance `i` of a narrative mentions two entities `e_c` and `e_{c+1}`
//! from a chain of distinct entities, so adjacent utterances share exactly
//! one entity and non-adjacent ones share none. A disruptive utterance
//! mentions two fresh entities instead and leaves the chain where it was,
//! breaking the link on both sides.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ingest::{Corpus, Diagnosis, Narrative, SessionMeta, Utterance};
use crate::seed;

const FILLERS: [&str; 12] = [
    "and", "the", "is", "then", "there", "with", "near", "of", "a", "on", "by", "so",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub narratives: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Size of the entity vocabulary narratives draw their chains from.
    pub entities: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            narratives: 200,
            min_len: 5,
            max_len: 12,
            entities: 400,
            seed: 0,
        }
    }
}

fn entity(k: usize) -> String {
    format!("ent{k}")
}

fn utterance(index: usize, words: Vec<String>, disruptive: bool) -> Utterance {
    let mut raw = format!("*PAR:\t{} .", words.join(" "));
    if disruptive {
        raw.push_str(" [+ exc]");
    }
    Utterance {
        index,
        speaker: "PAR".into(),
        words,
        disruptive,
        raw,
    }
}

/// Builds one narrative of `len` utterances; each utterance after the first
/// is disruptive with probability `disruption`.
fn narrative(rng: &mut ChaCha8Rng, meta: SessionMeta, len: usize, entities: usize, disruption: f64) -> Narrative {
    // Enough distinct entities for the chain plus two per disruption.
    let need = 2 * len + 2;
    assert!(entities >= need, "entity pool of {entities} too small for {len} utterances");
    let mut pool: Vec<usize> = rand::seq::index::sample(rng, entities, need).into_vec();
    pool.shuffle(rng);
    let mut pool = pool.into_iter().map(entity);
    let mut current = pool.next().expect("pool sized above");
    let mut utterances = Vec::with_capacity(len);
    for i in 0..len {
        let filler = FILLERS[rng.random_range(0..FILLERS.len())].to_string();
        if i > 0 && rng.random_bool(disruption) {
            let (a, b) = (pool.next().expect("pool"), pool.next().expect("pool"));
            utterances.push(utterance(i, vec![a, filler, b], true));
        } else {
            let next = pool.next().expect("pool");
            utterances.push(utterance(i, vec![current.clone(), filler, next.clone()], false));
            current = next;
        }
    }
    Narrative {
        meta,
        utterances,
        source: None,
    }
}

/// Healthy single-visit narratives, one subject each, no disruptions.
pub fn generate(spec: &SyntheticSpec) -> Corpus {
    let mut rng = seed::rng(seed::derive(spec.seed, "synthetic"));
    let narratives = (0..spec.narratives)
        .map(|i| {
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let meta = SessionMeta {
                subject_id: format!("syn{i:04}"),
                visit_index: 1,
                diagnosis: Diagnosis::Healthy,
                mmse: None,
                cdr: None,
                hdr: None,
            };
            narrative(&mut rng, meta, len, spec.entities, 0.0)
        })
        .collect();
    Corpus::new(narratives).expect("subject ids are unique")
}

/// A longitudinal multi-cohort corpus with clinical scores. Disruption
/// rates and cognitive decline grow with diagnosis severity and visit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CohortSpec {
    pub healthy: usize,
    pub mci: usize,
    pub ad: usize,
    pub min_visits: u32,
    pub max_visits: u32,
    pub min_len: usize,
    pub max_len: usize,
    pub entities: usize,
    pub seed: u64,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            healthy: 30,
            mci: 12,
            ad: 40,
            min_visits: 2,
            max_visits: 4,
            min_len: 6,
            max_len: 14,
            entities: 400,
            seed: 0,
        }
    }
}

pub fn generate_cohort(spec: &CohortSpec) -> Corpus {
    let mut rng = seed::rng(seed::derive(spec.seed, "cohort"));
    let mut narratives = Vec::new();
    let groups = [
        (Diagnosis::Healthy, spec.healthy, "hc"),
        (Diagnosis::Mci, spec.mci, "mci"),
        (Diagnosis::Ad, spec.ad, "ad"),
    ];
    for (diagnosis, count, prefix) in groups {
        for s in 0..count {
            // Per-subject severity drives both decline and disruption.
            let severity: f64 = match diagnosis {
                Diagnosis::Healthy => rng.random_range(0.0..0.1),
                Diagnosis::Mci => rng.random_range(0.1..0.4),
                _ => rng.random_range(0.3..1.0),
            };
            let visits = rng.random_range(spec.min_visits..=spec.max_visits);
            let mmse0 = rng.random_range(24..=30) as f64 - 6.0 * severity;
            let hdr = rng.random_range(0..=(8.0 + 14.0 * severity) as u32);
            for v in 1..=visits {
                let t = (v - 1) as f64;
                let mmse = (mmse0 - t * 8.0 * severity).round().clamp(0.0, 30.0) as u32;
                let cdr = ((t * severity) * 2.0).round() / 2.0 + if diagnosis == Diagnosis::Healthy { 0.0 } else { 0.5 };
                let meta = SessionMeta {
                    subject_id: format!("{prefix}{s:03}"),
                    visit_index: v,
                    diagnosis,
                    mmse: Some(mmse),
                    cdr: Some(cdr.min(3.0)),
                    hdr: Some(hdr),
                };
                let len = rng.random_range(spec.min_len..=spec.max_len);
                let disruption = (0.05 + 0.45 * severity * (1.0 + 0.5 * t)).min(0.8) * severity.sqrt();
                narratives.push(narrative(&mut rng, meta, len, spec.entities, disruption));
            }
        }
    }
    Corpus::new(narratives).expect("subject/visit pairs are unique")
}

/// Renders a narrative as a key-value dialect transcript.
pub fn to_transcript(n: &Narrative) -> String {
    let m = &n.meta;
    let mut id = format!(
        "@ID: subject={}; visit={}; dx={}",
        m.subject_id,
        m.visit_index,
        m.diagnosis.as_str()
    );
    if let Some(x) = m.mmse {
        id.push_str(&format!("; mmse={x}"));
    }
    if let Some(x) = m.cdr {
        id.push_str(&format!("; cdr={x}"));
    }
    if let Some(x) = m.hdr {
        id.push_str(&format!("; hdr={x}"));
    }
    let mut out = format!("@Begin\n{id}\n");
    for u in &n.utterances {
        out.push_str(&u.raw);
        out.push('\n');
    }
    out.push_str("@End\n");
    out
}
