//! The digital coherence marker: the mean adjacent-pair score of a
//! narrative, followed per subject across visits and summarized per cohort.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Corpus, Diagnosis};
use crate::metrics::{fmt_p, fmt_pct, fmt_score, pct_delta, write_table, NULL_MARKER};
use crate::models::{score_pairs, PairScorer};
use crate::pairs::enumerate_corpus;
use crate::stats::{self, describe, MwMode, StdConvention, Summary, TestResult};

/// Score of one adjacent pair `(i, i + 1)`, flagged disruptive when the
/// second utterance carries the exclusion code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacentScore {
    pub narrative_ref: String,
    pub anchor_index: usize,
    pub score: f64,
    pub disruptive: bool,
}

/// Scores every adjacent pair of the corpus.
pub fn adjacent_scores(scorer: &dyn PairScorer, corpus: &Corpus) -> Result<Vec<AdjacentScore>> {
    let pairs = enumerate_corpus(corpus).coherent;
    let scores = score_pairs(scorer, corpus, &pairs)?;
    Ok(pairs
        .into_iter()
        .zip(scores)
        .map(|(p, score)| {
            let n = corpus.get(&p.narrative_ref).expect("pairs come from the corpus");
            AdjacentScore {
                disruptive: n.utterances[p.partner_index].disruptive,
                anchor_index: p.anchor_index,
                narrative_ref: p.narrative_ref,
                score,
            }
        })
        .collect())
}

/// Unweighted mean of a narrative's adjacent-pair scores.
pub fn narrative_marker(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("narrative has no adjacent pairs".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Marker per narrative identifier.
pub fn narrative_markers(scores: &[AdjacentScore]) -> BTreeMap<String, f64> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in scores {
        groups.entry(&s.narrative_ref).or_default().push(s.score);
    }
    groups
        .into_iter()
        .map(|(k, v)| (k.to_string(), narrative_marker(&v).expect("groups are non-empty")))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerSeries {
    pub subject_id: String,
    pub diagnosis: Diagnosis,
    /// `(visit_index, marker)`, visit indices strictly increasing.
    pub visits: Vec<(u32, f64)>,
}

impl MarkerSeries {
    pub fn values(&self) -> Vec<f64> {
        self.visits.iter().map(|v| v.1).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesSet {
    pub series: Vec<MarkerSeries>,
    /// Subjects with fewer than two scored narratives.
    pub excluded: Vec<String>,
}

/// One series per subject with at least two scored narratives, in visit
/// order. A subject's diagnosis is taken from its latest visit.
pub fn subject_series(corpus: &Corpus, markers: &BTreeMap<String, f64>) -> SeriesSet {
    let mut out = SeriesSet::default();
    for (subject, narratives) in corpus.by_subject() {
        let mut visits: Vec<(u32, f64)> = narratives
            .iter()
            .filter_map(|n| markers.get(&n.id()).map(|&m| (n.meta.visit_index, m)))
            .collect();
        visits.sort_by_key(|v| v.0);
        if visits.len() < 2 {
            out.excluded.push(subject.to_string());
            continue;
        }
        let last = narratives
            .iter()
            .max_by_key(|n| n.meta.visit_index)
            .expect("subject has narratives");
        out.series.push(MarkerSeries {
            subject_id: subject.to_string(),
            diagnosis: last.meta.diagnosis,
            visits,
        });
    }
    out
}

/// Scores the corpus and builds the series; scoring failures name the
/// narrative.
pub fn score_series(scorer: &dyn PairScorer, corpus: &Corpus) -> Result<(Vec<AdjacentScore>, SeriesSet)> {
    let adj = adjacent_scores(scorer, corpus)?;
    let set = subject_series(corpus, &narrative_markers(&adj));
    Ok((adj, set))
}

fn need_two(series: &MarkerSeries) -> Result<()> {
    if series.visits.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "series of subject {} has {} visit(s), need 2",
            series.subject_id,
            series.visits.len()
        )));
    }
    Ok(())
}

/// Marker at the last visit minus marker at the first.
pub fn delta_end_start(series: &MarkerSeries) -> Result<f64> {
    need_two(series)?;
    Ok(series.visits[series.visits.len() - 1].1 - series.visits[0].1)
}

/// Consecutive-visit differences.
pub fn visit_changes(series: &MarkerSeries) -> Vec<f64> {
    series.visits.windows(2).map(|w| w[1].1 - w[0].1).collect()
}

/// Mean of the consecutive-visit differences.
pub fn delta_long(series: &MarkerSeries) -> Result<f64> {
    need_two(series)?;
    let d = visit_changes(series);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// How a cohort's long-term change is aggregated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaLongMode {
    /// Mean change within each subject, then across subjects.
    #[default]
    WithinSubject,
    /// All consecutive-visit changes of the cohort pooled together.
    Pooled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Marker,
    DeltaEndStart,
    DeltaLong,
}

impl Quantity {
    pub const ALL: [Quantity; 3] = [Quantity::Marker, Quantity::DeltaEndStart, Quantity::DeltaLong];

    pub fn as_str(self) -> &'static str {
        match self {
            Quantity::Marker => "marker",
            Quantity::DeltaEndStart => "delta_end_start",
            Quantity::DeltaLong => "delta_long",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortOptions {
    pub std: StdConvention,
    pub delta_long: DeltaLongMode,
    pub mw_mode: MwMode,
}

impl Default for CohortOptions {
    fn default() -> Self {
        CohortOptions {
            std: StdConvention::Sample,
            delta_long: DeltaLongMode::WithinSubject,
            mw_mode: MwMode::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSummary {
    pub cohort: Diagnosis,
    pub n_subjects: usize,
    pub n_narratives: usize,
    /// Over every visit marker of the cohort's subjects.
    pub marker: Summary,
    pub delta_end_start: Summary,
    pub delta_long: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub quantity: Quantity,
    pub a: Diagnosis,
    pub b: Diagnosis,
    pub test: TestResult,
}

impl CohortComparison {
    pub fn significant(&self) -> bool {
        self.test.significant()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortTable {
    pub rows: Vec<CohortSummary>,
    pub comparisons: Vec<CohortComparison>,
    pub warnings: Vec<String>,
}

impl CohortTable {
    /// The significance flag between two cohorts for a quantity, in either
    /// order.
    pub fn flag(&self, quantity: Quantity, x: Diagnosis, y: Diagnosis) -> Option<bool> {
        self.comparisons
            .iter()
            .find(|c| c.quantity == quantity && ((c.a == x && c.b == y) || (c.a == y && c.b == x)))
            .map(|c| c.significant())
    }
}

fn cohort_samples(series: &[&MarkerSeries], mode: DeltaLongMode) -> Result<[Vec<f64>; 3]> {
    let marker = series.iter().flat_map(|s| s.values()).collect();
    let des = series.iter().map(|s| delta_end_start(s)).collect::<Result<_>>()?;
    let dl = match mode {
        DeltaLongMode::WithinSubject => series.iter().map(|s| delta_long(s)).collect::<Result<_>>()?,
        DeltaLongMode::Pooled => series.iter().flat_map(|s| visit_changes(s)).collect(),
    };
    Ok([marker, des, dl])
}

/// Per-cohort mean (std) of the marker and its changes, with pairwise
/// Mann-Whitney tests between cohorts for each quantity.
pub fn cohort_table(series: &[MarkerSeries], opts: CohortOptions) -> Result<CohortTable> {
    let mut groups: BTreeMap<Diagnosis, Vec<&MarkerSeries>> = BTreeMap::new();
    for s in series {
        need_two(s)?;
        groups.entry(s.diagnosis).or_default().push(s);
    }
    let mut warnings = Vec::new();
    for d in Diagnosis::ALL {
        if !groups.contains_key(&d) && d != Diagnosis::Other {
            warnings.push(format!("cohort {} has no longitudinal series, omitted", d.as_str()));
        }
    }
    let mut rows = Vec::new();
    let mut samples: Vec<(Diagnosis, [Vec<f64>; 3])> = Vec::new();
    for (&d, ss) in &groups {
        let s = cohort_samples(ss, opts.delta_long)?;
        rows.push(CohortSummary {
            cohort: d,
            n_subjects: ss.len(),
            n_narratives: s[0].len(),
            marker: describe(&s[0], opts.std)?,
            delta_end_start: describe(&s[1], opts.std)?,
            delta_long: describe(&s[2], opts.std)?,
        });
        samples.push((d, s));
    }
    let mut comparisons = Vec::new();
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            for (q, quantity) in Quantity::ALL.into_iter().enumerate() {
                comparisons.push(CohortComparison {
                    quantity,
                    a: samples[i].0,
                    b: samples[j].0,
                    test: stats::mann_whitney(&samples[i].1[q], &samples[j].1[q], opts.mw_mode)?,
                });
            }
        }
    }
    Ok(CohortTable {
        rows,
        comparisons,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptiveReport {
    pub n_pairs: usize,
    pub n_disruptive: usize,
    pub fraction_disruptive: f64,
    pub disruptive: Option<Summary>,
    pub non_disruptive: Option<Summary>,
    /// Percentage difference between the two means.
    pub pct_delta: Option<f64>,
    /// Welch t-test of disruptive against non-disruptive scores; absent when
    /// either side has fewer than two pairs.
    pub t_test: Option<TestResult>,
}

/// Compares adjacent-pair scores of disruptive and non-disruptive pairs.
pub fn disruptive_analysis(scores: &[AdjacentScore], std: StdConvention) -> Result<DisruptiveReport> {
    if scores.is_empty() {
        return Err(Error::Empty("no adjacent pairs for the disruptive analysis".into()));
    }
    let (d, nd): (Vec<&AdjacentScore>, Vec<&AdjacentScore>) = scores.iter().partition(|s| s.disruptive);
    let d: Vec<f64> = d.iter().map(|s| s.score).collect();
    let nd: Vec<f64> = nd.iter().map(|s| s.score).collect();
    let summary = |xs: &[f64]| if xs.is_empty() { Ok(None) } else { describe(xs, std).map(Some) };
    let (sd, snd) = (summary(&d)?, summary(&nd)?);
    let pct = match (sd, snd) {
        (Some(a), Some(b)) => pct_delta(a.mean, b.mean).ok(),
        _ => None,
    };
    let t = if d.len() >= 2 && nd.len() >= 2 {
        Some(stats::t_test(&d, &nd)?)
    } else {
        None
    };
    Ok(DisruptiveReport {
        n_pairs: scores.len(),
        n_disruptive: d.len(),
        fraction_disruptive: d.len() as f64 / scores.len() as f64,
        disruptive: sd,
        non_disruptive: snd,
        pct_delta: pct,
        t_test: t,
    })
}

fn fmt_summary(s: &Summary) -> String {
    format!("{} ({})", fmt_score(s.mean), fmt_score(s.std))
}

/// `subject_id, diagnosis, visit_index, marker` per visit.
pub fn write_marker_table(set: &SeriesSet, path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = set
        .series
        .iter()
        .flat_map(|s| {
            s.visits.iter().map(move |(v, m)| {
                vec![
                    s.subject_id.clone(),
                    s.diagnosis.as_str().to_string(),
                    v.to_string(),
                    format!("{m:.6}"),
                ]
            })
        })
        .collect();
    write_table(path, &["subject_id", "diagnosis", "visit_index", "marker"], &rows)
}

/// Cohort rows (mean (std) per quantity) followed by one row per pairwise
/// comparison.
pub fn write_cohort_table(table: &CohortTable, path: &Path) -> Result<()> {
    let mut rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                "cohort".to_string(),
                r.cohort.as_str().to_string(),
                r.n_subjects.to_string(),
                r.n_narratives.to_string(),
                fmt_summary(&r.marker),
                fmt_summary(&r.delta_end_start),
                fmt_summary(&r.delta_long),
                NULL_MARKER.to_string(),
                NULL_MARKER.to_string(),
            ]
        })
        .collect();
    for c in &table.comparisons {
        rows.push(vec![
            "comparison".to_string(),
            format!("{}:{}", c.a.as_str(), c.b.as_str()),
            NULL_MARKER.to_string(),
            NULL_MARKER.to_string(),
            NULL_MARKER.to_string(),
            NULL_MARKER.to_string(),
            c.quantity.as_str().to_string(),
            fmt_p(c.test.p_value),
            if c.significant() { "yes" } else { "no" }.to_string(),
        ]);
    }
    write_table(
        path,
        &[
            "kind",
            "cohort",
            "n_subjects",
            "n_narratives",
            "marker",
            "delta_end_start",
            "delta_long",
            "p_value",
            "significant",
        ],
        &rows,
    )
}

pub fn write_disruptive_table(report: &DisruptiveReport, path: &Path) -> Result<()> {
    let opt = |s: &Option<Summary>| s.as_ref().map_or(NULL_MARKER.to_string(), fmt_summary);
    let row = vec![
        report.n_pairs.to_string(),
        report.n_disruptive.to_string(),
        fmt_pct(100.0 * report.fraction_disruptive),
        opt(&report.disruptive),
        opt(&report.non_disruptive),
        report.pct_delta.map_or(NULL_MARKER.to_string(), fmt_pct),
        report.t_test.map_or(NULL_MARKER.to_string(), |t| fmt_p(t.p_value)),
        report
            .t_test
            .map_or(NULL_MARKER, |t| if t.significant() { "yes" } else { "no" })
            .to_string(),
    ];
    write_table(
        path,
        &[
            "n_pairs",
            "n_disruptive",
            "disruptive_pct",
            "disruptive",
            "non_disruptive",
            "pct_delta",
            "t_test_p",
            "significant",
        ],
        &[row],
    )
}
