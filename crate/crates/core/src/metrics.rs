//! Evaluation of a scorer on coherent (`f+`) and incoherent (`f-`) pairs:
//! average scores, their percentage difference, temporal and entire
//! accuracy, and the significance of the gap.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::{PairLabel, UtterancePair};
use crate::stats::{self, MwMode, ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair: UtterancePair,
    pub score: f64,
    pub scorer: String,
}

/// Zips pairs with their scores.
pub fn scored(pairs: &[UtterancePair], scores: &[f64], scorer: &str) -> Result<Vec<ScoredPair>> {
    if pairs.len() != scores.len() {
        return Err(Error::DimensionMismatch {
            expected: pairs.len(),
            actual: scores.len(),
        });
    }
    Ok(pairs
        .iter()
        .zip(scores)
        .map(|(p, &score)| ScoredPair {
            pair: p.clone(),
            score,
            scorer: scorer.to_string(),
        })
        .collect())
}

/// `|a - b| / |(a + b) / 2| * 100`.
pub fn pct_delta(a: f64, b: f64) -> Result<f64> {
    let mean = (a + b) / 2.0;
    if mean == 0.0 {
        return Err(Error::Undefined(format!("percentage difference of {a} and {b}: zero mean")));
    }
    Ok((a - b).abs() / mean.abs() * 100.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemporalMode {
    /// The adjacent pair must beat the mean of its counterparts.
    #[default]
    MeanCounterpart,
    /// The adjacent pair must beat every counterpart.
    AllCounterparts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accuracy {
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    /// Anchors (as `narrative#index`) or narratives left out for lack of
    /// counterparts.
    pub excluded: Vec<String>,
}

/// Per anchor: the coherent score and the incoherent scores sharing it.
fn by_anchor(pairs: &[ScoredPair]) -> BTreeMap<(&str, usize), (Option<f64>, Vec<f64>)> {
    let mut out: BTreeMap<(&str, usize), (Option<f64>, Vec<f64>)> = BTreeMap::new();
    for p in pairs {
        let e = out.entry((p.pair.narrative_ref.as_str(), p.pair.anchor_index)).or_default();
        match p.pair.label {
            PairLabel::Coherent => e.0 = Some(p.score),
            PairLabel::Incoherent => e.1.push(p.score),
        }
    }
    out
}

/// Fraction of adjacent pairs that outscore their non-adjacent counterparts
/// (strictly; ties lose).
pub fn temporal_accuracy(pairs: &[ScoredPair], mode: TemporalMode) -> Result<Accuracy> {
    let mut correct = 0;
    let mut total = 0;
    let mut excluded = Vec::new();
    for ((narrative, anchor), (pos, negs)) in by_anchor(pairs) {
        let Some(pos) = pos else { continue };
        if negs.is_empty() {
            excluded.push(format!("{narrative}#{anchor}"));
            continue;
        }
        total += 1;
        let ok = match mode {
            TemporalMode::MeanCounterpart => pos > mean(&negs),
            TemporalMode::AllCounterparts => negs.iter().all(|&n| pos > n),
        };
        correct += usize::from(ok);
    }
    if total == 0 {
        return Err(Error::Empty("no adjacent pair has a non-adjacent counterpart".into()));
    }
    Ok(Accuracy {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        excluded,
    })
}

/// Fraction of narratives whose mean adjacent score strictly exceeds their
/// mean non-adjacent score.
pub fn entire_accuracy(pairs: &[ScoredPair]) -> Result<Accuracy> {
    let mut groups: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for p in pairs {
        let e = groups.entry(p.pair.narrative_ref.as_str()).or_default();
        match p.pair.label {
            PairLabel::Coherent => e.0.push(p.score),
            PairLabel::Incoherent => e.1.push(p.score),
        }
    }
    let mut correct = 0;
    let mut total = 0;
    let mut excluded = Vec::new();
    for (narrative, (pos, neg)) in groups {
        if pos.is_empty() || neg.is_empty() {
            excluded.push(narrative.to_string());
            continue;
        }
        total += 1;
        correct += usize::from(mean(&pos) > mean(&neg));
    }
    if total == 0 {
        return Err(Error::Empty("no narrative has both adjacent and non-adjacent pairs".into()));
    }
    Ok(Accuracy {
        accuracy: correct as f64 / total as f64,
        correct,
        total,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scorer: String,
    pub avg_f_pos: f64,
    pub avg_f_neg: f64,
    /// Percentage difference of the two averages.
    pub pct_delta: Option<f64>,
    /// Mean over anchors of the percentage difference between the adjacent
    /// score and the mean of its counterparts.
    pub pct_delta_pairwise: Option<f64>,
    /// Temporal accuracy, mean-counterpart rule.
    pub acc_temp: f64,
    /// Temporal accuracy, all-counterparts rule.
    pub acc_temp_all: f64,
    pub acc_entire: f64,
    pub avg_loss: Option<f64>,
    /// Mann-Whitney p-value of `f+` against `f-`.
    pub gap_p_value: f64,
    pub significant: bool,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// All columns for one scorer's scored test pairs.
pub fn metrics_row(scorer: &str, pairs: &[ScoredPair], avg_loss: Option<f64>) -> Result<MetricsRow> {
    let (pos, neg): (Vec<&ScoredPair>, Vec<&ScoredPair>) = pairs.iter().partition(|p| p.pair.label.is_coherent());
    let pos: Vec<f64> = pos.iter().map(|p| p.score).collect();
    let neg: Vec<f64> = neg.iter().map(|p| p.score).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty(format!("{scorer}: need both coherent and incoherent scores")));
    }
    let (avg_f_pos, avg_f_neg) = (mean(&pos), mean(&neg));
    let pairwise: Vec<f64> = by_anchor(pairs)
        .into_values()
        .filter_map(|(p, n)| match p {
            Some(p) if !n.is_empty() => pct_delta(p, mean(&n)).ok(),
            _ => None,
        })
        .collect();
    let gap = stats::mann_whitney(&pos, &neg, MwMode::Auto)?;
    Ok(MetricsRow {
        scorer: scorer.to_string(),
        avg_f_pos,
        avg_f_neg,
        pct_delta: pct_delta(avg_f_pos, avg_f_neg).ok(),
        pct_delta_pairwise: (!pairwise.is_empty()).then(|| mean(&pairwise)),
        acc_temp: temporal_accuracy(pairs, TemporalMode::MeanCounterpart)?.accuracy,
        acc_temp_all: temporal_accuracy(pairs, TemporalMode::AllCounterparts)?.accuracy,
        acc_entire: entire_accuracy(pairs)?.accuracy,
        avg_loss,
        gap_p_value: gap.p_value,
        significant: gap.significant(),
        n_pos: pos.len(),
        n_neg: neg.len(),
    })
}

/// One row per scorer; pairs are grouped by their `scorer` field and
/// `losses` supplies the optional loss column.
pub fn metrics_report(pairs: &[ScoredPair], losses: &BTreeMap<String, f64>) -> Result<Vec<MetricsRow>> {
    let mut groups: BTreeMap<&str, Vec<ScoredPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.scorer.as_str()).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(s, ps)| metrics_row(s, &ps, losses.get(s).copied()))
        .collect()
}

/// Averages the rows of repeated runs of one scorer. The gap p-value is the
/// largest of the runs, so the row is flagged only if every run is.
pub fn average_rows(scorer: &str, rows: &[MetricsRow]) -> Result<MetricsRow> {
    if rows.is_empty() {
        return Err(Error::Empty("metrics rows to average".into()));
    }
    let avg = |f: fn(&MetricsRow) -> f64| rows.iter().map(f).sum::<f64>() / rows.len() as f64;
    let avg_opt = |f: fn(&MetricsRow) -> Option<f64>| {
        let v: Option<Vec<f64>> = rows.iter().map(f).collect();
        v.map(|v| mean(&v))
    };
    let p = rows.iter().map(|r| r.gap_p_value).fold(0.0, f64::max);
    Ok(MetricsRow {
        scorer: scorer.to_string(),
        avg_f_pos: avg(|r| r.avg_f_pos),
        avg_f_neg: avg(|r| r.avg_f_neg),
        pct_delta: avg_opt(|r| r.pct_delta),
        pct_delta_pairwise: avg_opt(|r| r.pct_delta_pairwise),
        acc_temp: avg(|r| r.acc_temp),
        acc_temp_all: avg(|r| r.acc_temp_all),
        acc_entire: avg(|r| r.acc_entire),
        avg_loss: avg_opt(|r| r.avg_loss),
        gap_p_value: p,
        significant: p < ALPHA,
        n_pos: rows[0].n_pos,
        n_neg: rows[0].n_neg,
    })
}

pub const NULL_MARKER: &str = "-";

pub fn fmt_score(x: f64) -> String {
    format!("{x:.3}")
}

pub fn fmt_pct(x: f64) -> String {
    format!("{x:.1}")
}

pub fn fmt_p(p: f64) -> String {
    format!("{p:.3e}")
}

pub fn fmt_opt(x: Option<f64>, f: fn(f64) -> String) -> String {
    x.map_or_else(|| NULL_MARKER.to_string(), f)
}

pub const METRICS_HEADER: [&str; 13] = [
    "scorer",
    "avg_f_pos",
    "avg_f_neg",
    "pct_delta",
    "pct_delta_pairwise",
    "acc_temp_pct",
    "acc_temp_all_pct",
    "acc_entire_pct",
    "avg_loss",
    "gap_p_value",
    "significant",
    "n_pos",
    "n_neg",
];

/// Table cells: scores to 3 decimals, percentages (accuracies included)
/// to 1 decimal, `-` for missing values.
pub fn metrics_cells(r: &MetricsRow) -> Vec<String> {
    vec![
        r.scorer.clone(),
        fmt_score(r.avg_f_pos),
        fmt_score(r.avg_f_neg),
        fmt_opt(r.pct_delta, fmt_pct),
        fmt_opt(r.pct_delta_pairwise, fmt_pct),
        fmt_pct(100.0 * r.acc_temp),
        fmt_pct(100.0 * r.acc_temp_all),
        fmt_pct(100.0 * r.acc_entire),
        fmt_opt(r.avg_loss, fmt_score),
        fmt_p(r.gap_p_value),
        if r.significant { "yes" } else { "no" }.to_string(),
        r.n_pos.to_string(),
        r.n_neg.to_string(),
    ]
}

/// Writes a tab-delimited table with a header row.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .delimiter(b'\t')
        .from_path(path)
        .map_err(|e| Error::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_metrics_table(rows: &[MetricsRow], path: &Path) -> Result<()> {
    write_table(path, &METRICS_HEADER, &rows.iter().map(metrics_cells).collect::<Vec<_>>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sp(n: &str, i: usize, j: usize, score: f64) -> ScoredPair {
        ScoredPair {
            pair: UtterancePair::new(n, i, j).unwrap(),
            score,
            scorer: "s".into(),
        }
    }

    #[test]
    fn pct_delta_reported_figures() {
        assert!((pct_delta(0.64, 0.41).unwrap() - 43.8).abs() < 0.05);
        assert!((pct_delta(0.26, 0.19).unwrap() - 31.1).abs() < 0.05);
        assert_eq!(pct_delta(0.3, 0.3).unwrap(), 0.0);
        assert!(matches!(pct_delta(1.0, -1.0), Err(Error::Undefined(_))));
    }

    #[test]
    fn pct_delta_negative_scores_stay_positive() {
        let d = pct_delta(-380.0, -420.0).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
    }

    #[test]
    fn dominance_gives_full_accuracy() {
        let ps = vec![
            sp("a", 0, 1, 0.9),
            sp("a", 0, 2, 0.1),
            sp("a", 0, 3, 0.2),
            sp("a", 1, 2, 0.8),
            sp("a", 1, 3, 0.3),
            sp("a", 2, 3, 0.7),
        ];
        for mode in [TemporalMode::MeanCounterpart, TemporalMode::AllCounterparts] {
            let t = temporal_accuracy(&ps, mode).unwrap();
            assert_eq!((t.accuracy, t.correct, t.total), (1.0, 2, 2));
            assert_eq!(t.excluded, vec!["a#2".to_string()]);
        }
        assert_eq!(entire_accuracy(&ps).unwrap().accuracy, 1.0);
    }

    #[test]
    fn mean_versus_all_counterparts() {
        // f+ = 0.5 against {0.4, 0.7}: mean 0.55 beats it, and 0.7 beats it.
        let ps = vec![sp("a", 0, 1, 0.5), sp("a", 0, 2, 0.4), sp("a", 0, 3, 0.7)];
        assert_eq!(temporal_accuracy(&ps, TemporalMode::MeanCounterpart).unwrap().correct, 0);
        assert_eq!(temporal_accuracy(&ps, TemporalMode::AllCounterparts).unwrap().correct, 0);
        // 0.6 beats the mean 0.55 but not 0.7.
        let ps = vec![sp("a", 0, 1, 0.6), sp("a", 0, 2, 0.4), sp("a", 0, 3, 0.7)];
        assert_eq!(temporal_accuracy(&ps, TemporalMode::MeanCounterpart).unwrap().correct, 1);
        assert_eq!(temporal_accuracy(&ps, TemporalMode::AllCounterparts).unwrap().correct, 0);
    }

    #[test]
    fn entire_accuracy_fixtures() {
        // adjacent {0.6, 0.7} mean 0.65 against non-adjacent {0.3, 0.9} mean 0.6
        let ps = vec![sp("a", 0, 1, 0.6), sp("a", 1, 2, 0.7), sp("a", 0, 2, 0.3), sp("a", 0, 3, 0.9)];
        assert_eq!(entire_accuracy(&ps).unwrap().accuracy, 1.0);
        let ties = vec![sp("a", 0, 1, 0.5), sp("a", 0, 2, 0.5)];
        assert_eq!(entire_accuracy(&ties).unwrap().accuracy, 0.0);
        assert_eq!(temporal_accuracy(&ties, TemporalMode::MeanCounterpart).unwrap().accuracy, 0.0);
    }

    #[test]
    fn narratives_without_negatives_are_excluded() {
        let ps = vec![sp("a", 0, 1, 0.5), sp("b", 0, 1, 0.5), sp("b", 0, 2, 0.1)];
        let e = entire_accuracy(&ps).unwrap();
        assert_eq!((e.total, e.excluded.clone()), (1, vec!["a".to_string()]));
        assert!(matches!(entire_accuracy(&ps[..1]), Err(Error::Empty(_))));
        assert!(matches!(temporal_accuracy(&[], TemporalMode::MeanCounterpart), Err(Error::Empty(_))));
    }

    #[test]
    fn two_scorer_report_columns() {
        let mut ps = Vec::new();
        let mut raw: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (scorer, shift) in [("good", 1.0), ("flat", 0.0)] {
            for n in 0..6 {
                let narrative = format!("n{n}");
                for i in 0..4 {
                    for j in i + 1..5 {
                        let base = ((n * 7 + i * 3 + j) % 5) as f64 / 10.0;
                        let score = if j == i + 1 { base + shift } else { base };
                        let mut p = sp(&narrative, i, j, score);
                        p.scorer = scorer.into();
                        let e = raw.entry(scorer).or_default();
                        if j == i + 1 {
                            e.0.push(score)
                        } else {
                            e.1.push(score)
                        }
                        ps.push(p);
                    }
                }
            }
        }
        let losses = BTreeMap::from([("good".to_string(), 0.25)]);
        let rows = metrics_report(&ps, &losses).unwrap();
        assert_eq!(rows.len(), 2);
        let flat = &rows[0];
        let good = &rows[1];
        assert_eq!((flat.scorer.as_str(), good.scorer.as_str()), ("flat", "good"));
        for r in &rows {
            let (pos, neg) = &raw[r.scorer.as_str()];
            let mp = pos.iter().sum::<f64>() / pos.len() as f64;
            let mn = neg.iter().sum::<f64>() / neg.len() as f64;
            assert!((r.avg_f_pos - mp).abs() < 1e-12);
            assert!((r.avg_f_neg - mn).abs() < 1e-12);
            assert!((r.pct_delta.unwrap() - (mp - mn).abs() / ((mp + mn) / 2.0) * 100.0).abs() < 1e-9);
            assert_eq!((r.n_pos, r.n_neg), (24, 36));
        }
        assert_eq!(good.acc_temp, 1.0);
        assert_eq!(good.acc_entire, 1.0);
        assert!(good.significant);
        assert_eq!(good.avg_loss, Some(0.25));
        assert_eq!(flat.avg_loss, None);
        assert_eq!(metrics_cells(flat)[8], "-");
    }

    #[test]
    fn identical_distributions_not_significant() {
        let mut ps = Vec::new();
        for n in 0..4 {
            let narrative = format!("n{n}");
            ps.push(sp(&narrative, 0, 1, 0.1 * n as f64));
            ps.push(sp(&narrative, 0, 2, 0.1 * n as f64));
        }
        let r = metrics_row("s", &ps, None).unwrap();
        assert!(!r.significant);
        assert_eq!(r.pct_delta, Some(0.0));
    }

    #[test]
    fn averaging_runs() {
        let row = |p: f64, acc: f64| MetricsRow {
            scorer: "x".into(),
            avg_f_pos: acc,
            avg_f_neg: 0.0,
            pct_delta: Some(10.0),
            pct_delta_pairwise: None,
            acc_temp: acc,
            acc_temp_all: acc,
            acc_entire: 1.0,
            avg_loss: Some(acc),
            gap_p_value: p,
            significant: p < 0.05,
            n_pos: 3,
            n_neg: 3,
        };
        let a = average_rows("x", &[row(0.01, 0.8), row(0.2, 0.6)]).unwrap();
        assert!((a.acc_temp - 0.7).abs() < 1e-12);
        assert_eq!(a.gap_p_value, 0.2);
        assert!(!a.significant);
        assert_eq!(a.pct_delta_pairwise, None);
    }

    #[test]
    fn cell_formatting() {
        assert_eq!(fmt_score(0.6036), "0.604");
        assert_eq!(fmt_pct(43.82), "43.8");
        assert_eq!(fmt_p(0.000123456), "1.235e-4");
    }

    fn random_pairs() -> impl Strategy<Value = Vec<ScoredPair>> {
        (3usize..7, prop::collection::vec(-5.0f64..5.0, 15)).prop_map(|(k, scores)| {
            let mut out = Vec::new();
            let mut it = scores.into_iter().cycle();
            for i in 0..k {
                for j in i + 1..k {
                    out.push(sp("n", i, j, it.next().unwrap()));
                }
            }
            out
        })
    }

    proptest! {
        #[test]
        fn pct_delta_symmetric_and_scale_free(a in 0.01f64..10.0, b in 0.01f64..10.0, c in 0.1f64..100.0) {
            let d = pct_delta(a, b).unwrap();
            prop_assert_eq!(d, pct_delta(b, a).unwrap());
            prop_assert!((pct_delta(c * a, c * b).unwrap() - d).abs() <= 1e-9 * (1.0 + d));
            prop_assert!(d >= 0.0);
        }

        #[test]
        fn all_rule_never_beats_mean_rule(ps in random_pairs()) {
            let mean = temporal_accuracy(&ps, TemporalMode::MeanCounterpart).unwrap().accuracy;
            let all = temporal_accuracy(&ps, TemporalMode::AllCounterparts).unwrap().accuracy;
            prop_assert!(all <= mean);
        }

        #[test]
        fn accuracies_ignore_constant_shift(ps in random_pairs(), c in -3i32..3) {
            // Shifts by whole numbers keep every comparison exact.
            let shifted: Vec<ScoredPair> = ps.iter().map(|p| ScoredPair { score: p.score + c as f64, ..p.clone() }).collect();
            for mode in [TemporalMode::MeanCounterpart, TemporalMode::AllCounterparts] {
                prop_assert_eq!(
                    temporal_accuracy(&ps, mode).unwrap().correct,
                    temporal_accuracy(&shifted, mode).unwrap().correct
                );
            }
            prop_assert_eq!(entire_accuracy(&ps).unwrap().correct, entire_accuracy(&shifted).unwrap().correct);
        }
    }
}
