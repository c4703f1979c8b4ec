//! Association between clinical biomarker change and coherence-marker
//! change: subjects are binned by biomarker, and each bin reports the mean
//! (std) end-minus-start marker change with cross-bin Mann-Whitney tests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Corpus;
use crate::marker::{delta_end_start, MarkerSeries};
use crate::metrics::{fmt_p, fmt_score, write_table, NULL_MARKER};
use crate::stats::{self, describe, MwMode, StdConvention, Summary, TestResult};

pub const UNBINNED: &str = "unbinned";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Biomarker {
    /// MMSE at the last visit minus MMSE at the first.
    MmseDelta,
    /// CDR at the last visit minus CDR at the first.
    CdrDelta,
    /// Last available HDR record.
    HdrLast,
}

impl Biomarker {
    pub const ALL: [Biomarker; 3] = [Biomarker::MmseDelta, Biomarker::CdrDelta, Biomarker::HdrLast];

    pub fn as_str(self) -> &'static str {
        match self {
            Biomarker::MmseDelta => "mmse_delta",
            Biomarker::CdrDelta => "cdr_delta",
            Biomarker::HdrLast => "hdr_last",
        }
    }
}

impl fmt::Display for Biomarker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Biomarker {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "mmse_delta" | "mmse" => Ok(Biomarker::MmseDelta),
            "cdr_delta" | "cdr" => Ok(Biomarker::CdrDelta),
            "hdr_last" | "hdr" => Ok(Biomarker::HdrLast),
            other => Err(Error::Config(format!("unknown biomarker {other:?}"))),
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    #[serde(default = "yes")]
    pub lo_inclusive: bool,
    #[serde(default = "yes")]
    pub hi_inclusive: bool,
}

impl Bin {
    pub fn closed(label: &str, lo: f64, hi: f64) -> Self {
        Bin {
            label: label.into(),
            lo,
            hi,
            lo_inclusive: true,
            hi_inclusive: true,
        }
    }

    /// `(lo, hi]`
    pub fn left_open(label: &str, lo: f64, hi: f64) -> Self {
        Bin {
            lo_inclusive: false,
            ..Bin::closed(label, lo, hi)
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        let above = if self.lo_inclusive { v >= self.lo } else { v > self.lo };
        let below = if self.hi_inclusive { v <= self.hi } else { v < self.hi };
        above && below
    }

    fn overlaps(&self, o: &Bin) -> bool {
        let lo = self.lo.max(o.lo);
        let hi = self.hi.min(o.hi);
        if lo < hi {
            return true;
        }
        lo == hi && self.contains(lo) && o.contains(lo)
    }

    /// Interval notation, e.g. `[-6, 2]` or `(0.5, 1.5]`.
    pub fn interval(&self) -> String {
        format!(
            "{}{}, {}{}",
            if self.lo_inclusive { '[' } else { '(' },
            self.lo,
            self.hi,
            if self.hi_inclusive { ']' } else { ')' }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub biomarker: Biomarker,
    pub bins: Vec<Bin>,
}

impl BinSpec {
    /// Validates that bins are non-empty intervals, pairwise disjoint, and
    /// uniquely labelled.
    pub fn new(biomarker: Biomarker, bins: Vec<Bin>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Config(format!("{biomarker}: no bins")));
        }
        for (i, b) in bins.iter().enumerate() {
            let empty = b.lo > b.hi || (b.lo == b.hi && !(b.lo_inclusive && b.hi_inclusive));
            if empty || !b.lo.is_finite() || !b.hi.is_finite() {
                return Err(Error::Config(format!("{biomarker}: bin {} is empty or unbounded", b.label)));
            }
            if b.label == UNBINNED {
                return Err(Error::Config(format!("{biomarker}: label {UNBINNED:?} is reserved")));
            }
            for o in &bins[..i] {
                if o.label == b.label {
                    return Err(Error::Config(format!("{biomarker}: duplicate bin label {}", b.label)));
                }
                if o.overlaps(b) {
                    return Err(Error::Config(format!(
                        "{biomarker}: bins {} and {} overlap",
                        o.label, b.label
                    )));
                }
            }
        }
        Ok(BinSpec { biomarker, bins })
    }

    pub fn labels(&self) -> Vec<&str> {
        self.bins.iter().map(|b| b.label.as_str()).collect()
    }
}

pub fn default_bins(biomarker: Biomarker) -> BinSpec {
    let bins = match biomarker {
        Biomarker::MmseDelta => vec![
            Bin::closed("Low", -6.0, 2.0),
            Bin::closed("Minor", -12.0, -7.0),
            Bin::closed("Moderate", -18.0, -13.0),
            Bin::closed("Severe", -27.0, -19.0),
        ],
        Biomarker::CdrDelta => vec![
            Bin::closed("Low", 0.0, 0.5),
            Bin::left_open("Minor", 0.5, 1.5),
            Bin::left_open("Moderate", 1.5, 2.5),
            Bin::left_open("Severe", 2.5, 3.0),
        ],
        Biomarker::HdrLast => vec![
            Bin::closed("NoDepression", 0.0, 7.0),
            Bin::closed("Mild", 8.0, 16.0),
            Bin::closed("Moderate", 17.0, 23.0),
        ],
    };
    BinSpec::new(biomarker, bins).expect("default bins are valid")
}

/// The label of the bin containing `value`, or [`UNBINNED`].
pub fn assign_bin<'a>(value: f64, spec: &'a BinSpec) -> &'a str {
    spec.bins
        .iter()
        .find(|b| b.contains(value))
        .map_or(UNBINNED, |b| b.label.as_str())
}

/// A subject's biomarker records by visit, in visit order.
pub type VisitRecords = Vec<(u32, Option<f64>)>;

/// Per-subject records of one biomarker, read from session metadata.
pub fn biomarker_records(corpus: &Corpus, biomarker: Biomarker) -> BTreeMap<String, VisitRecords> {
    corpus
        .by_subject()
        .into_iter()
        .map(|(subject, narratives)| {
            let mut visits: VisitRecords = narratives
                .iter()
                .map(|n| {
                    let m = &n.meta;
                    let v = match biomarker {
                        Biomarker::MmseDelta => m.mmse.map(f64::from),
                        Biomarker::CdrDelta => m.cdr,
                        Biomarker::HdrLast => m.hdr.map(f64::from),
                    };
                    (m.visit_index, v)
                })
                .collect();
            visits.sort_by_key(|v| v.0);
            (subject.to_string(), visits)
        })
        .collect()
}

/// The biomarker value used for binning: last minus first visit for
/// deltas (both must be recorded), the last available record for HDR.
pub fn biomarker_value(records: &[(u32, Option<f64>)], biomarker: Biomarker) -> Option<f64> {
    match biomarker {
        Biomarker::HdrLast => records.iter().rev().find_map(|r| r.1),
        Biomarker::MmseDelta | Biomarker::CdrDelta => {
            if records.len() < 2 {
                return None;
            }
            Some(records.last()?.1? - records.first()?.1?)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationRow {
    pub label: String,
    pub interval: String,
    pub n_subjects: usize,
    /// Mean (std) of end-minus-start marker change; absent for empty bins.
    pub delta_coherence: Option<Summary>,
    pub subjects: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinComparison {
    pub a: String,
    pub b: String,
    pub test: TestResult,
}

impl BinComparison {
    pub fn significant(&self) -> bool {
        self.test.significant()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationTable {
    pub biomarker: Biomarker,
    pub rows: Vec<AssociationRow>,
    /// Subjects whose biomarker value falls outside every bin.
    pub unbinned: Vec<(String, f64)>,
    /// Subjects lacking the records the biomarker needs.
    pub missing: Vec<String>,
    /// Mann-Whitney tests between every pair of non-empty bins.
    pub comparisons: Vec<BinComparison>,
    pub total_subjects: usize,
}

impl AssociationTable {
    pub fn row(&self, label: &str) -> Option<&AssociationRow> {
        self.rows.iter().find(|r| r.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AssociationOptions {
    pub std: StdConvention,
    pub mw_mode: MwMode,
}

/// Bins every series by its subject's biomarker value and summarizes the
/// coherence-marker change per bin. Every subject lands in exactly one bin,
/// the unbinned list, or the missing list.
pub fn association_table(
    series: &[MarkerSeries],
    records: &BTreeMap<String, VisitRecords>,
    spec: &BinSpec,
    opts: AssociationOptions,
) -> Result<AssociationTable> {
    let mut members: Vec<(Vec<String>, Vec<f64>)> = vec![Default::default(); spec.bins.len()];
    let mut unbinned = Vec::new();
    let mut missing = Vec::new();
    for s in series {
        let delta = delta_end_start(s)?;
        let value = records
            .get(&s.subject_id)
            .and_then(|r| biomarker_value(r, spec.biomarker));
        let Some(value) = value else {
            missing.push(s.subject_id.clone());
            continue;
        };
        match spec.bins.iter().position(|b| b.contains(value)) {
            Some(i) => {
                members[i].0.push(s.subject_id.clone());
                members[i].1.push(delta);
            }
            None => unbinned.push((s.subject_id.clone(), value)),
        }
    }
    let rows = spec
        .bins
        .iter()
        .zip(&members)
        .map(|(b, (subjects, deltas))| {
            Ok(AssociationRow {
                label: b.label.clone(),
                interval: b.interval(),
                n_subjects: subjects.len(),
                delta_coherence: if deltas.is_empty() {
                    None
                } else {
                    Some(describe(deltas, opts.std)?)
                },
                subjects: subjects.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            if members[i].1.is_empty() || members[j].1.is_empty() {
                continue;
            }
            comparisons.push(BinComparison {
                a: spec.bins[i].label.clone(),
                b: spec.bins[j].label.clone(),
                test: stats::mann_whitney(&members[i].1, &members[j].1, opts.mw_mode)?,
            });
        }
    }
    Ok(AssociationTable {
        biomarker: spec.biomarker,
        rows,
        unbinned,
        missing,
        comparisons,
        total_subjects: series.len(),
    })
}

pub const INSUFFICIENT_DATA: &str = "insufficient data";

impl AssociationTable {
    /// No subject could be binned.
    pub fn is_insufficient(&self) -> bool {
        self.rows.iter().all(|r| r.n_subjects == 0)
    }
}

fn association_cells(table: &AssociationTable) -> Vec<Vec<String>> {
    let bm = table.biomarker.as_str().to_string();
    let row = |cells: [&str; 7]| {
        std::iter::once(bm.clone())
            .chain(cells.iter().map(|c| c.to_string()))
            .collect::<Vec<_>>()
    };
    let null = NULL_MARKER;
    let mut rows = Vec::new();
    if table.is_insufficient() {
        let n = table.total_subjects.to_string();
        rows.push(row(["stub", INSUFFICIENT_DATA, null, &n, null, null, null]));
        return rows;
    }
    for r in &table.rows {
        let delta = r.delta_coherence.map_or(null.to_string(), |s| {
            format!("{} ({})", fmt_score(s.mean), fmt_score(s.std))
        });
        rows.push(row(["bin", &r.label, &r.interval, &r.n_subjects.to_string(), &delta, null, null]));
    }
    for (label, n) in [(UNBINNED, table.unbinned.len()), ("missing", table.missing.len())] {
        rows.push(row([label, label, null, &n.to_string(), null, null, null]));
    }
    for c in &table.comparisons {
        let sig = if c.significant() { "yes" } else { "no" };
        rows.push(row(["comparison", &format!("{}:{}", c.a, c.b), null, null, null, &fmt_p(c.test.p_value), sig]));
    }
    rows
}

pub const ASSOCIATION_HEADER: [&str; 8] = [
    "biomarker",
    "kind",
    "bin",
    "interval",
    "n_subjects",
    "delta_coherence",
    "p_value",
    "significant",
];

/// Per table: one row per bin, the unbinned and missing counts, then one
/// row per bin comparison. A table where no subject could be binned is
/// written as a single "insufficient data" stub row.
pub fn write_association_tables(tables: &[AssociationTable], path: &Path) -> Result<()> {
    let rows: Vec<Vec<String>> = tables.iter().flat_map(association_cells).collect();
    write_table(path, &ASSOCIATION_HEADER, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Diagnosis;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn default_bin_shapes() {
        let m = default_bins(Biomarker::MmseDelta);
        assert_eq!(m.bins.len(), 4);
        assert_eq!(m.bins[3].label, "Severe");
        assert_eq!(m.bins[3].lo, -27.0);
        let h = default_bins(Biomarker::HdrLast);
        assert_eq!(h.bins.len(), 3);
        assert_eq!(h.bins[2].hi, 23.0);
        assert_eq!(default_bins(Biomarker::CdrDelta).bins[1].interval(), "(0.5, 1.5]");
        assert!("mmse".parse::<Biomarker>().is_ok());
        assert!(matches!("gait".parse::<Biomarker>(), Err(Error::Config(_))));
    }

    #[test]
    fn assignment_fixtures() {
        let m = default_bins(Biomarker::MmseDelta);
        let c = default_bins(Biomarker::CdrDelta);
        assert_eq!(assign_bin(-15.0, &m), "Moderate");
        assert_eq!(assign_bin(5.0, &m), UNBINNED);
        assert_eq!(assign_bin(3.0, &m), UNBINNED);
        assert_eq!(assign_bin(-6.5, &m), UNBINNED);
        assert_eq!(assign_bin(0.5, &c), "Low");
        assert_eq!(assign_bin(1.5, &c), "Minor");
        assert_eq!(assign_bin(1.5000001, &c), "Moderate");
        assert_eq!(assign_bin(f64::NAN, &c), UNBINNED);
    }

    /// Every bound, and a hair on either side, against an independent
    /// reading of the interval notation.
    #[test]
    fn boundary_sweep() {
        for bm in Biomarker::ALL {
            let spec = default_bins(bm);
            for b in &spec.bins {
                for edge in [b.lo, b.hi] {
                    for v in [edge - 1e-9, edge, edge + 1e-9] {
                        let expected: Vec<&str> = spec
                            .bins
                            .iter()
                            .filter(|x| {
                                let text = x.interval();
                                let lo_ok = if text.starts_with('[') { v >= x.lo } else { v > x.lo };
                                let hi_ok = if text.ends_with(']') { v <= x.hi } else { v < x.hi };
                                lo_ok && hi_ok
                            })
                            .map(|x| x.label.as_str())
                            .collect();
                        assert!(expected.len() <= 1);
                        assert_eq!(assign_bin(v, &spec), expected.first().copied().unwrap_or(UNBINNED));
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let over = vec![Bin::closed("a", 0.0, 1.0), Bin::closed("b", 1.0, 2.0)];
        assert!(BinSpec::new(Biomarker::CdrDelta, over).is_err());
        let touch = vec![Bin::closed("a", 0.0, 1.0), Bin::left_open("b", 1.0, 2.0)];
        assert!(BinSpec::new(Biomarker::CdrDelta, touch).is_ok());
        let dup = vec![Bin::closed("a", 0.0, 1.0), Bin::closed("a", 2.0, 3.0)];
        assert!(BinSpec::new(Biomarker::CdrDelta, dup).is_err());
        assert!(BinSpec::new(Biomarker::CdrDelta, vec![Bin::closed("a", 2.0, 1.0)]).is_err());
        assert!(BinSpec::new(Biomarker::CdrDelta, vec![]).is_err());
    }

    #[test]
    fn biomarker_value_rules() {
        let r = vec![(1, Some(28.0)), (2, None), (3, Some(20.0))];
        assert_eq!(biomarker_value(&r, Biomarker::MmseDelta), Some(-8.0));
        let gap = vec![(1, Some(28.0)), (2, Some(24.0)), (3, None)];
        assert_eq!(biomarker_value(&gap, Biomarker::MmseDelta), None);
        assert_eq!(biomarker_value(&gap, Biomarker::HdrLast), Some(24.0));
        assert_eq!(biomarker_value(&[(1, Some(3.0))], Biomarker::CdrDelta), None);
        assert_eq!(biomarker_value(&[(1, None)], Biomarker::HdrLast), None);
    }

    fn planted() -> (Vec<MarkerSeries>, BTreeMap<String, VisitRecords>) {
        let mut rng = seed::rng(11);
        let mut series = Vec::new();
        let mut records = BTreeMap::new();
        for (k, dmmse) in [-2.0, -9.0, -15.0, -22.0].into_iter().enumerate() {
            for i in 0..12 {
                let id = format!("s{k}{i:02}");
                let dcoh = 0.01 * dmmse + rng.random_range(-0.02..0.02);
                series.push(MarkerSeries {
                    subject_id: id.clone(),
                    diagnosis: Diagnosis::Ad,
                    visits: vec![(1, 0.6), (2, 0.6 + dcoh)],
                });
                records.insert(id, vec![(1, Some(28.0)), (2, Some(28.0 + dmmse))]);
            }
        }
        series.push(MarkerSeries {
            subject_id: "nodata".into(),
            diagnosis: Diagnosis::Ad,
            visits: vec![(1, 0.5), (2, 0.5)],
        });
        series.push(MarkerSeries {
            subject_id: "gain".into(),
            diagnosis: Diagnosis::Ad,
            visits: vec![(1, 0.5), (2, 0.5)],
        });
        records.insert("gain".into(), vec![(1, Some(20.0)), (2, Some(25.0))]);
        (series, records)
    }

    #[test]
    fn planted_monotone_trend() {
        let (series, records) = planted();
        let spec = default_bins(Biomarker::MmseDelta);
        let t = association_table(&series, &records, &spec, AssociationOptions::default()).unwrap();
        let means: Vec<f64> = t.rows.iter().map(|r| r.delta_coherence.unwrap().mean).collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
        assert!(t.rows.iter().all(|r| r.n_subjects == 12));
        assert_eq!(t.missing, vec!["nodata".to_string()]);
        assert_eq!(t.unbinned, vec![("gain".to_string(), 5.0)]);
        let n: usize = t.rows.iter().map(|r| r.n_subjects).sum();
        assert_eq!(n + t.unbinned.len() + t.missing.len(), t.total_subjects);
        assert_eq!(t.comparisons.len(), 6);
        assert!(t.comparisons.iter().all(|c| c.significant()));
    }

    #[test]
    fn empty_bin_row() {
        let (series, records) = planted();
        let spec = default_bins(Biomarker::CdrDelta);
        let t = association_table(&series, &records, &spec, AssociationOptions::default()).unwrap();
        assert!(t.rows.iter().all(|r| r.n_subjects == 0 && r.delta_coherence.is_none()));
        assert!(t.comparisons.is_empty());
        assert_eq!(t.missing.len(), 1);
        assert_eq!(t.unbinned.len(), series.len() - 1);
    }

    #[test]
    fn relabel_permutes_rows_only() {
        let (series, records) = planted();
        let spec = default_bins(Biomarker::MmseDelta);
        let mut relabeled = spec.clone();
        let labels = ["D", "C", "B", "A"];
        for (b, l) in relabeled.bins.iter_mut().zip(labels) {
            b.label = l.into();
        }
        relabeled.bins.reverse();
        let a = association_table(&series, &records, &spec, AssociationOptions::default()).unwrap();
        let b = association_table(&series, &records, &relabeled, AssociationOptions::default()).unwrap();
        for (orig, l) in a.rows.iter().zip(labels) {
            let r = b.row(l).unwrap();
            assert_eq!(r.n_subjects, orig.n_subjects);
            assert_eq!(r.delta_coherence, orig.delta_coherence);
            assert_eq!(r.interval, orig.interval);
        }
        let mut pa: Vec<u64> = a.comparisons.iter().map(|c| c.test.p_value.to_bits()).collect();
        let mut pb: Vec<u64> = b.comparisons.iter().map(|c| c.test.p_value.to_bits()).collect();
        pa.sort_unstable();
        pb.sort_unstable();
        assert_eq!(pa, pb);
    }

    #[test]
    fn export_lists_bins_and_counts() {
        let (series, records) = planted();
        let spec = default_bins(Biomarker::MmseDelta);
        let t = association_table(&series, &records, &spec, AssociationOptions::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("assoc.tsv");
        let stub = association_table(&series, &records, &default_bins(Biomarker::CdrDelta), Default::default()).unwrap();
        write_association_tables(&[t, stub], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4 + 2 + 6 + 1);
        assert!(lines[1].starts_with("mmse_delta\tbin\tLow\t[-6, 2]\t12\t"));
        assert_eq!(lines[5], "mmse_delta\tunbinned\tunbinned\t-\t1\t-\t-\t-");
        assert_eq!(lines[13], "cdr_delta\tstub\tinsufficient data\t-\t50\t-\t-\t-");
    }

    proptest! {
        #[test]
        fn assignment_total_and_unique(v in -40.0f64..40.0) {
            for bm in Biomarker::ALL {
                let spec = default_bins(bm);
                let hits = spec.bins.iter().filter(|b| b.contains(v)).count();
                prop_assert!(hits <= 1);
                let label = assign_bin(v, &spec);
                prop_assert_eq!(label == UNBINNED, hits == 0);
            }
        }
    }
}
