//! Transcript ingestion: CHAT-style session files into [`Narrative`]s.
//!
//! Two dialects are understood. Both share the tier syntax (`@KEY: value`
//! headers, `*SPK:` utterance tiers, `%xxx:` dependent tiers, tab-indented
//! continuation lines); they differ in where session metadata comes from.
//!
//! * [`Dialect::KeyValue`] reads `@ID: subject=017; visit=2; dx=AD; mmse=21`.
//! * [`Dialect::Chat`] reads the CLAN pipe-delimited `@ID` line of the
//!   subject speaker for the diagnosis group, and takes subject and visit from
//!   a `NNN-V` file stem (0-based visit number), as in DementiaBank session
//!   files.

mod metadata;
mod normalize;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use metadata::{read_metadata_table, MetadataRow};
pub use normalize::{normalize_text, NormalizedText, EXCLUSION_CODE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Diagnosis {
    Healthy,
    Mci,
    Ad,
    Other,
}

impl Diagnosis {
    pub const ALL: [Diagnosis; 4] = [
        Diagnosis::Healthy,
        Diagnosis::Mci,
        Diagnosis::Ad,
        Diagnosis::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Diagnosis::Healthy => "healthy",
            Diagnosis::Mci => "mci",
            Diagnosis::Ad => "ad",
            Diagnosis::Other => "other",
        }
    }

    /// Lenient mapping used for header and table values; CLAN group names
    /// (`Control`, `ProbableAD`, `PossibleAD`, `MCI`) are recognized.
    pub fn parse_lenient(s: &str) -> Diagnosis {
        match s.trim().to_ascii_lowercase().as_str() {
            "healthy" | "control" | "hc" | "ctrl" => Diagnosis::Healthy,
            "mci" => Diagnosis::Mci,
            "ad" | "probablead" | "possiblead" | "alzheimer" | "dementia" => Diagnosis::Ad,
            _ => Diagnosis::Other,
        }
    }
}

impl fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker: String,
    pub words: Vec<String>,
    pub disruptive: bool,
    pub raw: String,
}

impl Utterance {
    pub fn text(&self) -> String {
        self.words.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub subject_id: String,
    pub visit_index: u32,
    pub diagnosis: Diagnosis,
    pub mmse: Option<u32>,
    pub cdr: Option<f64>,
    pub hdr: Option<u32>,
}

impl SessionMeta {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.subject_id.is_empty() {
            return Err("empty subject id".into());
        }
        if self.visit_index == 0 {
            return Err("visit index is 1-based".into());
        }
        if let Some(m) = self.mmse {
            if m > 30 {
                return Err(format!("mmse {m} outside [0, 30]"));
            }
        }
        if let Some(c) = self.cdr {
            if !(0.0..=3.0).contains(&c) {
                return Err(format!("cdr {c} outside [0, 3]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Narrative {
    pub meta: SessionMeta,
    pub utterances: Vec<Utterance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Narrative {
    /// Stable identifier `<subject>/<visit>` used by pair files and reports.
    pub fn id(&self) -> String {
        narrative_ref(&self.meta.subject_id, self.meta.visit_index)
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.utterances.iter().map(Utterance::text).collect()
    }
}

pub fn narrative_ref(subject_id: &str, visit_index: u32) -> String {
    format!("{subject_id}/{visit_index}")
}

/// Narratives ordered by `(subject_id, visit_index)`; that pair is unique.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    narratives: Vec<Narrative>,
}

impl Corpus {
    pub fn new(mut narratives: Vec<Narrative>) -> Result<Self> {
        narratives.sort_by(|a, b| {
            (&a.meta.subject_id, a.meta.visit_index).cmp(&(&b.meta.subject_id, b.meta.visit_index))
        });
        for w in narratives.windows(2) {
            if w[0].meta.subject_id == w[1].meta.subject_id
                && w[0].meta.visit_index == w[1].meta.visit_index
            {
                return Err(Error::DuplicateNarrative {
                    subject_id: w[0].meta.subject_id.clone(),
                    visit_index: w[0].meta.visit_index,
                    first: w[0].source.clone().unwrap_or_default().into(),
                    second: w[1].source.clone().unwrap_or_default().into(),
                });
            }
        }
        Ok(Corpus { narratives })
    }

    pub fn narratives(&self) -> &[Narrative] {
        &self.narratives
    }

    pub fn len(&self) -> usize {
        self.narratives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.narratives.is_empty()
    }

    pub fn get(&self, narrative_ref: &str) -> Option<&Narrative> {
        self.narratives.iter().find(|n| n.id() == narrative_ref)
    }

    /// Narratives grouped by subject, visits ascending.
    pub fn by_subject(&self) -> BTreeMap<&str, Vec<&Narrative>> {
        let mut out: BTreeMap<&str, Vec<&Narrative>> = BTreeMap::new();
        for n in &self.narratives {
            out.entry(n.meta.subject_id.as_str()).or_default().push(n);
        }
        out
    }

    pub fn subject_ids(&self) -> Vec<&str> {
        self.by_subject().into_keys().collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&Narrative) -> bool) -> Corpus {
        Corpus {
            narratives: self.narratives.iter().filter(|n| keep(n)).cloned().collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Corpus = serde_json::from_str(s)?;
        Corpus::new(c.narratives)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dialect {
    KeyValue,
    Chat,
}

impl FromStr for Dialect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kv" | "key-value" => Ok(Dialect::KeyValue),
            "chat" | "cha" => Ok(Dialect::Chat),
            other => Err(Error::Config(format!("unknown transcript dialect {other:?}"))),
        }
    }
}

impl fmt::Display for Dialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dialect::KeyValue => "kv",
            Dialect::Chat => "chat",
        })
    }
}

/// Per-file bookkeeping produced alongside a [`Narrative`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub source: Option<String>,
    pub kept_utterances: usize,
    pub dropped_empty: usize,
    pub exclusion_coded: usize,
    pub other_speaker_lines: usize,
    pub warnings: Vec<String>,
}

const BARE_HEADERS: &[&str] = &["@Begin", "@End", "@UTF8", "@New Episode", "@Blank", "@Bg", "@Eg"];

#[derive(Debug, Clone)]
pub struct TranscriptParser {
    dialect: Dialect,
    speakers: BTreeSet<String>,
}

impl TranscriptParser {
    pub fn new(dialect: Dialect) -> Self {
        TranscriptParser {
            dialect,
            speakers: BTreeSet::from(["PAR".to_owned()]),
        }
    }

    /// Speaker codes whose tiers become utterances. Defaults to `PAR`.
    pub fn speakers<I, S>(mut self, speakers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.speakers = speakers.into_iter().map(Into::into).collect();
        self
    }

    pub fn dialect(&self) -> Dialect {
        self.dialect
    }

    /// Parses one transcript. `name` is the file stem, used by the CHAT
    /// dialect (and as a fallback by the key-value one) for subject and visit.
    pub fn parse(&self, raw: &str, name: Option<&str>) -> Result<(Narrative, ParseReport)> {
        let mut report = ParseReport {
            source: name.map(str::to_owned),
            ..Default::default()
        };
        let mut header = HeaderFields::default();
        let mut tiers: Vec<(usize, String, String)> = Vec::new(); // (line, speaker, raw line)
        let mut in_dependent = false;

        for (lineno, line) in raw.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line.trim_start_matches('\u{feff}').trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            if line.starts_with('\t') || line.starts_with(' ') {
                if in_dependent {
                    continue;
                }
                match tiers.last_mut() {
                    Some((_, _, text)) => {
                        text.push('\n');
                        text.push_str(line);
                    }
                    None => report
                        .warnings
                        .push(format!("line {lineno}: continuation without a tier, ignored")),
                }
                continue;
            }
            in_dependent = false;
            if line.starts_with('@') {
                if BARE_HEADERS.iter().any(|h| line.trim() == *h) {
                    continue;
                }
                let Some((key, value)) = line.split_once(':') else {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("malformed header {line:?}"),
                    });
                };
                self.header_line(key.trim(), value.trim(), lineno, &mut header, &mut report)?;
            } else if let Some(rest) = line.strip_prefix('*') {
                let Some((speaker, _)) = rest.split_once(':') else {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("malformed utterance tier {line:?}"),
                    });
                };
                tiers.push((lineno, speaker.trim().to_owned(), line.to_owned()));
            } else if line.starts_with('%') {
                in_dependent = true;
            } else {
                report
                    .warnings
                    .push(format!("line {lineno}: outside the supported dialect, ignored"));
            }
        }

        for w in &report.warnings {
            log::warn!("{}: {w}", name.unwrap_or("<transcript>"));
        }

        let mut utterances = Vec::new();
        for (_, speaker, line) in tiers {
            if !self.speakers.contains(&speaker) {
                report.other_speaker_lines += 1;
                continue;
            }
            let body = line.split_once(':').map(|(_, b)| b).unwrap_or_default();
            let norm = normalize_text(body);
            if norm.has_exclusion() {
                report.exclusion_coded += 1;
            }
            if norm.is_empty() {
                report.dropped_empty += 1;
                continue;
            }
            utterances.push(Utterance {
                index: utterances.len(),
                disruptive: norm.has_exclusion(),
                speaker,
                words: norm.tokens,
                raw: line,
            });
        }
        if utterances.is_empty() {
            return Err(Error::NoUtterances);
        }
        let meta = header.into_meta(self.dialect, name)?;
        report.kept_utterances = utterances.len();
        Ok((
            Narrative {
                meta,
                utterances,
                source: name.map(str::to_owned),
            },
            report,
        ))
    }

    fn header_line(
        &self,
        key: &str,
        value: &str,
        lineno: usize,
        header: &mut HeaderFields,
        report: &mut ParseReport,
    ) -> Result<()> {
        if key != "@ID" {
            return Ok(());
        }
        let bad = |message: String| Error::Parse {
            line: lineno,
            message,
        };
        match self.dialect {
            Dialect::KeyValue => {
                for field in value.split(';').map(str::trim).filter(|f| !f.is_empty()) {
                    let Some((k, v)) = field.split_once('=') else {
                        return Err(bad(format!("malformed @ID field {field:?}")));
                    };
                    let (k, v) = (k.trim().to_ascii_lowercase(), v.trim());
                    match k.as_str() {
                        "subject" | "subject_id" => header.subject_id = Some(v.to_owned()),
                        "visit" | "visit_index" => {
                            header.visit = Some(v.parse().map_err(|_| bad(format!("bad visit {v:?}")))?)
                        }
                        "dx" | "diagnosis" => header.diagnosis = Some(Diagnosis::parse_lenient(v)),
                        "mmse" => header.mmse = Some(v.parse().map_err(|_| bad(format!("bad mmse {v:?}")))?),
                        "cdr" => header.cdr = Some(v.parse().map_err(|_| bad(format!("bad cdr {v:?}")))?),
                        "hdr" => header.hdr = Some(v.parse().map_err(|_| bad(format!("bad hdr {v:?}")))?),
                        _ => report
                            .warnings
                            .push(format!("line {lineno}: unknown @ID key {k:?}, ignored")),
                    }
                }
            }
            Dialect::Chat => {
                let fields: Vec<&str> = value.split('|').collect();
                if fields.len() < 8 {
                    return Err(bad(format!("@ID needs at least 8 '|' fields, got {}", fields.len())));
                }
                if self.speakers.contains(fields[2].trim()) && header.diagnosis.is_none() {
                    header.diagnosis = Some(Diagnosis::parse_lenient(fields[5]));
                }
            }
        }
        header.line = header.line.or(Some(lineno));
        Ok(())
    }
}

#[derive(Default)]
struct HeaderFields {
    line: Option<usize>,
    subject_id: Option<String>,
    visit: Option<u32>,
    diagnosis: Option<Diagnosis>,
    mmse: Option<u32>,
    cdr: Option<f64>,
    hdr: Option<u32>,
}

impl HeaderFields {
    fn into_meta(self, dialect: Dialect, name: Option<&str>) -> Result<SessionMeta> {
        let from_name = name.and_then(subject_visit_from_stem);
        let (subject_id, visit_index) = match dialect {
            Dialect::KeyValue => (
                self.subject_id.or(from_name.as_ref().map(|(s, _)| s.clone())),
                self.visit.or(from_name.as_ref().map(|(_, v)| *v)),
            ),
            Dialect::Chat => (
                from_name.as_ref().map(|(s, _)| s.clone()),
                from_name.as_ref().map(|(_, v)| *v),
            ),
        };
        let line = self.line.unwrap_or(0);
        let meta = SessionMeta {
            subject_id: subject_id.ok_or_else(|| Error::Parse {
                line,
                message: "missing subject id".into(),
            })?,
            visit_index: visit_index.unwrap_or(1),
            diagnosis: self.diagnosis.unwrap_or(Diagnosis::Other),
            mmse: self.mmse,
            cdr: self.cdr,
            hdr: self.hdr,
        };
        meta.validate().map_err(|message| Error::Parse { line, message })?;
        Ok(meta)
    }
}

/// `017-1` -> ("017", 2): DementiaBank stems carry a 0-based visit number.
fn subject_visit_from_stem(stem: &str) -> Option<(String, u32)> {
    let (subject, visit) = stem.rsplit_once('-')?;
    let visit: u32 = visit.parse().ok()?;
    (!subject.is_empty()).then(|| (subject.to_owned(), visit + 1))
}

/// Parses one transcript with default options (subject speaker `PAR`).
pub fn parse_transcript(raw: &str, dialect: Dialect) -> Result<Narrative> {
    TranscriptParser::new(dialect).parse(raw, None).map(|(n, _)| n)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files: usize,
    pub narratives: usize,
    pub subjects: usize,
    pub utterances: usize,
    pub dropped_empty: usize,
    pub exclusion_coded: usize,
    pub metadata_rows_applied: usize,
    pub warnings: Vec<String>,
    pub per_file: Vec<ParseReport>,
}

/// Transcript files under `root` (recursively): `.cha` and `.txt`, sorted.
pub fn transcript_files(root: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        let entries = std::fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| Error::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(
                path.extension().and_then(|e| e.to_str()),
                Some("cha") | Some("txt")
            ) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every transcript under `root` into a [`Corpus`]. Values from the
/// optional metadata table override header values.
pub fn load_cohort(
    root: &Path,
    metadata: Option<&Path>,
    parser: &TranscriptParser,
) -> Result<(Corpus, IngestReport)> {
    let files = transcript_files(root)?;
    let parsed: Vec<(PathBuf, Narrative, ParseReport)> = files
        .par_iter()
        .map(|path| {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let stem = path.file_stem().and_then(|s| s.to_str());
            let (mut n, mut r) = parser.parse(&raw, stem).map_err(|e| Error::File {
                path: path.clone(),
                message: e.to_string(),
            })?;
            n.source = Some(path.display().to_string());
            r.source = n.source.clone();
            Ok((path.clone(), n, r))
        })
        .collect::<Result<_>>()?;

    let mut seen: BTreeMap<(String, u32), PathBuf> = BTreeMap::new();
    for (path, n, _) in &parsed {
        let key = (n.meta.subject_id.clone(), n.meta.visit_index);
        if let Some(first) = seen.insert(key.clone(), path.clone()) {
            return Err(Error::DuplicateNarrative {
                subject_id: key.0,
                visit_index: key.1,
                first,
                second: path.clone(),
            });
        }
    }

    let mut report = IngestReport {
        files: files.len(),
        ..Default::default()
    };
    let mut narratives = Vec::with_capacity(parsed.len());
    for (_, n, r) in parsed {
        report.utterances += r.kept_utterances;
        report.dropped_empty += r.dropped_empty;
        report.exclusion_coded += r.exclusion_coded;
        report
            .warnings
            .extend(r.warnings.iter().map(|w| format!("{}: {w}", r.source.as_deref().unwrap_or("?"))));
        report.per_file.push(r);
        narratives.push(n);
    }

    if let Some(table) = metadata {
        let rows = read_metadata_table(table)?;
        let mut by_key: BTreeMap<(String, u32), &MetadataRow> = BTreeMap::new();
        for row in &rows {
            by_key.insert((row.subject_id.clone(), row.visit_index), row);
        }
        for n in &mut narratives {
            if let Some(row) = by_key.remove(&(n.meta.subject_id.clone(), n.meta.visit_index)) {
                row.apply(&mut n.meta);
                n.meta.validate().map_err(|message| Error::File {
                    path: table.to_path_buf(),
                    message: format!("{}: {message}", n.id()),
                })?;
                report.metadata_rows_applied += 1;
            }
        }
        for (subject, visit) in by_key.keys() {
            report.warnings.push(format!(
                "metadata row for {} matches no transcript",
                narrative_ref(subject, *visit)
            ));
        }
    }

    let corpus = Corpus::new(narratives)?;
    report.narratives = corpus.len();
    report.subjects = corpus.by_subject().len();
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "@Begin\n@ID: subject=017; visit=2; dx=AD; mmse=21\n*PAR: the boy is on the stool .\n*INV: mhm .\n*PAR: it is tipping over . [+ exc]\n@End\n";

    #[test]
    fn three_line_fixture() {
        let n = parse_transcript(FIXTURE, Dialect::KeyValue).unwrap();
        assert_eq!(n.utterances.len(), 2);
        assert!(!n.utterances[0].disruptive);
        assert!(n.utterances[1].disruptive);
        assert_eq!(n.utterances[1].index, 1);
        assert_eq!(n.utterances[0].words, ["the", "boy", "is", "on", "the", "stool"]);
    }

    #[test]
    fn header_fields() {
        let n = parse_transcript(FIXTURE, Dialect::KeyValue).unwrap();
        assert_eq!(
            n.meta,
            SessionMeta {
                subject_id: "017".into(),
                visit_index: 2,
                diagnosis: Diagnosis::Ad,
                mmse: Some(21),
                cdr: None,
                hdr: None,
            }
        );
    }

    #[test]
    fn empty_stream() {
        let err = parse_transcript("", Dialect::KeyValue).unwrap_err();
        assert_eq!(err.to_string(), "no utterances");
    }

    #[test]
    fn malformed_header_names_line() {
        let err = parse_transcript("@ID: subject=1\n@Garbage\n*PAR: hi .\n", Dialect::KeyValue)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        let err = parse_transcript("@ID: subject=1; mmse=44\n*PAR: hi .\n", Dialect::KeyValue)
            .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn unknown_dialect() {
        assert!(matches!("xml".parse::<Dialect>(), Err(Error::Config(_))));
    }

    #[test]
    fn examiner_speakers_opt_in() {
        let p = TranscriptParser::new(Dialect::KeyValue).speakers(["PAR", "INV"]);
        let (n, _) = p.parse(FIXTURE, None).unwrap();
        assert_eq!(n.utterances.len(), 3);
        assert_eq!(n.utterances[1].speaker, "INV");
    }

    #[test]
    fn dropped_utterances_repack_indices() {
        let raw = "@ID: subject=1\n*PAR: xxx .\n*PAR: the sink .\n*PAR: &uh .\n*PAR: water .\n";
        let (n, r) = TranscriptParser::new(Dialect::KeyValue).parse(raw, None).unwrap();
        assert_eq!(r.dropped_empty, 2);
        let idx: Vec<_> = n.utterances.iter().map(|u| u.index).collect();
        assert_eq!(idx, [0, 1]);
    }

    #[test]
    fn continuation_and_dependent_tiers() {
        let raw = "@ID: subject=1\n*PAR: the mother is\n\tdrying dishes .\n%mor: det|the n|mother\n\tcop|be\n*PAR: ok .\n";
        let n = parse_transcript(raw, Dialect::KeyValue).unwrap();
        assert_eq!(n.utterances[0].text(), "the mother is drying dishes");
        assert_eq!(n.utterances.len(), 2);
    }

    #[test]
    fn chat_dialect_uses_stem_and_group() {
        let raw = "@UTF8\n@Begin\n@Languages:\teng\n@Participants:\tPAR Participant, INV Investigator\n@ID:\teng|Pitt|PAR|57;|female|ProbableAD||Participant|18||\n@ID:\teng|Pitt|INV|||||Investigator|||\n*PAR:\tthe boy is taking a cookie .\n*INV:\tmhm .\n@End\n";
        let (n, _) = TranscriptParser::new(Dialect::Chat)
            .parse(raw, Some("017-1"))
            .unwrap();
        assert_eq!(n.meta.subject_id, "017");
        assert_eq!(n.meta.visit_index, 2);
        assert_eq!(n.meta.diagnosis, Diagnosis::Ad);
        assert_eq!(n.utterances.len(), 1);
    }

    #[test]
    fn stray_lines_warn() {
        let raw = "@ID: subject=1\nrandom prose\n*PAR: hi there .\n";
        let (_, r) = TranscriptParser::new(Dialect::KeyValue).parse(raw, None).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn corpus_rejects_duplicates() {
        let n = parse_transcript(FIXTURE, Dialect::KeyValue).unwrap();
        assert!(matches!(
            Corpus::new(vec![n.clone(), n]),
            Err(Error::DuplicateNarrative { .. })
        ));
    }
}
