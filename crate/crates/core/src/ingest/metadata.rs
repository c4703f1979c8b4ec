use std::path::Path;

use serde::Deserialize;

use super::{Diagnosis, SessionMeta};
use crate::error::{Error, Result};

/// One row of the session metadata table. Empty cells mean "unknown" and
/// leave the header value in place.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct MetadataRow {
    pub subject_id: String,
    pub visit_index: u32,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub diagnosis: Option<String>,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub mmse: Option<u32>,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub cdr: Option<f64>,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub hdr: Option<u32>,
}

impl MetadataRow {
    pub fn apply(&self, meta: &mut SessionMeta) {
        if let Some(d) = &self.diagnosis {
            meta.diagnosis = Diagnosis::parse_lenient(d);
        }
        if self.mmse.is_some() {
            meta.mmse = self.mmse;
        }
        if self.cdr.is_some() {
            meta.cdr = self.cdr;
        }
        if self.hdr.is_some() {
            meta.hdr = self.hdr;
        }
    }
}

fn empty_as_none<'de, D, T>(d: D) -> std::result::Result<Option<T>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: std::str::FromStr,
    T::Err: std::fmt::Display,
{
    let s: Option<String> = Option::deserialize(d)?;
    match s.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => v.parse().map(Some).map_err(serde::de::Error::custom),
    }
}

/// Reads a comma- or tab-delimited metadata table (delimiter sniffed from
/// the header line).
pub fn read_metadata_table(path: &Path) -> Result<Vec<MetadataRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metadata_table(&text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub(crate) fn parse_metadata_table(text: &str) -> Result<Vec<MetadataRow>> {
    let header = text.lines().next().unwrap_or_default();
    let delimiter = if header.contains('\t') { b'\t' } else { b',' };
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comma_and_tab() {
        let csv = "subject_id,visit_index,diagnosis,mmse,cdr,hdr\n017,1,AD,21,,\n018,2,,,0.5,9\n";
        let rows = parse_metadata_table(csv).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mmse, Some(21));
        assert_eq!(rows[0].cdr, None);
        assert_eq!(rows[1].diagnosis, None);
        assert_eq!(rows[1].hdr, Some(9));

        let tsv = csv.replace(',', "\t");
        assert_eq!(parse_metadata_table(&tsv).unwrap(), rows);
    }

    #[test]
    fn override_keeps_unknowns() {
        let mut meta = SessionMeta {
            subject_id: "1".into(),
            visit_index: 1,
            diagnosis: Diagnosis::Other,
            mmse: Some(20),
            cdr: Some(1.0),
            hdr: None,
        };
        let row = MetadataRow {
            subject_id: "1".into(),
            visit_index: 1,
            diagnosis: Some("MCI".into()),
            mmse: None,
            cdr: Some(2.0),
            hdr: None,
        };
        row.apply(&mut meta);
        assert_eq!(meta.diagnosis, Diagnosis::Mci);
        assert_eq!(meta.mmse, Some(20));
        assert_eq!(meta.cdr, Some(2.0));
    }
}
