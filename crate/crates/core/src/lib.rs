//! Logical-thematic coherence scoring for transcribed narratives.
//!
//! The pipeline: [`ingest`] CHAT-style transcripts into a [`ingest::Corpus`],
//! build coherent/incoherent utterance [`pairs`], train or load a scorer from
//! [`models`], evaluate it with [`metrics`], aggregate adjacent-pair scores
//! into a per-narrative [`marker`] tracked across visits, and relate marker
//! changes to clinical scores in [`biomarker`]. [`stats`] holds the
//! hypothesis tests used throughout.

pub mod biomarker;
pub mod error;
pub mod ingest;
pub mod marker;
pub mod metrics;
pub mod models;
pub mod pairs;
pub mod seed;
pub mod stats;
pub mod synthetic;

pub use error::{Error, Result};
