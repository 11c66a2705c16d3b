//! Per-document stylometric features and AI-topic share.

mod lexicon;
mod measures;
mod tokenize;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

pub use lexicon::{ai_topic_share, build_lexicon, Lexicon, LexiconConfig};
pub use measures::{
    first_person_pct, fkgl, is_passive, mean_sent_len, passive_pct, punct_density, syllables, windowed_ttr,
};
pub use tokenize::{split_sentences, tokenize, words, Token, TokenKind};

#[derive(Debug, Error)]
pub enum StylometryError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid lexicon: {0}")]
    Lexicon(String),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub ttr_window: usize,
    pub ttr_overlap: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            ttr_window: 150,
            ttr_overlap: 75,
        }
    }
}

/// Features of one document. `None` marks a feature the document cannot
/// support (no words, no sentences).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub doc_id: String,
    pub ttr: Option<f64>,
    pub fkgl: Option<f64>,
    pub passive_pct: Option<f64>,
    pub first_person_pct: Option<f64>,
    /// Punctuation marks per 100 word tokens.
    pub punct_density: Option<f64>,
    /// Word tokens per sentence.
    pub mean_sent_len: Option<f64>,
    pub ai_topic_share: Option<f64>,
    pub ai_topical: bool,
}

pub const FEATURE_CSV_HEADER: [&str; 9] = [
    "doc_id",
    "ttr",
    "fkgl",
    "passive_pct",
    "first_person_pct",
    "punct_density",
    "mean_sent_len",
    "ai_topic_share",
    "ai_topical",
];

pub fn extract_features(doc: &Document, lexicon: &Lexicon, cfg: &FeatureConfig) -> FeatureRecord {
    let tokens = tokenize(&doc.text);
    let word_list: Vec<String> = tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.text.to_lowercase())
        .collect();
    let sentences = split_sentences(&doc.text);
    let sentence_words: Vec<Vec<String>> = sentences.iter().map(|s| words(s)).collect();
    let topic = ai_topic_share(&word_list, lexicon);
    FeatureRecord {
        doc_id: doc.doc_id.clone(),
        ttr: windowed_ttr(&word_list, cfg.ttr_window, cfg.ttr_overlap),
        fkgl: fkgl(&word_list, sentences.len()),
        passive_pct: passive_pct(&sentence_words),
        first_person_pct: first_person_pct(&word_list),
        punct_density: punct_density(&tokens),
        mean_sent_len: mean_sent_len(word_list.len(), sentences.len()),
        ai_topic_share: topic.map(|t| t.0),
        ai_topical: topic.is_some_and(|t| t.1),
    }
}

/// Extracts every document in parallel; output order follows input order.
pub fn extract_all(docs: &[Document], lexicon: &Lexicon, cfg: &FeatureConfig) -> Vec<FeatureRecord> {
    docs.par_iter().map(|d| extract_features(d, lexicon, cfg)).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with the fixed column order of [`FEATURE_CSV_HEADER`]; missing values
/// are empty cells.
pub fn write_feature_csv<W: Write>(records: &[FeatureRecord], out: W) -> Result<(), StylometryError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(FEATURE_CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.doc_id.clone(),
            opt(r.ttr),
            opt(r.fkgl),
            opt(r.passive_pct),
            opt(r.first_person_pct),
            opt(r.punct_density),
            opt(r.mean_sent_len),
            opt(r.ai_topic_share),
            r.ai_topical.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_feature_csv<R: std::io::Read>(input: R) -> Result<Vec<FeatureRecord>, StylometryError> {
    let mut r = csv::Reader::from_reader(input);
    let parse = |s: &str| -> Option<f64> {
        if s.is_empty() {
            None
        } else {
            s.parse().ok()
        }
    };
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        out.push(FeatureRecord {
            doc_id: row[0].to_string(),
            ttr: parse(&row[1]),
            fkgl: parse(&row[2]),
            passive_pct: parse(&row[3]),
            first_person_pct: parse(&row[4]),
            punct_density: parse(&row[5]),
            mean_sent_len: parse(&row[6]),
            ai_topic_share: parse(&row[7]),
            ai_topical: &row[8] == "true",
        });
    }
    Ok(out)
}
