//! Corpus ingestion: loading, filtering, boundary splitting, stratified
//! sampling and calendar bucketing.

mod bucket;
mod filter;
mod sample;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bucket::{bucket_series, BucketedSeries, Granularity};
pub use filter::{content_hash, filter_documents, looks_english, FilterAudit, FilterConfig};
pub use sample::{stratified_sample, QuotaConfig, SampleReport, OTHER_CATEGORY};

pub const SECONDS_PER_DAY: i64 = 86_400;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Genre {
    Social,
    Formal,
}

/// One timestamped text unit.
///
/// `char_count` is always derived from `text` (Unicode scalar values); a value
/// present in the input is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub author_id: String,
    /// UTC seconds since the Unix epoch.
    pub timestamp: i64,
    pub genre: Genre,
    pub category: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lang_conf: Option<f64>,
    /// Member count of the originating server, when the platform supplies it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_members: Option<u64>,
    #[serde(default)]
    pub char_count: usize,
}

impl Document {
    pub fn new(
        doc_id: impl Into<String>,
        author_id: impl Into<String>,
        timestamp: i64,
        genre: Genre,
        category: impl Into<String>,
        text: impl Into<String>,
    ) -> Self {
        let text = text.into();
        Self {
            doc_id: doc_id.into(),
            author_id: author_id.into(),
            timestamp,
            genre,
            category: category.into(),
            char_count: text.chars().count(),
            text,
            lang_conf: None,
            server_members: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseWarning {
    /// 1-based line number in the input file.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub warnings: Vec<ParseWarning>,
}

/// Loads a JSON-lines corpus. Blank lines are skipped silently; malformed
/// lines and repeated `doc_id`s are skipped with a warning.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<LoadedCorpus, CorpusError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_corpus(BufReader::new(file)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_corpus(reader: impl BufRead) -> std::io::Result<LoadedCorpus> {
    let mut out = LoadedCorpus::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        match serde_json::from_str::<Document>(&line) {
            Ok(mut doc) => {
                if !seen.insert(doc.doc_id.clone()) {
                    out.warnings.push(ParseWarning {
                        line: line_no,
                        message: format!("duplicate doc_id {}", doc.doc_id),
                    });
                    continue;
                }
                doc.char_count = doc.text.chars().count();
                out.documents.push(doc);
            }
            Err(e) => out.warnings.push(ParseWarning {
                line: line_no,
                message: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Reads a bot list: one author id per line, blank lines and `#` comments ignored.
pub fn load_bot_list(path: impl AsRef<Path>) -> Result<HashSet<String>, CorpusError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryConfig {
    pub boundary_ts: i64,
    pub exclusion_halfwidth_days: i64,
    pub min_docs_pre: usize,
    pub min_docs_post: usize,
}

impl Default for BoundaryConfig {
    fn default() -> Self {
        Self {
            // 2022-11-30T00:00:00Z
            boundary_ts: 1_669_766_400,
            exclusion_halfwidth_days: 7,
            min_docs_pre: 10,
            min_docs_post: 10,
        }
    }
}

impl BoundaryConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.exclusion_halfwidth_days < 0 {
            return Err(CorpusError::Config(
                "exclusion_halfwidth_days must be non-negative".into(),
            ));
        }
        if self.min_docs_pre == 0 || self.min_docs_post == 0 {
            return Err(CorpusError::Config(
                "min_docs_pre and min_docs_post must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn halfwidth_secs(&self) -> i64 {
        self.exclusion_halfwidth_days * SECONDS_PER_DAY
    }

    /// Closed window `[boundary - halfwidth, boundary + halfwidth]`.
    pub fn in_exclusion_window(&self, ts: i64) -> bool {
        (ts - self.boundary_ts).abs() <= self.halfwidth_secs()
    }

    pub fn period_of(&self, ts: i64) -> Option<Period> {
        if self.in_exclusion_window(ts) {
            None
        } else if ts < self.boundary_ts {
            Some(Period::Pre)
        } else {
            Some(Period::Post)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Period {
    Pre,
    Post,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AuthorSplit {
    pub pre: Vec<Document>,
    pub post: Vec<Document>,
}

#[derive(Debug, Clone, Default)]
pub struct BoundarySplit {
    pub authors: BTreeMap<String, AuthorSplit>,
    /// Authors dropped for too few documents on either side, with their (pre, post) counts.
    pub excluded: BTreeMap<String, (usize, usize)>,
    pub dropped_in_window: usize,
}

/// Splits documents per author around the boundary. Documents inside the
/// exclusion window are dropped; authors short of either minimum are excluded.
pub fn split_by_boundary(docs: &[Document], cfg: &BoundaryConfig) -> BoundarySplit {
    let mut all: BTreeMap<String, AuthorSplit> = BTreeMap::new();
    let mut dropped = 0;
    for doc in docs {
        match cfg.period_of(doc.timestamp) {
            None => dropped += 1,
            Some(period) => {
                let entry = all.entry(doc.author_id.clone()).or_default();
                match period {
                    Period::Pre => entry.pre.push(doc.clone()),
                    Period::Post => entry.post.push(doc.clone()),
                }
            }
        }
    }
    let mut out = BoundarySplit {
        dropped_in_window: dropped,
        ..Default::default()
    };
    for (author, split) in all {
        if split.pre.len() >= cfg.min_docs_pre && split.post.len() >= cfg.min_docs_post {
            out.authors.insert(author, split);
        } else {
            out.excluded.insert(author, (split.pre.len(), split.post.len()));
        }
    }
    out
}
