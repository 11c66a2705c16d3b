use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::OnceLock;

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use super::{CorpusError, Document};
use crate::util::fnv1a64;

const STOPWORDS: &str = include_str!("../../data/stopwords_en.txt");
const MIN_STOPWORD_FRACTION: f64 = 0.15;

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS.split_whitespace().collect())
}

pub fn default_contamination_patterns() -> Vec<String> {
    [
        "as an ai language model",
        "as a large language model",
        "i cannot assist with",
        "i'm sorry, but as an ai",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub min_length_chars: usize,
    pub min_lang_conf: f64,
    /// Case-insensitive regular expressions.
    pub contamination_patterns: Vec<String>,
    /// Applied only to documents that carry `server_members`.
    pub min_server_members: u64,
    pub bot_authors: BTreeSet<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            min_length_chars: 50,
            min_lang_conf: 0.95,
            contamination_patterns: default_contamination_patterns(),
            min_server_members: 100,
            bot_authors: BTreeSet::new(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        self.compile().map(|_| ())
    }

    fn compile(&self) -> Result<Vec<Regex>, CorpusError> {
        if !(0.0..=1.0).contains(&self.min_lang_conf) {
            return Err(CorpusError::Config(format!(
                "min_lang_conf {} outside [0, 1]",
                self.min_lang_conf
            )));
        }
        self.contamination_patterns
            .iter()
            .map(|p| {
                RegexBuilder::new(p)
                    .case_insensitive(true)
                    .build()
                    .map_err(|e| CorpusError::Config(format!("bad contamination pattern {p:?}: {e}")))
            })
            .collect()
    }
}

/// Per-rule removal counts, in application order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterAudit {
    pub input: usize,
    pub bot: usize,
    pub server_size: usize,
    pub length: usize,
    pub language: usize,
    pub contamination: usize,
    pub duplicate: usize,
    pub kept: usize,
}

/// Stopword heuristic used when no language confidence is supplied.
pub fn looks_english(text: &str) -> bool {
    let words = stopwords();
    let mut total = 0usize;
    let mut hits = 0usize;
    for raw in text.split_whitespace() {
        let tok = raw
            .trim_matches(|c: char| !(c.is_alphanumeric() || c == '\''))
            .to_lowercase();
        if tok.is_empty() {
            continue;
        }
        total += 1;
        if words.contains(tok.as_str()) {
            hits += 1;
        }
    }
    total > 0 && hits as f64 / total as f64 >= MIN_STOPWORD_FRACTION
}

/// FNV-1a over NFC-normalized, whitespace-collapsed, lowercased text.
pub fn content_hash(text: &str) -> u64 {
    let normalized: String = text.nfc().collect::<String>().to_lowercase();
    let collapsed = normalized.split_whitespace().collect::<Vec<_>>().join(" ");
    fnv1a64(collapsed.as_bytes())
}

/// Applies bot, server-size, length, language, contamination and duplicate
/// rules in that order. Kept documents stay in input order; among duplicates
/// the earliest timestamp wins, ties broken by `doc_id`.
pub fn filter_documents(docs: Vec<Document>, cfg: &FilterConfig) -> Result<(Vec<Document>, FilterAudit), CorpusError> {
    let patterns = cfg.compile()?;
    let mut audit = FilterAudit {
        input: docs.len(),
        ..Default::default()
    };
    let mut survivors = Vec::with_capacity(docs.len());
    for doc in docs {
        if cfg.bot_authors.contains(&doc.author_id) {
            audit.bot += 1;
        } else if doc.server_members.is_some_and(|m| m < cfg.min_server_members) {
            audit.server_size += 1;
        } else if doc.text.chars().count() < cfg.min_length_chars {
            audit.length += 1;
        } else if !match doc.lang_conf {
            Some(conf) => conf >= cfg.min_lang_conf,
            None => looks_english(&doc.text),
        } {
            audit.language += 1;
        } else if patterns.iter().any(|re| re.is_match(&doc.text)) {
            audit.contamination += 1;
        } else {
            survivors.push(doc);
        }
    }

    let hashes: Vec<u64> = survivors.iter().map(|d| content_hash(&d.text)).collect();
    let mut winner: HashMap<u64, usize> = HashMap::new();
    for (i, &h) in hashes.iter().enumerate() {
        winner
            .entry(h)
            .and_modify(|w| {
                let (cur, cand) = (&survivors[*w], &survivors[i]);
                if (cand.timestamp, &cand.doc_id) < (cur.timestamp, &cur.doc_id) {
                    *w = i;
                }
            })
            .or_insert(i);
    }
    let kept: Vec<Document> = survivors
        .into_iter()
        .enumerate()
        .filter(|(i, _)| winner[&hashes[*i]] == *i)
        .map(|(_, d)| d)
        .collect();
    audit.duplicate =
        audit.input - audit.bot - audit.server_size - audit.length - audit.language - audit.contamination - kept.len();
    audit.kept = kept.len();
    Ok((kept, audit))
}
