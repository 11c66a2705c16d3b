//! Perplexity gap between a pre-LLM "judge" model and a "current" model, and
//! the within-author AI-likeness index built from it.
//!
//! Scores arrive as per-document total negative log-likelihoods (natural log)
//! in JSON lines; nothing here runs a language model.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Period;
use crate::util::{mean, sample_sd};

/// Authors whose gap SD falls below this get a zero index and a degeneracy flag.
pub const DEGENERATE_SD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AiLikenessError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("char_count mismatch for {doc_id}: {left} vs {right}")]
    CharCountMismatch { doc_id: String, left: usize, right: usize },
    #[error("records refer to different documents: {0} vs {1}")]
    DocMismatch(String, String),
    #[error("duplicate record for ({doc_id}, {model_id})")]
    Duplicate { doc_id: String, model_id: String },
}

/// One model's score for one document. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogProbRecord {
    pub doc_id: String,
    pub model_id: String,
    /// Negative log-probability of the whole text, in nats.
    pub total_nll_nats: f64,
    /// Unicode scalar values in the scored text, whitespace included.
    pub char_count: usize,
}

impl LogProbRecord {
    fn check(&self) -> Result<(), String> {
        if !self.total_nll_nats.is_finite() || self.total_nll_nats < 0.0 {
            return Err(format!(
                "{}: total_nll_nats {} is not a finite non-negative number",
                self.doc_id, self.total_nll_nats
            ));
        }
        if self.char_count == 0 {
            return Err(format!("{}: char_count must be positive", self.doc_id));
        }
        Ok(())
    }

    pub fn nats_per_char(&self) -> f64 {
        self.total_nll_nats / self.char_count as f64
    }
}

pub fn read_logprobs(reader: impl BufRead) -> Result<Vec<LogProbRecord>, AiLikenessError> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| AiLikenessError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: LogProbRecord = serde_json::from_str(&line).map_err(|e| AiLikenessError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        rec.check()
            .map_err(|message| AiLikenessError::Parse { line: line_no, message })?;
        if !seen.insert((rec.doc_id.clone(), rec.model_id.clone())) {
            return Err(AiLikenessError::Duplicate {
                doc_id: rec.doc_id,
                model_id: rec.model_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn load_logprobs(path: impl AsRef<Path>) -> Result<Vec<LogProbRecord>, AiLikenessError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| AiLikenessError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_logprobs(BufReader::new(file))
}

pub fn write_logprobs<W: Write>(records: &[LogProbRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Judge minus current, in nats per character. Positive means the text is
/// easier for the current model than for the judge.
pub fn perplexity_gap(judge: &LogProbRecord, current: &LogProbRecord) -> Result<f64, AiLikenessError> {
    if judge.doc_id != current.doc_id {
        return Err(AiLikenessError::DocMismatch(
            judge.doc_id.clone(),
            current.doc_id.clone(),
        ));
    }
    if judge.char_count != current.char_count {
        return Err(AiLikenessError::CharCountMismatch {
            doc_id: judge.doc_id.clone(),
            left: judge.char_count,
            right: current.char_count,
        });
    }
    Ok(judge.nats_per_char() - current.nats_per_char())
}

#[derive(Debug, Clone, Default)]
pub struct GapTable {
    pub gaps: BTreeMap<String, f64>,
    /// Documents lacking a record from one or both models.
    pub unscored: Vec<String>,
}

/// Pairs judge and current records per document and checks each record's
/// `char_count` against the corpus.
pub fn compute_gaps(
    records: &[LogProbRecord],
    judge_model: &str,
    current_model: &str,
    corpus_chars: &BTreeMap<String, usize>,
) -> Result<GapTable, AiLikenessError> {
    let mut by_doc: HashMap<&str, (Option<&LogProbRecord>, Option<&LogProbRecord>)> = HashMap::new();
    for r in records {
        let slot = by_doc.entry(r.doc_id.as_str()).or_default();
        // Identical ids put the same record in both slots.
        if r.model_id == judge_model {
            slot.0 = Some(r);
        }
        if r.model_id == current_model {
            slot.1 = Some(r);
        }
    }
    let mut table = GapTable::default();
    for (doc_id, &chars) in corpus_chars {
        match by_doc.get(doc_id.as_str()) {
            Some((Some(j), Some(c))) => {
                for r in [j, c] {
                    if r.char_count != chars {
                        return Err(AiLikenessError::CharCountMismatch {
                            doc_id: doc_id.clone(),
                            left: r.char_count,
                            right: chars,
                        });
                    }
                }
                table.gaps.insert(doc_id.clone(), perplexity_gap(j, c)?);
            }
            _ => table.unscored.push(doc_id.clone()),
        }
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapEntry {
    pub doc_id: String,
    pub delta_ppl: f64,
    pub period: Period,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LikenessIndex {
    pub index: BTreeMap<String, f64>,
    /// Authors whose gaps have (near) zero spread; their indices are all 0.
    pub degenerate: BTreeSet<String>,
    /// Authors with fewer than two gap documents.
    pub excluded: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Within-author z-score of the perplexity gap, pooling both periods, with
/// the (n - 1) standard deviation.
pub fn ai_likeness_index(gaps: &BTreeMap<String, Vec<GapEntry>>) -> LikenessIndex {
    let mut out = LikenessIndex::default();
    for (author, entries) in gaps {
        let values: Vec<f64> = entries.iter().map(|e| e.delta_ppl).collect();
        let (Some(mu), Some(sd)) = (mean(&values), sample_sd(&values)) else {
            out.warnings.push(format!(
                "author {author} has {} gap document(s); excluded from the index",
                values.len()
            ));
            out.excluded.insert(author.clone());
            continue;
        };
        let degenerate = sd < DEGENERATE_SD;
        if degenerate {
            out.degenerate.insert(author.clone());
        }
        for e in entries {
            let z = if degenerate { 0.0 } else { (e.delta_ppl - mu) / sd };
            out.index.insert(e.doc_id.clone(), z);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub doc_id: String,
    pub delta_ppl: f64,
    pub ai_likeness: Option<f64>,
}

pub fn write_gap_csv<W: Write>(records: &[GapRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["doc_id", "delta_ppl", "ai_likeness"])?;
    for r in records {
        w.write_record([
            r.doc_id.clone(),
            r.delta_ppl.to_string(),
            r.ai_likeness.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_gap_csv<R: std::io::Read>(input: R) -> Result<Vec<GapRecord>, csv::Error> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let num = |s: &str| s.parse::<f64>().ok();
        out.push(GapRecord {
            doc_id: row[0].to_string(),
            delta_ppl: num(&row[1]).unwrap_or(f64::NAN),
            ai_likeness: num(&row[2]),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Cursor;

    fn rec(model: &str, nll: f64, chars: usize) -> LogProbRecord {
        LogProbRecord {
            doc_id: "d1".into(),
            model_id: model.into(),
            total_nll_nats: nll,
            char_count: chars,
        }
    }

    #[test]
    fn gap_arithmetic() {
        assert_eq!(
            perplexity_gap(&rec("j", 200.0, 100), &rec("c", 200.0, 100)).unwrap(),
            0.0
        );
        assert_eq!(
            perplexity_gap(&rec("j", 300.0, 100), &rec("c", 200.0, 100)).unwrap(),
            1.0
        );
        assert_eq!(
            perplexity_gap(&rec("j", 150.0, 100), &rec("c", 200.0, 100)).unwrap(),
            -0.5
        );
    }

    #[test]
    fn gap_char_mismatch_names_doc() {
        let err = perplexity_gap(&rec("j", 1.0, 100), &rec("c", 1.0, 99)).unwrap_err();
        assert!(err.to_string().contains("d1"));
    }

    #[test]
    fn index_two_docs() {
        let mut g = BTreeMap::new();
        g.insert(
            "a".to_string(),
            vec![
                GapEntry {
                    doc_id: "x".into(),
                    delta_ppl: 1.0,
                    period: Period::Pre,
                },
                GapEntry {
                    doc_id: "y".into(),
                    delta_ppl: 3.0,
                    period: Period::Post,
                },
            ],
        );
        let r = ai_likeness_index(&g);
        let h = 1.0 / 2f64.sqrt();
        assert!((r.index["x"] + h).abs() < 1e-12);
        assert!((r.index["y"] - h).abs() < 1e-12);
    }

    #[test]
    fn index_degenerate_and_excluded() {
        let mut g = BTreeMap::new();
        g.insert(
            "flat".to_string(),
            (0..3)
                .map(|i| GapEntry {
                    doc_id: format!("f{i}"),
                    delta_ppl: 2.0,
                    period: Period::Pre,
                })
                .collect(),
        );
        g.insert(
            "lonely".to_string(),
            vec![GapEntry {
                doc_id: "l".into(),
                delta_ppl: 1.0,
                period: Period::Pre,
            }],
        );
        let r = ai_likeness_index(&g);
        assert!(r.degenerate.contains("flat"));
        assert_eq!((r.index["f0"], r.index["f1"], r.index["f2"]), (0.0, 0.0, 0.0));
        assert!(r.excluded.contains("lonely"));
        assert!(!r.index.contains_key("l"));
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn read_rejects_bad_records() {
        let ok = r#"{"doc_id":"a","model_id":"j","total_nll_nats":10.5,"char_count":20}"#;
        assert_eq!(read_logprobs(Cursor::new(ok)).unwrap().len(), 1);
        let dup = format!("{ok}\n{ok}");
        assert!(matches!(
            read_logprobs(Cursor::new(dup)),
            Err(AiLikenessError::Duplicate { .. })
        ));
        let zero = r#"{"doc_id":"a","model_id":"j","total_nll_nats":10.5,"char_count":0}"#;
        assert!(matches!(
            read_logprobs(Cursor::new(zero)),
            Err(AiLikenessError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn write_uses_exact_field_names() {
        let mut buf = Vec::new();
        write_logprobs(&[rec("judge", 12.0, 30)], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "{\"doc_id\":\"d1\",\"model_id\":\"judge\",\"total_nll_nats\":12.0,\"char_count\":30}\n"
        );
    }

    #[test]
    fn compute_gaps_pairs_and_checks_corpus() {
        let records = vec![rec("j", 300.0, 100), rec("c", 200.0, 100)];
        let mut chars = BTreeMap::new();
        chars.insert("d1".to_string(), 100);
        chars.insert("d2".to_string(), 10);
        let t = compute_gaps(&records, "j", "c", &chars).unwrap();
        assert_eq!(t.gaps["d1"], 1.0);
        assert_eq!(t.unscored, vec!["d2"]);
        chars.insert("d1".to_string(), 101);
        assert!(matches!(
            compute_gaps(&records, "j", "c", &chars),
            Err(AiLikenessError::CharCountMismatch { .. })
        ));
        // Same model on both sides gives zero gap.
        chars.insert("d1".to_string(), 100);
        let same = compute_gaps(&records, "j", "j", &chars).unwrap();
        assert_eq!(same.gaps["d1"], 0.0);
    }

    fn entries(values: &[f64]) -> Vec<GapEntry> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| GapEntry {
                doc_id: format!("d{i}"),
                delta_ppl: *v,
                period: if i % 2 == 0 { Period::Pre } else { Period::Post },
            })
            .collect()
    }

    proptest! {
        #[test]
        fn index_is_standardized_and_affine_invariant(
            values in prop::collection::vec(-5.0f64..5.0, 2..40),
            scale in 0.1f64..10.0,
            shift in -10.0f64..10.0,
        ) {
            prop_assume!(sample_sd(&values).unwrap() > 1e-6);
            let mut g = BTreeMap::new();
            g.insert("a".to_string(), entries(&values));
            let r = ai_likeness_index(&g);
            let z: Vec<f64> = r.index.values().copied().collect();
            prop_assert!(mean(&z).unwrap().abs() < 1e-9);
            prop_assert!((sample_sd(&z).unwrap() - 1.0).abs() < 1e-9);

            let moved: Vec<f64> = values.iter().map(|v| scale * v + shift).collect();
            let mut g2 = BTreeMap::new();
            g2.insert("a".to_string(), entries(&moved));
            let r2 = ai_likeness_index(&g2);
            for (k, v) in &r.index {
                prop_assert!((v - r2.index[k]).abs() < 1e-9);
            }
        }

        #[test]
        fn gap_antisymmetric(a in 0.0f64..1e4, b in 0.0f64..1e4, n in 1usize..5000) {
            let x = rec("j", a, n);
            let y = rec("c", b, n);
            prop_assert_eq!(perplexity_gap(&x, &y).unwrap(), -perplexity_gap(&y, &x).unwrap());
        }
    }
}
