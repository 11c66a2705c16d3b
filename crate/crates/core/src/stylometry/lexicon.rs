use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tokenize::words;
use super::StylometryError;
use crate::corpus::Document;

const DEFAULT_LEXICON: &str = include_str!("../../data/lexicon.json");

/// On-disk lexicon description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconConfig {
    pub terms: Vec<String>,
    /// Fixed weights that replace the corpus-derived idf for the listed terms.
    #[serde(default)]
    pub idf: BTreeMap<String, f64>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    0.23
}

impl Default for LexiconConfig {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_LEXICON).expect("shipped lexicon parses")
    }
}

impl LexiconConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, StylometryError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| StylometryError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| StylometryError::Lexicon(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), StylometryError> {
        if self.terms.is_empty() {
            return Err(StylometryError::Lexicon("lexicon has no terms".into()));
        }
        let mut seen = BTreeSet::new();
        for t in &self.terms {
            if words(t).is_empty() {
                return Err(StylometryError::Lexicon(format!("term {t:?} has no word tokens")));
            }
            if !seen.insert(t.to_lowercase()) {
                return Err(StylometryError::Lexicon(format!("duplicate term {t:?}")));
            }
        }
        if let Some((t, w)) = self.idf.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
            return Err(StylometryError::Lexicon(format!("idf override for {t:?} is {w}")));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(StylometryError::Lexicon(format!(
                "threshold {} outside [0, 1]",
                self.threshold
            )));
        }
        Ok(())
    }
}

/// AI-topic lexicon with corpus idf weights.
///
/// Terms are matched on lowercased word tokens; a multiword or hyphenated term
/// matches its word sequence (`"gpt-4"` is the pair `gpt 4`). Matching is
/// greedy longest-first so every token belongs to at most one term.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    pub threshold: f64,
    index: HashMap<Vec<String>, usize>,
    max_len: usize,
}

pub(crate) enum Unit<'a> {
    Term(usize),
    #[cfg_attr(not(test), allow(dead_code))]
    Word(&'a str),
}

impl Lexicon {
    fn with_weights(cfg: &LexiconConfig, idf: Vec<f64>) -> Self {
        let terms: Vec<String> = cfg.terms.iter().map(|t| t.to_lowercase()).collect();
        let index: HashMap<Vec<String>, usize> = terms.iter().enumerate().map(|(i, t)| (words(t), i)).collect();
        let max_len = index.keys().map(Vec::len).max().unwrap_or(1);
        Self {
            terms,
            idf,
            threshold: cfg.threshold,
            index,
            max_len,
        }
    }

    /// Lexicon with every weight set to one; used before corpus weighting.
    pub fn unweighted(cfg: &LexiconConfig) -> Self {
        Self::with_weights(cfg, vec![1.0; cfg.terms.len()])
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| t == &term.to_lowercase())
            .map(|i| self.idf[i])
    }

    pub(crate) fn segment<'a>(&self, words: &'a [String]) -> Vec<Unit<'a>> {
        let mut out = Vec::with_capacity(words.len());
        let mut i = 0;
        while i < words.len() {
            let longest = (1..=self.max_len.min(words.len() - i))
                .rev()
                .find_map(|len| self.index.get(&words[i..i + len]).map(|&t| (t, len)));
            match longest {
                Some((t, len)) => {
                    out.push(Unit::Term(t));
                    i += len;
                }
                None => {
                    out.push(Unit::Word(&words[i]));
                    i += 1;
                }
            }
        }
        out
    }

    fn terms_present(&self, words: &[String]) -> BTreeSet<usize> {
        self.segment(words)
            .into_iter()
            .filter_map(|u| match u {
                Unit::Term(t) => Some(t),
                Unit::Word(_) => None,
            })
            .collect()
    }
}

/// Computes `idf(t) = ln((1 + N) / (1 + df(t))) + 1` over the corpus, then
/// applies any fixed overrides from the config.
pub fn build_lexicon(corpus: &[Document], cfg: &LexiconConfig) -> Lexicon {
    let base = Lexicon::unweighted(cfg);
    let df = corpus
        .par_iter()
        .map(|d| base.terms_present(&words(&d.text)))
        .fold(
            || vec![0usize; base.terms.len()],
            |mut acc, present| {
                for t in present {
                    acc[t] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0usize; base.terms.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let n = corpus.len() as f64;
    let overrides: HashMap<String, f64> = cfg.idf.iter().map(|(k, v)| (k.to_lowercase(), *v)).collect();
    let idf = base
        .terms
        .iter()
        .zip(&df)
        .map(|(t, &d)| {
            overrides
                .get(t)
                .copied()
                .unwrap_or_else(|| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0)
        })
        .collect();
    Lexicon::with_weights(cfg, idf)
}

/// idf-weighted share of lexicon terms among all term occurrences; words
/// outside the lexicon weigh 1. Returns `(share, share >= threshold)`.
pub fn ai_topic_share(words: &[String], lexicon: &Lexicon) -> Option<(f64, bool)> {
    if words.is_empty() {
        return None;
    }
    let mut hit = 0.0;
    let mut total = 0.0;
    for unit in lexicon.segment(words) {
        match unit {
            Unit::Term(t) => {
                hit += lexicon.idf[t];
                total += lexicon.idf[t];
            }
            Unit::Word(_) => total += 1.0,
        }
    }
    if total <= 0.0 {
        return Some((0.0, 0.0 >= lexicon.threshold));
    }
    let share = hit / total;
    Some((share, share >= lexicon.threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Genre;
    use proptest::prelude::*;

    fn cfg(terms: &[&str]) -> LexiconConfig {
        LexiconConfig {
            terms: terms.iter().map(|s| s.to_string()).collect(),
            idf: BTreeMap::new(),
            threshold: 0.23,
        }
    }

    fn corpus(texts: &[&str]) -> Vec<Document> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i}"), "a", 0, Genre::Social, "Tech", *t))
            .collect()
    }

    #[test]
    fn default_lexicon_has_47_terms() {
        let c = LexiconConfig::default();
        assert_eq!(c.terms.len(), 47);
        assert_eq!(c.threshold, 0.23);
        c.validate().unwrap();
    }

    #[test]
    fn idf_formula() {
        let docs = corpus(&[
            "ai here",
            "ai there",
            "ai everywhere",
            "no",
            "nothing",
            "x",
            "y",
            "z",
            "w",
        ]);
        let lex = build_lexicon(&docs[..3], &cfg(&["ai", "gpt", "there"]));
        assert!((lex.idf_of("ai").unwrap() - 1.0).abs() < 1e-12);
        assert!((lex.idf_of("there").unwrap() - (2f64.ln() + 1.0)).abs() < 1e-12);
        let lex9 = build_lexicon(&docs, &cfg(&["gpt"]));
        assert!((lex9.idf_of("gpt").unwrap() - (10f64.ln() + 1.0)).abs() < 1e-12);
        assert!((lex9.idf_of("gpt").unwrap() - 3.302585).abs() < 1e-6);
    }

    #[test]
    fn overrides_replace_idf() {
        let mut c = cfg(&["ai"]);
        c.idf.insert("AI".into(), 2.5);
        let lex = build_lexicon(&corpus(&["ai"]), &c);
        assert_eq!(lex.idf_of("ai"), Some(2.5));
    }

    #[test]
    fn weighted_share() {
        let mut c = cfg(&["ai"]);
        c.idf.insert("ai".into(), 2.0);
        let lex = build_lexicon(&corpus(&["x"]), &c);
        let w = words("ai a b c d ai e f g h");
        let (share, topical) = ai_topic_share(&w, &lex).unwrap();
        assert!((share - 4.0 / 12.0).abs() < 1e-12);
        assert!(topical);
    }

    #[test]
    fn no_hits_and_single_term() {
        let lex = Lexicon::unweighted(&cfg(&["ai", "language model"]));
        assert_eq!(ai_topic_share(&words("plain words only"), &lex), Some((0.0, false)));
        assert_eq!(ai_topic_share(&words("AI"), &lex), Some((1.0, true)));
        assert_eq!(ai_topic_share(&[], &lex), None);
    }

    #[test]
    fn multiword_and_hyphenated_terms() {
        let lex = Lexicon::unweighted(&cfg(&["gpt", "gpt-4", "language model", "model"]));
        let w = words("a large language model like GPT-4");
        let units: Vec<String> = lex
            .segment(&w)
            .into_iter()
            .map(|u| match u {
                Unit::Term(t) => format!("[{}]", lex.terms[t]),
                Unit::Word(x) => x.to_string(),
            })
            .collect();
        assert_eq!(units, vec!["a", "large", "[language model]", "like", "[gpt-4]"]);
        let (share, _) = ai_topic_share(&w, &lex).unwrap();
        assert!((share - 2.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(&[]).validate().is_err());
        assert!(cfg(&["ai", "AI"]).validate().is_err());
        assert!(cfg(&["--"]).validate().is_err());
    }

    proptest! {
        #[test]
        fn share_bounded_and_monotone(
            base in prop::collection::vec(prop::sample::select(vec!["ai", "gpt", "cat", "dog", "the", "model"]), 1..40),
            extra in 0usize..10,
        ) {
            let lex = build_lexicon(&corpus(&["ai cat", "gpt dog", "the model"]), &cfg(&["ai", "gpt", "model"]));
            let w: Vec<String> = base.iter().map(|s| s.to_string()).collect();
            let (s0, _) = ai_topic_share(&w, &lex).unwrap();
            prop_assert!((0.0..=1.0).contains(&s0));
            let mut more = w.clone();
            more.extend(std::iter::repeat_n("ai".to_string(), extra));
            let (s1, _) = ai_topic_share(&more, &lex).unwrap();
            prop_assert!(s1 >= s0 - 1e-15);
        }
    }
}
