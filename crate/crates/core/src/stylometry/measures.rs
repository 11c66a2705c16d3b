use std::collections::HashSet;
use std::sync::OnceLock;

use super::tokenize::{Token, TokenKind};

const PARTICIPLES: &str = include_str!("../../data/irregular_participles.txt");

const BE_FORMS: [&str; 8] = ["am", "is", "are", "was", "were", "be", "been", "being"];
const FIRST_PERSON: [&str; 10] = [
    "i",
    "me",
    "my",
    "mine",
    "we",
    "us",
    "our",
    "ours",
    "myself",
    "ourselves",
];
/// Word tokens allowed between the auxiliary and the participle.
const PASSIVE_MAX_GAP: usize = 2;

fn irregular_participles() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| PARTICIPLES.split_whitespace().collect())
}

/// Mean type/token ratio over sliding windows of `window` tokens advanced by
/// `window - overlap`. A trailing window shorter than `window` is kept when it
/// reaches past the previous window and holds at least `window / 2` tokens.
/// Texts under `window / 2` tokens are scored as one window.
pub fn windowed_ttr(tokens: &[String], window: usize, overlap: usize) -> Option<f64> {
    let n = tokens.len();
    if n == 0 || window == 0 {
        return None;
    }
    let ratio = |slice: &[String]| {
        let types: HashSet<&str> = slice.iter().map(String::as_str).collect();
        types.len() as f64 / slice.len() as f64
    };
    if n < window.div_ceil(2) {
        return Some(ratio(tokens));
    }
    let stride = window.saturating_sub(overlap).max(1);
    let mut scores = Vec::new();
    let mut prev_end = 0;
    let mut start = 0;
    while start < n {
        let end = (start + window).min(n);
        if end > prev_end && (end - start == window || 2 * (end - start) >= window) {
            scores.push(ratio(&tokens[start..end]));
            prev_end = end;
        }
        if end == n {
            break;
        }
        start += stride;
    }
    Some(scores.iter().sum::<f64>() / scores.len() as f64)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate with a silent final `e` (kept after a
/// consonant + `le`). Never below one.
pub fn syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect();
    let mut groups: usize = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' && !is_vowel(letters[n - 2]) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(letters[n - 3]);
        if !consonant_le {
            groups = groups.saturating_sub(1);
        }
    }
    groups.max(1)
}

/// Flesch-Kincaid grade level.
pub fn fkgl(words: &[String], sentence_count: usize) -> Option<f64> {
    if words.is_empty() || sentence_count == 0 {
        return None;
    }
    let w = words.len() as f64;
    let syl: usize = words.iter().map(|x| syllables(x)).sum();
    Some(0.39 * (w / sentence_count as f64) + 11.8 * (syl as f64 / w) - 15.59)
}

fn is_participle(word: &str) -> bool {
    (word.len() > 2 && word.ends_with("ed")) || irregular_participles().contains(word)
}

/// Whether a sentence's lowercased word tokens contain a form of "be"
/// followed by a past participle with at most two words in between.
pub fn is_passive(words: &[String]) -> bool {
    words.iter().enumerate().any(|(i, w)| {
        BE_FORMS.contains(&w.as_str())
            && words[i + 1..]
                .iter()
                .take(PASSIVE_MAX_GAP + 1)
                .any(|x| is_participle(x))
    })
}

pub fn passive_pct(sentence_words: &[Vec<String>]) -> Option<f64> {
    if sentence_words.is_empty() {
        return None;
    }
    let hits = sentence_words.iter().filter(|s| is_passive(s)).count();
    Some(hits as f64 / sentence_words.len() as f64)
}

pub fn first_person_pct(words: &[String]) -> Option<f64> {
    if words.is_empty() {
        return None;
    }
    let hits = words.iter().filter(|w| FIRST_PERSON.contains(&w.as_str())).count();
    Some(hits as f64 / words.len() as f64)
}

/// Punctuation tokens per 100 word tokens.
pub fn punct_density(tokens: &[Token<'_>]) -> Option<f64> {
    let words = tokens.iter().filter(|t| t.kind == TokenKind::Word).count();
    if words == 0 {
        return None;
    }
    let punct = tokens.iter().filter(|t| t.kind == TokenKind::Punct).count();
    Some(100.0 * punct as f64 / words as f64)
}

pub fn mean_sent_len(word_count: usize, sentence_count: usize) -> Option<f64> {
    if word_count == 0 || sentence_count == 0 {
        return None;
    }
    Some(word_count as f64 / sentence_count as f64)
}
