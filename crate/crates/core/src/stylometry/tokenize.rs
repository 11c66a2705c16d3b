use std::collections::HashSet;
use std::sync::OnceLock;

const ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Punct,
    /// Anything else that is neither a word nor punctuation (emoji, math symbols).
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub kind: TokenKind,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn is_punctuation(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}'
                ..='\u{201F}'
                    | '\u{2026}'
                    | '\u{2013}'
                    | '\u{2014}'
                    | '\u{00AB}'
                    | '\u{00BB}'
                    | '\u{00BF}'
                    | '\u{00A1}'
        )
}

/// Words are maximal runs of alphanumerics and apostrophes; every other
/// non-whitespace character is a token of its own.
pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let mut iter = text.char_indices().peekable();
    while let Some((start, c)) = iter.next() {
        if c.is_whitespace() {
            continue;
        }
        if is_word_char(c) {
            let mut end = start + c.len_utf8();
            while let Some(&(i, nc)) = iter.peek() {
                if !is_word_char(nc) {
                    break;
                }
                end = i + nc.len_utf8();
                iter.next();
            }
            let run = &text[start..end];
            if run.chars().any(char::is_alphanumeric) {
                out.push(Token {
                    text: run,
                    kind: TokenKind::Word,
                });
            } else {
                for (i, ch) in run.char_indices() {
                    out.push(Token {
                        text: &run[i..i + ch.len_utf8()],
                        kind: TokenKind::Punct,
                    });
                }
            }
        } else {
            out.push(Token {
                text: &text[start..start + c.len_utf8()],
                kind: if is_punctuation(c) {
                    TokenKind::Punct
                } else {
                    TokenKind::Symbol
                },
            });
        }
    }
    out
}

/// Lowercased word tokens.
pub fn words(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Word)
        .map(|t| t.text.to_lowercase())
        .collect()
}

fn abbreviations() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| ABBREVIATIONS.split_whitespace().collect())
}

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201D}' | '\u{2019}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201C}' | '\u{2018}')
}

/// True when the period at byte `dot` closes an abbreviation or an initial.
fn ends_abbreviation(text: &str, dot: usize) -> bool {
    let before = &text[..dot];
    let start = before
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace())
        .map_or(0, |(i, c)| i + c.len_utf8());
    let chunk = before[start..].trim_start_matches(|c: char| !c.is_alphanumeric());
    if chunk.is_empty() {
        return false;
    }
    let mut letters = chunk.chars();
    if let (Some(c), None) = (letters.next(), letters.next()) {
        // Capital initials, except the pronoun.
        if c.is_uppercase() && c != 'I' {
            return true;
        }
    }
    let key = format!("{}.", chunk.to_lowercase());
    abbreviations().contains(key.as_str())
}

/// Splits on `.`, `!` or `?` runs (plus closing quotes) that are followed by
/// whitespace and a capital letter, or by the end of the text. Single periods
/// after a listed abbreviation or a capital initial do not split. Fragments
/// without any alphanumeric character are not sentences.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut cuts = Vec::new();
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminal(c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && is_terminal(chars[j].1) {
            j += 1;
        }
        let single_period = j - i == 1 && c == '.';
        while j < chars.len() && is_closer(chars[j].1) {
            j += 1;
        }
        let end = chars.get(j).map_or(text.len(), |(p, _)| *p);
        let mut k = j;
        while k < chars.len() && chars[k].1.is_whitespace() {
            k += 1;
        }
        let at_end = k == chars.len();
        let mut m = k;
        while m < chars.len() && is_opener(chars[m].1) {
            m += 1;
        }
        let capital_follows = k > j && m < chars.len() && chars[m].1.is_uppercase();
        if (at_end || capital_follows) && !(single_period && !at_end && ends_abbreviation(text, pos)) {
            cuts.push(end);
        }
        i = j.max(i + 1);
    }
    let mut out = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(text.len())) {
        let piece = text[start..cut].trim();
        if piece.chars().any(char::is_alphanumeric) {
            out.push(piece);
        }
        start = cut;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn texts<'a>(toks: &'a [Token<'a>]) -> Vec<&'a str> {
        toks.iter().map(|t| t.text).collect()
    }

    #[test]
    fn tokenize_simple() {
        let t = tokenize("Hi there!");
        assert_eq!(texts(&t), vec!["Hi", "there", "!"]);
        assert_eq!(t[2].kind, TokenKind::Punct);
        assert_eq!(split_sentences("Hi there!"), vec!["Hi there!"]);
    }

    #[test]
    fn tokenize_apostrophes_and_symbols() {
        let t = tokenize("don't... gpt-4 🙂");
        assert_eq!(texts(&t), vec!["don't", ".", ".", ".", "gpt", "-", "4", "🙂"]);
        assert_eq!(t[7].kind, TokenKind::Symbol);
        assert_eq!(tokenize("' '")[0].kind, TokenKind::Punct);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(split_sentences("").is_empty());
        assert!(split_sentences("   ").is_empty());
    }

    #[test]
    fn abbreviation_suppresses_split() {
        assert_eq!(
            split_sentences("Dr. Smith left. He ran."),
            vec!["Dr. Smith left.", "He ran."]
        );
        assert_eq!(split_sentences("Use tools, e.g. Python. Then rest.").len(), 2);
        assert_eq!(split_sentences("J. R. R. Tolkien wrote it. Fine.").len(), 2);
    }

    #[test]
    fn split_requires_capital() {
        assert_eq!(split_sentences("this is 3.5 times. and more").len(), 1);
        assert_eq!(split_sentences("Wait?! \"Really.\" Yes").len(), 3);
        assert_eq!(
            split_sentences("no terminal punctuation here"),
            vec!["no terminal punctuation here"]
        );
    }
}
