//! Readability and lexical-diversity measures for transcripts.
//!
//! Tokenisation is frozen: sentences end at `.`, `!` or `?`; words are
//! whitespace-separated chunks with surrounding punctuation stripped (inner
//! apostrophes and hyphens survive) that contain at least one letter.

use std::collections::HashMap;

use crate::{CorpusError, Result};

pub const MTLD_THRESHOLD: f64 = 0.72;

/// Lower-cased words of `text`.
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.trim_matches(|c: char| !c.is_alphanumeric())
                .to_lowercase()
        })
        .filter(|w| w.chars().any(char::is_alphabetic))
        .collect()
}

/// Number of sentences: runs of text terminated by `.`, `!` or `?`, plus a
/// trailing unterminated run if it holds a word.
pub fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut has_word = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if has_word {
                count += 1;
            }
            has_word = false;
        } else if c.is_alphabetic() {
            has_word = true;
        }
    }
    count + usize::from(has_word)
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate. A final silent `e` is dropped unless the
/// word ends in consonant + `le` ("table"), and every word has at least one
/// syllable.
pub fn syllables(word: &str) -> usize {
    let w: Vec<char> = word
        .to_lowercase()
        .chars()
        .filter(|c| c.is_ascii_alphabetic())
        .collect();
    if w.is_empty() {
        return 0;
    }
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &w {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = w.len();
    if n > 2 && w[n - 1] == 'e' && !is_vowel(w[n - 2]) {
        let consonant_le = w[n - 2] == 'l' && n > 3 && !is_vowel(w[n - 3]);
        if !consonant_le {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Flesch reading ease: 206.835 − 1.015·(words/sentences) − 84.6·(syllables/words).
pub fn flesch_reading_ease(text: &str) -> Result<f64> {
    let ws = words(text);
    let sentences = sentence_count(text);
    if ws.is_empty() || sentences == 0 {
        return Err(CorpusError::Domain(
            "reading ease needs at least one word and one sentence".into(),
        ));
    }
    let syl: usize = ws.iter().map(|w| syllables(w)).sum();
    let nw = ws.len() as f64;
    Ok(206.835 - 1.015 * (nw / sentences as f64) - 84.6 * (syl as f64 / nw))
}

/// Factor count for one pass. A factor completes when the running
/// type-token ratio falls to the threshold; the leftover segment adds the
/// fraction `(1 − ttr) / (1 − threshold)`.
fn mtld_factors<'a>(tokens: impl Iterator<Item = &'a str>, threshold: f64) -> f64 {
    let mut factors = 0.0;
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut count = 0usize;
    for t in tokens {
        count += 1;
        seen.insert(t, ());
        let ttr = seen.len() as f64 / count as f64;
        if ttr <= threshold {
            factors += 1.0;
            seen.clear();
            count = 0;
        }
    }
    if count > 0 {
        let ttr = seen.len() as f64 / count as f64;
        factors += (1.0 - ttr) / (1.0 - threshold);
    }
    factors
}

/// Bidirectional MTLD: the mean of the forward and backward
/// `tokens / factors` scores. A pass with zero factors (every token unique)
/// scores the token count, the largest value the measure can express.
pub fn mtld<S: AsRef<str>>(tokens: &[S], threshold: f64) -> Result<f64> {
    if tokens.is_empty() {
        return Err(CorpusError::Domain("MTLD of an empty token sequence".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CorpusError::Domain(format!("TTR threshold {threshold} outside (0, 1)")));
    }
    let n = tokens.len() as f64;
    let score = |f: f64| if f > 0.0 { n / f } else { n };
    let fwd = mtld_factors(tokens.iter().map(AsRef::as_ref), threshold);
    let bwd = mtld_factors(tokens.iter().rev().map(AsRef::as_ref), threshold);
    Ok((score(fwd) + score(bwd)) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn syllable_rules() {
        for (w, n) in [
            ("cat", 1),
            ("the", 1),
            ("make", 1),
            ("table", 2),
            ("little", 2),
            ("reading", 2),
            ("beautiful", 3),
            ("rhythm", 1),
            ("a", 1),
        ] {
            assert_eq!(syllables(w), n, "{w}");
        }
    }

    #[test]
    fn tokeniser() {
        assert_eq!(words("Hello, world! It's 3 o'clock."), vec!["hello", "world", "it's", "o'clock"]);
        assert_eq!(sentence_count("One. Two! Three? four"), 4);
        assert_eq!(sentence_count("..."), 0);
    }
}
