//! Tokenization and surface statistics of text: syllables, readability and
//! vocabulary richness.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

pub const URL_TOKEN: &str = "<url>";
pub const USER_TOKEN: &str = "<user>";

static SPECIAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)(?P<url>\b(?:https?://|www\.)\S+)|(?P<user>@\w+)").expect("valid regex"));

static SENTENCE_END: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[.!?]+|\n").expect("valid regex"));

/// Lowercased Unicode words; URLs and @-mentions become [`URL_TOKEN`] / [`USER_TOKEN`].
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut last = 0;
    let words = |span: &str, out: &mut Vec<String>| {
        out.extend(span.unicode_words().map(str::to_lowercase));
    };
    for cap in SPECIAL.captures_iter(text) {
        let m = cap.get(0).expect("whole match");
        words(&text[last..m.start()], &mut out);
        out.push(
            if cap.name("url").is_some() {
                URL_TOKEN
            } else {
                USER_TOKEN
            }
            .to_string(),
        );
        last = m.end();
    }
    words(&text[last..], &mut out);
    out
}

fn is_placeholder(token: &str) -> bool {
    token == URL_TOKEN || token == USER_TOKEN
}

/// Vowel-group syllable count with a silent-e correction.
///
/// Vowels are `aeiou` plus `y` when not word-initial; each maximal vowel run is one
/// syllable; a final `e` is dropped unless preceded by a consonant + `l` (`table`).
/// Every word has at least one syllable.
pub fn count_syllables(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return 0;
    }
    let is_vowel = |i: usize| match letters[i] {
        'a' | 'e' | 'i' | 'o' | 'u' => true,
        'y' => i > 0,
        _ => false,
    };
    let mut count = 0;
    let mut prev = false;
    for i in 0..letters.len() {
        let v = is_vowel(i);
        if v && !prev {
            count += 1;
        }
        prev = v;
    }
    let n = letters.len();
    if count > 1 && letters[n - 1] == 'e' && !is_vowel(n - 2) {
        let consonant_le = n >= 3 && letters[n - 2] == 'l' && !is_vowel(n - 3);
        if !consonant_le {
            count -= 1;
        }
    }
    count.max(1)
}

/// Counts behind the readability formulas.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TextCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
    /// Words of three or more syllables.
    pub complex_words: usize,
}

/// Sentences end at `.`, `!`, `?` runs or line breaks; only segments with a word count.
pub fn text_counts(text: &str) -> TextCounts {
    let mut counts = TextCounts::default();
    for segment in SENTENCE_END.split(text) {
        let mut any = false;
        for tok in tokenize(segment) {
            if is_placeholder(&tok) || !tok.chars().any(char::is_alphabetic) {
                continue;
            }
            any = true;
            let s = count_syllables(&tok);
            counts.words += 1;
            counts.syllables += s;
            if s >= 3 {
                counts.complex_words += 1;
            }
        }
        if any {
            counts.sentences += 1;
        }
    }
    counts
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Readability {
    pub flesch_kincaid_grade: f64,
    pub flesch_reading_ease: f64,
    pub gunning_fog: f64,
    /// Set when the text has no sentence; the scores are then zero.
    pub degenerate: bool,
}

impl Readability {
    pub fn from_counts(c: TextCounts) -> Self {
        if c.sentences == 0 || c.words == 0 {
            return Readability {
                degenerate: true,
                ..Default::default()
            };
        }
        let wps = c.words as f64 / c.sentences as f64;
        let spw = c.syllables as f64 / c.words as f64;
        let complex = c.complex_words as f64 / c.words as f64;
        Readability {
            flesch_kincaid_grade: 0.39 * wps + 11.8 * spw - 15.59,
            flesch_reading_ease: 206.835 - 1.015 * wps - 84.6 * spw,
            gunning_fog: 0.4 * (wps + 100.0 * complex),
            degenerate: false,
        }
    }

    pub fn of(text: &str) -> Self {
        Self::from_counts(text_counts(text))
    }
}

/// Type-token ratio and hapax counts over raw tokens.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Richness {
    pub type_token_ratio: f64,
    pub hapax_legomena: usize,
    pub hapax_dislegomena: usize,
}

impl Richness {
    pub fn of(tokens: &[String]) -> Self {
        if tokens.is_empty() {
            return Richness::default();
        }
        let mut freq: HashMap<&str, usize> = HashMap::new();
        for t in tokens {
            *freq.entry(t.as_str()).or_default() += 1;
        }
        Richness {
            type_token_ratio: freq.len() as f64 / tokens.len() as f64,
            hapax_legomena: freq.values().filter(|&&n| n == 1).count(),
            hapax_dislegomena: freq.values().filter(|&&n| n == 2).count(),
        }
    }
}
