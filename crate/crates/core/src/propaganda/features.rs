//! Feature extraction: word and character n-gram TF-IDF, lexicon frequencies,
//! readability and richness, plus caller-supplied blocks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{text_counts, tokenize, Readability, Richness};
use crate::error::{Error, Result};

/// Extra dense features. Implementations must be pure.
pub trait FeatureBlock: Send + Sync {
    /// Unique block name, stored in the model file.
    fn name(&self) -> &str;
    /// Column names; their count fixes the block width.
    fn columns(&self) -> Vec<String>;
    /// Values for one text, given its tokens. Must have `columns().len()` finite entries.
    fn extract(&self, text: &str, tokens: &[String]) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub min_df: usize,
    pub char_ngram: usize,
    pub word_ngrams: bool,
    pub char_ngrams: bool,
    pub readability: bool,
    pub richness: bool,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            min_df: 2,
            char_ngram: 3,
            word_ngrams: true,
            char_ngrams: true,
            readability: true,
            richness: true,
        }
    }
}

/// A word list; the name is the file stem.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub name: String,
    pub terms: BTreeSet<String>,
}

impl Lexicon {
    pub fn new(name: impl Into<String>, terms: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Lexicon {
            name: name.into(),
            terms: terms.into_iter().map(|t| t.into().to_lowercase()).collect(),
        }
    }

    /// Fraction of tokens in the lexicon.
    pub fn frequency(&self, tokens: &[String]) -> f64 {
        if tokens.is_empty() {
            return 0.0;
        }
        tokens.iter().filter(|t| self.terms.contains(*t)).count() as f64 / tokens.len() as f64
    }
}

/// One lowercase term per line; blank lines and `#` comments are skipped.
pub fn load_lexicon(path: &Path) -> Result<Lexicon> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .ok_or_else(|| Error::InvalidArgument(format!("lexicon path {} has no file name", path.display())))?;
    let terms = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    Ok(Lexicon::new(name, terms))
}

/// Frozen term list with natural-log IDF, `idf = ln(N / df)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TfIdfTable {
    pub terms: Vec<String>,
    pub idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfIdfTable {
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [String]>, min_df: usize) -> Self {
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        let mut n = 0usize;
        for doc in docs {
            n += 1;
            let seen: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let (terms, idf) = df
            .into_iter()
            .filter(|&(_, d)| d >= min_df.max(1))
            .map(|(t, d)| (t.to_string(), (n as f64 / d as f64).ln()))
            .unzip();
        Self::from_parts(terms, idf)
    }

    pub fn from_parts(terms: Vec<String>, idf: Vec<f64>) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfIdfTable { terms, idf, index }
    }

    pub(crate) fn reindex(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// L2-normalized TF-IDF of a term sequence; unknown and zero-IDF terms are dropped.
    pub fn transform(&self, terms: &[String]) -> Vec<(usize, f64)> {
        let mut tf: BTreeMap<usize, f64> = BTreeMap::new();
        for t in terms {
            if let Some(&i) = self.index.get(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut v: Vec<(usize, f64)> = tf
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i]))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let norm = v.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut v {
                *w /= norm;
            }
        }
        v
    }
}

/// Unigrams followed by bigrams joined with a space.
pub fn word_ngrams(tokens: &[String]) -> Vec<String> {
    let mut out = tokens.to_vec();
    out.extend(tokens.windows(2).map(|w| format!("{} {}", w[0], w[1])));
    out
}

/// Character n-grams of the space-joined tokens, padded with one space each side.
pub fn char_ngrams(tokens: &[String], n: usize) -> Vec<String> {
    let padded: Vec<char> = format!(" {} ", tokens.join(" ")).chars().collect();
    if n == 0 || padded.len() < n {
        return Vec::new();
    }
    padded.windows(n).map(|w| w.iter().collect()).collect()
}

/// Raw feature values of one text, by block.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub word_ngrams: Vec<(usize, f64)>,
    pub char_ngrams: Vec<(usize, f64)>,
    /// One frequency per lexicon, in lexicon order.
    pub lexicons: Vec<f64>,
    pub readability: Option<Readability>,
    pub richness: Option<Richness>,
    /// Values of the pluggable blocks, concatenated in block order.
    pub extra: Vec<f64>,
}

impl FeatureVector {
    /// Dense part: lexicons, readability (3), richness (3), extra blocks.
    pub fn dense(&self) -> Vec<f64> {
        let mut out = self.lexicons.clone();
        if let Some(r) = &self.readability {
            out.extend([r.flesch_kincaid_grade, r.flesch_reading_ease, r.gunning_fog]);
        }
        if let Some(r) = &self.richness {
            out.extend([r.type_token_ratio, r.hapax_legomena as f64, r.hapax_dislegomena as f64]);
        }
        out.extend(&self.extra);
        out
    }
}

/// Fitted extractor. Vocabularies and standardization statistics are frozen at fit.
#[derive(Clone)]
pub struct FeatureExtractor {
    pub(crate) config: FeatureConfig,
    pub(crate) lexicons: Vec<Lexicon>,
    pub(crate) word_vocab: TfIdfTable,
    pub(crate) char_vocab: TfIdfTable,
    /// Per dense column mean and standard deviation (1 where the column is constant).
    pub(crate) dense_mean: Vec<f64>,
    pub(crate) dense_std: Vec<f64>,
    pub(crate) blocks: Vec<std::sync::Arc<dyn FeatureBlock>>,
}

impl std::fmt::Debug for FeatureExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeatureExtractor")
            .field("config", &self.config)
            .field("lexicons", &self.lexicons.iter().map(|l| &l.name).collect::<Vec<_>>())
            .field("word_terms", &self.word_vocab.len())
            .field("char_terms", &self.char_vocab.len())
            .field(
                "blocks",
                &self.blocks.iter().map(|b| b.name().to_string()).collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl FeatureExtractor {
    pub fn fit(
        texts: &[&str],
        config: FeatureConfig,
        lexicons: Vec<Lexicon>,
        blocks: Vec<std::sync::Arc<dyn FeatureBlock>>,
    ) -> Self {
        use rayon::prelude::*;
        let tokens: Vec<Vec<String>> = texts.par_iter().map(|t| tokenize(t)).collect();
        let word_vocab = if config.word_ngrams {
            let grams: Vec<Vec<String>> = tokens.par_iter().map(|t| word_ngrams(t)).collect();
            TfIdfTable::fit(grams.iter().map(Vec::as_slice), config.min_df)
        } else {
            TfIdfTable::default()
        };
        let char_vocab = if config.char_ngrams {
            let grams: Vec<Vec<String>> = tokens.par_iter().map(|t| char_ngrams(t, config.char_ngram)).collect();
            TfIdfTable::fit(grams.iter().map(Vec::as_slice), config.min_df)
        } else {
            TfIdfTable::default()
        };
        let mut fx = FeatureExtractor {
            config,
            lexicons,
            word_vocab,
            char_vocab,
            dense_mean: Vec::new(),
            dense_std: Vec::new(),
            blocks,
        };
        let dense: Vec<Vec<f64>> = texts
            .par_iter()
            .zip(&tokens)
            .map(|(t, toks)| fx.extract_tokens(t, toks).dense())
            .collect();
        let width = fx.dense_width();
        let n = dense.len().max(1) as f64;
        let mut mean = vec![0.0; width];
        for row in &dense {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; width];
        for row in &dense {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        fx.dense_std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        fx.dense_mean = mean;
        fx
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn lexicons(&self) -> &[Lexicon] {
        &self.lexicons
    }

    pub fn word_vocab(&self) -> &TfIdfTable {
        &self.word_vocab
    }

    pub fn char_vocab(&self) -> &TfIdfTable {
        &self.char_vocab
    }

    pub fn dense_width(&self) -> usize {
        self.lexicons.len()
            + if self.config.readability { 3 } else { 0 }
            + if self.config.richness { 3 } else { 0 }
            + self.blocks.iter().map(|b| b.columns().len()).sum::<usize>()
    }

    /// Width of the classifier input.
    pub fn dim(&self) -> usize {
        self.word_vocab.len() + self.char_vocab.len() + self.dense_width()
    }

    /// Names of all classifier inputs, in input order.
    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.word_vocab.terms.iter().map(|t| format!("word:{t}")).collect();
        names.extend(self.char_vocab.terms.iter().map(|t| format!("char:{t}")));
        names.extend(self.lexicons.iter().map(|l| format!("lexicon:{}", l.name)));
        if self.config.readability {
            names.extend(
                [
                    "readability:fk_grade",
                    "readability:flesch_ease",
                    "readability:gunning_fog",
                ]
                .map(String::from),
            );
        }
        if self.config.richness {
            names.extend(["richness:ttr", "richness:hapax", "richness:dislegomena"].map(String::from));
        }
        for b in &self.blocks {
            names.extend(b.columns().into_iter().map(|c| format!("{}:{c}", b.name())));
        }
        names
    }

    pub fn extract(&self, text: &str) -> FeatureVector {
        self.extract_tokens(text, &tokenize(text))
    }

    fn extract_tokens(&self, text: &str, tokens: &[String]) -> FeatureVector {
        FeatureVector {
            word_ngrams: if self.config.word_ngrams {
                self.word_vocab.transform(&word_ngrams(tokens))
            } else {
                Vec::new()
            },
            char_ngrams: if self.config.char_ngrams {
                self.char_vocab.transform(&char_ngrams(tokens, self.config.char_ngram))
            } else {
                Vec::new()
            },
            lexicons: self.lexicons.iter().map(|l| l.frequency(tokens)).collect(),
            readability: self
                .config
                .readability
                .then(|| Readability::from_counts(text_counts(text))),
            richness: self.config.richness.then(|| Richness::of(tokens)),
            extra: self.blocks.iter().flat_map(|b| b.extract(text, tokens)).collect(),
        }
    }

    /// Sparse classifier input: n-gram weights followed by standardized dense values.
    pub fn to_input(&self, fv: &FeatureVector) -> Vec<(usize, f64)> {
        let mut out = fv.word_ngrams.clone();
        let off = self.word_vocab.len();
        out.extend(fv.char_ngrams.iter().map(|&(i, w)| (off + i, w)));
        let off = off + self.char_vocab.len();
        for (j, v) in fv.dense().into_iter().enumerate() {
            let z = (v - self.dense_mean[j]) / self.dense_std[j];
            if z != 0.0 {
                out.push((off + j, z));
            }
        }
        out
    }

    pub fn input(&self, text: &str) -> Vec<(usize, f64)> {
        self.to_input(&self.extract(text))
    }
}
