//! Propaganda classification: features, a maximum-entropy (logistic) classifier,
//! tweet chunking and item scoring.

mod features;
mod logistic;
pub mod text;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use features::{
    char_ngrams, load_lexicon, word_ngrams, FeatureBlock, FeatureConfig, FeatureExtractor, FeatureVector, Lexicon,
    TfIdfTable,
};
pub use logistic::{sigmoid, LogisticRegression, Objective, SparseRow, TrainOptions, TrainReport};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_CHUNK_TOKENS: usize = 400;
pub const MIN_CHUNK_TOKENS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextKind {
    Article,
    TweetChunk,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TextItem {
    pub item_id: String,
    pub kind: TextKind,
    pub text: String,
    /// User id for chunks, url for articles.
    pub owner: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ItemScore<F> {
    pub item_id: String,
    pub score: F,
}

impl<F: Scalar> ItemScore<F> {
    pub fn label(&self) -> bool {
        self.score > F::lit(0.5)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledText {
    pub text: String,
    pub label: bool,
}

#[derive(Deserialize)]
struct LabeledRecord {
    text: String,
    label: u8,
}

/// JSON Lines of `{"text": ..., "label": 0|1}`.
pub fn load_training_corpus(path: &Path) -> Result<Vec<LabeledText>> {
    let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let rec: LabeledRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let label = match rec.label {
            0 => false,
            1 => true,
            l => return Err(bad(format!("label must be 0 or 1, got {l}"))),
        };
        out.push(LabeledText { text: rec.text, label });
    }
    Ok(out)
}

pub fn write_training_corpus(path: &Path, items: &[LabeledText]) -> Result<()> {
    let records = items
        .iter()
        .map(|t| serde_json::json!({"text": t.text, "label": u8::from(t.label)}));
    crate::corpus::write_jsonl(path, records)
}

/// Groups a user's original tweets (retweets excluded, quote tweets included) in
/// chronological order into chunks of about `target_tokens` tokens. A chunk closes
/// as soon as it reaches the target; a final remainder under a quarter of the
/// target is merged into the previous chunk. Tweet texts are joined by newlines.
pub fn chunk_tweets(corpus: &Corpus, user: &str, target_tokens: usize) -> Result<Vec<TextItem>> {
    if target_tokens < MIN_CHUNK_TOKENS {
        return Err(Error::InvalidArgument(format!(
            "chunk target must be at least {MIN_CHUNK_TOKENS} tokens, got {target_tokens}"
        )));
    }
    let mut originals: Vec<_> = corpus.tweets_by(user).filter(|t| !t.is_retweet()).collect();
    originals.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));

    let mut groups: Vec<(Vec<&str>, usize)> = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    let mut count = 0;
    for t in originals {
        current.push(&t.text);
        count += text::tokenize(&t.text).len();
        if count >= target_tokens {
            groups.push((std::mem::take(&mut current), count));
            count = 0;
        }
    }
    if !current.is_empty() {
        if 4 * count < target_tokens && !groups.is_empty() {
            let last = groups.last_mut().expect("non-empty");
            last.0.extend(current);
            last.1 += count;
        } else {
            groups.push((current, count));
        }
    }
    Ok(groups
        .into_iter()
        .enumerate()
        .map(|(i, (texts, _))| TextItem {
            item_id: format!("{user}#{i}"),
            kind: TextKind::TweetChunk,
            text: texts.join("\n"),
            owner: user.to_string(),
        })
        .collect())
}

/// One item per article: title and body on separate lines.
pub fn article_items(corpus: &Corpus) -> Vec<TextItem> {
    corpus
        .articles()
        .values()
        .map(|a| TextItem {
            item_id: a.url.clone(),
            kind: TextKind::Article,
            text: if a.title.is_empty() {
                a.text.clone()
            } else {
                format!("{}\n{}", a.title, a.text)
            },
            owner: a.url.clone(),
        })
        .collect()
}

/// Everything besides the data that determines a fit.
#[derive(Clone, Default)]
pub struct TrainerConfig {
    pub features: FeatureConfig,
    pub lexicons: Vec<Lexicon>,
    pub blocks: Vec<Arc<dyn FeatureBlock>>,
    pub options: TrainOptions,
    /// Recorded with the model; the optimizer starts from zero and has no
    /// random component.
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct PropagandaModel<F> {
    extractor: FeatureExtractor,
    classifier: LogisticRegression<F>,
    lambda: f64,
    seed: u64,
    report: Option<TrainReport>,
}

/// Trains with default features and options.
pub fn train_classifier<F: Scalar>(items: &[LabeledText], lambda: f64, seed: u64) -> Result<PropagandaModel<F>> {
    let mut config = TrainerConfig {
        seed,
        ..Default::default()
    };
    config.options.lambda = lambda;
    PropagandaModel::train(items, &config)
}

const MODEL_FORMAT: &str = "coordprop-propaganda-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    lambda: f64,
    seed: u64,
    features: FeatureConfig,
    lexicons: Vec<Lexicon>,
    blocks: Vec<String>,
    word_vocab: TfIdfTable,
    char_vocab: TfIdfTable,
    dense_mean: Vec<f64>,
    dense_std: Vec<f64>,
    weights: Vec<f64>,
    bias: f64,
}

impl<F: Scalar> PropagandaModel<F> {
    pub fn train(items: &[LabeledText], config: &TrainerConfig) -> Result<Self> {
        if !(config.options.lambda >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be >= 0, got {}",
                config.options.lambda
            )));
        }
        let labels: Vec<bool> = items.iter().map(|t| t.label).collect();
        if !labels.iter().any(|&y| y) || labels.iter().all(|&y| y) {
            return Err(Error::SingleClass);
        }
        let texts: Vec<&str> = items.iter().map(|t| t.text.as_str()).collect();
        let extractor = FeatureExtractor::fit(
            &texts,
            config.features.clone(),
            config.lexicons.clone(),
            config.blocks.clone(),
        );
        let rows: Vec<SparseRow<F>> = texts
            .par_iter()
            .map(|t| extractor.input(t).into_iter().map(|(j, v)| (j, F::lit(v))).collect())
            .collect();
        let (classifier, report) = LogisticRegression::fit(&rows, &labels, extractor.dim(), &config.options)?;
        Ok(PropagandaModel {
            extractor,
            classifier,
            lambda: config.options.lambda,
            seed: config.seed,
            report: Some(report),
        })
    }

    /// A model with the given extractor and all-zero weights.
    pub fn zeros(extractor: FeatureExtractor) -> Self {
        let dim = extractor.dim();
        PropagandaModel {
            extractor,
            classifier: LogisticRegression::zeros(dim),
            lambda: 0.0,
            seed: 0,
            report: None,
        }
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn classifier(&self) -> &LogisticRegression<F> {
        &self.classifier
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Optimizer summary; `None` for loaded or hand-built models.
    pub fn report(&self) -> Option<&TrainReport> {
        self.report.as_ref()
    }

    pub fn score_text(&self, text: &str) -> F {
        let row: SparseRow<F> = self
            .extractor
            .input(text)
            .into_iter()
            .map(|(j, v)| (j, F::lit(v)))
            .collect();
        self.classifier.probability(&row)
    }

    pub fn score_item(&self, item: &TextItem) -> ItemScore<F> {
        ItemScore {
            item_id: item.item_id.clone(),
            score: self.score_text(&item.text),
        }
    }

    /// Scores in input order; parallel over items.
    pub fn score_items(&self, items: &[TextItem]) -> Vec<ItemScore<F>> {
        items.par_iter().map(|it| self.score_item(it)).collect()
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            lambda: self.lambda,
            seed: self.seed,
            features: self.extractor.config.clone(),
            lexicons: self.extractor.lexicons.clone(),
            blocks: self.extractor.blocks.iter().map(|b| b.name().to_string()).collect(),
            word_vocab: self.extractor.word_vocab.clone(),
            char_vocab: self.extractor.char_vocab.clone(),
            dense_mean: self.extractor.dense_mean.clone(),
            dense_std: self.extractor.dense_std.clone(),
            weights: self.classifier.weights.iter().map(|w| w.as_f64()).collect(),
            bias: self.classifier.bias.as_f64(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    /// Parses a model file. Pluggable blocks are code, so the caller passes the
    /// same blocks (by name and order) that the model was trained with.
    pub fn from_json(json: &str, blocks: Vec<Arc<dyn FeatureBlock>>) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json).map_err(|e| Error::Model(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a model file (format {:?})", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", file.version)));
        }
        let names: Vec<&str> = blocks.iter().map(|b| b.name()).collect();
        if names != file.blocks {
            return Err(Error::Model(format!(
                "model expects feature blocks {:?}, got {:?}",
                file.blocks, names
            )));
        }
        let mut word_vocab = file.word_vocab;
        word_vocab.reindex();
        let mut char_vocab = file.char_vocab;
        char_vocab.reindex();
        let extractor = FeatureExtractor {
            config: file.features,
            lexicons: file.lexicons,
            word_vocab,
            char_vocab,
            dense_mean: file.dense_mean,
            dense_std: file.dense_std,
            blocks,
        };
        let dense = extractor.dense_width();
        if extractor.dense_mean.len() != dense
            || extractor.dense_std.len() != dense
            || file.weights.len() != extractor.dim()
            || extractor.word_vocab.idf.len() != extractor.word_vocab.terms.len()
            || extractor.char_vocab.idf.len() != extractor.char_vocab.terms.len()
        {
            return Err(Error::Model("inconsistent table sizes".into()));
        }
        Ok(PropagandaModel {
            extractor,
            classifier: LogisticRegression {
                weights: file.weights.into_iter().map(F::lit).collect(),
                bias: F::lit(file.bias),
            },
            lambda: file.lambda,
            seed: file.seed,
            report: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, blocks: Vec<Arc<dyn FeatureBlock>>) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json, blocks)
    }
}
