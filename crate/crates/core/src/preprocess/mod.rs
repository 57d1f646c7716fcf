//! Text normalization: tokenization, entity and stopword removal, stemming,
//! collocation detection and vocabulary construction.
//!
//! The per-post order is fixed: NFC normalization, tokenization on
//! non-alphanumeric boundaries, entity removal, lowercasing, stopword
//! removal, stemming, then removal of tokens shorter than
//! `min_token_len` characters.

mod ngrams;
pub mod porter;
mod vocab;

use std::collections::HashSet;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, Post};

pub use ngrams::{detect_ngrams, pair_counts};
pub use vocab::{build_vocabulary, Vocabulary};

/// Version tag of the bundled stopword list.
pub const STOPWORDS_VERSION: &str = "en-1";
const BUNDLED_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Stemming is iterated until the token stops changing; Porter rules are
/// not idempotent on their own output (`agreed` → `agre` → `agr`).
const MAX_STEM_ROUNDS: usize = 8;

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("invalid preprocessing configuration: {0}")]
    InvalidConfig(String),
    #[error(
        "vocabulary is empty after filtering (min_doc_freq={min_doc_freq}, max_doc_fraction={max_doc_fraction}); \
         lower min_doc_freq or raise max_doc_fraction"
    )]
    EmptyVocabulary { min_doc_freq: usize, max_doc_fraction: f64 },
    #[error("cannot read stopword file {path}: {source}")]
    Stopwords { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, PreprocessError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    /// One word per line, `#` comments allowed. `None` selects the bundled list.
    pub stopword_file: Option<PathBuf>,
    pub min_doc_freq: usize,
    pub max_doc_fraction: f64,
    pub ngram_min_count: usize,
    pub ngram_threshold: f64,
    pub entity_removal: bool,
    pub stemming: bool,
    pub min_token_len: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            stopword_file: None,
            min_doc_freq: 2,
            max_doc_fraction: 0.9,
            ngram_min_count: 5,
            ngram_threshold: 10.0,
            entity_removal: true,
            stemming: true,
            min_token_len: 2,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_doc_fraction > 0.0 && self.max_doc_fraction <= 1.0) {
            return Err(PreprocessError::InvalidConfig(format!(
                "max_doc_fraction must lie in (0, 1], got {}",
                self.max_doc_fraction
            )));
        }
        if self.ngram_min_count == 0 {
            return Err(PreprocessError::InvalidConfig("ngram_min_count must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_stopwords(&self) -> Result<HashSet<String>> {
        match &self.stopword_file {
            None => Ok(parse_stopwords(BUNDLED_STOPWORDS)),
            Some(path) => std::fs::read_to_string(path)
                .map(|s| parse_stopwords(&s))
                .map_err(|source| PreprocessError::Stopwords { path: path.clone(), source }),
        }
    }
}

fn parse_stopwords(text: &str) -> HashSet<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(str::to_lowercase).collect()
}

pub fn bundled_stopwords() -> HashSet<String> {
    parse_stopwords(BUNDLED_STOPWORDS)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub post_ref: u64,
    pub tokens: Vec<String>,
}

impl TokenStream {
    /// Unigram view: n-gram tokens are split back into their parts.
    pub fn unigrams(&self) -> Vec<&str> {
        self.tokens.iter().flat_map(|t| t.split('_')).collect()
    }
}

#[derive(Debug, Clone, Copy)]
struct RawToken<'a> {
    text: &'a str,
    sentence_start: bool,
}

fn tokenize(text: &str) -> Vec<RawToken<'_>> {
    let mut out = Vec::new();
    let mut boundary = true;
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_alphanumeric() {
            if start.is_none() {
                start = Some(i);
            }
            continue;
        }
        if let Some(s) = start.take() {
            out.push(RawToken { text: &text[s..i], sentence_start: boundary });
            boundary = false;
        }
        if matches!(c, '.' | '!' | '?' | '\n') {
            boundary = true;
        }
    }
    if let Some(s) = start {
        out.push(RawToken { text: &text[s..], sentence_start: boundary });
    }
    out
}

/// Lowercased, NFC-normalized alphanumeric tokens of `text`, nothing removed.
pub fn raw_tokens(text: &str) -> Vec<String> {
    let nfc: String = text.nfc().collect();
    tokenize(&nfc).into_iter().map(|t| t.text.to_lowercase()).collect()
}

fn stem_stable(token: &str) -> String {
    let mut current = porter::stem(token);
    for _ in 0..MAX_STEM_ROUNDS {
        let next = porter::stem(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Applies the per-post pipeline. Holds the stopword set and the corpus
/// lowercase lexicon used by the entity heuristic.
#[derive(Debug, Clone)]
pub struct Normalizer {
    config: PreprocessConfig,
    stopwords: HashSet<String>,
    lexicon: HashSet<String>,
}

impl Normalizer {
    pub fn new(config: &PreprocessConfig, corpus: &Corpus) -> Result<Self> {
        config.validate()?;
        let stopwords = config.load_stopwords()?;
        Ok(Self::with_stopwords(config, stopwords, corpus.posts().iter().map(|p| p.text.as_str())))
    }

    /// `texts` feed the lowercase lexicon: a capitalized mid-sentence token
    /// is treated as a named entity only if it never occurs in lowercase.
    pub fn with_stopwords<'a>(
        config: &PreprocessConfig,
        stopwords: HashSet<String>,
        texts: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let mut lexicon = HashSet::new();
        for text in texts {
            let nfc: String = text.nfc().collect();
            for t in tokenize(&nfc) {
                if t.text.chars().all(|c| !c.is_uppercase()) {
                    lexicon.insert(t.text.to_string());
                }
            }
        }
        Normalizer { config: config.clone(), stopwords, lexicon }
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    fn is_entity(&self, tok: &RawToken<'_>) -> bool {
        if tok.sentence_start {
            return false;
        }
        let starts_upper = tok.text.chars().next().is_some_and(char::is_uppercase);
        starts_upper && !self.lexicon.contains(&tok.text.to_lowercase())
    }

    fn finish(&self, token: String) -> Option<String> {
        let token = if self.config.stemming { stem_stable(&token) } else { token };
        if token.chars().count() < self.config.min_token_len || self.stopwords.contains(&token) {
            None
        } else {
            Some(token)
        }
    }

    pub fn normalize(&self, post: &Post) -> TokenStream {
        TokenStream { post_ref: post.entry_id, tokens: self.normalize_text(&post.text) }
    }

    pub fn normalize_text(&self, text: &str) -> Vec<String> {
        let nfc: String = text.nfc().collect();
        tokenize(&nfc)
            .into_iter()
            .filter(|t| !(self.config.entity_removal && self.is_entity(t)))
            .map(|t| t.text.to_lowercase())
            .filter(|t| !self.stopwords.contains(t))
            .filter_map(|t| self.finish(t))
            .collect()
    }

    /// Tokens for phrase matching: stemmed like posts, but with stopwords and
    /// capitalized words kept so multi-word phrases stay contiguous.
    pub fn phrase_tokens(&self, text: &str) -> Vec<String> {
        raw_tokens(text)
            .into_iter()
            .map(|t| if self.config.stemming { stem_stable(&t) } else { t })
            .filter(|t| !t.is_empty())
            .collect()
    }

    /// Normalizes every post, in corpus order.
    pub fn normalize_corpus(&self, corpus: &Corpus) -> Vec<TokenStream> {
        corpus.posts().par_iter().map(|p| self.normalize(p)).collect()
    }
}

/// Full preprocessing: per-post normalization followed by bigram and
/// trigram detection.
pub fn preprocess_corpus(config: &PreprocessConfig, corpus: &Corpus) -> Result<Vec<TokenStream>> {
    let normalizer = Normalizer::new(config, corpus)?;
    let streams = normalizer.normalize_corpus(corpus);
    Ok(detect_ngrams(&streams, config.ngram_min_count, config.ngram_threshold))
}
