//! Topic extraction: LDA fitting, coherence-based choice of the topic count,
//! and ranked top-word summaries.

pub mod coherence;
mod lda;

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::{TokenStream, Vocabulary};
use crate::rng::derive_seed;

pub use coherence::{mean_umass, umass, DocIndex, DocumentFrequencies};
pub use lda::{LdaCheckpoint, LdaModel, LdaParams};

#[derive(Debug, Error)]
pub enum TopicsError {
    #[error("no documents to fit")]
    NoDocuments,
    #[error("invalid topic model configuration: {0}")]
    InvalidConfig(String),
    #[error("term id {0} occurs in no training document")]
    UnseenWord(usize),
    #[error("term `{0}` is not in the vocabulary")]
    UnknownTerm(String),
    #[error("K={k}: {source}")]
    ForK { k: usize, source: Box<TopicsError> },
    #[error("sampler state inconsistent: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, TopicsError>;

/// Fits LDA on token streams. Documents are sampled in ascending `post_ref`
/// order, so permuting the input only permutes document indices.
pub fn fit(streams: &[TokenStream], vocab: &Vocabulary, params: &LdaParams) -> Result<LdaModel> {
    fit_with_observer(streams, vocab, params, |_, _| {})
}

/// As [`fit`], calling `on_sweep(sweep, model)` after every Gibbs sweep.
pub fn fit_with_observer(
    streams: &[TokenStream],
    vocab: &Vocabulary,
    params: &LdaParams,
    on_sweep: impl FnMut(usize, &LdaModel),
) -> Result<LdaModel> {
    if streams.is_empty() {
        return Err(TopicsError::NoDocuments);
    }
    let docs = vocab.encode(streams);
    let mut order: Vec<usize> = (0..streams.len()).collect();
    order.sort_by_key(|&i| (streams[i].post_ref, i));
    lda::fit_ordered(docs, vocab.len(), params, &order, on_sweep)
}

/// Fits on pre-encoded documents, sampled in input order.
pub fn fit_encoded(docs: Vec<Vec<usize>>, vocab_size: usize, params: &LdaParams) -> Result<LdaModel> {
    let order: Vec<usize> = (0..docs.len()).collect();
    lda::fit_ordered(docs, vocab_size, params, &order, |_, _| {})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicWord {
    pub term: String,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicSummary {
    pub topic_id: usize,
    pub top_words: Vec<TopicWord>,
}

/// Term ids of topic `k` ranked by descending probability, ties by term id.
fn ranked_terms(k: usize, vocab_size: usize, phi: impl Fn(usize, usize) -> f64, n_top: usize) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = (0..vocab_size).map(|w| (w, phi(k, w))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n_top.min(vocab_size));
    ranked
}

pub fn top_term_ids(model: &LdaModel, n_top: usize) -> Vec<Vec<usize>> {
    (0..model.k)
        .map(|k| {
            ranked_terms(k, model.vocab_size(), |k, w| model.phi(k, w), n_top).into_iter().map(|(w, _)| w).collect()
        })
        .collect()
}

pub fn summarize(model: &LdaModel, vocab: &Vocabulary, n_top: usize) -> Vec<TopicSummary> {
    summarize_with(model.k, model.vocab_size(), |k, w| model.phi(k, w), vocab, n_top)
}

pub fn summarize_checkpoint(ckpt: &LdaCheckpoint, vocab: &Vocabulary, n_top: usize) -> Vec<TopicSummary> {
    summarize_with(ckpt.k, ckpt.vocab_size, |k, w| ckpt.phi(k, w), vocab, n_top)
}

fn summarize_with(
    k: usize,
    vocab_size: usize,
    phi: impl Fn(usize, usize) -> f64 + Copy,
    vocab: &Vocabulary,
    n_top: usize,
) -> Vec<TopicSummary> {
    (0..k)
        .map(|t| TopicSummary {
            topic_id: t,
            top_words: ranked_terms(t, vocab_size, phi, n_top)
                .into_iter()
                .map(|(w, prob)| TopicWord { term: vocab.term(w).to_string(), prob })
                .collect(),
        })
        .collect()
}

/// `topic_id,rank,term,prob` with 1-based ranks.
pub fn write_summaries_csv<W: Write>(writer: W, summaries: &[TopicSummary]) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["topic_id", "rank", "term", "prob"])?;
    for s in summaries {
        for (rank, tw) in s.top_words.iter().enumerate() {
            w.write_record([
                s.topic_id.to_string(),
                (rank + 1).to_string(),
                tw.term.clone(),
                format!("{:.6}", tw.prob),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Coherence of a model's topics, each scored on its `n_top` best terms.
pub fn model_coherence(model: &LdaModel, index: &DocIndex, n_top: usize) -> Result<f64> {
    mean_umass(&top_term_ids(model, n_top), index)
}

/// UMass coherence of a ranked list of terms given as strings.
pub fn term_coherence(words: &[&str], vocab: &Vocabulary, index: &DocIndex) -> Result<f64> {
    let ids = words
        .iter()
        .map(|w| vocab.id(w).ok_or_else(|| TopicsError::UnknownTerm(w.to_string())))
        .collect::<Result<Vec<_>>>()?;
    umass(&ids, index)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    pub per_k: BTreeMap<usize, f64>,
    pub selected_k: usize,
    pub n_top: usize,
}

impl CoherenceReport {
    pub fn write_csv<W: Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "coherence", "selected"])?;
        for (&k, &c) in &self.per_k {
            w.write_record([k.to_string(), format!("{c:.6}"), u8::from(k == self.selected_k).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Seed used for the model with `k` topics inside [`select_k`].
pub fn seed_for_k(seed: u64, k: usize) -> u64 {
    derive_seed(seed, k as u64)
}

/// Fits one model per K (in parallel, each with its own derived seed),
/// scores each by mean UMass coherence over `n_top` words, and keeps the
/// best. Ties go to the smaller K.
pub fn select_k(
    streams: &[TokenStream],
    vocab: &Vocabulary,
    k_range: &[usize],
    base: &LdaParams,
    n_top: usize,
) -> Result<(CoherenceReport, LdaModel)> {
    if k_range.is_empty() {
        return Err(TopicsError::InvalidConfig("empty K range".into()));
    }
    let mut ks = k_range.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let index = DocIndex::new(&vocab.encode(streams), vocab.len());
    let fitted: Vec<(usize, LdaModel, f64)> = ks
        .par_iter()
        .map(|&k| {
            let params = LdaParams { k, seed: seed_for_k(base.seed, k), ..*base };
            let annotate = |source| TopicsError::ForK { k, source: Box::new(source) };
            let model = fit(streams, vocab, &params).map_err(annotate)?;
            let score = model_coherence(&model, &index, n_top).map_err(annotate)?;
            Ok((k, model, score))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (_, _, score)) in fitted.iter().enumerate() {
        if *score > fitted[best].2 {
            best = i;
        }
    }
    let per_k = fitted.iter().map(|(k, _, s)| (*k, *s)).collect();
    let (selected_k, model, _) = fitted.into_iter().nth(best).expect("non-empty");
    Ok((CoherenceReport { per_k, selected_k, n_top }, model))
}
