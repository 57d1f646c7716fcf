//! Collapsed Gibbs sampling for latent Dirichlet allocation.

use serde::{Deserialize, Serialize};

use super::{Result, TopicsError};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub k: usize,
    /// Symmetric document–topic prior; `None` means `50 / k`.
    pub alpha: Option<f64>,
    pub beta: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl LdaParams {
    pub fn new(k: usize) -> Self {
        LdaParams { k, alpha: None, beta: 0.01, iterations: 1000, seed: 42 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.k as f64)
    }
}

/// Sampler state. Counts are stored word-major (`word_topic[w * k + t]`)
/// for the inner loop; accessors present the usual topic × term view.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    vocab_size: usize,
    docs: Vec<Vec<usize>>,
    /// Topic of every token, aligned with `docs`.
    assignments: Vec<Vec<usize>>,
    doc_topic: Vec<u32>,
    word_topic: Vec<u32>,
    topic_totals: Vec<u32>,
}

impl LdaModel {
    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assignments
    }

    pub fn docs(&self) -> &[Vec<usize>] {
        &self.docs
    }

    pub fn n_dk(&self, d: usize, k: usize) -> u32 {
        self.doc_topic[d * self.k + k]
    }

    pub fn n_kw(&self, k: usize, w: usize) -> u32 {
        self.word_topic[w * self.k + k]
    }

    pub fn n_k(&self, k: usize) -> u32 {
        self.topic_totals[k]
    }

    /// Smoothed topic–term probability `(n_kw + β) / (n_k + Vβ)`.
    pub fn phi(&self, k: usize, w: usize) -> f64 {
        (self.n_kw(k, w) as f64 + self.beta) / (self.n_k(k) as f64 + self.vocab_size as f64 * self.beta)
    }

    /// Topic × term counts, row-major.
    pub fn topic_term_matrix(&self) -> Vec<u32> {
        let mut out = vec![0; self.k * self.vocab_size];
        for w in 0..self.vocab_size {
            for k in 0..self.k {
                out[k * self.vocab_size + w] = self.word_topic[w * self.k + k];
            }
        }
        out
    }

    pub fn doc_topic_matrix(&self) -> &[u32] {
        &self.doc_topic
    }

    /// Recounts everything from the assignments and compares.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let k = self.k;
        let mut doc_topic = vec![0u32; self.docs.len() * k];
        let mut word_topic = vec![0u32; self.vocab_size * k];
        let mut totals = vec![0u32; k];
        for (d, (doc, z)) in self.docs.iter().zip(&self.assignments).enumerate() {
            if doc.len() != z.len() {
                return Err(format!("document {d}: {} tokens but {} assignments", doc.len(), z.len()));
            }
            for (&w, &t) in doc.iter().zip(z) {
                if t >= k {
                    return Err(format!("document {d}: assignment {t} outside [0, {k})"));
                }
                doc_topic[d * k + t] += 1;
                word_topic[w * k + t] += 1;
                totals[t] += 1;
            }
        }
        for (d, doc) in self.docs.iter().enumerate() {
            let sum: u32 = self.doc_topic[d * k..(d + 1) * k].iter().sum();
            if sum as usize != doc.len() {
                return Err(format!("document {d}: topic counts sum to {sum}, length is {}", doc.len()));
            }
        }
        for t in 0..k {
            let sum: u32 = (0..self.vocab_size).map(|w| self.word_topic[w * k + t]).sum();
            if sum != self.topic_totals[t] {
                return Err(format!("topic {t}: term counts sum to {sum}, total is {}", self.topic_totals[t]));
            }
        }
        if doc_topic != self.doc_topic || word_topic != self.word_topic || totals != self.topic_totals {
            return Err("counts disagree with assignments".into());
        }
        Ok(())
    }
}

/// Fits LDA on term-id documents, visiting documents in the order of `order`
/// (a permutation of document indices) during initialization and every sweep.
pub(crate) fn fit_ordered(
    docs: Vec<Vec<usize>>,
    vocab_size: usize,
    params: &LdaParams,
    order: &[usize],
    mut on_sweep: impl FnMut(usize, &LdaModel),
) -> Result<LdaModel> {
    let k = params.k;
    if docs.is_empty() {
        return Err(TopicsError::NoDocuments);
    }
    if k == 0 || k > docs.len() {
        return Err(TopicsError::InvalidConfig(format!(
            "topic count {k} must lie in [1, {}] (number of documents)",
            docs.len()
        )));
    }
    if params.iterations == 0 {
        return Err(TopicsError::InvalidConfig("iterations must be at least 1".into()));
    }
    if vocab_size == 0 {
        return Err(TopicsError::InvalidConfig("vocabulary is empty".into()));
    }
    let alpha = params.alpha();
    if !(alpha > 0.0 && params.beta > 0.0) {
        return Err(TopicsError::InvalidConfig("alpha and beta must be positive".into()));
    }
    debug_assert_eq!(order.len(), docs.len());

    let mut rng = Rng::new(params.seed);
    let mut model = LdaModel {
        k,
        alpha,
        beta: params.beta,
        seed: params.seed,
        iterations: params.iterations,
        vocab_size,
        assignments: docs.iter().map(|d| vec![0; d.len()]).collect(),
        doc_topic: vec![0; docs.len() * k],
        word_topic: vec![0; vocab_size * k],
        topic_totals: vec![0; k],
        docs,
    };

    for &d in order {
        for i in 0..model.docs[d].len() {
            let w = model.docs[d][i];
            let t = rng.below(k);
            model.assignments[d][i] = t;
            model.doc_topic[d * k + t] += 1;
            model.word_topic[w * k + t] += 1;
            model.topic_totals[t] += 1;
        }
    }

    let v_beta = vocab_size as f64 * params.beta;
    let mut cumulative = vec![0.0f64; k];
    for sweep in 0..params.iterations {
        for &d in order {
            for i in 0..model.docs[d].len() {
                let w = model.docs[d][i];
                let old = model.assignments[d][i];
                model.doc_topic[d * k + old] -= 1;
                model.word_topic[w * k + old] -= 1;
                model.topic_totals[old] -= 1;

                let dt = &model.doc_topic[d * k..(d + 1) * k];
                let wt = &model.word_topic[w * k..(w + 1) * k];
                let mut acc = 0.0;
                for t in 0..k {
                    acc +=
                        (dt[t] as f64 + alpha) * (wt[t] as f64 + params.beta) / (model.topic_totals[t] as f64 + v_beta);
                    cumulative[t] = acc;
                }
                let u = rng.uniform() * acc;
                let new = cumulative.iter().position(|&c| u < c).unwrap_or(k - 1);

                model.assignments[d][i] = new;
                model.doc_topic[d * k + new] += 1;
                model.word_topic[w * k + new] += 1;
                model.topic_totals[new] += 1;
            }
        }
        debug_assert!(model.check_invariants().is_ok(), "sweep {sweep}: {:?}", model.check_invariants());
        on_sweep(sweep, &model);
    }
    if let Err(e) = model.check_invariants() {
        return Err(TopicsError::Internal(e));
    }
    Ok(model)
}

/// Dense count export: `n_kw` is K × V and `n_dk` is D × K, both row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaCheckpoint {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub seed: u64,
    pub iterations: usize,
    pub num_docs: usize,
    pub vocab_size: usize,
    pub n_kw: Vec<u32>,
    pub n_dk: Vec<u32>,
}

impl From<&LdaModel> for LdaCheckpoint {
    fn from(m: &LdaModel) -> Self {
        LdaCheckpoint {
            k: m.k,
            alpha: m.alpha,
            beta: m.beta,
            seed: m.seed,
            iterations: m.iterations,
            num_docs: m.num_docs(),
            vocab_size: m.vocab_size,
            n_kw: m.topic_term_matrix(),
            n_dk: m.doc_topic.clone(),
        }
    }
}

impl LdaCheckpoint {
    pub fn n_k(&self, k: usize) -> u32 {
        self.n_kw[k * self.vocab_size..(k + 1) * self.vocab_size].iter().sum()
    }

    pub fn phi(&self, k: usize, w: usize) -> f64 {
        (self.n_kw[k * self.vocab_size + w] as f64 + self.beta)
            / (self.n_k(k) as f64 + self.vocab_size as f64 * self.beta)
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.n_kw.len() != self.k * self.vocab_size {
            return Err(format!("n_kw has {} entries, expected {}", self.n_kw.len(), self.k * self.vocab_size));
        }
        if self.n_dk.len() != self.num_docs * self.k {
            return Err(format!("n_dk has {} entries, expected {}", self.n_dk.len(), self.num_docs * self.k));
        }
        let a: u64 = self.n_kw.iter().map(|&x| x as u64).sum();
        let b: u64 = self.n_dk.iter().map(|&x| x as u64).sum();
        if a != b {
            return Err(format!("token totals differ: {a} in n_kw, {b} in n_dk"));
        }
        Ok(())
    }
}
