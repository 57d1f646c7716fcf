use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{PreprocessError, Result, TokenStream};

/// Retained terms, indexed densely in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    num_docs: usize,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_terms(terms: Vec<String>, doc_freq: Vec<usize>, num_docs: usize) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, doc_freq, num_docs, index }
    }

    /// Rebuilds the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn term(&self, id: usize) -> &str {
        &self.terms[id]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn id(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn doc_freq(&self, id: usize) -> usize {
        self.doc_freq[id]
    }

    /// Maps each stream onto term ids, dropping out-of-vocabulary tokens.
    pub fn encode(&self, streams: &[TokenStream]) -> Vec<Vec<usize>> {
        streams.iter().map(|s| s.tokens.iter().filter_map(|t| self.id(t)).collect()).collect()
    }
}

pub fn build_vocabulary(streams: &[TokenStream], min_doc_freq: usize, max_doc_fraction: f64) -> Result<Vocabulary> {
    if !(max_doc_fraction > 0.0 && max_doc_fraction <= 1.0) {
        return Err(PreprocessError::InvalidConfig(format!(
            "max_doc_fraction must lie in (0, 1], got {max_doc_fraction}"
        )));
    }
    let num_docs = streams.len();
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for s in streams {
        let distinct: HashSet<&str> = s.tokens.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
        .into_iter()
        .filter(|&(_, n)| n >= min_doc_freq && n as f64 / num_docs as f64 <= max_doc_fraction)
        .map(|(t, n)| (t.to_string(), n))
        .unzip();
    if terms.is_empty() {
        return Err(PreprocessError::EmptyVocabulary { min_doc_freq, max_doc_fraction });
    }
    Ok(Vocabulary::from_terms(terms, doc_freq, num_docs))
}
