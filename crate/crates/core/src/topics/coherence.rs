//! UMass topic coherence over training-document co-occurrence.
//!
//! For top words `w_1..w_N` ordered by descending probability,
//! `C = Σ_{i=2..N} Σ_{j<i} ln((D(w_i, w_j) + 1) / D(w_j))`, where `D` counts
//! documents containing the word (or both words).

use super::{Result, TopicsError};

/// Document and co-document frequencies.
pub trait DocumentFrequencies {
    fn doc_freq(&self, w: usize) -> usize;
    fn co_doc_freq(&self, a: usize, b: usize) -> usize;
}

/// Per-term document bitsets.
#[derive(Debug, Clone)]
pub struct DocIndex {
    words: usize,
    sets: Vec<Vec<u64>>,
}

impl DocIndex {
    pub fn new(docs: &[Vec<usize>], vocab_size: usize) -> Self {
        let words = docs.len().div_ceil(64).max(1);
        let mut sets = vec![vec![0u64; words]; vocab_size];
        for (d, doc) in docs.iter().enumerate() {
            for &w in doc {
                sets[w][d / 64] |= 1 << (d % 64);
            }
        }
        DocIndex { words, sets }
    }
}

impl DocumentFrequencies for DocIndex {
    fn doc_freq(&self, w: usize) -> usize {
        self.sets[w].iter().map(|x| x.count_ones() as usize).sum()
    }

    fn co_doc_freq(&self, a: usize, b: usize) -> usize {
        (0..self.words).map(|i| (self.sets[a][i] & self.sets[b][i]).count_ones() as usize).sum()
    }
}

/// UMass coherence of one ranked word list. Fewer than two words give 0.
pub fn umass(top_words: &[usize], freqs: &impl DocumentFrequencies) -> Result<f64> {
    let mut score = 0.0;
    for i in 1..top_words.len() {
        for j in 0..i {
            let dj = freqs.doc_freq(top_words[j]);
            if dj == 0 {
                return Err(TopicsError::UnseenWord(top_words[j]));
            }
            let co = freqs.co_doc_freq(top_words[i], top_words[j]);
            score += ((co as f64 + 1.0) / dj as f64).ln();
        }
    }
    Ok(score)
}

/// Mean UMass coherence over topics.
pub fn mean_umass(topics: &[Vec<usize>], freqs: &impl DocumentFrequencies) -> Result<f64> {
    if topics.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for t in topics {
        sum += umass(t, freqs)?;
    }
    Ok(sum / topics.len() as f64)
}
