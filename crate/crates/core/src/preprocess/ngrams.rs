//! Collocation detection. Adjacent pairs scoring at or above the threshold
//! under `(count(a,b) - min_count) * N / (count(a) * count(b))`, with `N` the
//! total token count, are joined with an underscore. A second pass over the
//! joined streams yields trigrams; joins never produce more than two
//! underscores.

use std::collections::{HashMap, HashSet};

use super::TokenStream;

const MAX_UNDERSCORES: usize = 2;

/// Unigram counts, adjacent-pair counts and the total token count.
pub type PairCounts<'a> = (HashMap<&'a str, usize>, HashMap<(&'a str, &'a str), usize>, usize);

pub fn pair_counts(streams: &[TokenStream]) -> PairCounts<'_> {
    let mut unigrams: HashMap<&str, usize> = HashMap::new();
    let mut pairs: HashMap<(&str, &str), usize> = HashMap::new();
    let mut total = 0;
    for s in streams {
        for t in &s.tokens {
            *unigrams.entry(t.as_str()).or_default() += 1;
            total += 1;
        }
        for w in s.tokens.windows(2) {
            *pairs.entry((w[0].as_str(), w[1].as_str())).or_default() += 1;
        }
    }
    (unigrams, pairs, total)
}

fn underscores(t: &str) -> usize {
    t.bytes().filter(|&b| b == b'_').count()
}

fn phrase_pass(streams: &[TokenStream], min_count: usize, threshold: f64) -> Vec<TokenStream> {
    let (unigrams, pairs, total) = pair_counts(streams);
    let accepted: HashSet<(&str, &str)> = pairs
        .iter()
        .filter(|((a, b), &count)| {
            if count < min_count || underscores(a) + underscores(b) + 1 > MAX_UNDERSCORES {
                return false;
            }
            let score = (count as f64 - min_count as f64) * total as f64 / (unigrams[a] as f64 * unigrams[b] as f64);
            score >= threshold
        })
        .map(|(&pair, _)| pair)
        .collect();

    streams
        .iter()
        .map(|s| {
            let mut tokens = Vec::with_capacity(s.tokens.len());
            let mut i = 0;
            while i < s.tokens.len() {
                if i + 1 < s.tokens.len() && accepted.contains(&(s.tokens[i].as_str(), s.tokens[i + 1].as_str())) {
                    tokens.push(format!("{}_{}", s.tokens[i], s.tokens[i + 1]));
                    i += 2;
                } else {
                    tokens.push(s.tokens[i].clone());
                    i += 1;
                }
            }
            TokenStream { post_ref: s.post_ref, tokens }
        })
        .collect()
}

/// Joins frequent adjacent pairs, then runs a second pass for trigrams.
/// Replacement is greedy left to right, so joins never overlap.
pub fn detect_ngrams(streams: &[TokenStream], min_count: usize, threshold: f64) -> Vec<TokenStream> {
    let min_count = min_count.max(1);
    let bigrams = phrase_pass(streams, min_count, threshold);
    phrase_pass(&bigrams, min_count, threshold)
}
