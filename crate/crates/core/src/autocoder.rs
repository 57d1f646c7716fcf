//! Turning topics into codes and coding posts by keyword presence.
//!
//! A code's keywords come from two places: the top words of the LDA topics
//! mapped onto it, and phrases supplied by the instructor. A post gets a 1
//! for a code as soon as any one keyword matches; there is no frequency
//! threshold, so a lone keyword can produce a false positive.
//!
//! Matching rules:
//! - LDA unigram: equal to a token of the post's stemmed unigram stream.
//! - LDA n-gram (`a_b`, `a_b_c`): equal to a detected n-gram token, or its
//!   parts appear contiguously in the stemmed unigram stream.
//! - Instructor phrase: stemmed like posts but with stopwords kept, and
//!   matched as a contiguous run of the post's stemmed tokens (stopwords
//!   kept there too).
//! - Acronym (a single token with two or more capitals, e.g. `RPA`):
//!   unstemmed, case-insensitive whole-token match.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CodedRow, Corpus, Post, Source};
use crate::preprocess::{raw_tokens, Normalizer, TokenStream};
use crate::topics::TopicSummary;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("unknown code `{name}`; valid codes: {valid:?}")]
    UnknownCode { name: String, valid: Vec<String> },
    #[error("topic {0} does not exist in the topic summaries")]
    UnknownTopic(usize),
    #[error("invalid scheme: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<FieldError>),
}

pub type Result<T> = std::result::Result<T, SchemeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Lda,
    Instructor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Keyword {
    pub text: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Code {
    pub name: String,
    #[serde(default)]
    pub definition: String,
    #[serde(default)]
    pub keywords: Vec<Keyword>,
}

/// The keywords of one code split by where they came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordSet<'a> {
    pub lda_keywords: Vec<&'a str>,
    pub instructor_keywords: Vec<&'a str>,
}

impl Code {
    pub fn keyword_set(&self) -> KeywordSet<'_> {
        let pick = |p| self.keywords.iter().filter(|k| k.provenance == p).map(|k| k.text.as_str()).collect();
        KeywordSet { lda_keywords: pick(Provenance::Lda), instructor_keywords: pick(Provenance::Instructor) }
    }

    fn push_keyword(&mut self, text: &str, provenance: Provenance) {
        let text = text.trim();
        if !self.keywords.iter().any(|k| k.text == text && k.provenance == provenance) {
            self.keywords.push(Keyword { text: text.to_string(), provenance });
        }
    }
}

/// A code defined up front by the instructor, before any keywords.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrioriCode {
    pub name: String,
    #[serde(default)]
    pub definition: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeScheme {
    pub codes: Vec<Code>,
    /// Topic id → code name. Topics left out are discarded.
    #[serde(default)]
    pub topic_map: BTreeMap<usize, String>,
}

impl CodeScheme {
    pub fn code_names(&self) -> Vec<String> {
        self.codes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn code(&self, name: &str) -> Option<&Code> {
        self.codes.iter().find(|c| c.name == name)
    }

    pub fn priori_codes(&self) -> Vec<PrioriCode> {
        self.codes.iter().map(|c| PrioriCode { name: c.name.clone(), definition: c.definition.clone() }).collect()
    }

    pub fn has_instructor_keywords(&self) -> bool {
        self.codes.iter().flat_map(|c| &c.keywords).any(|k| k.provenance == Provenance::Instructor)
    }

    /// Copy with instructor keywords dropped.
    pub fn lda_only(&self) -> CodeScheme {
        let mut out = self.clone();
        for c in &mut out.codes {
            c.keywords.retain(|k| k.provenance == Provenance::Lda);
        }
        out
    }

    /// Structural checks, reported per field.
    pub fn validate(&self) -> Result<()> {
        let mut errors = Vec::new();
        let mut seen = HashSet::new();
        if self.codes.len() < 2 {
            errors.push(FieldError { field: "codes".into(), message: "at least two codes are required".into() });
        }
        for (i, c) in self.codes.iter().enumerate() {
            if c.name.trim().is_empty() {
                errors.push(FieldError { field: format!("codes[{i}].name"), message: "must not be empty".into() });
            } else if !seen.insert(c.name.as_str()) {
                errors.push(FieldError {
                    field: format!("codes[{i}].name"),
                    message: format!("duplicate code name `{}`", c.name),
                });
            }
            for (j, k) in c.keywords.iter().enumerate() {
                if raw_tokens(&k.text).is_empty() {
                    errors.push(FieldError {
                        field: format!("codes[{i}].keywords[{j}].text"),
                        message: "keyword is empty after normalization".into(),
                    });
                }
            }
        }
        for (topic, name) in &self.topic_map {
            if !seen.contains(name.as_str()) {
                errors.push(FieldError {
                    field: format!("topic_map.{topic}"),
                    message: format!("maps to unknown code `{name}`"),
                });
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(SchemeError::Invalid(errors))
        }
    }
}

/// Builds a scheme whose LDA keywords are the union of the top words of the
/// topics mapped onto each code.
pub fn derive_scheme(
    summaries: &[TopicSummary],
    topic_map: &BTreeMap<usize, String>,
    priori: &[PrioriCode],
) -> Result<CodeScheme> {
    let mut codes: Vec<Code> = priori
        .iter()
        .map(|p| Code { name: p.name.clone(), definition: p.definition.clone(), keywords: Vec::new() })
        .collect();
    for (&topic, name) in topic_map {
        let summary = summaries.iter().find(|s| s.topic_id == topic).ok_or(SchemeError::UnknownTopic(topic))?;
        let code = codes.iter_mut().find(|c| &c.name == name).ok_or_else(|| SchemeError::UnknownCode {
            name: name.clone(),
            valid: priori.iter().map(|p| p.name.clone()).collect(),
        })?;
        for w in &summary.top_words {
            code.push_keyword(&w.term, Provenance::Lda);
        }
    }
    Ok(CodeScheme { codes, topic_map: topic_map.clone() })
}

/// Validates a scheme file and fills in its LDA keywords from the topic
/// summaries. Keywords already listed in the file are kept after the
/// derived ones.
pub fn resolve_scheme(summaries: &[TopicSummary], input: &CodeScheme) -> Result<CodeScheme> {
    input.validate()?;
    let mut scheme = derive_scheme(summaries, &input.topic_map, &input.priori_codes())?;
    for (code, src) in scheme.codes.iter_mut().zip(&input.codes) {
        for k in &src.keywords {
            code.push_keyword(&k.text, k.provenance);
        }
    }
    Ok(scheme)
}

/// Appends instructor phrases verbatim to one code. Exact repeats are
/// dropped; near-duplicates ("RPA", "RPAs") are all kept.
pub fn add_instructor_keywords<S: AsRef<str>>(
    scheme: &CodeScheme,
    code_name: &str,
    phrases: &[S],
) -> Result<CodeScheme> {
    let mut out = scheme.clone();
    let valid = out.code_names();
    let code = out
        .codes
        .iter_mut()
        .find(|c| c.name == code_name)
        .ok_or_else(|| SchemeError::UnknownCode { name: code_name.to_string(), valid })?;
    let mut errors = Vec::new();
    for (i, p) in phrases.iter().enumerate() {
        if raw_tokens(p.as_ref()).is_empty() {
            errors.push(FieldError {
                field: format!("phrases[{i}]"),
                message: "keyword is empty after normalization".into(),
            });
        } else {
            code.push_keyword(p.as_ref(), Provenance::Instructor);
        }
    }
    if !errors.is_empty() {
        return Err(SchemeError::Invalid(errors));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodingProvenance {
    LdaOnly,
    LdaPlusInstructor,
}

/// Posts × codes binary table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedTable {
    pub codes: Vec<String>,
    pub rows: Vec<CodedRow>,
    pub provenance: CodingProvenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Pattern {
    Token(String),
    Ngram { joined: String, parts: Vec<String> },
    Phrase(Vec<String>),
    Acronym(String),
}

fn is_acronym(text: &str) -> bool {
    let t = text.trim();
    !t.is_empty() && t.chars().all(char::is_alphanumeric) && t.chars().filter(|c| c.is_uppercase()).count() >= 2
}

fn contains_run<S: AsRef<str>>(haystack: &[S], needle: &[String]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack.windows(needle.len()).any(|w| w.iter().zip(needle).all(|(a, b)| a.as_ref() == b))
}

/// The token views of one post that keywords are matched against.
pub struct PostView<'a> {
    stream: &'a [String],
    unigrams: Vec<&'a str>,
    phrase_tokens: Vec<String>,
    raw: HashSet<String>,
}

impl<'a> PostView<'a> {
    pub fn new(post: &Post, stream: &'a TokenStream, normalizer: &Normalizer) -> Self {
        PostView {
            stream: &stream.tokens,
            unigrams: stream.unigrams(),
            phrase_tokens: normalizer.phrase_tokens(&post.text),
            raw: raw_tokens(&post.text).into_iter().collect(),
        }
    }
}

impl Pattern {
    fn matches(&self, view: &PostView<'_>) -> bool {
        match self {
            Pattern::Token(t) => view.unigrams.contains(&t.as_str()),
            Pattern::Ngram { joined, parts } => {
                view.stream.iter().any(|t| t == joined) || contains_run(&view.unigrams, parts)
            }
            Pattern::Phrase(tokens) => contains_run(&view.phrase_tokens, tokens),
            Pattern::Acronym(a) => view.raw.contains(a),
        }
    }
}

/// Keyword patterns for every code, ready to match.
pub struct CompiledScheme {
    codes: Vec<String>,
    patterns: Vec<Vec<(Pattern, String)>>,
}

impl CompiledScheme {
    pub fn new(scheme: &CodeScheme, normalizer: &Normalizer) -> Self {
        let patterns = scheme
            .codes
            .iter()
            .map(|c| {
                let mut seen = HashSet::new();
                c.keywords
                    .iter()
                    .filter_map(|k| {
                        let p = compile(k, normalizer)?;
                        seen.insert(p.clone()).then(|| (p, k.text.clone()))
                    })
                    .collect()
            })
            .collect();
        CompiledScheme { codes: scheme.code_names(), patterns }
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn flags(&self, view: &PostView<'_>) -> Vec<bool> {
        self.patterns.iter().map(|ps| ps.iter().any(|(p, _)| p.matches(view))).collect()
    }

    /// Keyword texts that fired, per code.
    pub fn matched_keywords(&self, view: &PostView<'_>) -> Vec<Vec<String>> {
        self.patterns
            .iter()
            .map(|ps| ps.iter().filter(|(p, _)| p.matches(view)).map(|(_, t)| t.clone()).collect())
            .collect()
    }
}

fn compile(k: &Keyword, normalizer: &Normalizer) -> Option<Pattern> {
    let text = k.text.trim();
    let pattern = match k.provenance {
        Provenance::Lda if text.contains('_') => {
            let parts: Vec<String> = text.split('_').filter(|p| !p.is_empty()).map(String::from).collect();
            Pattern::Ngram { joined: parts.join("_"), parts }
        }
        Provenance::Lda => Pattern::Token(text.to_lowercase()),
        Provenance::Instructor if is_acronym(text) => Pattern::Acronym(text.to_lowercase()),
        Provenance::Instructor => Pattern::Phrase(normalizer.phrase_tokens(text)),
    };
    match &pattern {
        Pattern::Phrase(t) if t.is_empty() => None,
        Pattern::Ngram { parts, .. } if parts.is_empty() => None,
        _ => Some(pattern),
    }
}

/// Codes every post of the corpus. Posts without a stream are coded from an
/// empty stream.
pub fn code_posts(
    corpus: &Corpus,
    streams: &[TokenStream],
    scheme: &CodeScheme,
    normalizer: &Normalizer,
) -> CodedTable {
    let compiled = CompiledScheme::new(scheme, normalizer);
    let by_id: BTreeMap<u64, &TokenStream> = streams.iter().map(|s| (s.post_ref, s)).collect();
    let rows = corpus
        .posts()
        .par_iter()
        .map(|post| {
            let empty = TokenStream { post_ref: post.entry_id, tokens: Vec::new() };
            let stream = by_id.get(&post.entry_id).copied().unwrap_or(&empty);
            let view = PostView::new(post, stream, normalizer);
            let code_flags = compiled.codes().iter().cloned().zip(compiled.flags(&view)).collect();
            CodedRow {
                entry_id: post.entry_id,
                user_id: post.user_id.clone(),
                timestamp: post.timestamp,
                text: post.text.clone(),
                semester: post.semester.clone(),
                code_flags,
                source: Source::Algorithm,
            }
        })
        .collect();
    let provenance =
        if scheme.has_instructor_keywords() { CodingProvenance::LdaPlusInstructor } else { CodingProvenance::LdaOnly };
    CodedTable { codes: scheme.code_names(), rows, provenance }
}

/// Entry ids whose flag differs between two codings of the same posts.
pub fn changed_posts(before: &CodedTable, after: &CodedTable) -> BTreeSet<u64> {
    before.rows.iter().zip(&after.rows).filter(|(a, b)| a.code_flags != b.code_flags).map(|(a, _)| a.entry_id).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_timestamp, UnitKey};
    use crate::preprocess::{bundled_stopwords, PreprocessConfig};
    use crate::topics::TopicWord;
    use proptest::prelude::*;

    fn post(id: u64, text: &str) -> Post {
        Post {
            entry_id: id,
            user_id: format!("u{id}"),
            timestamp: parse_timestamp("2021-03-01").unwrap(),
            text: text.into(),
            semester: None,
        }
    }

    fn setup(texts: &[&str]) -> (Corpus, Vec<TokenStream>, Normalizer) {
        let corpus = Corpus::new(texts.iter().enumerate().map(|(i, t)| post(i as u64 + 1, t)).collect(), UnitKey::User);
        let normalizer = Normalizer::with_stopwords(
            &PreprocessConfig::default(),
            bundled_stopwords(),
            corpus.posts().iter().map(|p| p.text.as_str()),
        );
        let streams = normalizer.normalize_corpus(&corpus);
        (corpus, streams, normalizer)
    }

    fn summary(id: usize, words: &[&str]) -> TopicSummary {
        TopicSummary {
            topic_id: id,
            top_words: words.iter().map(|w| TopicWord { term: w.to_string(), prob: 0.1 }).collect(),
        }
    }

    fn priori() -> Vec<PrioriCode> {
        ["effort", "beyondLS", "illusions", "retrieval-interleave"]
            .iter()
            .map(|n| PrioriCode { name: n.to_string(), definition: String::new() })
            .collect()
    }

    fn four_code_scheme() -> CodeScheme {
        let summaries = vec![
            summary(0, &["lectur", "solut"]),
            summary(1, &["desir", "desir_difficulti"]),
            summary(2, &["learn_style", "dyslex"]),
            summary(3, &["confid", "calibr"]),
            summary(4, &["mass_practic", "space_retriev"]),
        ];
        let map = BTreeMap::from([
            (1, "effort".to_string()),
            (2, "beyondLS".to_string()),
            (3, "illusions".to_string()),
            (4, "retrieval-interleave".to_string()),
        ]);
        derive_scheme(&summaries, &map, &priori()).unwrap()
    }

    #[test]
    fn derive_maps_four_topics_and_drops_topic_zero() {
        let scheme = four_code_scheme();
        assert_eq!(scheme.codes.len(), 4);
        let all: Vec<&str> = scheme.codes.iter().flat_map(|c| c.keywords.iter().map(|k| k.text.as_str())).collect();
        assert!(!all.contains(&"lectur") && !all.contains(&"solut"));
        assert_eq!(scheme.code("effort").unwrap().keyword_set().lda_keywords, ["desir", "desir_difficulti"]);
    }

    #[test]
    fn derive_with_empty_map() {
        let scheme = derive_scheme(&[summary(0, &["a"])], &BTreeMap::new(), &priori()).unwrap();
        assert_eq!(scheme.codes.len(), 4);
        assert!(scheme.codes.iter().all(|c| c.keywords.is_empty()));
    }

    #[test]
    fn two_topics_onto_one_code_union() {
        let summaries = vec![summary(0, &["a", "b"]), summary(1, &["b", "c"])];
        let map = BTreeMap::from([(0, "effort".to_string()), (1, "effort".to_string())]);
        let scheme = derive_scheme(&summaries, &map, &priori()).unwrap();
        assert_eq!(scheme.code("effort").unwrap().keyword_set().lda_keywords, ["a", "b", "c"]);
    }

    #[test]
    fn derive_rejects_unknown_code_and_topic() {
        let summaries = vec![summary(0, &["a"])];
        let bad_code = BTreeMap::from([(0, "nope".to_string())]);
        assert!(matches!(derive_scheme(&summaries, &bad_code, &priori()), Err(SchemeError::UnknownCode { .. })));
        let bad_topic = BTreeMap::from([(7, "effort".to_string())]);
        assert!(matches!(derive_scheme(&summaries, &bad_topic, &priori()), Err(SchemeError::UnknownTopic(7))));
    }

    #[test]
    fn instructor_keywords_keep_provenance_and_near_duplicates() {
        let scheme = four_code_scheme();
        let s = add_instructor_keywords(&scheme, "effort", &["desirable difficulty"]).unwrap();
        let ks = s.code("effort").unwrap().keyword_set();
        assert_eq!(ks.instructor_keywords, ["desirable difficulty"]);
        let s = add_instructor_keywords(&s, "retrieval-interleave", &["RPA", "RPAs"]).unwrap();
        assert_eq!(s.code("retrieval-interleave").unwrap().keyword_set().instructor_keywords, ["RPA", "RPAs"]);
        // Same text under another provenance is recorded twice.
        let s = add_instructor_keywords(&s, "effort", &["desir", "desir"]).unwrap();
        let effort = s.code("effort").unwrap();
        assert_eq!(effort.keywords.iter().filter(|k| k.text == "desir").count(), 2);
    }

    #[test]
    fn unknown_code_lists_valid_names() {
        match add_instructor_keywords(&four_code_scheme(), "grit", &["x"]) {
            Err(SchemeError::UnknownCode { valid, .. }) => assert_eq!(valid.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_phrase_rejected() {
        assert!(matches!(
            add_instructor_keywords(&four_code_scheme(), "effort", &["  ?! "]),
            Err(SchemeError::Invalid(_))
        ));
    }

    #[test]
    fn duplicate_keyword_does_not_change_matching() {
        let (corpus, streams, n) = setup(&["Desirable difficulties help", "nothing here"]);
        let scheme = four_code_scheme();
        let a = code_posts(&corpus, &streams, &scheme, &n);
        let again = add_instructor_keywords(&scheme, "effort", &["desir"]).unwrap();
        let b = code_posts(&corpus, &streams, &again, &n);
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn spaced_out_practice_phrase() {
        let (corpus, streams, n) = setup(&["I used spaced out practice daily"]);
        let scheme =
            add_instructor_keywords(&four_code_scheme(), "retrieval-interleave", &["spaced out practice"]).unwrap();
        let t = code_posts(&corpus, &streams, &scheme, &n);
        assert!(t.rows[0].flag("retrieval-interleave"));
        assert_eq!(t.provenance, CodingProvenance::LdaPlusInstructor);
    }

    #[test]
    fn post_without_keywords_is_all_zero() {
        let (corpus, streams, n) = setup(&["The weather was nice on Tuesday."]);
        let t = code_posts(&corpus, &streams, &four_code_scheme(), &n);
        assert!(t.rows[0].code_flags.values().all(|v| !v));
        assert_eq!(t.provenance, CodingProvenance::LdaOnly);
    }

    #[test]
    fn desirable_difficulties_sentence() {
        // normalize: [desir, difficulti, made, fail, forward]
        let (corpus, streams, n) = setup(&["Desirable difficulties made me fail forward"]);
        assert_eq!(streams[0].tokens, ["desir", "difficulti", "made", "fail", "forward"]);
        let scheme = CodeScheme {
            codes: vec![
                Code {
                    name: "effort".into(),
                    definition: String::new(),
                    keywords: vec![Keyword { text: "desir_difficulti".into(), provenance: Provenance::Lda }],
                },
                Code {
                    name: "illusions".into(),
                    definition: String::new(),
                    keywords: vec![Keyword { text: "cram".into(), provenance: Provenance::Lda }],
                },
            ],
            topic_map: BTreeMap::new(),
        };
        let t = code_posts(&corpus, &streams, &scheme, &n);
        assert!(t.rows[0].flag("effort"));
        assert!(!t.rows[0].flag("illusions"));
    }

    #[test]
    fn ngram_keyword_matches_joined_token() {
        let (corpus, _, n) = setup(&["Mass practice is cramming"]);
        let streams = vec![TokenStream { post_ref: 1, tokens: vec!["mass_practic".into(), "cram".into()] }];
        let t = code_posts(&corpus, &streams, &four_code_scheme(), &n);
        assert!(t.rows[0].flag("retrieval-interleave"));
    }

    #[test]
    fn phrase_with_stopwords_matches() {
        let (corpus, streams, n) = setup(&["Honestly the illusion of mastery fooled me", "mastery illusion"]);
        let scheme = add_instructor_keywords(&four_code_scheme(), "illusions", &["illusion of mastery"]).unwrap();
        let t = code_posts(&corpus, &streams, &scheme, &n);
        assert!(t.rows[0].flag("illusions"));
        assert!(!t.rows[1].flag("illusions"));
    }

    #[test]
    fn acronym_matches_case_insensitively_and_unstemmed() {
        let (corpus, streams, n) = setup(&["We ran three RPAs this week", "an rpa helped", "rapid"]);
        let scheme = add_instructor_keywords(&four_code_scheme(), "retrieval-interleave", &["RPAs"]).unwrap();
        let t = code_posts(&corpus, &streams, &scheme, &n);
        assert!(t.rows[0].flag("retrieval-interleave"));
        assert!(!t.rows[1].flag("retrieval-interleave"));
        assert!(!t.rows[2].flag("retrieval-interleave"));
    }

    #[test]
    fn missing_stream_codes_as_empty() {
        let (corpus, _, n) = setup(&["Desirable difficulties"]);
        let t = code_posts(&corpus, &[], &four_code_scheme(), &n);
        assert!(!t.rows[0].flag("effort"));
    }

    #[test]
    fn validate_reports_fields() {
        let mut scheme = four_code_scheme();
        scheme.codes[1].name = "effort".into();
        scheme.codes[0].keywords.push(Keyword { text: "  ".into(), provenance: Provenance::Instructor });
        scheme.topic_map.insert(9, "ghost".into());
        match scheme.validate() {
            Err(SchemeError::Invalid(errs)) => {
                let fields: Vec<&str> = errs.iter().map(|e| e.field.as_str()).collect();
                assert!(fields.contains(&"codes[1].name"));
                assert!(fields.iter().any(|f| f.starts_with("codes[0].keywords")));
                assert!(fields.contains(&"topic_map.9"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolve_merges_file_keywords_after_topic_words() {
        let summaries = vec![summary(0, &["x"]), summary(1, &["desir", "effort"])];
        let mut input = CodeScheme {
            codes: priori()
                .into_iter()
                .map(|p| Code { name: p.name, definition: p.definition, keywords: Vec::new() })
                .collect(),
            topic_map: BTreeMap::from([(1, "effort".to_string())]),
        };
        input.codes[0].keywords.push(Keyword { text: "mistakes".into(), provenance: Provenance::Instructor });
        input.codes[0].keywords.push(Keyword { text: "desir".into(), provenance: Provenance::Lda });
        let s = resolve_scheme(&summaries, &input).unwrap();
        let ks = s.code("effort").unwrap().keyword_set();
        assert_eq!(ks.lda_keywords, ["desir", "effort"]);
        assert_eq!(ks.instructor_keywords, ["mistakes"]);
        input.topic_map.insert(3, "effort".into());
        assert!(matches!(resolve_scheme(&summaries, &input), Err(SchemeError::UnknownTopic(3))));
    }

    #[test]
    fn scheme_json_shape() {
        let scheme = add_instructor_keywords(&four_code_scheme(), "effort", &["effortful"]).unwrap();
        let v = serde_json::to_value(&scheme).unwrap();
        assert_eq!(v["codes"][0]["keywords"][2]["provenance"], "instructor");
        assert_eq!(v["topic_map"]["1"], "effort");
        let back: CodeScheme = serde_json::from_value(v).unwrap();
        assert_eq!(back, scheme);
    }

    const WORDS: [&str; 12] = [
        "retrieval",
        "practice",
        "spaced",
        "cram",
        "mastery",
        "illusion",
        "desirable",
        "difficulty",
        "style",
        "learning",
        "quiz",
        "of",
    ];

    fn sentence() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(WORDS.to_vec()), 0..12).prop_map(|w| w.join(" "))
    }

    fn phrase() -> impl Strategy<Value = String> {
        prop::collection::vec(prop::sample::select(WORDS.to_vec()), 1..3).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn adding_keywords_never_clears_flags(
            posts in prop::collection::vec(sentence(), 1..8),
            first in prop::collection::vec(phrase(), 0..4),
            extra in prop::collection::vec(phrase(), 1..4),
            code_idx in 0usize..4,
        ) {
            let texts: Vec<&str> = posts.iter().map(String::as_str).collect();
            let (corpus, streams, n) = setup(&texts);
            let base = add_instructor_keywords(&four_code_scheme(), "effort", &first).unwrap();
            let name = base.codes[code_idx].name.clone();
            let grown = add_instructor_keywords(&base, &name, &extra).unwrap();
            let before = code_posts(&corpus, &streams, &base, &n);
            let after = code_posts(&corpus, &streams, &grown, &n);
            for (b, a) in before.rows.iter().zip(&after.rows) {
                for (code, &flag) in &b.code_flags {
                    prop_assert!(!flag || a.code_flags[code]);
                }
            }
            // lda ∪ instructor ⊇ lda only
            let lda = code_posts(&corpus, &streams, &grown.lda_only(), &n);
            for (l, a) in lda.rows.iter().zip(&after.rows) {
                for (code, &flag) in &l.code_flags {
                    prop_assert!(!flag || a.code_flags[code]);
                }
            }
        }

        #[test]
        fn keyword_order_is_irrelevant(
            posts in prop::collection::vec(sentence(), 1..6),
            phrases in prop::collection::vec(phrase(), 1..5),
        ) {
            let texts: Vec<&str> = posts.iter().map(String::as_str).collect();
            let (corpus, streams, n) = setup(&texts);
            let forward = add_instructor_keywords(&four_code_scheme(), "illusions", &phrases).unwrap();
            let mut reversed_phrases = phrases.clone();
            reversed_phrases.reverse();
            let backward = add_instructor_keywords(&four_code_scheme(), "illusions", &reversed_phrases).unwrap();
            prop_assert_eq!(
                code_posts(&corpus, &streams, &forward, &n).rows,
                code_posts(&corpus, &streams, &backward, &n).rows
            );
        }
    }
}
