//! The pipeline stages. Each stage reads what earlier stages left in the
//! run directory, writes its own artifacts, and updates the manifest.
//! Re-running a stage deletes the outputs of every later stage so nothing
//! stale is ever served.

use std::collections::BTreeMap;
use std::path::Path;

use forumcode_core::agreement::{kappa_report, KappaReport};
use forumcode_core::autocoder::{
    code_posts, resolve_scheme, CodeScheme, CodedTable, CodingProvenance, CompiledScheme, PostView,
};
use forumcode_core::corpus::{
    check_aligned, ingest_csv, merge_tables, read_coded_csv, write_coded_csv, CodedRow, ColumnMap, Corpus,
    IngestReport, Source, UnitKey,
};
use forumcode_core::ena::{
    accumulate, difference_network, project_means_rotation, strength_table, EnaSpace, NetworkGraph, PairOrder,
};
use forumcode_core::preprocess::{
    build_vocabulary, preprocess_corpus, Normalizer, PreprocessConfig, TokenStream, Vocabulary,
};
use forumcode_core::stats::{compare_axis, write_results_csv, Alternative, MannWhitneyResult};
use forumcode_core::topics::{select_k, summarize, write_summaries_csv, LdaCheckpoint, TopicSummary};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::{AgreementConfig, EnaConfig, RunConfig, StatsConfig, TopicsConfig};
use crate::error::{PipelineError, Result};
use crate::report;
use crate::run::{sha256_hex, RunDir, SCHEMA_VERSION};

pub const CORPUS: &str = "corpus.csv";
pub const INGEST: &str = "ingest.json";
pub const PREPROCESS: &str = "preprocess.json";
pub const STOPWORDS: &str = "stopwords.txt";
pub const TOKENS: &str = "tokens.json";
pub const VOCAB: &str = "vocab.json";
pub const TOPICS: &str = "topics.json";
pub const TOPICS_CSV: &str = "topics.csv";
pub const COHERENCE: &str = "coherence.csv";
pub const MODEL: &str = "model.json";
pub const SCHEME_INPUT: &str = "scheme_input.json";
pub const SCHEME: &str = "scheme.json";
pub const CODED: &str = "coded.csv";
pub const CODED_LDA: &str = "coded_lda_only.csv";
pub const AGREEMENT_CONFIG: &str = "agreement.json";
pub const REFERENCE: &str = "reference.csv";
pub const KAPPA: &str = "kappa.json";
pub const KAPPA_CSV: &str = "kappa.csv";
pub const KAPPA_LDA: &str = "kappa_lda_only.json";
pub const KAPPA_LDA_CSV: &str = "kappa_lda_only.csv";
pub const ENA_CONFIG: &str = "ena_config.json";
pub const ENA_SPACE: &str = "ena_space.json";
pub const NETWORKS: &str = "networks.json";
pub const STRENGTHS: &str = "strengths.csv";
pub const STATS_CONFIG: &str = "stats_config.json";
pub const STATS: &str = "stats.json";
pub const STATS_CSV: &str = "stats.csv";
pub const REPORT: &str = "report.html";
pub const SVG_ALGORITHM: &str = "network_algorithm.svg";
pub const SVG_HUMAN: &str = "network_human.svg";
pub const SVG_DIFFERENCE: &str = "network_difference.svg";

/// Stage outputs in pipeline order. Stage settings and the reference
/// coding are inputs and survive invalidation.
const STAGE_OUTPUTS: [(&str, &[&str]); 8] = [
    ("ingest", &[CORPUS, INGEST]),
    ("preprocess", &[PREPROCESS, STOPWORDS, TOKENS, VOCAB]),
    ("topics", &[TOPICS, TOPICS_CSV, COHERENCE, MODEL]),
    ("code", &[SCHEME_INPUT, SCHEME, CODED, CODED_LDA]),
    ("agreement", &[KAPPA, KAPPA_CSV, KAPPA_LDA, KAPPA_LDA_CSV]),
    ("ena", &[ENA_SPACE, NETWORKS, STRENGTHS]),
    ("stats", &[STATS, STATS_CSV]),
    ("report", &[REPORT, SVG_ALGORITHM, SVG_HUMAN, SVG_DIFFERENCE]),
];

/// JSON artifact with a schema version next to its fields.
#[derive(Debug, Clone, Serialize)]
pub struct Versioned<T> {
    pub v: u32,
    #[serde(flatten)]
    pub inner: T,
}

// Written by hand: serde's derived `flatten` cannot read maps with integer
// keys, which several artifacts contain.
impl<'de, T: serde::de::DeserializeOwned> Deserialize<'de> for Versioned<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let mut value = serde_json::Value::deserialize(d)?;
        let v = value
            .as_object_mut()
            .and_then(|m| m.remove("v"))
            .and_then(|v| v.as_u64())
            .ok_or_else(|| D::Error::missing_field("v"))?;
        let inner = serde_json::from_value(value).map_err(D::Error::custom)?;
        Ok(Versioned { v: v as u32, inner })
    }
}

impl<T> Versioned<T> {
    pub fn new(inner: T) -> Self {
        Versioned { v: SCHEMA_VERSION, inner }
    }
}

fn finish(run: &RunDir, stage: &str, written: &[&str]) -> Result<()> {
    let later: Vec<&str> = STAGE_OUTPUTS
        .iter()
        .skip_while(|(s, _)| *s != stage)
        .skip(1)
        .flat_map(|(_, files)| files.iter().copied())
        .collect();
    for f in &later {
        let p = run.path(f);
        if p.exists() {
            std::fs::remove_file(&p).map_err(PipelineError::io(&p))?;
        }
    }
    run.record(written, &later)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IngestInfo {
    pub unit_key: UnitKey,
    pub has_semester: bool,
    pub input_sha256: String,
    #[serde(flatten)]
    pub report: IngestReport,
}

pub fn ingest(run: &RunDir, input: &Path, columns: &ColumnMap, unit_key: UnitKey) -> Result<IngestReport> {
    let bytes = std::fs::read(input).map_err(PipelineError::io(input))?;
    let (corpus, report) = ingest_csv(input, columns)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut buf = Vec::new();
    corpus.write_csv(&mut buf)?;
    run.write_bytes(CORPUS, &buf)?;
    let has_semester = corpus.posts().iter().any(|p| p.semester.is_some());
    let info = IngestInfo { unit_key, has_semester, input_sha256: sha256_hex(&bytes), report: report.clone() };
    run.write_json(INGEST, &Versioned::new(info))?;
    finish(run, "ingest", &[CORPUS, INGEST])?;
    info!("ingested {} of {} rows", report.rows_kept, report.rows_read);
    Ok(report)
}

pub fn load_corpus(run: &RunDir) -> Result<Corpus> {
    let info: Versioned<IngestInfo> = run.read_json(INGEST, "ingest")?;
    let path = run.require(CORPUS, "ingest")?;
    let columns = ColumnMap { semester: info.inner.has_semester.then(|| "semester".into()), ..Default::default() };
    let (mut corpus, _) = ingest_csv(path, &columns)?;
    corpus.unit_key = info.inner.unit_key;
    Ok(corpus)
}

pub fn preprocess(run: &RunDir, config: &PreprocessConfig) -> Result<usize> {
    let corpus = load_corpus(run)?;
    config.validate()?;
    let mut stored = config.clone();
    let mut written = vec![PREPROCESS, TOKENS, VOCAB];
    if config.stopword_file.is_some() {
        let words = config.load_stopwords()?;
        let mut sorted: Vec<&String> = words.iter().collect();
        sorted.sort();
        let text: String = sorted.iter().map(|w| format!("{w}\n")).collect();
        run.write_bytes(STOPWORDS, text.as_bytes())?;
        stored.stopword_file = Some(STOPWORDS.into());
        written.push(STOPWORDS);
    }
    let streams = preprocess_corpus(config, &corpus)?;
    let vocab = build_vocabulary(&streams, config.min_doc_freq, config.max_doc_fraction)?;
    run.write_json(PREPROCESS, &Versioned::new(stored))?;
    run.write_json(TOKENS, &Versioned::new(Tokens { streams }))?;
    run.write_json(VOCAB, &Versioned::new(vocab.clone()))?;
    finish(run, "preprocess", &written)?;
    info!("vocabulary: {} terms", vocab.len());
    Ok(vocab.len())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokens {
    pub streams: Vec<TokenStream>,
}

pub fn load_preprocess_config(run: &RunDir) -> Result<PreprocessConfig> {
    let mut cfg: Versioned<PreprocessConfig> = run.read_json(PREPROCESS, "preprocess")?;
    if let Some(rel) = &cfg.inner.stopword_file {
        cfg.inner.stopword_file = Some(run.path(&rel.to_string_lossy()));
    }
    Ok(cfg.inner)
}

pub fn load_streams(run: &RunDir) -> Result<Vec<TokenStream>> {
    let t: Versioned<Tokens> = run.read_json(TOKENS, "preprocess")?;
    Ok(t.inner.streams)
}

pub fn load_vocab(run: &RunDir) -> Result<Vocabulary> {
    let mut v: Versioned<Vocabulary> = run.read_json(VOCAB, "preprocess")?;
    v.inner.reindex();
    Ok(v.inner)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicsArtifact {
    pub selected_k: usize,
    pub seed: u64,
    pub iterations: usize,
    pub alpha: f64,
    pub beta: f64,
    pub n_top: usize,
    pub coherence: BTreeMap<usize, f64>,
    pub topics: Vec<TopicSummary>,
}

pub fn topics(run: &RunDir, config: &TopicsConfig) -> Result<TopicsArtifact> {
    let streams = load_streams(run)?;
    let vocab = load_vocab(run)?;
    let ks = config.candidate_ks()?;
    let (report, model) = select_k(&streams, &vocab, &ks, &config.params(), config.n_top)?;
    let summaries = summarize(&model, &vocab, config.n_top);
    let artifact = TopicsArtifact {
        selected_k: report.selected_k,
        seed: config.seed,
        iterations: config.iterations,
        alpha: model.alpha,
        beta: model.beta,
        n_top: config.n_top,
        coherence: report.per_k.clone(),
        topics: summaries.clone(),
    };
    run.write_json(TOPICS, &Versioned::new(artifact.clone()))?;
    run.write_json(MODEL, &Versioned::new(LdaCheckpoint::from(&model)))?;
    run.write_with(TOPICS_CSV, |w| write_summaries_csv(w, &summaries))?;
    run.write_with(COHERENCE, |w| report.write_csv(w))?;
    finish(run, "topics", &[TOPICS, MODEL, TOPICS_CSV, COHERENCE])?;
    info!("selected K={} from {:?}", report.selected_k, ks);
    Ok(artifact)
}

pub fn load_topics(run: &RunDir) -> Result<TopicsArtifact> {
    Ok(run.read_json::<Versioned<TopicsArtifact>>(TOPICS, "topics")?.inner)
}

/// Validates and resolves a scheme against the run's topics without
/// writing anything.
pub fn check_scheme(run: &RunDir, input: &CodeScheme) -> Result<CodeScheme> {
    let topics = load_topics(run)?;
    Ok(resolve_scheme(&topics.topics, input)?)
}

pub struct Coding {
    pub full: CodedTable,
    pub lda_only: CodedTable,
}

pub fn code(run: &RunDir, input: &CodeScheme) -> Result<Coding> {
    let resolved = check_scheme(run, input)?;
    let corpus = load_corpus(run)?;
    let streams = load_streams(run)?;
    let normalizer = Normalizer::new(&load_preprocess_config(run)?, &corpus)?;
    let full = code_posts(&corpus, &streams, &resolved, &normalizer);
    let lda_only = code_posts(&corpus, &streams, &resolved.lda_only(), &normalizer);
    run.write_json(SCHEME_INPUT, input)?;
    run.write_json(SCHEME, &resolved)?;
    run.write_with(CODED, |w| write_coded_csv(w, &full.codes, &full.rows))?;
    run.write_with(CODED_LDA, |w| write_coded_csv(w, &lda_only.codes, &lda_only.rows))?;
    finish(run, "code", &[SCHEME_INPUT, SCHEME, CODED, CODED_LDA])?;
    Ok(Coding { full, lda_only })
}

pub fn load_scheme_input(run: &RunDir) -> Result<CodeScheme> {
    run.read_json(SCHEME_INPUT, "code")
}

pub fn load_scheme(run: &RunDir) -> Result<CodeScheme> {
    run.read_json(SCHEME, "code")
}

fn read_table(run: &RunDir, name: &str, stage: &'static str, source: Source) -> Result<(Vec<String>, Vec<CodedRow>)> {
    let bytes = run.read_bytes(name, stage)?;
    Ok(read_coded_csv(bytes.as_slice(), source)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaArtifact {
    pub provenance: CodingProvenance,
    #[serde(flatten)]
    pub report: KappaReport,
}

pub struct Agreement {
    pub full: KappaReport,
    pub lda_only: KappaReport,
}

/// Compares the algorithm coding with the human reference. Without a new
/// reference file the one stored in the run is reused.
pub fn agreement(run: &RunDir, reference: Option<&Path>, config: Option<&AgreementConfig>) -> Result<Agreement> {
    let config = match config {
        Some(c) => c.clone(),
        None if run.has(AGREEMENT_CONFIG) => run.read_json(AGREEMENT_CONFIG, "agreement")?,
        None => AgreementConfig::default(),
    };
    let (codes, algorithm) = read_table(run, CODED, "code", Source::Algorithm)?;
    let (_, lda_rows) = read_table(run, CODED_LDA, "code", Source::Algorithm)?;
    let human = match reference {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(PipelineError::io(path))?;
            let (_, rows) = read_coded_csv(file, Source::Human)?;
            rows
        }
        None if run.has(REFERENCE) => read_table(run, REFERENCE, "agreement", Source::Human)?.1,
        None => {
            return Err(PipelineError::Usage(
                "no reference coding in this run; pass `forumcode agreement --reference <csv>`".into(),
            ))
        }
    };
    if let Some(r) = human.iter().find(|r| r.source != Source::Human) {
        return Err(PipelineError::Usage(format!(
            "reference row {} is labelled `{}`, expected human",
            r.entry_id, r.source
        )));
    }
    check_aligned(&algorithm, &human)?;
    let mut human = human;
    human.sort_by_key(|r| r.entry_id);

    let full = kappa_report(&algorithm, &human, &codes, &config.bands)?;
    let lda_only = kappa_report(&lda_rows, &human, &codes, &config.bands)?;
    run.write_json(AGREEMENT_CONFIG, &config)?;
    run.write_with(REFERENCE, |w| write_coded_csv(w, &codes, &human))?;
    let provenance = if load_scheme(run)?.has_instructor_keywords() {
        CodingProvenance::LdaPlusInstructor
    } else {
        CodingProvenance::LdaOnly
    };
    run.write_json(KAPPA, &Versioned::new(KappaArtifact { provenance, report: full.clone() }))?;
    run.write_json(
        KAPPA_LDA,
        &Versioned::new(KappaArtifact { provenance: CodingProvenance::LdaOnly, report: lda_only.clone() }),
    )?;
    run.write_with(KAPPA_CSV, |w| full.write_csv(w))?;
    run.write_with(KAPPA_LDA_CSV, |w| lda_only.write_csv(w))?;
    finish(run, "agreement", &[AGREEMENT_CONFIG, REFERENCE, KAPPA, KAPPA_CSV, KAPPA_LDA, KAPPA_LDA_CSV])?;
    Ok(Agreement { full, lda_only })
}

pub fn load_kappa(run: &RunDir, name: &str) -> Result<KappaArtifact> {
    Ok(run.read_json::<Versioned<KappaArtifact>>(name, "agreement")?.inner)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Networks {
    pub algorithm: NetworkGraph,
    pub human: NetworkGraph,
    /// algorithm − human
    pub difference: NetworkGraph,
}

fn ena_unit_key(run: &RunDir, config: &EnaConfig) -> Result<UnitKey> {
    match config.unit_key {
        Some(k) => Ok(k),
        None => Ok(run.read_json::<Versioned<IngestInfo>>(INGEST, "ingest")?.inner.unit_key),
    }
}

pub fn ena(run: &RunDir, config: Option<&EnaConfig>) -> Result<EnaSpace> {
    let config = match config {
        Some(c) => c.clone(),
        None if run.has(ENA_CONFIG) => run.read_json(ENA_CONFIG, "ena")?,
        None => EnaConfig::default(),
    };
    let unit_key = ena_unit_key(run, &config)?;
    let (codes, algorithm) = read_table(run, CODED, "code", Source::Algorithm)?;
    let (_, human) = read_table(run, REFERENCE, "agreement", Source::Human)?;
    let rows = merge_tables(&algorithm, &human)?;
    let order = PairOrder::new(&codes)?;
    let vectors = accumulate(&rows, &order, unit_key, config.accumulation)?;
    let space = project_means_rotation(&vectors, &order, config.accumulation, unit_key)?;
    let networks = group_networks(&space)?;
    let strengths = strength_table(&networks.algorithm, &networks.human);

    run.write_json(ENA_CONFIG, &config)?;
    run.write_json(ENA_SPACE, &Versioned::new(space.clone()))?;
    run.write_json(NETWORKS, &Versioned::new(networks))?;
    run.write_with(STRENGTHS, |w| {
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["code_a", "code_b", "algorithm", "human"])?;
        for s in &strengths {
            csv.write_record([s.a.clone(), s.b.clone(), format!("{:.6}", s.first), format!("{:.6}", s.second)])?;
        }
        csv.flush().map_err(csv::Error::from)
    })?;
    finish(run, "ena", &[ENA_CONFIG, ENA_SPACE, NETWORKS, STRENGTHS])?;
    Ok(space)
}

pub fn group_networks(space: &EnaSpace) -> Result<Networks> {
    let algorithm = space.group_network(Source::Algorithm)?;
    let human = space.group_network(Source::Human)?;
    let difference = difference_network(&algorithm, &human);
    Ok(Networks { algorithm, human, difference })
}

pub fn load_space(run: &RunDir) -> Result<EnaSpace> {
    Ok(run.read_json::<Versioned<EnaSpace>>(ENA_SPACE, "ena")?.inner)
}

pub fn load_networks(run: &RunDir) -> Result<Networks> {
    Ok(run.read_json::<Versioned<Networks>>(NETWORKS, "ena")?.inner)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsArtifact {
    pub alternative: Alternative,
    pub results: Vec<MannWhitneyResult>,
}

/// Mann-Whitney on the two plot axes, human group first.
pub fn stats(run: &RunDir, config: Option<&StatsConfig>) -> Result<StatsArtifact> {
    let config = match config {
        Some(c) => c.clone(),
        None if run.has(STATS_CONFIG) => run.read_json(STATS_CONFIG, "stats")?,
        None => StatsConfig::default(),
    };
    let space = load_space(run)?;
    let axes = space.axes.len().min(forumcode_core::ena::PLOT_AXES);
    let results = (0..axes)
        .map(|a| {
            let human = space.group_points(Source::Human, a);
            let algorithm = space.group_points(Source::Algorithm, a);
            compare_axis(&space.axis_labels[a], ("human", &human), ("algorithm", &algorithm), config.alternative)
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let artifact = StatsArtifact { alternative: config.alternative, results };
    run.write_json(STATS_CONFIG, &config)?;
    run.write_json(STATS, &Versioned::new(artifact.clone()))?;
    run.write_with(STATS_CSV, |w| write_results_csv(w, &artifact.results))?;
    finish(run, "stats", &[STATS_CONFIG, STATS, STATS_CSV])?;
    Ok(artifact)
}

pub fn load_stats(run: &RunDir) -> Result<StatsArtifact> {
    Ok(run.read_json::<Versioned<StatsArtifact>>(STATS, "stats")?.inner)
}

pub fn report(run: &RunDir) -> Result<()> {
    let written = report::write_report(run)?;
    let names: Vec<&str> = written.iter().map(String::as_str).collect();
    finish(run, "report", &names)
}

/// Re-codes with a new scheme and refreshes everything downstream that the
/// run already had.
pub fn recompute(run: &RunDir, input: &CodeScheme) -> Result<Option<Agreement>> {
    code(run, input)?;
    if !run.has(REFERENCE) {
        return Ok(None);
    }
    let agreement = agreement(run, None, None)?;
    ena(run, None)?;
    stats(run, None)?;
    report(run)?;
    Ok(Some(agreement))
}

/// The whole pipeline from a config file into `output_dir/<run id>`.
pub fn run_all(config: &RunConfig) -> Result<RunDir> {
    let id = config.run_id()?;
    let run = RunDir::create(config.output_dir.join(&id))?;
    ingest(&run, &config.corpus, &config.columns, config.unit_key)?;
    run.set_run_id(&id)?;
    preprocess(&run, &config.preprocess)?;
    topics(&run, &config.topics)?;
    let scheme: CodeScheme = {
        let text = std::fs::read_to_string(&config.scheme).map_err(PipelineError::io(&config.scheme))?;
        serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: config.scheme.clone(), source })?
    };
    code(&run, &scheme)?;
    if let Some(reference) = &config.reference {
        agreement(&run, Some(reference), Some(&config.agreement))?;
        ena(&run, Some(&config.ena))?;
        stats(&run, Some(&config.stats))?;
        report(&run)?;
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excerpt {
    pub entry_id: u64,
    pub timestamp: String,
    pub text: String,
    pub codes: Vec<String>,
    /// Keywords that fired, per code (algorithm coding only).
    pub matched: BTreeMap<String, Vec<String>>,
}

/// Posts of one unit that carry either code of an edge.
pub fn excerpts(run: &RunDir, unit: &str, source: Source, code_a: &str, code_b: &str) -> Result<Vec<Excerpt>> {
    let config: EnaConfig = if run.has(ENA_CONFIG) { run.read_json(ENA_CONFIG, "ena")? } else { EnaConfig::default() };
    let unit_key = ena_unit_key(run, &config)?;
    let (codes, rows) = match source {
        Source::Algorithm => read_table(run, CODED, "code", source)?,
        Source::Human => read_table(run, REFERENCE, "agreement", source)?,
    };
    for c in [code_a, code_b] {
        if !codes.iter().any(|x| x == c) {
            return Err(PipelineError::Usage(format!("unknown code `{c}`")));
        }
    }
    let picked: Vec<&CodedRow> = rows
        .iter()
        .filter(|r| unit_key.unit_id(&r.user_id, r.semester.as_deref()) == unit)
        .filter(|r| r.flag(code_a) || r.flag(code_b))
        .collect();
    let matcher = match source {
        Source::Algorithm if !picked.is_empty() => {
            let corpus = load_corpus(run)?;
            let normalizer = Normalizer::new(&load_preprocess_config(run)?, &corpus)?;
            let compiled = CompiledScheme::new(&load_scheme(run)?, &normalizer);
            let streams: BTreeMap<u64, TokenStream> = load_streams(run)?.into_iter().map(|s| (s.post_ref, s)).collect();
            Some((corpus, normalizer, compiled, streams))
        }
        _ => None,
    };
    Ok(picked
        .into_iter()
        .map(|r| {
            let mut matched = BTreeMap::new();
            if let Some((corpus, normalizer, compiled, streams)) = &matcher {
                if let (Some(post), Some(stream)) =
                    (corpus.posts().iter().find(|p| p.entry_id == r.entry_id), streams.get(&r.entry_id))
                {
                    let view = PostView::new(post, stream, normalizer);
                    for (code, kws) in compiled.codes().iter().zip(compiled.matched_keywords(&view)) {
                        if (code == code_a || code == code_b) && !kws.is_empty() {
                            matched.insert(code.clone(), kws);
                        }
                    }
                }
            }
            Excerpt {
                entry_id: r.entry_id,
                timestamp: forumcode_core::corpus::format_timestamp(&r.timestamp),
                text: r.text.clone(),
                codes: codes.iter().filter(|c| r.flag(c)).cloned().collect(),
                matched,
            }
        })
        .collect())
}
