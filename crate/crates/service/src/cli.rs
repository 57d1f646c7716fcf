use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use forumcode_core::agreement::BandThresholds;
use forumcode_core::autocoder::CodeScheme;
use forumcode_core::corpus::{ColumnMap, UnitKey};
use forumcode_core::ena::Accumulation;
use forumcode_core::preprocess::PreprocessConfig;
use forumcode_core::stats::Alternative;

use crate::config::{parse_k_range, AgreementConfig, EnaConfig, RunConfig, StatsConfig, TopicsConfig};
use crate::error::{PipelineError, Result};
use crate::pipeline as p;
use crate::run::RunDir;

#[derive(Debug, Parser)]
#[command(name = "forumcode", version, about = "Topic-model-assisted coding of discussion posts")]
pub struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunDirArg {
    /// Directory holding the run's artifacts.
    #[arg(long, default_value = ".")]
    pub run_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read a discussion CSV into the run directory.
    Ingest {
        #[command(flatten)]
        dir: RunDirArg,
        /// Discussion export (CSV).
        input: PathBuf,
        /// JSON file mapping column roles to header names.
        #[arg(long)]
        columns: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "user")]
        unit_key: UnitKeyArg,
    },
    /// Tokenize, stem and build n-grams and the vocabulary.
    Preprocess {
        #[command(flatten)]
        dir: RunDirArg,
        /// Preprocessing settings as JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Replace the bundled stopword list (one word per line).
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Fit LDA, choosing K by coherence unless --k is given.
    Topics {
        #[command(flatten)]
        dir: RunDirArg,
        #[arg(long, conflicts_with = "k_range")]
        k: Option<usize>,
        /// Inclusive range such as 2..8.
        #[arg(long, value_parser = parse_k_range)]
        k_range: Option<(usize, usize)>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        iterations: Option<usize>,
        #[arg(long)]
        n_top: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Code every post with a scheme file.
    Code {
        #[command(flatten)]
        dir: RunDirArg,
        #[arg(long)]
        scheme: PathBuf,
    },
    /// Cohen's kappa between the algorithm and a human coding.
    Agreement {
        #[command(flatten)]
        dir: RunDirArg,
        /// Human coding CSV; defaults to the one already in the run.
        #[arg(long)]
        reference: Option<PathBuf>,
        /// Five ascending thresholds, e.g. 0.2,0.4,0.6,0.8,0.9.
        #[arg(long, value_parser = parse_bands)]
        bands: Option<BandThresholds>,
    },
    /// Epistemic network model of both codings.
    Ena {
        #[command(flatten)]
        dir: RunDirArg,
        #[arg(long, value_enum)]
        accumulation: Option<AccumulationArg>,
        #[arg(long, value_enum)]
        unit_key: Option<UnitKeyArg>,
    },
    /// Mann-Whitney tests on the projected points.
    Stats {
        #[command(flatten)]
        dir: RunDirArg,
        #[arg(long, value_enum)]
        alternative: Option<AlternativeArg>,
    },
    /// Write report.html and the network SVGs.
    Report {
        #[command(flatten)]
        dir: RunDirArg,
    },
    /// Run every stage from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        /// Directory containing run directories.
        #[arg(long, default_value = "runs")]
        runs: PathBuf,
        #[arg(long, env = "FORUMCODE_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        /// Also serve static files (e.g. a built front end).
        #[arg(long)]
        static_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum UnitKeyArg {
    User,
    UserSemester,
}

impl From<UnitKeyArg> for UnitKey {
    fn from(k: UnitKeyArg) -> Self {
        match k {
            UnitKeyArg::User => UnitKey::User,
            UnitKeyArg::UserSemester => UnitKey::UserSemester,
        }
    }
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum AccumulationArg {
    Binary,
    Count,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum AlternativeArg {
    TwoSided,
    Less,
    Greater,
}

fn parse_bands(s: &str) -> std::result::Result<BandThresholds, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
        .collect::<std::result::Result<_, _>>()?;
    let [minimal, weak, moderate, strong, almost_perfect] = v[..] else {
        return Err(format!("expected 5 thresholds, got {}", v.len()));
    };
    let t = BandThresholds { minimal, weak, moderate, strong, almost_perfect };
    t.validate().map_err(|e| e.to_string())?;
    Ok(t)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.to_path_buf(), source })
}

/// Executes a parsed command. `serve` needs a runtime and is handled by
/// the binary.
pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest { dir, input, columns, unit_key } => {
            let columns: ColumnMap = match columns {
                Some(path) => read_json(&path)?,
                None => ColumnMap::default(),
            };
            let run = RunDir::create(dir.run_dir)?;
            let report = p::ingest(&run, &input, &columns, unit_key.into())?;
            println!("ingested {} posts ({} rows read)", report.rows_kept, report.rows_read);
        }
        Command::Preprocess { dir, config, stopwords } => {
            let run = RunDir::open(dir.run_dir);
            let mut cfg: PreprocessConfig = match config {
                Some(path) => read_json(&path)?,
                None => PreprocessConfig::default(),
            };
            if stopwords.is_some() {
                cfg.stopword_file = stopwords;
            }
            let n = p::preprocess(&run, &cfg)?;
            println!("vocabulary: {n} terms");
        }
        Command::Topics { dir, k, k_range, seed, iterations, n_top, alpha, beta } => {
            let run = RunDir::open(dir.run_dir);
            let mut cfg = TopicsConfig::default();
            if k.is_some() {
                cfg.k = k;
            }
            if k_range.is_some() {
                cfg.k_range = k_range;
            }
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.iterations = iterations.unwrap_or(cfg.iterations);
            cfg.n_top = n_top.unwrap_or(cfg.n_top);
            cfg.alpha = alpha.or(cfg.alpha);
            cfg.beta = beta.unwrap_or(cfg.beta);
            let t = p::topics(&run, &cfg)?;
            println!("selected K={}", t.selected_k);
            for s in &t.topics {
                let words: Vec<&str> = s.top_words.iter().map(|w| w.term.as_str()).collect();
                println!("  topic {}: {}", s.topic_id, words.join(", "));
            }
        }
        Command::Code { dir, scheme } => {
            let run = RunDir::open(dir.run_dir);
            let scheme: CodeScheme = read_json(&scheme)?;
            let coding = p::code(&run, &scheme)?;
            println!("coded {} posts with {} codes", coding.full.rows.len(), coding.full.codes.len());
        }
        Command::Agreement { dir, reference, bands } => {
            let run = RunDir::open(dir.run_dir);
            let cfg = bands.map(|bands| AgreementConfig { bands });
            let a = p::agreement(&run, reference.as_deref(), cfg.as_ref())?;
            for c in &a.full.per_code {
                println!("{:<24} kappa={:.2} ({})", c.code, c.kappa, c.band);
            }
        }
        Command::Ena { dir, accumulation, unit_key } => {
            let run = RunDir::open(dir.run_dir);
            let cfg = if accumulation.is_some() || unit_key.is_some() {
                let mut c: EnaConfig =
                    if run.has(p::ENA_CONFIG) { read_json(&run.path(p::ENA_CONFIG))? } else { EnaConfig::default() };
                if let Some(a) = accumulation {
                    c.accumulation = match a {
                        AccumulationArg::Binary => Accumulation::Binary,
                        AccumulationArg::Count => Accumulation::Count,
                    };
                }
                if let Some(k) = unit_key {
                    c.unit_key = Some(k.into());
                }
                Some(c)
            } else {
                None
            };
            let space = p::ena(&run, cfg.as_ref())?;
            let variance: Vec<String> =
                space.axis_labels.iter().zip(&space.variance).map(|(l, v)| format!("{l} {:.1}%", v * 100.0)).collect();
            println!("{} units; {}", space.units.len(), variance.join(", "));
        }
        Command::Stats { dir, alternative } => {
            let run = RunDir::open(dir.run_dir);
            let cfg = alternative.map(|a| StatsConfig {
                alternative: match a {
                    AlternativeArg::TwoSided => Alternative::TwoSided,
                    AlternativeArg::Less => Alternative::Less,
                    AlternativeArg::Greater => Alternative::Greater,
                },
            });
            for r in p::stats(&run, cfg.as_ref())?.results {
                println!("{}", r.summary_line());
            }
        }
        Command::Report { dir } => {
            let run = RunDir::open(dir.run_dir);
            p::report(&run)?;
            println!("wrote {}", run.path(p::REPORT).display());
        }
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            let run = p::run_all(&cfg)?;
            println!("{}", run.root().display());
        }
        Command::Serve { .. } => {
            return Err(PipelineError::Internal("serve must be started through the binary".into()));
        }
    }
    Ok(())
}

pub fn serve_address(host: IpAddr, port: u16) -> SocketAddr {
    SocketAddr::new(host, port)
}
