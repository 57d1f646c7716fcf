use std::path::{Path, PathBuf};

use forumcode_core::agreement::BandThresholds;
use forumcode_core::corpus::{ColumnMap, UnitKey};
use forumcode_core::ena::Accumulation;
use forumcode_core::preprocess::PreprocessConfig;
use forumcode_core::stats::Alternative;
use forumcode_core::topics::LdaParams;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::run::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TopicsConfig {
    /// Fit exactly this K.
    pub k: Option<usize>,
    /// Inclusive range searched by coherence when `k` is absent.
    pub k_range: Option<(usize, usize)>,
    pub seed: u64,
    pub iterations: usize,
    pub n_top: usize,
    pub alpha: Option<f64>,
    pub beta: f64,
}

impl Default for TopicsConfig {
    fn default() -> Self {
        let p = LdaParams::new(1);
        TopicsConfig {
            k: None,
            k_range: Some((2, 8)),
            seed: p.seed,
            iterations: p.iterations,
            n_top: 10,
            alpha: None,
            beta: p.beta,
        }
    }
}

impl TopicsConfig {
    pub fn candidate_ks(&self) -> Result<Vec<usize>> {
        match (self.k, self.k_range) {
            (Some(k), _) => Ok(vec![k]),
            (None, Some((lo, hi))) if lo >= 1 && lo <= hi => Ok((lo..=hi).collect()),
            (None, Some((lo, hi))) => Err(PipelineError::Usage(format!("invalid K range {lo}..{hi}"))),
            (None, None) => Err(PipelineError::Usage("give either k or k_range".into())),
        }
    }

    pub fn params(&self) -> LdaParams {
        LdaParams { k: 1, alpha: self.alpha, beta: self.beta, iterations: self.iterations, seed: self.seed }
    }
}

/// Parses `2..8` or `2..=8` (both inclusive).
pub fn parse_k_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let (lo, hi) =
        s.split_once("..=").or_else(|| s.split_once("..")).ok_or_else(|| format!("expected LO..HI, got `{s}`"))?;
    let lo: usize = lo.trim().parse().map_err(|_| format!("bad lower bound in `{s}`"))?;
    let hi: usize = hi.trim().parse().map_err(|_| format!("bad upper bound in `{s}`"))?;
    if lo == 0 || lo > hi {
        return Err(format!("K range `{s}` must satisfy 1 <= LO <= HI"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgreementConfig {
    pub bands: BandThresholds,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnaConfig {
    pub accumulation: Accumulation,
    /// Defaults to the unit key chosen at ingest.
    pub unit_key: Option<UnitKey>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatsConfig {
    pub alternative: Alternative,
}

/// Everything needed to run the whole pipeline. Relative paths are
/// resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub columns: ColumnMap,
    #[serde(default)]
    pub unit_key: UnitKey,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub topics: TopicsConfig,
    pub scheme: PathBuf,
    #[serde(default)]
    pub reference: Option<PathBuf>,
    #[serde(default)]
    pub agreement: AgreementConfig,
    #[serde(default)]
    pub ena: EnaConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(PipelineError::io(path))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|source| PipelineError::Json { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.scheme);
        fix(&mut self.output_dir);
        if let Some(r) = &mut self.reference {
            fix(r);
        }
        if let Some(s) = &mut self.preprocess.stopword_file {
            fix(s);
        }
    }

    /// Content hash of the settings and of every input file; paths and the
    /// output location do not take part.
    pub fn run_id(&self) -> Result<String> {
        let digest =
            |p: &Path| -> Result<String> { std::fs::read(p).map(|b| sha256_hex(&b)).map_err(PipelineError::io(p)) };
        let mut preprocess = serde_json::to_value(&self.preprocess).expect("plain config");
        preprocess["stopword_file"] = match &self.preprocess.stopword_file {
            Some(p) => digest(p)?.into(),
            None => serde_json::Value::Null,
        };
        let key = serde_json::json!({
            "corpus": digest(&self.corpus)?,
            "columns": self.columns,
            "unit_key": self.unit_key,
            "preprocess": preprocess,
            "topics": self.topics,
            "scheme": digest(&self.scheme)?,
            "reference": self.reference.as_deref().map(digest).transpose()?,
            "agreement": self.agreement,
            "ena": self.ena,
            "stats": self.stats,
        });
        Ok(sha256_hex(key.to_string().as_bytes())[..16].to_string())
    }
}
