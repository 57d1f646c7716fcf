use std::path::PathBuf;

use forumcode_core::agreement::AgreementError;
use forumcode_core::autocoder::SchemeError;
use forumcode_core::corpus::CorpusError;
use forumcode_core::ena::EnaError;
use forumcode_core::preprocess::PreprocessError;
use forumcode_core::stats::StatsError;
use forumcode_core::topics::TopicsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{file} is missing from {dir}; run `forumcode {stage}` first")]
    MissingStage { stage: &'static str, file: String, dir: PathBuf },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Topics(#[from] TopicsError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error(transparent)]
    Ena(#[from] EnaError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

impl PipelineError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> PipelineError {
        let path = path.into();
        move |source| PipelineError::Io { path, source }
    }

    /// 1 for usage problems, 2 for bad input data, 3 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::MissingStage { .. } | PipelineError::Usage(_) => 1,
            PipelineError::Topics(TopicsError::Internal(_)) | PipelineError::Internal(_) => 3,
            _ => 2,
        }
    }
}
