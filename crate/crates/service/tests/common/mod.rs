#![allow(dead_code)]

use std::path::{Path, PathBuf};

use forumcode_service::config::RunConfig;
use forumcode_service::pipeline;
use forumcode_service::run::RunDir;

pub fn sample_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../sample")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn sample_config(output_dir: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&sample_dir().join("run.json")).expect("sample config");
    cfg.output_dir = output_dir.to_path_buf();
    cfg
}

/// Runs the sample pipeline into `output_dir`; returns the run directory.
pub fn sample_run(output_dir: &Path) -> RunDir {
    pipeline::run_all(&sample_config(output_dir)).expect("sample pipeline")
}
