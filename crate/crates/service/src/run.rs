//! Run directories: flat files plus a manifest of content hashes.
//!
//! `manifest.json` maps every artifact to the SHA-256 of its bytes and is
//! itself reproducible; wall-clock times go to `timestamps.json`. SVG and
//! HTML artifacts carry one metadata comment line, which is left out of
//! their hash.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const TIMESTAMPS: &str = "timestamps.json";
/// Prefix of the metadata comment line in SVG and HTML artifacts.
pub const META_PREFIX: &str = "<!-- forumcode-meta ";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub v: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub artifacts: BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of an artifact, ignoring metadata comment lines.
pub fn artifact_digest(bytes: &[u8]) -> String {
    if !bytes.windows(META_PREFIX.len()).any(|w| w == META_PREFIX.as_bytes()) {
        return sha256_hex(bytes);
    }
    let text = String::from_utf8_lossy(bytes);
    let kept: String = text.split_inclusive('\n').filter(|line| !line.trim_start().starts_with(META_PREFIX)).collect();
    sha256_hex(kept.as_bytes())
}

/// Rounds every float in a JSON value to ten decimals so artifacts do not
/// depend on the last bits of platform math routines.
pub fn round_floats(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().unwrap_or(0.0);
            let r = (x * 1e10).round() / 1e10;
            let r = if r == 0.0 { 0.0 } else { r };
            serde_json::Number::from_f64(r).map_or(Value::Null, Value::Number)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, round_floats(v))).collect()),
        other => other,
    }
}

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn open(root: impl Into<PathBuf>) -> Self {
        RunDir { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(PipelineError::io(&root))?;
        Ok(RunDir { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn has(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    /// Path of an artifact a previous stage must have produced.
    pub fn require(&self, name: &str, stage: &'static str) -> Result<PathBuf> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(PipelineError::MissingStage { stage, file: name.to_string(), dir: self.root.clone() })
        }
    }

    pub fn read_bytes(&self, name: &str, stage: &'static str) -> Result<Vec<u8>> {
        let p = self.require(name, stage)?;
        fs::read(&p).map_err(PipelineError::io(p))
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str, stage: &'static str) -> Result<T> {
        let bytes = self.read_bytes(name, stage)?;
        serde_json::from_slice(&bytes).map_err(|source| PipelineError::Json { path: self.path(name), source })
    }

    /// Writes through a temporary file and a rename, so readers never see
    /// a half-written artifact.
    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> Result<()> {
        let target = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        let mut f = fs::File::create(&tmp).map_err(PipelineError::io(&tmp))?;
        f.write_all(bytes).map_err(PipelineError::io(&tmp))?;
        drop(f);
        fs::rename(&tmp, &target).map_err(PipelineError::io(&target))
    }

    /// Pretty JSON with floats rounded and a trailing newline.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        let v = serde_json::to_value(value).map_err(|source| PipelineError::Json { path: self.path(name), source })?;
        let mut text = serde_json::to_string_pretty(&round_floats(v))
            .map_err(|source| PipelineError::Json { path: self.path(name), source })?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Buffers CSV output from `fill`, then writes it.
    pub fn write_with<E: std::fmt::Display>(
        &self,
        name: &str,
        fill: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), E>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        fill(&mut buf).map_err(|e| PipelineError::Internal(format!("writing {name}: {e}")))?;
        self.write_bytes(name, &buf)
    }

    pub fn manifest(&self) -> Result<Manifest> {
        if !self.has(MANIFEST) {
            return Ok(Manifest { v: SCHEMA_VERSION, ..Default::default() });
        }
        self.read_json(MANIFEST, "ingest")
    }

    /// Records hashes (and write times, separately) of freshly written
    /// artifacts. Names listed in `removed` are dropped from the manifest.
    pub fn record(&self, written: &[&str], removed: &[&str]) -> Result<Manifest> {
        let mut manifest = self.manifest()?;
        manifest.v = SCHEMA_VERSION;
        let mut times: BTreeMap<String, String> =
            if self.has(TIMESTAMPS) { self.read_json(TIMESTAMPS, "ingest")? } else { BTreeMap::new() };
        let now = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
        for name in written {
            let bytes = fs::read(self.path(name)).map_err(PipelineError::io(self.path(name)))?;
            manifest.artifacts.insert(name.to_string(), artifact_digest(&bytes));
            times.insert(name.to_string(), now.clone());
        }
        for name in removed {
            manifest.artifacts.remove(*name);
            times.remove(*name);
        }
        self.write_json(MANIFEST, &manifest)?;
        self.write_json(TIMESTAMPS, &times)?;
        Ok(manifest)
    }

    pub fn set_run_id(&self, id: &str) -> Result<()> {
        let mut m = self.manifest()?;
        m.v = SCHEMA_VERSION;
        m.run_id = Some(id.to_string());
        self.write_json(MANIFEST, &m)
    }
}
