//! Discussion posts, CSV ingest, and the binary "well-formatted" coded table.
//!
//! A [`Corpus`] is immutable once ingested. Coded tables carry one row per
//! post and one 0/1 column per code, plus a `source` column telling apart
//! machine coding from the human reference.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column `{0}` in CSV header")]
    MissingHeader(String),
    #[error("line {line}: cannot parse timestamp `{value}`")]
    Timestamp { line: u64, value: String },
    #[error("line {line}: invalid entry id `{value}`")]
    EntryId { line: u64, value: String },
    #[error("line {line}: duplicate entry id {id}")]
    DuplicateEntryId { line: u64, id: u64 },
    #[error("line {line}: empty user id")]
    EmptyUser { line: u64 },
    #[error("line {line}: invalid code flag `{value}` for `{code}` (expected 0 or 1)")]
    Flag { line: u64, code: String, value: String },
    #[error("line {line}: unknown source `{value}`")]
    Source { line: u64, value: String },
    #[error("no rows with text")]
    NoRows,
    #[error("entry ids differ between tables: {0:?}")]
    EntryMismatch(Vec<u64>),
    #[error("code columns differ between tables: {left:?} vs {right:?}")]
    CodeMismatch { left: Vec<String>, right: Vec<String> },
    #[error("row {entry_id} is tagged `{found}` but `{expected}` was expected")]
    SourceMismatch { entry_id: u64, expected: Source, found: Source },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub entry_id: u64,
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub text: String,
    pub semester: Option<String>,
}

/// How posts are grouped into units of analysis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKey {
    #[default]
    User,
    UserSemester,
}

impl UnitKey {
    pub fn unit_id(self, user_id: &str, semester: Option<&str>) -> String {
        match (self, semester) {
            (UnitKey::UserSemester, Some(s)) => format!("{user_id}|{s}"),
            _ => user_id.to_string(),
        }
    }
}

impl FromStr for UnitKey {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "user" => Ok(UnitKey::User),
            "user+semester" | "user_semester" => Ok(UnitKey::UserSemester),
            other => Err(format!("unknown unit key `{other}` (expected user or user+semester)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    posts: Vec<Post>,
    pub unit_key: UnitKey,
}

impl Corpus {
    /// Builds a corpus, sorting posts by entry id.
    pub fn new(mut posts: Vec<Post>, unit_key: UnitKey) -> Self {
        posts.sort_by_key(|p| p.entry_id);
        Corpus { posts, unit_key }
    }

    pub fn posts(&self) -> &[Post] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn unit_of(&self, post: &Post) -> String {
        self.unit_key.unit_id(&post.user_id, post.semester.as_deref())
    }

    /// Distinct unit ids in sorted order.
    pub fn units(&self) -> Vec<String> {
        let set: BTreeSet<String> = self.posts.iter().map(|p| self.unit_of(p)).collect();
        set.into_iter().collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let with_semester = self.posts.iter().any(|p| p.semester.is_some());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["entry_id", "user_id", "timestamp", "text"];
        if with_semester {
            header.push("semester");
        }
        w.write_record(&header)?;
        for p in &self.posts {
            let mut rec =
                vec![p.entry_id.to_string(), p.user_id.clone(), format_timestamp(&p.timestamp), p.text.clone()];
            if with_semester {
                rec.push(p.semester.clone().unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Maps logical post fields onto CSV header names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMap {
    /// When absent, entry ids are assigned 1..=n in file order.
    #[serde(default)]
    pub entry_id: Option<String>,
    pub user_id: String,
    pub timestamp: String,
    pub text: String,
    #[serde(default)]
    pub semester: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            entry_id: Some("entry_id".into()),
            user_id: "user_id".into(),
            timestamp: "timestamp".into(),
            text: "text".into(),
            semester: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub warnings: Vec<String>,
}

pub fn ingest_csv(path: impl AsRef<Path>, columns: &ColumnMap) -> Result<(Corpus, IngestReport)> {
    let file = std::fs::File::open(path)?;
    ingest_reader(file, columns)
}

pub fn ingest_reader<R: Read>(reader: R, columns: &ColumnMap) -> Result<(Corpus, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h.trim() == name).ok_or_else(|| CorpusError::MissingHeader(name.to_string()))
    };
    let entry_col = columns.entry_id.as_deref().map(find).transpose()?;
    let user_col = find(&columns.user_id)?;
    let time_col = find(&columns.timestamp)?;
    let text_col = find(&columns.text)?;
    let semester_col = columns.semester.as_deref().map(find).transpose()?;

    let mut report = IngestReport::default();
    let mut posts = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        report.rows_read += 1;
        let field = |i: usize| record.get(i).unwrap_or("");

        let text = field(text_col);
        if text.trim().is_empty() {
            report.warnings.push(format!("line {line}: empty text, row skipped"));
            continue;
        }
        let entry_id = match entry_col {
            Some(c) => {
                let raw = field(c).trim();
                match raw.parse::<u64>() {
                    Ok(id) if id > 0 => id,
                    _ => return Err(CorpusError::EntryId { line, value: raw.to_string() }),
                }
            }
            None => report.rows_read as u64,
        };
        if !seen.insert(entry_id) {
            return Err(CorpusError::DuplicateEntryId { line, id: entry_id });
        }
        let user_id = field(user_col).trim();
        if user_id.is_empty() {
            return Err(CorpusError::EmptyUser { line });
        }
        let raw_ts = field(time_col);
        let timestamp =
            parse_timestamp(raw_ts).ok_or_else(|| CorpusError::Timestamp { line, value: raw_ts.to_string() })?;
        let semester = semester_col.map(|c| field(c).trim().to_string()).filter(|s| !s.is_empty());
        posts.push(Post { entry_id, user_id: user_id.to_string(), timestamp, text: text.to_string(), semester });
    }
    report.rows_kept = posts.len();
    if posts.is_empty() {
        return Err(CorpusError::NoRows);
    }
    Ok((Corpus::new(posts, UnitKey::default()), report))
}

/// Accepts RFC 3339 (converted to UTC), `YYYY-MM-DD[T ]HH:MM[:SS]`, US-style
/// `MM/DD/YYYY HH:MM[:SS]` and bare dates.
pub fn parse_timestamp(raw: &str) -> Option<NaiveDateTime> {
    let s = raw.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.naive_utc());
    }
    const FORMATS: [&str; 6] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
        "%m/%d/%Y %H:%M:%S",
        "%m/%d/%Y %H:%M",
    ];
    for f in FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, f) {
            return Some(dt);
        }
    }
    for f in ["%Y-%m-%d", "%m/%d/%Y"] {
        if let Ok(d) = NaiveDate::parse_from_str(s, f) {
            return d.and_hms_opt(0, 0, 0);
        }
    }
    None
}

pub fn format_timestamp(ts: &NaiveDateTime) -> String {
    ts.format(TIMESTAMP_FORMAT).to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Algorithm,
    Human,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Algorithm => "algorithm",
            Source::Human => "human",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "algorithm" => Ok(Source::Algorithm),
            "human" => Ok(Source::Human),
            other => Err(format!("unknown source `{other}`")),
        }
    }
}

/// One row of a coded table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodedRow {
    pub entry_id: u64,
    pub user_id: String,
    pub timestamp: NaiveDateTime,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semester: Option<String>,
    pub code_flags: BTreeMap<String, bool>,
    pub source: Source,
}

impl CodedRow {
    pub fn flag(&self, code: &str) -> bool {
        self.code_flags.get(code).copied().unwrap_or(false)
    }
}

/// Writes `entry_id,user_id,timestamp,text[,semester],<codes…>,source`.
pub fn write_coded_csv<W: Write>(writer: W, codes: &[String], rows: &[CodedRow]) -> Result<()> {
    let with_semester = rows.iter().any(|r| r.semester.is_some());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec!["entry_id", "user_id", "timestamp", "text"];
    if with_semester {
        header.push("semester");
    }
    header.extend(codes.iter().map(String::as_str));
    header.push("source");
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.entry_id.to_string(), r.user_id.clone(), format_timestamp(&r.timestamp), r.text.clone()];
        if with_semester {
            rec.push(r.semester.clone().unwrap_or_default());
        }
        rec.extend(codes.iter().map(|c| if r.flag(c) { "1" } else { "0" }.to_string()));
        rec.push(r.source.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a coded table. Every column between the identity columns and
/// `source` is taken as a code. A table without a `source` column gets
/// `default_source` on every row.
pub fn read_coded_csv<R: Read>(reader: R, default_source: Source) -> Result<(Vec<String>, Vec<CodedRow>)> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let pos = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = |name: &str| pos(name).ok_or_else(|| CorpusError::MissingHeader(name.to_string()));
    let entry_col = required("entry_id")?;
    let user_col = required("user_id")?;
    let time_col = required("timestamp")?;
    let text_col = required("text")?;
    let semester_col = pos("semester");
    let source_col = pos("source");
    let fixed: Vec<usize> = [Some(entry_col), Some(user_col), Some(time_col), Some(text_col), semester_col, source_col]
        .into_iter()
        .flatten()
        .collect();
    let code_cols: Vec<(usize, String)> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !fixed.contains(i))
        .map(|(i, h)| (i, h.trim().to_string()))
        .collect();
    let codes: Vec<String> = code_cols.iter().map(|(_, c)| c.clone()).collect();

    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let raw_id = field(entry_col).trim();
        let entry_id = raw_id.parse::<u64>().map_err(|_| CorpusError::EntryId { line, value: raw_id.to_string() })?;
        let raw_ts = field(time_col);
        let timestamp =
            parse_timestamp(raw_ts).ok_or_else(|| CorpusError::Timestamp { line, value: raw_ts.to_string() })?;
        let mut code_flags = BTreeMap::new();
        for (i, code) in &code_cols {
            let v = match field(*i).trim() {
                "1" => true,
                "0" => false,
                other => return Err(CorpusError::Flag { line, code: code.clone(), value: other.to_string() }),
            };
            code_flags.insert(code.clone(), v);
        }
        let source = match source_col {
            Some(c) => field(c).parse().map_err(|_| CorpusError::Source { line, value: field(c).to_string() })?,
            None => default_source,
        };
        rows.push(CodedRow {
            entry_id,
            user_id: field(user_col).trim().to_string(),
            timestamp,
            text: field(text_col).to_string(),
            semester: semester_col.map(|c| field(c).trim().to_string()).filter(|s| !s.is_empty()),
            code_flags,
            source,
        });
    }
    Ok((codes, rows))
}

/// Stacks an algorithm-coded table on top of a human-coded one.
pub fn merge_tables(algorithm: &[CodedRow], human: &[CodedRow]) -> Result<Vec<CodedRow>> {
    check_source(algorithm, Source::Algorithm)?;
    check_source(human, Source::Human)?;
    check_aligned(algorithm, human)?;
    Ok(algorithm.iter().chain(human).cloned().collect())
}

fn check_source(rows: &[CodedRow], expected: Source) -> Result<()> {
    match rows.iter().find(|r| r.source != expected) {
        Some(r) => Err(CorpusError::SourceMismatch { entry_id: r.entry_id, expected, found: r.source }),
        None => Ok(()),
    }
}

/// Both tables must cover the same entry ids and the same code names.
pub fn check_aligned(left: &[CodedRow], right: &[CodedRow]) -> Result<()> {
    let ids_l: BTreeSet<u64> = left.iter().map(|r| r.entry_id).collect();
    let ids_r: BTreeSet<u64> = right.iter().map(|r| r.entry_id).collect();
    let diff: Vec<u64> = ids_l.symmetric_difference(&ids_r).copied().collect();
    if !diff.is_empty() {
        return Err(CorpusError::EntryMismatch(diff));
    }
    let codes =
        |rows: &[CodedRow]| -> BTreeSet<String> { rows.iter().flat_map(|r| r.code_flags.keys().cloned()).collect() };
    let (cl, cr) = (codes(left), codes(right));
    if cl != cr {
        return Err(CorpusError::CodeMismatch { left: cl.into_iter().collect(), right: cr.into_iter().collect() });
    }
    Ok(())
}
