//! Benchmark-suite ingestion: labels from MBI headers and CorrBench file
//! names, source debiasing, external compilation to IR and the manifest.

mod compile;
mod manifest;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::labels::{ErrorLabel, LabelFamily};

pub use compile::{compile_to_ir, CompileFailure, Compiler, CompilerCommand, DEFAULT_TIMEOUT_SECS};
pub use manifest::{build_manifest, read_manifest, write_manifest, CompileStatus, CorpusSample, Manifest, ManifestError, Provenance, MANIFEST_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Suite {
    #[serde(rename = "MBI")]
    Mbi,
    CorrBench,
    Other,
}

impl Suite {
    /// Prefix used in sample ids.
    pub fn key(self) -> &'static str {
        match self {
            Suite::Mbi => "mbi",
            Suite::CorrBench => "corrbench",
            Suite::Other => "other",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Mbi => "MBI",
            Suite::CorrBench => "CorrBench",
            Suite::Other => "Other",
        })
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mbi" => Ok(Suite::Mbi),
            "corrbench" | "mpi-corrbench" => Ok(Suite::CorrBench),
            "other" => Ok(Suite::Other),
            _ => Err(format!("unknown suite `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptLevel {
    O0,
    O2,
    Os,
}

impl OptLevel {
    pub const ALL: [OptLevel; 3] = [OptLevel::O0, OptLevel::O2, OptLevel::Os];

    pub fn name(self) -> &'static str {
        match self {
            OptLevel::O0 => "O0",
            OptLevel::O2 => "O2",
            OptLevel::Os => "Os",
        }
    }

    /// Compiler flag substituted for `{opt}`.
    pub fn flag(self) -> String {
        format!("-{}", self.name())
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptLevel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim_start_matches('-').to_ascii_lowercase().as_str() {
            "o0" => Ok(OptLevel::O0),
            "o2" => Ok(OptLevel::O2),
            "os" => Ok(OptLevel::Os),
            _ => Err(format!("unknown optimization level `{s}` (expected O0, O2 or Os)")),
        }
    }
}

/// One source file found by ingestion. Exactly one of `label` and
/// `quarantine` is set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub suite: Suite,
    /// Path relative to the suite directory, `/`-separated.
    pub rel_path: String,
    pub source: PathBuf,
    pub label: Option<ErrorLabel>,
    pub quarantine: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Walk { path: String, source: walkdir::Error },
    #[error("header pattern: {0}")]
    Pattern(#[from] regex::Error),
    #[error("alias table: {0}")]
    Aliases(String),
}

/// Default MBI header pattern; the `desc` group holds the descriptor.
pub const MBI_HEADER_PATTERN: &str = r"(?m)^\s*\|\s*(?:ERROR:\s*)?(?P<desc>[A-Za-z_]+)";

/// Descriptor string to label. Lookups try the exact string, then any
/// label name of the suite's family (case-insensitive).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AliasTable(pub BTreeMap<String, ErrorLabel>);

impl AliasTable {
    pub fn mbi_default() -> Self {
        let pairs = [
            ("OK", ErrorLabel::Correct),
            ("CallMatching", ErrorLabel::CallOrdering),
            ("ParamMatching", ErrorLabel::ParameterMatching),
            ("InvalidParam", ErrorLabel::InvalidParameter),
            ("ResLeak", ErrorLabel::ResourceLeak),
            ("MissingStart", ErrorLabel::RequestLifecycle),
            ("MissingWait", ErrorLabel::RequestLifecycle),
        ];
        Self(pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    pub fn from_json(s: &str) -> Result<Self, CorpusError> {
        serde_json::from_str(s).map_err(|e| CorpusError::Aliases(e.to_string()))
    }

    pub fn resolve(&self, desc: &str, family: LabelFamily) -> Option<ErrorLabel> {
        self.0
            .get(desc)
            .copied()
            .or_else(|| ErrorLabel::from_str(desc).ok().filter(|l| l.families().contains(&family)))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io { path: path.display().to_string(), source }
}

/// Every regular file under `dir`, sorted by relative path.
fn files(dir: &Path) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    let mut out = Vec::new();
    for e in WalkDir::new(dir).sort_by_file_name() {
        let e = e.map_err(|source| CorpusError::Walk { path: dir.display().to_string(), source })?;
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(dir).expect("walkdir yields children").components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            out.push((rel, e.path().to_path_buf()));
        }
    }
    out.sort();
    Ok(out)
}

/// The first comment block of a C file: a leading `/* ... */` or a run of
/// `//` lines, ignoring leading whitespace.
pub fn leading_comment(text: &str) -> Option<&str> {
    let t = text.trim_start();
    if let Some(rest) = t.strip_prefix("/*") {
        return rest.find("*/").map(|end| &rest[..end]);
    }
    if t.starts_with("//") {
        let mut end = 0;
        for line in t.split_inclusive('\n') {
            if !line.trim_start().starts_with("//") {
                break;
            }
            end += line.len();
        }
        return Some(&t[..end]);
    }
    None
}

/// Descriptor of an MBI header, if the pattern finds one.
pub fn mbi_descriptor<'a>(text: &'a str, pattern: &Regex) -> Option<&'a str> {
    let block = leading_comment(text)?;
    let caps = pattern.captures(block)?;
    caps.name("desc").or_else(|| caps.get(1)).map(|m| m.as_str())
}

/// Labels every `.c` file under `dir` from its header comment. Other files
/// and unrecognized headers are quarantined, never dropped.
pub fn ingest_mbi(dir: &Path, pattern: &Regex, aliases: &AliasTable) -> Result<Vec<SourceEntry>, CorpusError> {
    let mut out = Vec::new();
    for (rel, path) in files(dir)? {
        let mut entry = SourceEntry { suite: Suite::Mbi, rel_path: rel, source: path.clone(), label: None, quarantine: None };
        if path.extension().and_then(|e| e.to_str()) != Some("c") {
            if path.extension().and_then(|e| e.to_str()) == Some("ll") {
                continue; // prebuilt IR next to its source
            }
            entry.quarantine = Some("not a C source".into());
        } else {
            let bytes = std::fs::read(&path).map_err(io_err(&path))?;
            let text = String::from_utf8_lossy(&bytes);
            match mbi_descriptor(&text, pattern) {
                None => entry.quarantine = Some("UnrecognizedHeader: no descriptor in the leading comment".into()),
                Some(desc) => match aliases.resolve(desc, LabelFamily::Mbi) {
                    Some(l) => entry.label = Some(l),
                    None => entry.quarantine = Some(format!("UnrecognizedHeader: unmapped descriptor `{desc}`")),
                },
            }
        }
        out.push(entry);
    }
    Ok(out)
}

const CORRBENCH_PREFIXES: [ErrorLabel; 4] = [ErrorLabel::ArgError, ErrorLabel::ArgMismatch, ErrorLabel::MissplacedCall, ErrorLabel::MissingCall];

/// Label from a CorrBench relative path: the file-name prefix before the
/// first `-`, or `Correct` anywhere under a `correct` directory.
pub fn corrbench_label(rel_path: &str) -> Option<ErrorLabel> {
    let name = rel_path.rsplit('/').next().unwrap_or(rel_path);
    let prefix = name.split('-').next().unwrap_or("");
    if let Some(l) = CORRBENCH_PREFIXES.iter().find(|l| l.name() == prefix) {
        return Some(*l);
    }
    let dirs = rel_path.split('/').rev().skip(1);
    dirs.into_iter().any(|d| d.eq_ignore_ascii_case("correct")).then_some(ErrorLabel::Correct)
}

pub fn ingest_corrbench(dir: &Path) -> Result<Vec<SourceEntry>, CorpusError> {
    let mut out = Vec::new();
    for (rel, path) in files(dir)? {
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_owned);
        if ext.as_deref() == Some("ll") {
            continue;
        }
        let mut entry = SourceEntry { suite: Suite::CorrBench, rel_path: rel.clone(), source: path, label: None, quarantine: None };
        if ext.as_deref() != Some("c") {
            entry.quarantine = Some("not a C source".into());
        } else {
            match corrbench_label(&rel) {
                Some(l) => entry.label = Some(l),
                None => entry.quarantine = Some("UnrecognizedName: no label prefix and not under a correct directory".into()),
            }
        }
        out.push(entry);
    }
    Ok(out)
}

/// Drops every `#include` of `mpitest.h`; all other bytes are kept.
pub fn debias_source(text: &str) -> String {
    text.split_inclusive('\n').filter(|line| !is_mpitest_include(line)).collect()
}

fn is_mpitest_include(line: &str) -> bool {
    let t = line.trim_start();
    let Some(rest) = t.strip_prefix('#') else { return false };
    let Some(rest) = rest.trim_start().strip_prefix("include") else { return false };
    let rest = rest.trim_start();
    rest.starts_with("\"mpitest.h\"") || rest.starts_with("<mpitest.h>")
}
