use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::compile::prebuilt_ir;
use super::{compile_to_ir, debias_source, Compiler, OptLevel, SourceEntry, Suite};
use crate::labels::{BinaryLabel, ErrorLabel};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum CompileStatus {
    Ok,
    CompileError { message: String },
    /// Quarantined sources are never compiled.
    NotCompiled,
}

/// One source at one optimization level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSample {
    /// `<suite>/<relative path>#<opt>`
    pub id: String,
    pub suite: Suite,
    pub source: PathBuf,
    pub ir: Option<PathBuf>,
    pub label: Option<ErrorLabel>,
    pub binary: Option<BinaryLabel>,
    pub opt: OptLevel,
    pub status: CompileStatus,
    /// Reason, when the label could not be determined.
    pub quarantined: Option<String>,
}

impl CorpusSample {
    /// Labelled and compiled, so usable for training and validation.
    pub fn is_evaluable(&self) -> bool {
        self.quarantined.is_none() && self.label.is_some() && self.status == CompileStatus::Ok
    }

    /// Labelled but without IR; counted as a compile error.
    pub fn is_compile_failure(&self) -> bool {
        self.quarantined.is_none() && self.label.is_some() && matches!(self.status, CompileStatus::CompileError { .. })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Suite name to the directory it was ingested from.
    pub suites: BTreeMap<String, String>,
    pub compiler: Option<String>,
    pub opt_levels: Vec<OptLevel>,
    pub header_pattern: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub provenance: Provenance,
    pub samples: Vec<CorpusSample>,
}

impl Manifest {
    pub fn new(provenance: Provenance, samples: Vec<CorpusSample>) -> Self {
        Self { manifest_version: MANIFEST_VERSION, provenance, samples }
    }

    pub fn quarantined(&self) -> impl Iterator<Item = &CorpusSample> {
        self.samples.iter().filter(|s| s.quarantined.is_some())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation at {pointer}: {message}")]
    SchemaViolation { pointer: String, message: String },
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> ManifestError {
    ManifestError::SchemaViolation { pointer: pointer.into(), message: message.into() }
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<(), ManifestError> {
    let text = serde_json::to_string_pretty(m).expect("manifest serializes") + "\n";
    std::fs::write(path, text).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })
}

/// `serde_path_to_error` paths (`samples[3].label`) as JSON pointers.
fn pointer(path: &serde_path_to_error::Path) -> String {
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            serde_path_to_error::Segment::Seq { index } => out.push_str(&index.to_string()),
            serde_path_to_error::Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            serde_path_to_error::Segment::Enum { variant } => out.push_str(variant),
            serde_path_to_error::Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Manifest, ManifestError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let m: Manifest = serde_path_to_error::deserialize(de).map_err(|e| violation(pointer(e.path()), e.inner().to_string()))?;
    if m.manifest_version != MANIFEST_VERSION {
        return Err(violation("/manifest_version", format!("unsupported version {}", m.manifest_version)));
    }
    let mut seen = HashSet::new();
    for (i, s) in m.samples.iter().enumerate() {
        let at = |field: &str| format!("/samples/{i}/{field}");
        if !seen.insert(s.id.as_str()) {
            return Err(violation(at("id"), format!("duplicate sample id `{}`", s.id)));
        }
        if s.binary != s.label.map(ErrorLabel::to_binary) {
            return Err(violation(at("binary"), "binary label disagrees with label"));
        }
        if s.ir.is_some() != (s.status == CompileStatus::Ok) {
            return Err(violation(at("ir"), "ir must be present exactly when status is ok"));
        }
        if s.quarantined.is_some() && s.label.is_some() {
            return Err(violation(at("quarantined"), "quarantined samples carry no label"));
        }
    }
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<Manifest, ManifestError> {
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io { path: path.display().to_string(), source })?;
    parse_manifest(&text)
}

fn strip_c(rel: &str) -> &str {
    rel.strip_suffix(".c").unwrap_or(rel)
}

/// Expands entries over `opts` and obtains IR for every labelled one, at most
/// `jobs` compilations at a time. Sample order follows `entries` then `opts`.
pub fn build_manifest(entries: &[SourceEntry], opts: &[OptLevel], compiler: &Compiler, out_dir: &Path, jobs: usize, provenance: Provenance) -> Manifest {
    let tasks: Vec<(&SourceEntry, OptLevel)> = entries.iter().flat_map(|e| opts.iter().map(move |&o| (e, o))).collect();
    let run = || tasks.par_iter().map(|&(e, o)| make_sample(e, o, compiler, out_dir)).collect::<Vec<_>>();
    let samples = match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    };
    Manifest::new(provenance, samples)
}

fn make_sample(e: &SourceEntry, opt: OptLevel, compiler: &Compiler, out_dir: &Path) -> CorpusSample {
    let mut s = CorpusSample {
        id: format!("{}/{}#{}", e.suite.key(), e.rel_path, opt),
        suite: e.suite,
        source: e.source.clone(),
        ir: None,
        label: e.label,
        binary: e.label.map(ErrorLabel::to_binary),
        opt,
        status: CompileStatus::NotCompiled,
        quarantined: e.quarantine.clone(),
    };
    if s.quarantined.is_some() || s.label.is_none() {
        s.label = None;
        s.binary = None;
        return s;
    }
    let result = match compiler {
        Compiler::Prebuilt => prebuilt_ir(&e.source, opt).ok_or_else(|| format!("no prebuilt IR next to {}", e.source.display())),
        Compiler::Command(cmd) => {
            let base = out_dir.join(e.suite.key()).join(strip_c(&e.rel_path));
            let output = base.with_extension(format!("{}.ll", opt.name()));
            let source = if e.suite == Suite::CorrBench { write_debiased(&e.source, &base.with_extension(format!("{}.c", opt.name()))) } else { Ok(e.source.clone()) };
            source.and_then(|src| compile_to_ir(&src, opt, cmd, &output).map_err(|f| f.to_string()))
        }
    };
    match result {
        Ok(ir) => {
            s.ir = Some(ir);
            s.status = CompileStatus::Ok;
        }
        Err(message) => s.status = CompileStatus::CompileError { message },
    }
    s
}

fn write_debiased(source: &Path, to: &Path) -> Result<PathBuf, String> {
    let text = std::fs::read(source).map_err(|e| format!("{}: {e}", source.display()))?;
    let text = String::from_utf8_lossy(&text);
    if let Some(dir) = to.parent() {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    std::fs::write(to, debias_source(&text)).map_err(|e| format!("{}: {e}", to.display()))?;
    Ok(to.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str) -> CorpusSample {
        CorpusSample {
            id: id.into(),
            suite: Suite::Mbi,
            source: "a.c".into(),
            ir: Some("a.ll".into()),
            label: Some(ErrorLabel::CallOrdering),
            binary: Some(BinaryLabel::Incorrect),
            opt: OptLevel::O0,
            status: CompileStatus::Ok,
            quarantined: None,
        }
    }

    fn round(m: &Manifest) -> Result<Manifest, ManifestError> {
        parse_manifest(&serde_json::to_string(m).unwrap())
    }

    #[test]
    fn empty_round_trip() {
        let m = Manifest::new(Provenance::default(), vec![]);
        assert_eq!(round(&m).unwrap(), m);
    }

    #[test]
    fn quarantine_preserved() {
        let q = CorpusSample { ir: None, label: None, binary: None, status: CompileStatus::NotCompiled, quarantined: Some("UnrecognizedHeader".into()), ..sample("mbi/q.c#O0") };
        let m = Manifest::new(Provenance::default(), vec![sample("mbi/a.c#O0"), q]);
        assert_eq!(round(&m).unwrap(), m);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let m = Manifest::new(Provenance::default(), vec![sample("x"), sample("x")]);
        match round(&m) {
            Err(ManifestError::SchemaViolation { pointer, .. }) => assert_eq!(pointer, "/samples/1/id"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_errors_carry_a_pointer() {
        let text = r#"{"manifest_version":1,"provenance":{"suites":{},"compiler":null,"opt_levels":[],"header_pattern":null},
            "samples":[{"id":"a","suite":"MBI","source":"a.c","ir":null,"label":"Nope","binary":null,"opt":"O0","status":{"state":"not_compiled"},"quarantined":null}]}"#;
        match parse_manifest(text) {
            Err(ManifestError::SchemaViolation { pointer, .. }) => assert_eq!(pointer, "/samples/0/label"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn inconsistent_binary_rejected() {
        let m = Manifest::new(Provenance::default(), vec![CorpusSample { binary: Some(BinaryLabel::Correct), ..sample("x") }]);
        assert!(matches!(round(&m), Err(ManifestError::SchemaViolation { .. })));
    }
}
