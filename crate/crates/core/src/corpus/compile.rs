use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::OptLevel;

pub const DEFAULT_TIMEOUT_SECS: u64 = 120;

/// A compiler invocation template with `{source}`, `{output}` and `{opt}`
/// placeholders, split shell-style. `{opt}` expands to e.g. `-O2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompilerCommand {
    pub template: String,
    pub timeout_secs: u64,
}

impl CompilerCommand {
    pub fn new(template: impl Into<String>) -> Self {
        Self { template: template.into(), timeout_secs: DEFAULT_TIMEOUT_SECS }
    }

    pub fn argv(&self, source: &Path, output: &Path, opt: OptLevel) -> Result<Vec<String>, CompileFailure> {
        let words = shlex::split(&self.template).filter(|w| !w.is_empty()).ok_or_else(|| CompileFailure::BadTemplate(self.template.clone()))?;
        Ok(words
            .into_iter()
            .map(|w| {
                w.replace("{source}", &source.to_string_lossy())
                    .replace("{output}", &output.to_string_lossy())
                    .replace("{opt}", &opt.flag())
            })
            .collect())
    }
}

/// How samples obtain their IR.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Compiler {
    /// Use `<stem>.<opt>.ll`, else `<stem>.ll`, next to each source.
    Prebuilt,
    Command(CompilerCommand),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompileFailure {
    #[error("compiler exited with {status}: {stderr}")]
    CompileError { status: String, stderr: String },
    #[error("compiler `{0}` not found")]
    CompilerNotFound(String),
    #[error("compiler timed out after {0} s")]
    Timeout(u64),
    #[error("empty or unparsable compiler template `{0}`")]
    BadTemplate(String),
    #[error("{0}")]
    Io(String),
}

/// Runs the compiler template for one source; `output` receives the IR.
pub fn compile_to_ir(source: &Path, opt: OptLevel, cmd: &CompilerCommand, output: &Path) -> Result<PathBuf, CompileFailure> {
    let argv = cmd.argv(source, output, opt)?;
    if let Some(dir) = output.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CompileFailure::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => CompileFailure::CompilerNotFound(argv[0].clone()),
            _ => CompileFailure::Io(format!("{}: {e}", argv[0])),
        })?;
    // drain stderr on a thread so a chatty compiler cannot block on the pipe
    let mut pipe = child.stderr.take().expect("stderr is piped");
    let reader = std::thread::spawn(move || {
        let mut s = Vec::new();
        let _ = pipe.read_to_end(&mut s);
        String::from_utf8_lossy(&s).into_owned()
    });
    let deadline = Instant::now() + Duration::from_secs(cmd.timeout_secs);
    let status = loop {
        match child.try_wait().map_err(|e| CompileFailure::Io(e.to_string()))? {
            Some(s) => break s,
            None if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(CompileFailure::Timeout(cmd.timeout_secs));
            }
            None => std::thread::sleep(Duration::from_millis(10)),
        }
    };
    let stderr = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(CompileFailure::CompileError { status: status.to_string(), stderr });
    }
    if !output.is_file() {
        return Err(CompileFailure::CompileError { status: status.to_string(), stderr: format!("no output written to {}\n{stderr}", output.display()) });
    }
    Ok(output.to_path_buf())
}

/// Prebuilt IR lookup for `source` at `opt`.
pub(super) fn prebuilt_ir(source: &Path, opt: OptLevel) -> Option<PathBuf> {
    let with_opt = source.with_extension(format!("{}.ll", opt.name()));
    if with_opt.is_file() {
        return Some(with_opt);
    }
    Some(source.with_extension("ll")).filter(|p| p.is_file())
}
