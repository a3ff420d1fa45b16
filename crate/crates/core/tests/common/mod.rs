#![allow(dead_code)]

pub mod oracles;

use std::path::{Path, PathBuf};

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// Every `.ll` file under `fixtures/`, sorted.
pub fn ll_files() -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = walkdir::WalkDir::new(fixtures())
        .into_iter()
        .filter_map(Result::ok)
        .map(|e| e.into_path())
        .filter(|p| p.extension().is_some_and(|e| e == "ll"))
        .collect();
    out.sort();
    out
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

/// Manifest over the bundled synthetic suites with prebuilt IR at O0.
pub fn synthetic_manifest() -> mpisentinel_core::corpus::Manifest {
    use mpisentinel_core::corpus::*;
    let root = fixtures().join("synthetic");
    let pattern = regex::Regex::new(MBI_HEADER_PATTERN).unwrap();
    let mut entries = ingest_mbi(&root.join("mbi"), &pattern, &AliasTable::mbi_default()).unwrap();
    entries.extend(ingest_corrbench(&root.join("corrbench")).unwrap());
    let out = std::env::temp_dir();
    build_manifest(&entries, &[OptLevel::O0], &Compiler::Prebuilt, &out, 1, Provenance::default())
}
