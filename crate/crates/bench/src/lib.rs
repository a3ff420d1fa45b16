//! Inputs shared by the criterion benches: the synthetic MBI fixture corpus.

use std::path::{Path, PathBuf};

use mpisentinel_core::{parse_ir, IrModule};

pub fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic/mbi")
}

/// `(file stem, IR text)` of every synthetic MBI module, sorted by name.
pub fn fixture_texts() -> Vec<(String, String)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(fixture_dir())
        .expect("fixture directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|x| x == "ll"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let stem = p.file_stem().unwrap().to_string_lossy().into_owned();
            (stem, std::fs::read_to_string(&p).expect("readable fixture"))
        })
        .collect()
}

/// Parsed modules with their class, taken from the file-name prefix.
pub fn fixture_modules() -> Vec<(IrModule, String)> {
    fixture_texts()
        .into_iter()
        .map(|(stem, text)| {
            let class = stem.rsplit_once('_').map_or(stem.as_str(), |(c, _)| c).to_string();
            (parse_ir(&text).expect("fixture parses"), class)
        })
        .collect()
}
