//! File emission: atomic writes, run manifests, derived output paths.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

use bellsel_core::ensemble::{write_ensemble, Ensemble, EnsembleFormat};

/// Manifest describing one generating command, written next to its outputs.
/// Not byte-stable across runs (it records wall-clock duration); the data
/// files themselves are.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: String,
    pub seed: u64,
    pub config_digest: String,
    pub version: String,
    pub outputs: Vec<String>,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(seed: u64, config_digest: String, outputs: &[&Path], started: Instant) -> Self {
        let command_line: Vec<String> = std::env::args().collect();
        RunManifest {
            command_line: command_line.join(" "),
            seed,
            config_digest,
            version: env!("CARGO_PKG_VERSION").to_string(),
            outputs: outputs
                .iter()
                .map(|p| p.display().to_string())
                .collect(),
            duration_seconds: started.elapsed().as_secs_f64(),
        }
    }
}

/// Write bytes to `path` atomically: the file appears complete or not at all.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn std::io::Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .context("creating temporary output file")?;
    write(tmp.as_file_mut())?;
    tmp.persist(path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Write an ensemble file atomically.
pub fn write_ensemble_file(ensemble: &Ensemble, format: EnsembleFormat, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        write_ensemble(ensemble, format, w)?;
        Ok(())
    })
}

/// Write a JSON value atomically with a trailing newline.
pub fn write_json_file<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)?;
        Ok(())
    })
}

/// `<path>` with `.{suffix}.json` appended to the file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    name.push('.');
    name.push_str(suffix);
    name.push_str(".json");
    path.with_file_name(name)
}

/// Hopper output path: `runs/h.jsonl` -> `runs/h.h2.jsonl`.
pub fn hopper_path(base: &Path, index: usize) -> PathBuf {
    let stem = base
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "hoppers".into());
    let name = match base.extension() {
        Some(ext) => format!("{stem}.h{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}.h{index}"),
    };
    base.with_file_name(name)
}
