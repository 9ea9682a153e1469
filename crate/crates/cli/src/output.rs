//! Output documents and atomic file writes.

use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ScenarioConfig;

/// Write through a sibling temporary file and rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let name = path.file_name().context("output path has no file name")?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

/// Write a CSV produced by `fill` into memory, then atomically to `path`.
pub fn write_csv_atomic<F>(path: &Path, fill: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut Vec<u8>) -> gradest_core::Result<()>,
{
    let mut buf = Vec::new();
    fill(&mut buf)?;
    write_atomic(path, &buf)
}

/// SHA-256 over the command name, the canonical config text and any extra input bytes.
pub fn content_hash(command: &str, config: Option<&ScenarioConfig>, extra: &[&[u8]]) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    h.update(command.as_bytes());
    h.update(b"\n");
    if let Some(c) = config {
        h.update(toml::to_string(c)?.as_bytes());
    }
    for chunk in extra {
        h.update((chunk.len() as u64).to_le_bytes());
        h.update(chunk);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Serialize)]
pub struct Meta {
    pub command: &'static str,
    pub version: &'static str,
    pub content_hash: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    meta: &'a Meta,
    result: &'a T,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<&'a ScenarioConfig>,
}

pub fn write_document<T: Serialize>(
    path: &Path,
    meta: &Meta,
    result: &T,
    config: Option<&ScenarioConfig>,
) -> anyhow::Result<()> {
    let text = toml::to_string(&Document { meta, result, config })
        .with_context(|| format!("serializing {}", path.display()))?;
    write_atomic(path, text.as_bytes())
}
