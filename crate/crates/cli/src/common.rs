//! Shared plumbing for the subcommands: config files, report paths, hashes,
//! and serialization helpers.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Environment variable naming the directory that relative report names
/// default into.
pub const REPORT_DIR_ENV: &str = "HOMOLOG_REPORT_DIR";

/// Resolves a report path: explicit paths win, otherwise `default_name`
/// under `$HOMOLOG_REPORT_DIR` (or the working directory).
pub fn report_path(explicit: Option<PathBuf>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p,
        None => std::env::var_os(REPORT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_default()
            .join(default_name),
    }
}

/// Loads a TOML or JSON config file, dispatching on the extension.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    if is_json {
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Writes a value as pretty JSON with a trailing newline, creating parent
/// directories as needed.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let mut out = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    serde_json::to_writer_pretty(&mut out, value)
        .with_context(|| format!("writing {}", path.display()))?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// SHA-256 of a file, lowercase hex.
pub fn file_sha256(path: &Path) -> Result<String> {
    let mut file =
        File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    Ok(hex)
}

/// Sidecar path for non-deterministic timing data: `report.json` →
/// `report_timings.json`.
pub fn timings_path(report: &Path) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}_timings.json"))
}

/// Parses a comma-separated list of positive integers (recall cutoffs).
pub fn parse_ks(raw: &str) -> Result<Vec<usize>> {
    let ks = raw
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .with_context(|| format!("parsing cutoff list {raw:?}"))?;
    if ks.is_empty() || ks.contains(&0) {
        bail!("cutoff list must be non-empty positive integers, got {raw:?}");
    }
    Ok(ks)
}
