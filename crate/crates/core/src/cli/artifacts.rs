//! Reading and writing run artifacts. Every artifact carries the config hash
//! of the run that produced it.

use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::CliError;
use crate::dump::{load_dump, save_dump, DumpRecord};
use crate::learning::{ExtractionPool, LabeledSample};
use crate::tagger::{load_checkpoint, save_checkpoint, Model};

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    if e.kind() == std::io::ErrorKind::NotFound {
        CliError::MissingArtifact(format!("{}: {e}", path.display()))
    } else {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

pub fn require(path: &Path, what: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingArtifact(format!("{what} {} does not exist", path.display())))
    }
}

fn ensure_parent(path: &Path) -> Result<(), CliError> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| io_err(p, e)),
        _ => Ok(()),
    }
}

/// Refuses an artifact built under another config unless `force` is set.
pub fn check_hash(found: Option<&str>, expected: &str, what: &Path, force: bool) -> Result<(), CliError> {
    match found {
        Some(h) if h != expected => {
            let msg = format!(
                "{} was produced under config hash {h}, current config hashes to {expected}",
                what.display()
            );
            if force {
                warn!("{msg}; continuing because of --force");
                Ok(())
            } else {
                Err(CliError::Config(format!("{msg} (pass --force to use it anyway)")))
            }
        }
        _ => Ok(()),
    }
}

pub fn save_model(path: &Path, model: &Model, hash: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    Ok(save_checkpoint(path, model, None, hash)?)
}

pub fn load_model(path: &Path, hash: &str, force: bool) -> Result<Model, CliError> {
    require(path, "checkpoint")?;
    let ckpt = load_checkpoint(path)?;
    check_hash(Some(&ckpt.config_hash), hash, path, force)?;
    Ok(ckpt.model)
}

pub fn save_records(path: &Path, records: &[DumpRecord], hash: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    let stamped: Vec<DumpRecord> = records
        .iter()
        .map(|r| DumpRecord {
            config_hash: Some(hash.to_string()),
            ..r.clone()
        })
        .collect();
    Ok(save_dump(&stamped, path)?)
}

/// Loads a dump. Records without a hash (hand-written or external dumps)
/// are accepted as is.
pub fn load_records(path: &Path, hash: &str, force: bool) -> Result<Vec<DumpRecord>, CliError> {
    require(path, "dump")?;
    let records = load_dump(path)?;
    if let Some(found) = records.iter().find_map(|r| r.config_hash.as_deref()) {
        check_hash(Some(found), hash, path, force)?;
    }
    Ok(records)
}

#[derive(Serialize, Deserialize)]
struct PoolLine {
    config_hash: String,
    #[serde(flatten)]
    sample: LabeledSample,
}

pub fn save_pool(path: &Path, pool: &ExtractionPool, hash: &str) -> Result<(), CliError> {
    ensure_parent(path)?;
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    for s in pool.iter() {
        let line = PoolLine {
            config_hash: hash.to_string(),
            sample: s.clone(),
        };
        serde_json::to_writer(&mut w, &line).map_err(|e| CliError::Data(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn load_pool(path: &Path, hash: &str, force: bool) -> Result<ExtractionPool, CliError> {
    require(path, "pool")?;
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut pool = ExtractionPool::new();
    let mut checked = false;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PoolLine = serde_json::from_str(&line)
            .map_err(|e| CliError::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        if !checked {
            check_hash(Some(&parsed.config_hash), hash, path, force)?;
            checked = true;
        }
        pool.extend([parsed.sample]);
    }
    Ok(pool)
}

/// Pretty JSON with a trailing newline. Metric files hold no timestamps or
/// host details, so reruns are byte-identical.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    require(path, "file")?;
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Appends lines to the plain-text metrics log.
pub fn append_log(path: &Path, lines: &[String]) -> Result<(), CliError> {
    ensure_parent(path)?;
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    for line in lines {
        writeln!(f, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
