//! File access with digest bookkeeping, and the per-artifact manifests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use apmob_core::hierarchy::{HierarchyDocument, HierarchyTree};
use apmob_core::ingest::{self, LogFormat, Sample, SampleStore};
use apmob_core::model::MobilityModel;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
    /// Controller proximity export (`Proximity_result` JSON).
    Proximity,
}

impl InputFormat {
    /// `.jsonl`/`.ndjson` are JSON lines, `.json` a proximity export,
    /// anything else CSV.
    pub fn detect(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => Self::Jsonl,
            Some("json") => Self::Proximity,
            _ => Self::Csv,
        }
    }
}

/// Output log format from the file extension.
pub fn log_format(path: &Path) -> LogFormat {
    match InputFormat::detect(path) {
        InputFormat::Jsonl => LogFormat::Jsonl,
        _ => LogFormat::Csv,
    }
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Tracks one command's inputs and outputs and writes its manifests.
///
/// `<stem>.manifest.json` holds only content (config, digests) so reruns are
/// byte-identical; timings go to `<stem>.run.json`.
pub struct Run {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    notes: Map<String, Value>,
    volatile: Map<String, Value>,
    started: SystemTime,
    clock: Instant,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a Value,
    config_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    #[serde(skip_serializing_if = "Map::is_empty")]
    notes: &'a Map<String, Value>,
}

impl Run {
    pub fn new(command: &'static str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command,
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Map::new(),
            volatile: Map::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: sha256(&bytes) });
        Ok(bytes)
    }

    pub fn read_text(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes = self.read(path)?;
        String::from_utf8(bytes).map_err(|_| CliError::usage(format!("{}: not valid UTF-8", path.display())))
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_file(path, bytes)?;
        self.outputs.push(FileDigest { path: path.display().to_string(), sha256: sha256(bytes) });
        Ok(())
    }

    /// Content facts worth keeping next to the digests (e.g. skipped rows).
    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.notes.insert(key.to_owned(), serde_json::to_value(value).expect("note serializes"));
    }

    /// Volatile facts (timings) kept out of the content manifest.
    pub fn timing(&mut self, key: &str, value: impl Serialize) {
        self.volatile.insert(key.to_owned(), serde_json::to_value(value).expect("timing serializes"));
    }

    /// Writes `<dir>/<stem>.manifest.json` and `<dir>/<stem>.run.json`.
    pub fn finish(mut self, dir: &Path, stem: &str) -> Result<(), CliError> {
        let config_bytes = serde_json::to_vec(&self.config).expect("value serializes");
        let manifest = Manifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION"),
            config: &self.config,
            config_digest: sha256(&config_bytes),
            seed: self.seed,
            inputs: &self.inputs,
            outputs: &self.outputs,
            notes: &self.notes,
        };
        write_file(&dir.join(format!("{stem}.manifest.json")), &pretty(&manifest))?;
        let started = self.started.duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        self.volatile.insert("command".into(), self.command.into());
        self.volatile.insert("started_unix_s".into(), started.into());
        self.volatile.insert("elapsed_s".into(), self.clock.elapsed().as_secs_f64().into());
        write_file(&dir.join(format!("{stem}.run.json")), &pretty(&self.volatile))
    }

    /// Manifests named after the primary artifact: `out/model.json` gives
    /// `out/model.manifest.json`.
    pub fn finish_beside(self, artifact: &Path) -> Result<(), CliError> {
        let (dir, stem) = split_stem(artifact);
        self.finish(&dir, &stem)
    }
}

pub fn split_stem(path: &Path) -> (PathBuf, String) {
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let stem = path.file_stem().map_or_else(|| "out".to_owned(), |s| s.to_string_lossy().into_owned());
    (dir, stem)
}

/// `out/model.json` + `sweep.csv` gives `out/model.sweep.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let (dir, stem) = split_stem(path);
    dir.join(format!("{stem}.{suffix}"))
}

pub fn pretty(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("value serializes");
    out.push(b'\n');
    out
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Reads and merges every input log. Returns the store and rejected rows.
pub fn load_store(run: &mut Run, paths: &[PathBuf], format: Option<InputFormat>) -> Result<(SampleStore, usize), CliError> {
    if paths.is_empty() {
        return Err(CliError::usage("no --input given"));
    }
    let mut samples: Vec<Sample> = Vec::new();
    let mut skipped = 0;
    for path in paths {
        let bytes = run.read(path)?;
        match format.unwrap_or_else(|| InputFormat::detect(path)) {
            InputFormat::Proximity => {
                let parsed = ingest::parse_proximity_json(bytes.as_slice())?;
                samples.extend(parsed.samples);
                skipped += parsed.skipped;
            }
            f => {
                let log_format = if f == InputFormat::Jsonl { LogFormat::Jsonl } else { LogFormat::Csv };
                let parsed = ingest::parse_tuple_log(bytes.as_slice(), log_format)?;
                samples.extend(parsed.store.samples().iter().cloned());
                skipped += parsed.skipped;
            }
        }
    }
    run.note("skipped_rows", skipped);
    Ok((SampleStore::from_samples(samples), skipped))
}

pub fn load_tree(run: &mut Run, paths: &[PathBuf]) -> Result<HierarchyTree, CliError> {
    Ok(apmob_core::load_hierarchy(load_documents(run, paths)?)?)
}

pub fn load_documents(run: &mut Run, paths: &[PathBuf]) -> Result<Vec<HierarchyDocument>, CliError> {
    if paths.is_empty() {
        return Err(CliError::usage("no --hierarchy given"));
    }
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let text = run.read_text(path)?;
        let name = path.display().to_string();
        docs.push(HierarchyDocument::from_json(&text, &name)?);
    }
    Ok(docs)
}

pub fn load_model(run: &mut Run, path: &Path, tolerance: f64) -> Result<MobilityModel, CliError> {
    let text = run.read_text(path)?;
    Ok(MobilityModel::from_json_with_tolerance(&text, tolerance)?)
}

/// Parses a JSON configuration document; malformed ones are usage errors.
pub fn parse_config<T: for<'de> Deserialize<'de>>(run: &mut Run, path: &Path) -> Result<T, CliError> {
    let text = run.read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
}
