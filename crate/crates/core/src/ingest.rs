//! Access-log ingestion.
//!
//! Raw wireless session access logs are `<time_stamp, user_id, ap_id>` tuples,
//! either as CSV (mandatory header) or JSONL. Location-engine `proximity`
//! exports are handled by [`parse_proximity_json`]. Malformed rows are skipped
//! and counted; only an unreadable stream or a broken header is fatal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Expected CSV header.
pub const CSV_HEADER: [&str; 3] = ["time_stamp", "user_id", "ap_id"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("bad CSV header: expected `time_stamp,user_id,ap_id`, found `{0}`")]
    Header(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("proximity document has no `Proximity_result` array")]
    MissingProximityResult,
}

/// One observation: a device seen at an access point at a given second.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub timestamp: u64,
    pub user_id: String,
    pub ap_id: String,
}

impl Sample {
    /// Returns `None` when either identifier is empty.
    pub fn new(timestamp: u64, user_id: impl Into<String>, ap_id: impl Into<String>) -> Option<Self> {
        let user_id = user_id.into();
        let ap_id = ap_id.into();
        if user_id.is_empty() || ap_id.is_empty() {
            return None;
        }
        Some(Self { timestamp, user_id, ap_id })
    }
}

// Store order: user, then time, then AP id.
impl Ord for Sample {
    fn cmp(&self, other: &Self) -> Ordering {
        self.user_id
            .cmp(&other.user_id)
            .then(self.timestamp.cmp(&other.timestamp))
            .then_with(|| self.ap_id.cmp(&other.ap_id))
    }
}

impl PartialOrd for Sample {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Immutable, sorted, de-duplicated collection of samples.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SampleStore {
    samples: Vec<Sample>,
    ap_index: BTreeSet<String>,
}

impl SampleStore {
    /// Sorts by `(user_id, timestamp, ap_id)` and collapses exact duplicates.
    pub fn from_samples(mut samples: Vec<Sample>) -> Self {
        samples.sort_unstable();
        samples.dedup();
        let ap_index = samples.iter().map(|s| s.ap_id.clone()).collect();
        Self { samples, ap_index }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn ap_index(&self) -> &BTreeSet<String> {
        &self.ap_index
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Per-user contiguous slices, in user order.
    pub fn users(&self) -> impl Iterator<Item = (&str, &[Sample])> {
        self.samples
            .chunk_by(|a, b| a.user_id == b.user_id)
            .map(|chunk| (chunk[0].user_id.as_str(), chunk))
    }

    pub fn user_count(&self) -> usize {
        self.users().count()
    }

    /// Earliest and latest timestamp in the store.
    pub fn time_span(&self) -> Option<(u64, u64)> {
        let min = self.samples.iter().map(|s| s.timestamp).min()?;
        let max = self.samples.iter().map(|s| s.timestamp).max()?;
        Some((min, max))
    }

    /// SHA-256 over the canonical CSV rendering of the store.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        for s in &self.samples {
            hasher.update(s.timestamp.to_string().as_bytes());
            hasher.update(b",");
            hasher.update(s.user_id.as_bytes());
            hasher.update(b",");
            hasher.update(s.ap_id.as_bytes());
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogFormat {
    Csv,
    Jsonl,
}

/// A parsed store plus the number of rows that were rejected.
#[derive(Debug, Clone)]
pub struct ParsedLog {
    pub store: SampleStore,
    pub skipped: usize,
}

/// Parses a timestamp field. Only non-negative integers are accepted;
/// fractional seconds are rejected rather than truncated.
fn parse_timestamp(field: &str) -> Option<u64> {
    let field = field.trim();
    if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    field.parse().ok()
}

pub fn parse_tuple_log<R: Read>(source: R, format: LogFormat) -> Result<ParsedLog, IngestError> {
    let (samples, skipped) = match format {
        LogFormat::Csv => parse_csv(source)?,
        LogFormat::Jsonl => parse_jsonl(source)?,
    };
    Ok(ParsedLog { store: SampleStore::from_samples(samples), skipped })
}

fn parse_csv<R: Read>(source: R) -> Result<(Vec<Sample>, usize), IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let mut records = reader.records();

    let header = match records.next() {
        Some(h) => h?,
        None => return Err(IngestError::Header(String::new())),
    };
    let header_fields: Vec<&str> = header.iter().map(|f| f.trim_start_matches('\u{feff}')).collect();
    if header_fields != CSV_HEADER {
        return Err(IngestError::Header(header_fields.join(",")));
    }

    let mut samples = Vec::new();
    let mut skipped = 0;
    for record in records {
        let record = match record {
            Ok(r) => r,
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let parsed = (record.len() == 3)
            .then(|| parse_timestamp(&record[0]))
            .flatten()
            .and_then(|ts| Sample::new(ts, &record[1], &record[2]));
        match parsed {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    Ok((samples, skipped))
}

fn json_timestamp(value: &serde_json::Value) -> Option<u64> {
    match value {
        serde_json::Value::Number(n) => n.as_u64(),
        _ => None,
    }
}

fn parse_jsonl<R: Read>(source: R) -> Result<(Vec<Sample>, usize), IngestError> {
    let mut samples = Vec::new();
    let mut skipped = 0;
    for line in BufReader::new(source).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line).ok().and_then(|v| {
            let ts = json_timestamp(v.get("time_stamp")?)?;
            let user = v.get("user_id")?.as_str()?;
            let ap = v.get("ap_id")?.as_str()?;
            Sample::new(ts, user, ap)
        });
        match parsed {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    Ok((samples, skipped))
}

/// Samples extracted from a location-engine `proximity` export.
#[derive(Debug, Clone)]
pub struct ProximityParse {
    pub samples: Vec<Sample>,
    pub skipped: usize,
}

/// Reads `Proximity_result[*]`: `msg.hashed_sta_eth_mac` is the user,
/// `msg.radio_mac.addr` the AP and `ts` the timestamp.
pub fn parse_proximity_json<R: Read>(source: R) -> Result<ProximityParse, IngestError> {
    let doc: serde_json::Value = serde_json::from_reader(source)?;
    let records = doc
        .get("Proximity_result")
        .and_then(|v| v.as_array())
        .ok_or(IngestError::MissingProximityResult)?;

    let mut samples = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for record in records {
        let sample = (|| {
            let msg = record.get("msg")?;
            let user = msg.get("hashed_sta_eth_mac")?.as_str()?;
            let ap = msg.get("radio_mac")?.get("addr")?.as_str()?;
            let ts = json_timestamp(record.get("ts")?)?;
            Sample::new(ts, user, ap)
        })();
        match sample {
            Some(s) => samples.push(s),
            None => skipped += 1,
        }
    }
    Ok(ProximityParse { samples, skipped })
}

pub fn write_tuple_log<W: Write>(mut out: W, samples: &[Sample], format: LogFormat) -> Result<(), IngestError> {
    match format {
        LogFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            writer.write_record(CSV_HEADER)?;
            for s in samples {
                writer.write_record([s.timestamp.to_string().as_str(), &s.user_id, &s.ap_id])?;
            }
            writer.flush()?;
        }
        LogFormat::Jsonl => {
            for s in samples {
                let line = serde_json::json!({
                    "time_stamp": s.timestamp,
                    "user_id": s.user_id,
                    "ap_id": s.ap_id,
                });
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

/// Sample-level cleaning rules.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Drop users whose whole record is a single sample (passers-by).
    pub drop_single_connection_users: bool,
    pub excluded_ap_ids: BTreeSet<String>,
    pub excluded_user_ids: BTreeSet<String>,
    /// Inclusive `[start, end]`; samples outside are dropped.
    pub time_window: Option<(u64, u64)>,
}

/// Exclusions are applied first, then the single-connection rule, so that the
/// result is a fixed point of the same rules.
pub fn clean(store: &SampleStore, rules: &CleaningConfig) -> SampleStore {
    let kept: Vec<&Sample> = store
        .samples()
        .iter()
        .filter(|s| !rules.excluded_ap_ids.contains(&s.ap_id))
        .filter(|s| !rules.excluded_user_ids.contains(&s.user_id))
        .filter(|s| match rules.time_window {
            Some((start, end)) => s.timestamp >= start && s.timestamp <= end,
            None => true,
        })
        .collect();

    let samples = if rules.drop_single_connection_users {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &kept {
            *counts.entry(s.user_id.as_str()).or_default() += 1;
        }
        kept.into_iter()
            .filter(|s| counts[s.user_id.as_str()] > 1)
            .cloned()
            .collect()
    } else {
        kept.into_iter().cloned().collect()
    };
    SampleStore::from_samples(samples)
}
