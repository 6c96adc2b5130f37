//! Session identification and handoff filtering.

use serde::Serialize;
use thiserror::Error;

use crate::hierarchy::{RegionId, RegionSpec};
use crate::ingest::SampleStore;

#[derive(Debug, Error, PartialEq)]
pub enum SessionError {
    #[error("threshold must be positive, got {0} min")]
    BadThreshold(f64),
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error("sweep grid must be strictly increasing")]
    UnsortedGrid,
}

/// One sample inside a session, with its AP already mapped to a zone index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SessionEntry {
    pub timestamp: u64,
    pub zone: usize,
}

/// One visit of a user to a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Session {
    pub user_id: String,
    pub region: RegionId,
    pub entries: Vec<SessionEntry>,
}

impl Session {
    pub fn start(&self) -> u64 {
        self.entries.first().map_or(0, |e| e.timestamp)
    }

    pub fn end(&self) -> u64 {
        self.entries.last().map_or(0, |e| e.timestamp)
    }

    pub fn duration(&self) -> u64 {
        self.end() - self.start()
    }
}

fn threshold_seconds(minutes: f64) -> Result<f64, SessionError> {
    if minutes > 0.0 {
        Ok(minutes * 60.0)
    } else {
        Err(SessionError::BadThreshold(minutes))
    }
}

/// Splits every user's samples into sessions within `region`.
///
/// A session ends at a sample outside the region or when the gap to the next
/// sample reaches `threshold_min` minutes. `f64::INFINITY` disables the gap
/// rule.
pub fn split_sessions(store: &SampleStore, region: &RegionSpec, threshold_min: f64) -> Result<Vec<Session>, SessionError> {
    let threshold_s = threshold_seconds(threshold_min)?;
    let mut sessions = Vec::new();
    for (user, samples) in store.users() {
        let mut current: Vec<SessionEntry> = Vec::new();
        let flush = |current: &mut Vec<SessionEntry>, sessions: &mut Vec<Session>| {
            if !current.is_empty() {
                sessions.push(Session {
                    user_id: user.to_owned(),
                    region: region.id().clone(),
                    entries: std::mem::take(current),
                });
            }
        };
        for sample in samples {
            match region.zone_index(&sample.ap_id) {
                None => flush(&mut current, &mut sessions),
                Some(zone) => {
                    if let Some(last) = current.last() {
                        if (sample.timestamp - last.timestamp) as f64 >= threshold_s {
                            flush(&mut current, &mut sessions);
                        }
                    }
                    current.push(SessionEntry { timestamp: sample.timestamp, zone });
                }
            }
        }
        flush(&mut current, &mut sessions);
    }
    Ok(sessions)
}

/// Keeps the first entry, the first entry of each run of equal zones and the
/// last entry.
pub fn filter_handoffs(session: &Session) -> Session {
    let entries = &session.entries;
    let mut kept = Vec::with_capacity(entries.len().min(8));
    for (i, e) in entries.iter().enumerate() {
        let run_start = i == 0 || entries[i - 1].zone != e.zone;
        if run_start || i + 1 == entries.len() {
            kept.push(*e);
        }
    }
    Session { user_id: session.user_id.clone(), region: session.region.clone(), entries: kept }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub threshold_min: f64,
    pub n_sessions: usize,
    pub avg_session_time_s: f64,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdSweepResult {
    pub rows: Vec<SweepRow>,
    pub chosen_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl ThresholdSweepResult {
    /// CSV `threshold,n_sessions,avg_time_s,distance`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,n_sessions,avg_time_s,distance\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.threshold_min, r.n_sessions, r.avg_session_time_s, r.distance));
        }
        out
    }
}

/// Session count and mean duration at one threshold.
pub fn session_stats(sessions: &[Session]) -> (usize, f64) {
    if sessions.is_empty() {
        return (0, 0.0);
    }
    let total: u64 = sessions.iter().map(Session::duration).sum();
    (sessions.len(), total as f64 / sessions.len() as f64)
}

/// Min-max normalizes both metrics over the grid and returns each point's
/// distance from the origin. A constant series normalizes to zero.
pub fn balance_distances(counts: &[f64], times: &[f64]) -> Vec<f64> {
    fn normalize(xs: &[f64]) -> Vec<f64> {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let span = hi - lo;
        xs.iter().map(|x| if span > 0.0 { (x - lo) / span } else { 0.0 }).collect()
    }
    let n = normalize(counts);
    let t = normalize(times);
    n.iter().zip(&t).map(|(a, b)| a.hypot(*b)).collect()
}

/// Tries each threshold in `grid_min` and picks the one balancing session
/// count against mean session length. Ties go to the smaller threshold.
pub fn sweep_threshold(store: &SampleStore, region: &RegionSpec, grid_min: &[f64]) -> Result<ThresholdSweepResult, SessionError> {
    if grid_min.is_empty() {
        return Err(SessionError::EmptyGrid);
    }
    if grid_min.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SessionError::UnsortedGrid);
    }
    let mut stats = Vec::with_capacity(grid_min.len());
    for &t in grid_min {
        let sessions = split_sessions(store, region, t)?;
        stats.push(session_stats(&sessions));
    }
    let counts: Vec<f64> = stats.iter().map(|s| s.0 as f64).collect();
    let times: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let distances = balance_distances(&counts, &times);

    let mut best = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d < distances[best] {
            best = i;
        }
    }
    let rows = grid_min
        .iter()
        .zip(&stats)
        .zip(&distances)
        .map(|((&threshold_min, &(n_sessions, avg)), &distance)| SweepRow {
            threshold_min,
            n_sessions,
            avg_session_time_s: avg,
            distance,
        })
        .collect();
    let warning = if grid_min.len() == 1 {
        Some("single-point grid: normalization is degenerate".to_string())
    } else if distances.iter().all(|d| *d == distances[0]) {
        Some(format!("every grid value is at distance {}: the sweep cannot discriminate", distances[0]))
    } else {
        None
    };
    Ok(ThresholdSweepResult { rows, chosen_min: grid_min[best], warning })
}

/// `1..=60` minutes, step 1.
pub fn default_grid() -> Vec<f64> {
    (1..=60).map(f64::from).collect()
}
