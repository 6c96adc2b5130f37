//! Transition matrices, stay-time vectors and the per-region mobility model.
//!
//! States are ordered `[IN, OUT, zone_1, .., zone_n]`. `IN` is the virtual
//! session start and `OUT` the session end: column `IN` and row `OUT` are
//! always zero, every other row is a probability distribution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{RegionId, RegionSpec};
use crate::ingest::SampleStore;
use crate::profiling::{self, Clustering, ElbowCurve, KMeansParams, ProfilingError};
use crate::sessions::{self, Session, SessionError, ThresholdSweepResult};

pub const IN: usize = 0;
pub const OUT: usize = 1;
pub const IN_LABEL: &str = "IN";
pub const OUT_LABEL: &str = "OUT";

/// Row-sum tolerance for matrices built or stored by this crate.
pub const ROW_SUM_TOL: f64 = 1e-6;
/// Row-sum tolerance for matrices transcribed by hand from printed tables.
pub const TRANSCRIBED_ROW_SUM_TOL: f64 = 1e-2;
pub const POPULARITY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("no sessions to model")]
    NoSessions,
    #[error("all {sessions} sessions have zero duration at threshold {threshold_min} min")]
    ZeroDuration { sessions: usize, threshold_min: f64 },
    #[error("row `{row}` sums to {sum}, expected 1")]
    RowSum { row: String, sum: f64 },
    #[error("entry [{row}][{col}] = {value} outside [0, 1]")]
    Range { row: String, col: String, value: f64 },
    #[error("row `{row}` has mass on IN")]
    InColumn { row: String },
    #[error("row OUT must be all zeros")]
    OutRow,
    #[error("IN -> OUT must be 0 (empty sessions are not modeled)")]
    InToOut,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid model: {0}")]
    Structure(String),
    #[error("cluster popularities sum to {0}, expected 1")]
    Popularity(f64),
    #[error("cluster {cluster}: {source}")]
    Cluster { cluster: usize, source: Box<ModelError> },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Profiling(#[from] ProfilingError),
    #[error("model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Row-stochastic matrix over `[IN, OUT, zones..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    states: Vec<String>,
    entries: Vec<Vec<f64>>,
}

pub fn state_labels(zone_labels: &[String]) -> Vec<String> {
    let mut states = vec![IN_LABEL.to_string(), OUT_LABEL.to_string()];
    states.extend(zone_labels.iter().cloned());
    states
}

impl TransitionMatrix {
    /// Validates at [`ROW_SUM_TOL`].
    pub fn new(zone_labels: &[String], entries: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        Self::with_tolerance(zone_labels, entries, ROW_SUM_TOL)
    }

    pub fn with_tolerance(zone_labels: &[String], entries: Vec<Vec<f64>>, tol: f64) -> Result<Self, ModelError> {
        let m = Self { states: state_labels(zone_labels), entries };
        m.validate(tol)?;
        Ok(m)
    }

    /// Builds without validation; callers re-check with [`Self::validate`].
    pub(crate) fn from_raw(states: Vec<String>, entries: Vec<Vec<f64>>) -> Self {
        Self { states, entries }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn zone_labels(&self) -> &[String] {
        &self.states[2..]
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_zones(&self) -> usize {
        self.states.len() - 2
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries[from][to]
    }

    pub fn row(&self, state: usize) -> &[f64] {
        &self.entries[state]
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    /// Probability by state labels; panics on unknown labels.
    pub fn prob(&self, from: &str, to: &str) -> f64 {
        let i = self.state_index(from).unwrap_or_else(|| panic!("unknown state {from}"));
        let j = self.state_index(to).unwrap_or_else(|| panic!("unknown state {to}"));
        self.entries[i][j]
    }

    pub fn validate(&self, tol: f64) -> Result<(), ModelError> {
        let n = self.states.len();
        if n < 3 || self.states[IN] != IN_LABEL || self.states[OUT] != OUT_LABEL {
            return Err(ModelError::Structure("states must be [IN, OUT, zone..] with at least one zone".into()));
        }
        if self.entries.len() != n || self.entries.iter().any(|r| r.len() != n) {
            return Err(ModelError::Dimension(format!("matrix must be {n}x{n}")));
        }
        for (i, row) in self.entries.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) || !v.is_finite() {
                    return Err(ModelError::Range { row: self.states[i].clone(), col: self.states[j].clone(), value: v });
                }
            }
            if row[IN] != 0.0 {
                return Err(ModelError::InColumn { row: self.states[i].clone() });
            }
            if i == OUT {
                if row.iter().any(|&v| v != 0.0) {
                    return Err(ModelError::OutRow);
                }
                continue;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > tol {
                return Err(ModelError::RowSum { row: self.states[i].clone(), sum });
            }
        }
        if self.entries[IN][OUT] != 0.0 {
            return Err(ModelError::InToOut);
        }
        Ok(())
    }

    pub fn frobenius_distance(&self, other: &Self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// Mean stay per zone, in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TimeVector(pub Vec<f64>);

impl TimeVector {
    pub fn seconds(&self) -> &[f64] {
        &self.0
    }

    pub fn minutes(&self) -> Vec<f64> {
        self.0.iter().map(|s| s / 60.0).collect()
    }
}

/// One user type.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub matrix: TransitionMatrix,
    pub times: TimeVector,
    pub popularity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold_min: Option<f64>,
    #[serde(default)]
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset_digest: Option<String>,
    /// Observation window / session count of the source data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_interarrival_s: Option<f64>,
    #[serde(default)]
    pub source_sessions: usize,
}

/// Full model of one region.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityModel {
    pub region: RegionId,
    pub zone_labels: Vec<String>,
    pub clusters: Vec<ClusterModel>,
    pub provenance: Provenance,
    /// Zone pairs created by duplication; removing one folds it back into
    /// the other.
    pub twins: Vec<(String, String)>,
}

impl MobilityModel {
    pub fn k(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_zones(&self) -> usize {
        self.zone_labels.len()
    }

    pub fn zone_index(&self, label: &str) -> Option<usize> {
        self.zone_labels.iter().position(|z| z == label)
    }

    pub fn popularities(&self) -> Vec<f64> {
        self.clusters.iter().map(|c| c.popularity).collect()
    }

    /// All invariants, with `tol` applied to row sums.
    pub fn validate(&self, tol: f64) -> Result<(), ModelError> {
        let mut seen = std::collections::HashSet::new();
        for z in &self.zone_labels {
            if z == IN_LABEL || z == OUT_LABEL || !seen.insert(z) {
                return Err(ModelError::Structure(format!("zone label `{z}` is reserved or repeated")));
            }
        }
        if self.clusters.is_empty() {
            return Err(ModelError::Structure("model has no clusters".into()));
        }
        let states = state_labels(&self.zone_labels);
        for (idx, c) in self.clusters.iter().enumerate() {
            let wrap = |e: ModelError| ModelError::Cluster { cluster: idx, source: Box::new(e) };
            if c.matrix.states != states {
                return Err(wrap(ModelError::Dimension(format!(
                    "state labels {:?} do not match zone labels",
                    c.matrix.states
                ))));
            }
            c.matrix.validate(tol).map_err(wrap)?;
            if c.times.0.len() != self.zone_labels.len() {
                return Err(wrap(ModelError::Dimension(format!(
                    "time vector has {} entries for {} zones",
                    c.times.0.len(),
                    self.zone_labels.len()
                ))));
            }
            if c.times.0.iter().any(|t| !t.is_finite() || *t < 0.0) {
                return Err(wrap(ModelError::Structure("negative or non-finite stay time".into())));
            }
            if !(0.0..=1.0).contains(&c.popularity) {
                return Err(wrap(ModelError::Structure(format!("popularity {} outside [0, 1]", c.popularity))));
            }
        }
        let total: f64 = self.clusters.iter().map(|c| c.popularity).sum();
        if (total - 1.0).abs() > POPULARITY_TOL {
            return Err(ModelError::Popularity(total));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelDocument::from(self)).expect("model serializes")
    }

    /// Parses and validates at [`ROW_SUM_TOL`].
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        Self::from_json_with_tolerance(text, ROW_SUM_TOL)
    }

    pub fn from_json_with_tolerance(text: &str, tol: f64) -> Result<Self, ModelError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        let model = doc.into_model();
        model.validate(tol)?;
        Ok(model)
    }

    /// Plain-text summary with stay times in minutes.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "model {}: {} zone(s), {} cluster(s)\n",
            self.region,
            self.zone_labels.len(),
            self.clusters.len()
        );
        for (i, c) in self.clusters.iter().enumerate() {
            out.push_str(&format!("cluster {i} (popularity {:.4})\n  stay (min):", c.popularity));
            for (z, t) in self.zone_labels.iter().zip(c.times.minutes()) {
                out.push_str(&format!(" {z}={t:.2}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ClusterDocument {
    popularity: f64,
    state_labels: Vec<String>,
    matrix: Vec<Vec<f64>>,
    time_vector_s: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    region: RegionId,
    zone_labels: Vec<String>,
    clusters: Vec<ClusterDocument>,
    #[serde(default)]
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    twins: Vec<(String, String)>,
}

impl From<&MobilityModel> for ModelDocument {
    fn from(m: &MobilityModel) -> Self {
        Self {
            region: m.region.clone(),
            zone_labels: m.zone_labels.clone(),
            clusters: m
                .clusters
                .iter()
                .map(|c| ClusterDocument {
                    popularity: c.popularity,
                    state_labels: c.matrix.states.clone(),
                    matrix: c.matrix.entries.clone(),
                    time_vector_s: c.times.0.clone(),
                })
                .collect(),
            provenance: m.provenance.clone(),
            twins: m.twins.clone(),
        }
    }
}

impl ModelDocument {
    fn into_model(self) -> MobilityModel {
        MobilityModel {
            region: self.region,
            zone_labels: self.zone_labels,
            clusters: self
                .clusters
                .into_iter()
                .map(|c| ClusterModel {
                    matrix: TransitionMatrix::from_raw(c.state_labels, c.matrix),
                    times: TimeVector(c.time_vector_s),
                    popularity: c.popularity,
                })
                .collect(),
            provenance: self.provenance,
            twins: self.twins,
        }
    }
}

/// Raw counts behind a transition matrix and time vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransitionCounts {
    /// `(n+2) x (n+2)` transition counts, state order as in the matrix.
    pub counts: Vec<Vec<u64>>,
    pub visits: Vec<u64>,
    pub dwell_s: Vec<u64>,
}

impl TransitionCounts {
    /// Counts transitions, visits and dwell. Repeated zones in a row continue
    /// the same visit, so unfiltered sessions give the same result.
    pub fn from_sessions(sessions: &[Session], n_zones: usize) -> Result<Self, ModelError> {
        let n = n_zones + 2;
        let mut counts = vec![vec![0u64; n]; n];
        let mut visits = vec![0u64; n_zones];
        let mut dwell_s = vec![0u64; n_zones];
        for s in sessions {
            let Some(first) = s.entries.first() else { continue };
            let check = |z: usize| {
                if z < n_zones {
                    Ok(z)
                } else {
                    Err(ModelError::Dimension(format!("zone index {z} with {n_zones} zones")))
                }
            };
            let mut current = check(first.zone)?;
            let mut since = first.timestamp;
            counts[IN][current + 2] += 1;
            visits[current] += 1;
            for e in &s.entries[1..] {
                let zone = check(e.zone)?;
                if zone != current {
                    counts[current + 2][zone + 2] += 1;
                    dwell_s[current] += e.timestamp - since;
                    visits[zone] += 1;
                    current = zone;
                    since = e.timestamp;
                }
            }
            dwell_s[current] += s.end() - since;
            counts[current + 2][OUT] += 1;
        }
        Ok(Self { counts, visits, dwell_s })
    }

    /// Row-normalized matrix. Zones never departed exit directly.
    pub fn to_matrix(&self, zone_labels: &[String]) -> Result<TransitionMatrix, ModelError> {
        let n = zone_labels.len() + 2;
        if self.counts.len() != n {
            return Err(ModelError::Dimension("counts do not match zone labels".into()));
        }
        let mut entries = vec![vec![0f64; n]; n];
        for (i, row) in self.counts.iter().enumerate() {
            if i == OUT {
                continue;
            }
            let total: u64 = row.iter().sum();
            if total == 0 {
                if i == IN {
                    return Err(ModelError::NoSessions);
                }
                entries[i][OUT] = 1.0;
                continue;
            }
            for (e, &c) in entries[i].iter_mut().zip(row) {
                *e = c as f64 / total as f64;
            }
        }
        TransitionMatrix::new(zone_labels, entries)
    }

    pub fn to_times(&self) -> TimeVector {
        TimeVector(
            self.dwell_s
                .iter()
                .zip(&self.visits)
                .map(|(&d, &v)| if v == 0 { 0.0 } else { d as f64 / v as f64 })
                .collect(),
        )
    }
}

/// Transition matrix and time vector for one group of sessions.
pub fn build_cluster_model(sessions: &[Session], zone_labels: &[String]) -> Result<(TransitionMatrix, TimeVector), ModelError> {
    if sessions.is_empty() {
        return Err(ModelError::NoSessions);
    }
    let counts = TransitionCounts::from_sessions(sessions, zone_labels.len())?;
    Ok((counts.to_matrix(zone_labels)?, counts.to_times()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdChoice {
    Fixed(f64),
    Sweep(Vec<f64>),
    /// No gap rule; sessions end only when the user leaves the region.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterChoice {
    Fixed(usize),
    Elbow { k_max: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub threshold: ThresholdChoice,
    pub clusters: ClusterChoice,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            threshold: ThresholdChoice::Sweep(sessions::default_grid()),
            clusters: ClusterChoice::Elbow { k_max: 30 },
            seed: 0,
            restarts: profiling::DEFAULT_RESTARTS,
        }
    }
}

/// Model plus the intermediate results that produced it.
#[derive(Debug, Clone)]
pub struct ModelBuild {
    pub model: MobilityModel,
    pub sweep: Option<ThresholdSweepResult>,
    pub elbow: Option<ElbowCurve>,
    pub clustering: Clustering,
    /// Handoff-filtered sessions that were clustered, in clustering order.
    pub sessions: Vec<Session>,
    pub dropped_zero_duration: usize,
}

/// Sessions, profiling and per-cluster matrices for one region.
pub fn build_mobility_model(store: &SampleStore, region: &RegionSpec, config: &ModelConfig) -> Result<ModelBuild, ModelError> {
    let (threshold, sweep) = match &config.threshold {
        ThresholdChoice::Fixed(t) => (*t, None),
        ThresholdChoice::Unbounded => (f64::INFINITY, None),
        ThresholdChoice::Sweep(grid) => {
            let sweep = sessions::sweep_threshold(store, region, grid)?;
            (sweep.chosen_min, Some(sweep))
        }
    };
    let all = sessions::split_sessions(store, region, threshold)?;
    let total = all.len();
    let kept: Vec<Session> = all.iter().filter(|s| s.duration() > 0).map(sessions::filter_handoffs).collect();
    if kept.is_empty() {
        return Err(match total {
            0 => ModelError::NoSessions,
            sessions => ModelError::ZeroDuration { sessions, threshold_min: threshold },
        });
    }
    let vectors = kept
        .iter()
        .map(|s| profiling::session_vector(s, region.n_zones()).map(|v| v.probs))
        .collect::<Result<Vec<_>, _>>()?;

    let params = KMeansParams { seed: config.seed, restarts: config.restarts, ..KMeansParams::default() };
    let (clustering, elbow) = match config.clusters {
        ClusterChoice::Fixed(k) => (profiling::kmeans(&vectors, k, &params)?, None),
        ClusterChoice::Elbow { k_max } => {
            let distinct = profiling::distinct_count(&vectors);
            if distinct < 3 {
                (profiling::kmeans(&vectors, distinct, &params)?, None)
            } else {
                let curve = profiling::elbow(&vectors, k_max, &params)?;
                let c = curve.clustering(curve.k_star).expect("k_star within curve").clone();
                (c, Some(curve))
            }
        }
    };

    let zone_labels = region.zone_labels();
    let mut groups: Vec<Vec<Session>> = vec![Vec::new(); clustering.k];
    for (s, &a) in kept.iter().zip(&clustering.assignment) {
        groups[a].push(s.clone());
    }
    let n = kept.len() as f64;
    let clusters = groups
        .iter()
        .enumerate()
        .map(|(idx, group)| {
            let (matrix, times) = build_cluster_model(group, &zone_labels)
                .map_err(|e| ModelError::Cluster { cluster: idx, source: Box::new(e) })?;
            Ok(ClusterModel { matrix, times, popularity: group.len() as f64 / n })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;

    let first_start = kept.iter().map(Session::start).min().unwrap_or(0);
    let last_end = kept.iter().map(Session::end).max().unwrap_or(0);
    let provenance = Provenance {
        threshold_min: threshold.is_finite().then_some(threshold),
        k: clustering.k,
        k_star: elbow.as_ref().map(|e| e.k_star),
        seed: config.seed,
        dataset_digest: Some(store.digest()),
        mean_interarrival_s: Some((last_end - first_start) as f64 / n),
        source_sessions: kept.len(),
    };
    let model = MobilityModel { region: region.id().clone(), zone_labels, clusters, provenance, twins: vec![] };
    model.validate(ROW_SUM_TOL)?;
    Ok(ModelBuild { model, sweep, elbow, clustering, sessions: kept, dropped_zero_duration: total - (n as usize) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Flow {
    pub from: String,
    pub to: String,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChordOptions {
    pub include_in: bool,
    pub include_out: bool,
}

impl Default for ChordOptions {
    fn default() -> Self {
        Self { include_in: true, include_out: false }
    }
}

/// Nonzero flows for chord-diagram renderers.
pub fn chord_export(matrix: &TransitionMatrix, opts: ChordOptions) -> Vec<Flow> {
    let mut flows = Vec::new();
    for (i, row) in matrix.entries.iter().enumerate() {
        if i == OUT || (i == IN && !opts.include_in) {
            continue;
        }
        for (j, &p) in row.iter().enumerate() {
            if p == 0.0 || (j == OUT && !opts.include_out) {
                continue;
            }
            flows.push(Flow { from: matrix.states[i].clone(), to: matrix.states[j].clone(), probability: p });
        }
    }
    flows
}

/// CSV `from,to,probability`.
pub fn flows_to_csv(flows: &[Flow]) -> String {
    let mut out = String::from("from,to,probability\n");
    for f in flows {
        out.push_str(&format!("{},{},{}\n", f.from, f.to, f.probability));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sessions::SessionEntry;

    fn labels(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    fn session(entries: &[(u64, usize)]) -> Session {
        Session {
            user_id: "u".into(),
            region: RegionId::root(),
            entries: entries.iter().map(|&(timestamp, zone)| SessionEntry { timestamp, zone }).collect(),
        }
    }

    #[test]
    fn two_identical_paths() {
        let s = session(&[(0, 0), (100, 1), (250, 1)]);
        let (m, t) = build_cluster_model(&[s.clone(), s], &labels(&["A", "B"])).unwrap();
        let expected = vec![
            vec![0.0, 0.0, 1.0, 0.0],
            vec![0.0; 4],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 1.0, 0.0, 0.0],
        ];
        assert_eq!(m.entries(), expected.as_slice());
        assert_eq!(t.seconds(), &[100.0, 150.0]);
    }

    #[test]
    fn unvisited_zone_exits() {
        let (m, t) = build_cluster_model(&[session(&[(0, 0), (60, 0)])], &labels(&["A", "B"])).unwrap();
        assert_eq!(m.prob("B", "OUT"), 1.0);
        assert_eq!(t.seconds()[1], 0.0);
    }

    #[test]
    fn empty_group_is_error() {
        assert!(matches!(build_cluster_model(&[], &labels(&["A"])), Err(ModelError::NoSessions)));
    }

    #[test]
    fn counts_reconstruct() {
        let sessions = vec![
            session(&[(0, 0), (10, 1), (30, 0), (35, 2), (40, 2)]),
            session(&[(0, 1), (50, 2), (60, 1)]),
            session(&[(0, 2), (5, 0)]),
        ];
        let z = labels(&["A", "B", "C"]);
        let counts = TransitionCounts::from_sessions(&sessions, 3).unwrap();
        let m = counts.to_matrix(&z).unwrap();
        for (i, row) in counts.counts.iter().enumerate() {
            let departures: u64 = row.iter().sum();
            for (j, &c) in row.iter().enumerate() {
                assert!((m.get(i, j) * departures as f64 - c as f64).abs() < 1e-9);
            }
        }
        let t = counts.to_times();
        for z in 0..3 {
            assert!((t.seconds()[z] * counts.visits[z] as f64 - counts.dwell_s[z] as f64).abs() < 1e-9);
        }
        // A: visits 3 (s1 twice, s3 once): dwell 10 + 5 + 0
        assert_eq!(counts.visits[0], 3);
        assert_eq!(counts.dwell_s[0], 15);
    }

    #[test]
    fn validation_errors() {
        let z = labels(&["A"]);
        let bad_sum = vec![vec![0.0, 0.0, 1.0], vec![0.0; 3], vec![0.0, 0.6, 0.6]];
        let err = TransitionMatrix::new(&z, bad_sum).unwrap_err();
        assert!(matches!(err, ModelError::RowSum { ref row, .. } if row == "A"));
        let in_col = vec![vec![0.0, 0.0, 1.0], vec![0.0; 3], vec![0.5, 0.5, 0.0]];
        assert!(matches!(TransitionMatrix::new(&z, in_col), Err(ModelError::InColumn { .. })));
        let in_out = vec![vec![0.0, 0.5, 0.5], vec![0.0; 3], vec![0.0, 1.0, 0.0]];
        assert!(matches!(TransitionMatrix::new(&z, in_out), Err(ModelError::InToOut)));
        let out_row = vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]];
        assert!(matches!(TransitionMatrix::new(&z, out_row), Err(ModelError::OutRow)));
        assert!(matches!(TransitionMatrix::new(&z, vec![vec![0.0; 2]; 2]), Err(ModelError::Dimension(_))));
    }

    #[test]
    fn chord_flows() {
        let z = labels(&["A", "B"]);
        let m = TransitionMatrix::new(
            &z,
            vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0; 4], vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, 0.0]],
        )
        .unwrap();
        let all = chord_export(&m, ChordOptions { include_in: true, include_out: true });
        assert_eq!(all.len(), 3);
        assert_eq!(chord_export(&m, ChordOptions::default()).len(), 2);
        let zone_only = chord_export(&m, ChordOptions { include_in: false, include_out: false });
        assert_eq!(zone_only, vec![Flow { from: "A".into(), to: "B".into(), probability: 1.0 }]);
        assert_eq!(flows_to_csv(&zone_only), "from,to,probability\nA,B,1\n");
    }
}
