//! Synthetic trace generation from a mobility model.
//!
//! Streams: user `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream
//! `i`; arrivals use stream [`ARRIVAL_STREAM`]. Each user is therefore
//! reproducible independently of how many other users are generated.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::RegionSpec;
use crate::ingest::{Sample, SampleStore};
use crate::model::{MobilityModel, IN, OUT};

pub const ARRIVAL_STREAM: u64 = u64::MAX;
/// Upper bound on zone visits per user.
pub const MAX_STEPS: usize = 100_000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("type weights: {0}")]
    Weights(String),
    #[error("mean inter-arrival must be positive and finite, got {0}")]
    InterArrival(f64),
    #[error("model provenance has no mean inter-arrival; give one explicitly")]
    NoDataInterArrival,
    #[error("cluster {cluster}: zones {zones:?} are reachable but never lead to OUT")]
    NonTerminating { cluster: usize, zones: Vec<String> },
    #[error("user {user}: no exit after {steps} steps")]
    StepLimit { user: usize, steps: usize },
}

/// Mean time between user arrivals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InterArrival {
    Seconds(f64),
    /// The literal string `"from-data"`: use the model's provenance.
    FromData(FromData),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FromData {
    #[serde(rename = "from-data")]
    FromData,
}

impl InterArrival {
    pub fn from_data() -> Self {
        Self::FromData(FromData::FromData)
    }

    pub fn resolve(&self, model: &MobilityModel) -> Result<f64, SynthError> {
        let mean = match self {
            Self::Seconds(s) => *s,
            Self::FromData(_) => model.provenance.mean_interarrival_s.ok_or(SynthError::NoDataInterArrival)?,
        };
        if !(mean.is_finite() && mean > 0.0) {
            return Err(SynthError::InterArrival(mean));
        }
        Ok(mean)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub n_users: usize,
    pub mean_interarrival: InterArrival,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub type_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub start_time: u64,
}

impl GenerationConfig {
    pub fn new(n_users: usize, mean_interarrival_s: f64, seed: u64) -> Self {
        Self {
            n_users,
            mean_interarrival: InterArrival::Seconds(mean_interarrival_s),
            type_weights: None,
            seed,
            start_time: 0,
        }
    }
}

/// One generated user: type, zone visits with entry offsets, exit offset.
#[derive(Debug, Clone, PartialEq)]
pub struct UserTrack {
    pub cluster: usize,
    pub visits: Vec<(String, f64)>,
    pub exit_offset: f64,
}

impl UserTrack {
    pub fn dwell(&self, visit: usize) -> f64 {
        let next = self.visits.get(visit + 1).map_or(self.exit_offset, |v| v.1);
        next - self.visits[visit].1
    }
}

/// Precomputed sampling tables for one model.
#[derive(Debug, Clone)]
pub struct UserSampler<'a> {
    model: &'a MobilityModel,
    types: WeightedIndex<f64>,
    rows: Vec<Vec<Option<WeightedIndex<f64>>>>,
}

impl<'a> UserSampler<'a> {
    pub fn new(model: &'a MobilityModel, weights: Option<&[f64]>) -> Result<Self, SynthError> {
        let pops = model.popularities();
        let weights = match weights {
            Some(w) => {
                if w.len() != pops.len() {
                    return Err(SynthError::Weights(format!("{} weights for {} clusters", w.len(), pops.len())));
                }
                let sum: f64 = w.iter().sum();
                if (sum - 1.0).abs() > 1e-9 || w.iter().any(|x| *x < 0.0 || !x.is_finite()) {
                    return Err(SynthError::Weights(format!("weights must be non-negative and sum to 1, got {sum}")));
                }
                w.to_vec()
            }
            None => pops,
        };
        let types = WeightedIndex::new(&weights).map_err(|e| SynthError::Weights(e.to_string()))?;
        let mut rows = Vec::with_capacity(model.clusters.len());
        for (idx, c) in model.clusters.iter().enumerate() {
            check_terminating(model, idx)?;
            rows.push(
                c.matrix
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(i, row)| if i == OUT { None } else { WeightedIndex::new(row).ok() })
                    .collect(),
            );
        }
        Ok(Self { model, types, rows })
    }

    pub fn sample<R: Rng + ?Sized>(&self, user: usize, rng: &mut R) -> Result<UserTrack, SynthError> {
        let cluster = self.types.sample(rng);
        let c = &self.model.clusters[cluster];
        let rows = &self.rows[cluster];
        let mut visits = Vec::new();
        let mut t = 0.0;
        let mut state = IN;
        loop {
            let next = rows[state].as_ref().expect("validated rows are non-empty").sample(rng);
            if next == OUT {
                break;
            }
            if visits.len() == MAX_STEPS {
                return Err(SynthError::StepLimit { user, steps: MAX_STEPS });
            }
            let zone = next - 2;
            visits.push((self.model.zone_labels[zone].clone(), t));
            let mean = c.times.seconds()[zone];
            if mean > 0.0 {
                let e: f64 = rng.sample(Exp1);
                t += e * mean;
            }
            state = next;
        }
        Ok(UserTrack { cluster, visits, exit_offset: t })
    }
}

/// Every state reachable from IN must be able to reach OUT.
fn check_terminating(model: &MobilityModel, cluster: usize) -> Result<(), SynthError> {
    let m = &model.clusters[cluster].matrix;
    let n = m.n_states();
    let reach = |start: usize, forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for (j, s) in seen.iter_mut().enumerate() {
                let p = if forward { m.get(i, j) } else { m.get(j, i) };
                if p > 0.0 && !*s {
                    *s = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    let from_in = reach(IN, true);
    let to_out = reach(OUT, false);
    let stuck: Vec<String> = (2..n).filter(|&i| from_in[i] && !to_out[i]).map(|i| m.states()[i].clone()).collect();
    if stuck.is_empty() {
        Ok(())
    } else {
        Err(SynthError::NonTerminating { cluster, zones: stuck })
    }
}

/// One user from the model's popularities.
pub fn generate_user<R: Rng + ?Sized>(model: &MobilityModel, rng: &mut R) -> Result<UserTrack, SynthError> {
    UserSampler::new(model, None)?.sample(0, rng)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    /// Grouped by user in arrival order, time-ordered within each user.
    pub samples: Vec<Sample>,
    /// Cluster drawn for each user, by user index.
    pub user_types: Vec<usize>,
    pub arrivals: Vec<f64>,
}

impl SyntheticTrace {
    pub fn to_store(&self) -> SampleStore {
        SampleStore::from_samples(self.samples.clone())
    }
}

pub fn user_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Poisson arrivals, one track per user. Samples sit at zone-entry instants
/// plus an exit sample repeating the last zone. Timestamps are whole seconds
/// and strictly increase within a user.
pub fn generate_trace(model: &MobilityModel, config: &GenerationConfig) -> Result<SyntheticTrace, SynthError> {
    let mean_gap = config.mean_interarrival.resolve(model)?;
    let sampler = UserSampler::new(model, config.type_weights.as_deref())?;
    let mut arrivals_rng = user_rng(config.seed, ARRIVAL_STREAM);
    let mut trace = SyntheticTrace { samples: Vec::new(), user_types: Vec::new(), arrivals: Vec::new() };
    let mut clock = config.start_time as f64;
    for user in 0..config.n_users {
        let gap: f64 = arrivals_rng.sample(Exp1);
        clock += gap * mean_gap;
        let track = sampler.sample(user, &mut user_rng(config.seed, user as u64))?;
        let user_id = user.to_string();
        let mut last: Option<u64> = None;
        let mut stamp = |offset: f64| {
            let mut ts = (clock + offset).round() as u64;
            if let Some(prev) = last {
                ts = ts.max(prev + 1);
            }
            last = Some(ts);
            ts
        };
        for (zone, offset) in &track.visits {
            let ts = stamp(*offset);
            trace.samples.push(Sample { timestamp: ts, user_id: user_id.clone(), ap_id: zone.clone() });
        }
        if let Some((zone, _)) = track.visits.last() {
            let ts = stamp(track.exit_offset);
            trace.samples.push(Sample { timestamp: ts, user_id: user_id.clone(), ap_id: zone.clone() });
        }
        trace.user_types.push(track.cluster);
        trace.arrivals.push(clock);
    }
    Ok(trace)
}

/// Region whose zones are the model's labels, each holding the AP of the same
/// name, which is how synthetic traces label positions.
pub fn synthetic_region(model: &MobilityModel) -> RegionSpec {
    let zones: IndexMap<String, BTreeSet<String>> =
        model.zone_labels.iter().map(|z| (z.clone(), BTreeSet::from([z.clone()]))).collect();
    RegionSpec::new(model.region.clone(), zones).expect("model zone labels are unique")
}
