//! Model comparison: cluster mapping, RMSE and the generate/re-model round
//! trip.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::RegionSpec;
use crate::ingest::SampleStore;
use crate::model::{self, ClusterChoice, MobilityModel, ModelConfig, ModelError, ThresholdChoice, TransitionMatrix, IN, OUT};
use crate::synth::{self, GenerationConfig, InterArrival, SynthError};

#[derive(Debug, Error)]
pub enum ValidateError {
    #[error("models have {a} and {b} clusters; force equal k")]
    ClusterCount { a: usize, b: usize },
    #[error("models cover different zones: {0}")]
    ZoneLabels(String),
    #[error("mapping is not a bijection on {0} clusters")]
    Mapping(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Synth(#[from] SynthError),
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[p[j] - 1] = j - 1;
    }
    assignment
}

pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[usize]) -> f64 {
    assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMapping {
    /// `mapping[a] = b`.
    pub mapping: Vec<usize>,
    pub total_cost: f64,
}

/// Reorders `b`'s zones to `order`. Label sets must match.
pub fn align_zones(b: &MobilityModel, order: &[String]) -> Result<MobilityModel, ValidateError> {
    if b.zone_labels == order {
        return Ok(b.clone());
    }
    let mut sorted_a = order.to_vec();
    let mut sorted_b = b.zone_labels.clone();
    sorted_a.sort();
    sorted_b.sort();
    if sorted_a != sorted_b {
        return Err(ValidateError::ZoneLabels(format!("{:?} vs {:?}", order, b.zone_labels)));
    }
    // perm[new state] = old state
    let perm: Vec<usize> = [IN, OUT]
        .into_iter()
        .chain(order.iter().map(|z| b.zone_index(z).expect("same label set") + 2))
        .collect();
    let states = model::state_labels(order);
    let clusters = b
        .clusters
        .iter()
        .map(|c| {
            let old = c.matrix.entries();
            let entries = perm.iter().map(|&i| perm.iter().map(|&j| old[i][j]).collect()).collect();
            model::ClusterModel {
                matrix: TransitionMatrix::from_raw(states.clone(), entries),
                times: model::TimeVector(perm[2..].iter().map(|&i| c.times.0[i - 2]).collect()),
                popularity: c.popularity,
            }
        })
        .collect();
    Ok(MobilityModel { zone_labels: order.to_vec(), clusters, ..b.clone() })
}

/// Optimal bijection between user types by Frobenius distance of their
/// transition matrices.
pub fn map_clusters(a: &MobilityModel, b: &MobilityModel) -> Result<ClusterMapping, ValidateError> {
    if a.k() != b.k() {
        return Err(ValidateError::ClusterCount { a: a.k(), b: b.k() });
    }
    let b = align_zones(b, &a.zone_labels)?;
    let cost = cost_matrix(a, &b);
    let mapping = hungarian(&cost);
    let total_cost = assignment_cost(&cost, &mapping);
    Ok(ClusterMapping { mapping, total_cost })
}

pub fn cost_matrix(a: &MobilityModel, b: &MobilityModel) -> Vec<Vec<f64>> {
    a.clusters
        .iter()
        .map(|ca| b.clusters.iter().map(|cb| ca.matrix.frobenius_distance(&cb.matrix)).collect())
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RmseOptions {
    /// Skip the IN column, the OUT row and IN -> OUT, which are zero in
    /// every valid matrix.
    pub exclude_structural_zeros: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub mapping: Vec<usize>,
    pub matrix_rmse: Vec<f64>,
    pub time_rmse_s: Vec<f64>,
    pub matrix_avg: f64,
    pub matrix_max: f64,
    pub time_avg_s: f64,
    pub time_max_s: f64,
    /// Relative to 1, the largest possible probability.
    pub matrix_avg_pct: f64,
    pub matrix_max_pct: f64,
    /// Mean of the first model's nonzero stay times.
    pub time_base_s: Option<f64>,
    pub time_avg_pct: Option<f64>,
    pub time_max_pct: Option<f64>,
    pub structural_zeros_excluded: bool,
}

fn structural(i: usize, j: usize) -> bool {
    j == IN || i == OUT || (i == IN && j == OUT)
}

fn matrix_rmse(a: &TransitionMatrix, b: &TransitionMatrix, opts: RmseOptions) -> f64 {
    let n = a.n_states();
    let mut sum = 0.0;
    let mut cells = 0usize;
    for i in 0..n {
        for j in 0..n {
            if opts.exclude_structural_zeros && structural(i, j) {
                continue;
            }
            let d = a.get(i, j) - b.get(i, j);
            sum += d * d;
            cells += 1;
        }
    }
    (sum / cells as f64).sqrt()
}

fn vector_rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64).sqrt()
}

fn avg_max(xs: &[f64]) -> (f64, f64) {
    let avg = xs.iter().sum::<f64>() / xs.len() as f64;
    (avg, xs.iter().copied().fold(0.0, f64::max))
}

pub fn rmse(a: &MobilityModel, b: &MobilityModel, mapping: &[usize], opts: RmseOptions) -> Result<RmseReport, ValidateError> {
    if a.k() != b.k() {
        return Err(ValidateError::ClusterCount { a: a.k(), b: b.k() });
    }
    let mut seen = vec![false; b.k()];
    if mapping.len() != a.k() || mapping.iter().any(|&j| j >= b.k() || std::mem::replace(&mut seen[j], true)) {
        return Err(ValidateError::Mapping(a.k()));
    }
    let b = align_zones(b, &a.zone_labels)?;
    let mut matrix = Vec::new();
    let mut time = Vec::new();
    for (ca, &j) in a.clusters.iter().zip(mapping) {
        let cb = &b.clusters[j];
        matrix.push(matrix_rmse(&ca.matrix, &cb.matrix, opts));
        time.push(vector_rmse(&ca.times.0, &cb.times.0));
    }
    let nonzero: Vec<f64> = a.clusters.iter().flat_map(|c| c.times.0.iter().copied()).filter(|t| *t > 0.0).collect();
    let time_base_s = (!nonzero.is_empty()).then(|| nonzero.iter().sum::<f64>() / nonzero.len() as f64);
    let (matrix_avg, matrix_max) = avg_max(&matrix);
    let (time_avg_s, time_max_s) = avg_max(&time);
    Ok(RmseReport {
        mapping: mapping.to_vec(),
        matrix_rmse: matrix,
        time_rmse_s: time,
        matrix_avg,
        matrix_max,
        time_avg_s,
        time_max_s,
        matrix_avg_pct: matrix_avg * 100.0,
        matrix_max_pct: matrix_max * 100.0,
        time_base_s,
        time_avg_pct: time_base_s.map(|b| time_avg_s / b * 100.0),
        time_max_pct: time_base_s.map(|b| time_max_s / b * 100.0),
        structural_zeros_excluded: opts.exclude_structural_zeros,
    })
}

impl RmseReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let pct = |p: Option<f64>| p.map_or("n/a".to_string(), |p| format!("{p:.1}%"));
        let mut out = String::from("                 avg              max\n");
        out.push_str(&format!(
            "matrix   {:>8.4} ({:>5.1}%) {:>8.4} ({:>5.1}%)\n",
            self.matrix_avg, self.matrix_avg_pct, self.matrix_max, self.matrix_max_pct
        ));
        out.push_str(&format!(
            "time (s) {:>8.1} ({:>6}) {:>8.1} ({:>6})\n",
            self.time_avg_s,
            pct(self.time_avg_pct),
            self.time_max_s,
            pct(self.time_max_pct)
        ));
        out.push_str(&format!("mapping  {:?}\n", self.mapping));
        out
    }
}

#[derive(Debug, Clone)]
pub struct RoundTrip {
    pub original: MobilityModel,
    pub regenerated: MobilityModel,
    pub mapping: ClusterMapping,
    pub report: RmseReport,
}

/// Generates `n_sessions` synthetic users from `model`, re-models the trace
/// with the same k and compares.
pub fn round_trip_model(model: &MobilityModel, n_sessions: usize, seed: u64, opts: RmseOptions) -> Result<RoundTrip, ValidateError> {
    let mut gen = GenerationConfig::new(n_sessions, 1.0, seed);
    gen.mean_interarrival = match model.provenance.mean_interarrival_s {
        Some(_) => InterArrival::from_data(),
        None => InterArrival::Seconds(60.0),
    };
    let trace = synth::generate_trace(model, &gen)?;
    let region = synth::synthetic_region(model);
    let config = ModelConfig {
        // each synthetic user is exactly one session
        threshold: ThresholdChoice::Unbounded,
        clusters: ClusterChoice::Fixed(model.k()),
        seed,
        ..ModelConfig::default()
    };
    let regenerated = model::build_mobility_model(&trace.to_store(), &region, &config)?.model;
    let mapping = map_clusters(model, &regenerated)?;
    let report = rmse(model, &regenerated, &mapping.mapping, opts)?;
    Ok(RoundTrip { original: model.clone(), regenerated, mapping, report })
}

/// Models `store`, then round-trips the model with as many synthetic users as
/// the data had sessions.
pub fn round_trip(store: &SampleStore, region: &RegionSpec, config: &ModelConfig, opts: RmseOptions) -> Result<RoundTrip, ValidateError> {
    let original = model::build_mobility_model(store, region, config)?.model;
    let n = original.provenance.source_sessions;
    round_trip_model(&original, n, config.seed, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::RegionId;
    use crate::model::{ClusterModel, Provenance, TimeVector};

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn hungarian_matches_brute_force() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let a = hungarian(&cost);
        let best = permutations(3).iter().map(|p| assignment_cost(&cost, p)).fold(f64::INFINITY, f64::min);
        assert_eq!(assignment_cost(&cost, &a), best);
        assert_eq!(best, 5.0);
    }

    fn cluster(z: &[String], a_to_b: f64, times: Vec<f64>, pop: f64) -> ClusterModel {
        let m = TransitionMatrix::new(
            z,
            vec![vec![0.0, 0.0, 1.0, 0.0], vec![0.0; 4], vec![0.0, 1.0 - a_to_b, 0.0, a_to_b], vec![0.0, 1.0, 0.0, 0.0]],
        )
        .unwrap();
        ClusterModel { matrix: m, times: TimeVector(times), popularity: pop }
    }

    fn two_cluster() -> MobilityModel {
        let z = vec!["A".to_string(), "B".to_string()];
        MobilityModel {
            region: RegionId::root(),
            clusters: vec![cluster(&z, 0.2, vec![60.0, 30.0], 0.5), cluster(&z, 0.9, vec![10.0, 0.0], 0.5)],
            zone_labels: z,
            provenance: Provenance::default(),
            twins: vec![],
        }
    }

    #[test]
    fn identical_and_permuted() {
        let m = two_cluster();
        let map = map_clusters(&m, &m).unwrap();
        assert_eq!(map.mapping, vec![0, 1]);
        assert_eq!(map.total_cost, 0.0);
        let r = rmse(&m, &m, &map.mapping, RmseOptions::default()).unwrap();
        assert_eq!((r.matrix_avg, r.time_avg_s, r.matrix_max), (0.0, 0.0, 0.0));

        let mut swapped = m.clone();
        swapped.clusters.swap(0, 1);
        assert_eq!(map_clusters(&m, &swapped).unwrap().mapping, vec![1, 0]);
    }

    #[test]
    fn single_cell_difference() {
        let z = vec!["A".to_string(), "B".to_string()];
        let a = MobilityModel { clusters: vec![cluster(&z, 0.2, vec![1.0, 1.0], 1.0)], ..two_cluster() };
        let b = MobilityModel { clusters: vec![cluster(&z, 0.3, vec![1.0, 1.0], 1.0)], ..two_cluster() };
        // two cells differ by 0.1 over 16
        let r = rmse(&a, &b, &[0], RmseOptions::default()).unwrap();
        assert!((r.matrix_avg - (0.02f64 / 16.0).sqrt()).abs() < 1e-12);
        let r2 = rmse(&a, &b, &[0], RmseOptions { exclude_structural_zeros: true }).unwrap();
        // 16 - 4 (IN column) - 3 (rest of OUT row) - 1 (IN->OUT) = 8 cells
        assert!((r2.matrix_avg - (0.02f64 / 8.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zone_order_is_aligned() {
        let m = two_cluster();
        let reordered = align_zones(&m, &["B".to_string(), "A".to_string()]).unwrap();
        assert_eq!(reordered.clusters[0].matrix.prob("A", "B"), 0.2);
        assert_eq!(reordered.clusters[0].times.0, vec![30.0, 60.0]);
        reordered.validate(1e-9).unwrap();
        let r = rmse(&m, &reordered, &[0, 1], RmseOptions::default()).unwrap();
        assert_eq!(r.matrix_avg, 0.0);
    }

    #[test]
    fn bad_inputs() {
        let m = two_cluster();
        assert!(matches!(rmse(&m, &m, &[0, 0], RmseOptions::default()), Err(ValidateError::Mapping(2))));
        let one = MobilityModel { clusters: vec![m.clusters[0].clone()], ..m.clone() };
        assert!(matches!(map_clusters(&m, &one), Err(ValidateError::ClusterCount { .. })));
    }

    #[test]
    fn report_outputs() {
        let m = two_cluster();
        let r = rmse(&m, &m, &[0, 1], RmseOptions::default()).unwrap();
        assert_eq!(r.time_base_s, Some(100.0 / 3.0));
        assert!(r.to_table().contains("matrix"));
        let back: RmseReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn one_zone_round_trip_is_exact() {
        let z = vec!["A".to_string()];
        let m = MobilityModel {
            region: RegionId::root(),
            clusters: vec![ClusterModel {
                matrix: TransitionMatrix::new(&z, vec![vec![0.0, 0.0, 1.0], vec![0.0; 3], vec![0.0, 1.0, 0.0]]).unwrap(),
                times: TimeVector(vec![300.0]),
                popularity: 1.0,
            }],
            zone_labels: z,
            provenance: Provenance::default(),
            twins: vec![],
        };
        let rt = round_trip_model(&m, 500, 3, RmseOptions::default()).unwrap();
        assert_eq!(rt.report.matrix_avg, 0.0);
        assert!(rt.report.time_avg_s < 3.0 * 300.0 / 500f64.sqrt());
    }
}
