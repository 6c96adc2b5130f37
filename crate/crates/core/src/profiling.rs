//! User profiling: zone-time vectors, k-means and elbow selection.
//!
//! Each session becomes a probability vector over the region's zones (share
//! of session time spent in each zone). Sessions are grouped with Lloyd's
//! k-means (k-means++ seeding, best of several restarts) and the number of
//! groups is picked with a max-distance-to-chord elbow rule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::hierarchy::RegionId;
use crate::sessions::Session;

pub const DEFAULT_RESTARTS: usize = 10;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum ProfilingError {
    #[error("session of {user} has zero duration")]
    ZeroDuration { user: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {distinct} distinct vectors")]
    TooManyClusters { k: usize, distinct: usize },
    #[error("no vectors to cluster")]
    NoData,
    #[error("vectors have inconsistent dimensions")]
    DimensionMismatch,
    #[error("elbow needs k_max >= 3, got {0}")]
    ElbowRange(usize),
    #[error("zone index {zone} out of range for {n_zones} zones")]
    ZoneOutOfRange { zone: usize, n_zones: usize },
}

/// Share of session time spent in each zone of a region.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZoneProbabilityVector {
    pub region: RegionId,
    pub probs: Vec<f64>,
}

/// Each entry's zone holds the interval until the next entry; the final entry
/// marks the exit and holds no time.
pub fn session_vector(session: &Session, n_zones: usize) -> Result<ZoneProbabilityVector, ProfilingError> {
    let duration = session.duration();
    if duration == 0 {
        return Err(ProfilingError::ZeroDuration { user: session.user_id.clone() });
    }
    let mut dwell = vec![0u64; n_zones];
    for pair in session.entries.windows(2) {
        let zone = pair[0].zone;
        if zone >= n_zones {
            return Err(ProfilingError::ZoneOutOfRange { zone, n_zones });
        }
        dwell[zone] += pair[1].timestamp - pair[0].timestamp;
    }
    let total = duration as f64;
    Ok(ZoneProbabilityVector {
        region: session.region.clone(),
        probs: dwell.into_iter().map(|d| d as f64 / total).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Clustering {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: Vec<usize>,
    /// Mean squared distance from each point to its centroid.
    pub distortion: f64,
}

impl Clustering {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { seed: 0, restarts: DEFAULT_RESTARTS, max_iter: DEFAULT_MAX_ITER, tol: DEFAULT_TOL }
    }
}

impl KMeansParams {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn check_points(points: &[Vec<f64>]) -> Result<usize, ProfilingError> {
    let dim = points.first().ok_or(ProfilingError::NoData)?.len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(ProfilingError::DimensionMismatch);
    }
    Ok(dim)
}

/// Number of distinct vectors (bitwise comparison).
pub fn distinct_count(points: &[Vec<f64>]) -> usize {
    let mut keys: Vec<Vec<u64>> = points.iter().map(|p| p.iter().map(|x| x.to_bits()).collect()).collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// k-means++ seeding.
fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w > 0.0 {
                chosen = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
        }
        let c = points[chosen.expect("positive total has a positive weight")].clone();
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from the given centroids. The second value is the
/// distortion after every centroid update; it never increases.
pub fn lloyd(points: &[Vec<f64>], mut centroids: Vec<Vec<f64>>, max_iter: usize, tol: f64) -> (Clustering, Vec<f64>) {
    let k = centroids.len();
    let dim = points[0].len();
    let n = points.len();
    let mut assignment = vec![0usize; n];
    let mut dists = vec![0f64; n];
    let mut history = Vec::new();

    for _ in 0..max_iter.max(1) {
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest(p, &centroids);
            assignment[i] = c;
            dists[i] = d;
        }

        // Empty clusters take the point farthest from its own centroid.
        let mut sizes = vec![0usize; k];
        for &a in &assignment {
            sizes[a] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[assignment[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            let Some(far) = far else { break };
            sizes[assignment[far]] -= 1;
            assignment[far] = c;
            dists[far] = 0.0;
            sizes[c] = 1;
            centroids[c].clone_from(&points[far]);
        }

        let mut sums = vec![vec![0f64; dim]; k];
        for (p, &a) in points.iter().zip(&assignment) {
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut shift = 0f64;
        for c in 0..k {
            if sizes[c] == 0 {
                continue;
            }
            let inv = 1.0 / sizes[c] as f64;
            sums[c].iter_mut().for_each(|s| *s *= inv);
            shift = shift.max(sq_dist(&sums[c], &centroids[c]).sqrt());
            std::mem::swap(&mut centroids[c], &mut sums[c]);
        }

        let distortion = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum::<f64>() / n as f64;
        history.push(distortion);
        if shift < tol {
            break;
        }
    }

    let distortion = *history.last().expect("at least one iteration");
    (Clustering { k, centroids, assignment, distortion }, history)
}

/// Best of `params.restarts` seeded k-means++ runs. Deterministic given the
/// seed: restart `r` draws from stream `r` of a ChaCha8 generator.
pub fn kmeans(points: &[Vec<f64>], k: usize, params: &KMeansParams) -> Result<Clustering, ProfilingError> {
    check_points(points)?;
    if k == 0 {
        return Err(ProfilingError::ZeroK);
    }
    let distinct = distinct_count(points);
    if k > distinct {
        return Err(ProfilingError::TooManyClusters { k, distinct });
    }
    Ok(best_of_restarts(points, k, params, None))
}

fn best_of_restarts(points: &[Vec<f64>], k: usize, params: &KMeansParams, warm: Option<Vec<Vec<f64>>>) -> Clustering {
    let mut best: Option<Clustering> = None;
    let mut consider = |c: Clustering| {
        if best.as_ref().is_none_or(|b| c.distortion < b.distortion) {
            best = Some(c);
        }
    };
    if let Some(init) = warm {
        consider(lloyd(points, init, params.max_iter, params.tol).0);
    }
    for r in 0..params.restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        rng.set_stream(r as u64);
        let init = plus_plus_init(points, k, &mut rng);
        consider(lloyd(points, init, params.max_iter, params.tol).0);
    }
    best.expect("at least one run")
}

#[derive(Debug, Clone, Serialize)]
pub struct ElbowCurve {
    /// `(k, distortion)` for k = 1..=k_max.
    pub points: Vec<(usize, f64)>,
    pub k_star: usize,
    #[serde(skip)]
    pub clusterings: Vec<Clustering>,
}

impl ElbowCurve {
    /// CSV `k,distortion`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,distortion\n");
        for (k, d) in &self.points {
            out.push_str(&format!("{k},{d}\n"));
        }
        out
    }

    pub fn clustering(&self, k: usize) -> Option<&Clustering> {
        self.clusterings.get(k.checked_sub(1)?)
    }
}

/// Index (1-based k) of the point farthest from the chord joining the first
/// and last points, both axes scaled to [0, 1]. Ties go to the smaller k.
pub fn knee_point(distortions: &[f64]) -> usize {
    let n = distortions.len();
    if n < 3 {
        return 1;
    }
    let (first, last) = (distortions[0], distortions[n - 1]);
    let span = first - last;
    if span.abs() <= f64::EPSILON * first.abs().max(1.0) {
        return 1;
    }
    let mut best = (1, f64::NEG_INFINITY);
    for (i, d) in distortions.iter().enumerate() {
        let x = i as f64 / (n - 1) as f64;
        let y = (d - last) / span;
        let dist = (x + y - 1.0).abs() / std::f64::consts::SQRT_2;
        if dist > best.1 {
            best = (i + 1, dist);
        }
    }
    best.0
}

/// Distortion for k = 1..=k_max and the elbow k.
///
/// Besides the seeded restarts, each k > 1 also tries the best k-1 centroids
/// plus the worst-fitted point, which keeps the curve non-increasing. k_max is
/// capped at the number of distinct vectors.
pub fn elbow(points: &[Vec<f64>], k_max: usize, params: &KMeansParams) -> Result<ElbowCurve, ProfilingError> {
    check_points(points)?;
    if k_max < 3 {
        return Err(ProfilingError::ElbowRange(k_max));
    }
    let k_max = k_max.min(distinct_count(points));
    let mut clusterings: Vec<Clustering> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let warm = clusterings.last().map(|prev| {
            let far = points
                .iter()
                .zip(&prev.assignment)
                .map(|(p, &a)| sq_dist(p, &prev.centroids[a]))
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .expect("points non-empty");
            let mut init = prev.centroids.clone();
            init.push(points[far].clone());
            init
        });
        clusterings.push(best_of_restarts(points, k, params, warm));
    }
    let distortions: Vec<f64> = clusterings.iter().map(|c| c.distortion).collect();
    let k_star = knee_point(&distortions);
    Ok(ElbowCurve {
        points: distortions.iter().enumerate().map(|(i, &d)| (i + 1, d)).collect(),
        k_star,
        clusterings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sessions::SessionEntry;

    fn session(entries: &[(u64, usize)]) -> Session {
        Session {
            user_id: "u".into(),
            region: RegionId::root(),
            entries: entries.iter().map(|&(timestamp, zone)| SessionEntry { timestamp, zone }).collect(),
        }
    }

    #[test]
    fn vector_interval_arithmetic() {
        let v = session_vector(&session(&[(0, 0), (600, 1), (900, 0), (1200, 0)]), 2).unwrap();
        assert_eq!(v.probs, vec![0.75, 0.25]);
    }

    #[test]
    fn vector_one_hot_and_symmetric() {
        let v = session_vector(&session(&[(0, 1), (500, 1)]), 3).unwrap();
        assert_eq!(v.probs, vec![0.0, 1.0, 0.0]);
        let v = session_vector(&session(&[(0, 0), (300, 1), (600, 1)]), 2).unwrap();
        assert_eq!(v.probs, vec![0.5, 0.5]);
    }

    #[test]
    fn vector_zero_duration_rejected() {
        let err = session_vector(&session(&[(5, 0)]), 1).unwrap_err();
        assert_eq!(err, ProfilingError::ZeroDuration { user: "u".into() });
    }

    #[test]
    fn k1_is_mean_and_variance() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let c = kmeans(&pts, 1, &KMeansParams::with_seed(3)).unwrap();
        assert_eq!(c.centroids[0], vec![3.0, 4.0]);
        // squared distances 8, 0, 8 -> mean 16/3
        assert!((c.distortion - 16.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn k_equal_distinct_is_zero() {
        let pts = vec![vec![0.0], vec![1.0], vec![1.0], vec![4.0]];
        let c = kmeans(&pts, 3, &KMeansParams::with_seed(1)).unwrap();
        assert_eq!(c.distortion, 0.0);
        assert!(c.sizes().iter().all(|&s| s > 0));
        assert_eq!(
            kmeans(&pts, 4, &KMeansParams::default()).unwrap_err(),
            ProfilingError::TooManyClusters { k: 4, distinct: 3 }
        );
    }

    #[test]
    fn separated_groups_are_pure() {
        let mut pts = Vec::new();
        for g in 0..3 {
            for i in 0..20 {
                let mut v = vec![0.0; 3];
                v[g] = 1.0 - 0.001 * (i % 5) as f64;
                v[(g + 1) % 3] = 0.001 * (i % 5) as f64;
                pts.push(v);
            }
        }
        let c = kmeans(&pts, 3, &KMeansParams::with_seed(9)).unwrap();
        for g in 0..3 {
            let labels: Vec<_> = c.assignment[g * 20..(g + 1) * 20].to_vec();
            assert!(labels.iter().all(|&l| l == labels[0]));
        }
        assert!(c.distortion < 1e-5);
    }

    #[test]
    fn deterministic_given_seed() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 37 % 11) as f64, (i * 17 % 7) as f64]).collect();
        let p = KMeansParams::with_seed(42);
        assert_eq!(kmeans(&pts, 4, &p).unwrap(), kmeans(&pts, 4, &p).unwrap());
    }

    #[test]
    fn empty_cluster_reseeded() {
        // Two centroids start on top of each other; one cluster is empty.
        let pts = vec![vec![0.0], vec![0.1], vec![10.0], vec![10.2]];
        let (c, history) = lloyd(&pts, vec![vec![0.0], vec![0.0]], 300, 1e-9);
        assert!(c.sizes().iter().all(|&s| s == 2));
        assert!(history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn knee_of_hand_curve() {
        assert_eq!(knee_point(&[100.0, 20.0, 15.0, 12.0, 10.0]), 2);
        assert_eq!(knee_point(&[5.0, 5.0, 5.0]), 1);
        // Straight line: every point on the chord, first wins.
        assert_eq!(knee_point(&[3.0, 2.0, 1.0]), 1);
    }

    #[test]
    fn elbow_needs_three() {
        assert_eq!(elbow(&[vec![0.0]], 2, &KMeansParams::default()).unwrap_err(), ProfilingError::ElbowRange(2));
    }

    #[test]
    fn elbow_curve_is_monotone() {
        let pts: Vec<Vec<f64>> = (0..60).map(|i| vec![((i * 7919) % 101) as f64 / 101.0, ((i * 104729) % 97) as f64 / 97.0]).collect();
        let curve = elbow(&pts, 8, &KMeansParams { restarts: 2, ..KMeansParams::with_seed(5) }).unwrap();
        assert_eq!(curve.points.len(), 8);
        assert!(curve.points.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9));
        assert!(curve.to_csv().starts_with("k,distortion\n1,"));
        assert_eq!(curve.clustering(3).unwrap().k, 3);
    }
}
