mod common;

use apmob_core::adapt;
use apmob_core::hierarchy::RegionId;
use apmob_core::ingest::{self, CleaningConfig, Sample, SampleStore};
use apmob_core::model::{self, ClusterModel, MobilityModel, Provenance, TimeVector, TransitionMatrix, IN, OUT};
use apmob_core::profiling::{self, KMeansParams};
use apmob_core::sessions;
use apmob_core::synth::{self, user_rng, GenerationConfig, UserSampler};
use apmob_core::validate;
use common::*;
use proptest::prelude::*;

fn points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, dim), 2..60)
}

/// Random valid model: every zone row leads to OUT with some mass.
fn random_model() -> impl Strategy<Value = MobilityModel> {
    (1usize..6, 1usize..4).prop_flat_map(|(zones, k)| {
        let n = zones + 2;
        let rows = proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, n), n);
        (
            proptest::collection::vec(rows, k),
            proptest::collection::vec(proptest::collection::vec(0.0f64..3600.0, zones), k),
            proptest::collection::vec(0.1f64..1.0, k),
        )
            .prop_map(move |(mats, times, pops)| {
                let labels: Vec<String> = (0..zones).map(|z| format!("z{z}")).collect();
                let total: f64 = pops.iter().sum();
                let clusters = mats
                    .into_iter()
                    .zip(times)
                    .zip(&pops)
                    .map(|((mut m, t), p)| {
                        for (i, row) in m.iter_mut().enumerate() {
                            row[IN] = 0.0;
                            if i == OUT {
                                row.iter_mut().for_each(|v| *v = 0.0);
                                continue;
                            }
                            if i == IN {
                                row[OUT] = 0.0;
                                row[2] += 0.01;
                            } else {
                                row[OUT] += 0.01;
                            }
                            let s: f64 = row.iter().sum();
                            row.iter_mut().for_each(|v| *v /= s);
                        }
                        ClusterModel {
                            matrix: TransitionMatrix::new(&labels, m).unwrap(),
                            times: TimeVector(t),
                            popularity: p / total,
                        }
                    })
                    .collect::<Vec<_>>();
                let mut model = MobilityModel {
                    region: RegionId::root(),
                    zone_labels: labels,
                    clusters,
                    provenance: Provenance::default(),
                    twins: vec![],
                };
                // popularities must sum to 1 within 1e-9
                let drift: f64 = 1.0 - model.clusters.iter().map(|c| c.popularity).sum::<f64>();
                model.clusters[0].popularity += drift;
                model
            })
    })
}

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

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn lloyd_distortion_never_increases(pts in points(3), k in 1usize..5, seed in 0u64..1000) {
        let k = k.min(profiling::distinct_count(&pts));
        let c = profiling::kmeans(&pts, k, &KMeansParams { restarts: 1, ..KMeansParams::with_seed(seed) }).unwrap();
        let (_, history) = profiling::lloyd(&pts, c.centroids.clone(), 50, 0.0);
        for w in history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
        let init: Vec<Vec<f64>> = pts.iter().take(k).cloned().collect();
        let (_, history) = profiling::lloyd(&pts, init, 50, 0.0);
        for w in history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn elbow_curve_is_non_increasing(pts in points(2), seed in 0u64..100) {
        prop_assume!(profiling::distinct_count(&pts) >= 3);
        let curve = profiling::elbow(&pts, 8, &KMeansParams { restarts: 2, ..KMeansParams::with_seed(seed) }).unwrap();
        for w in curve.points.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 + 1e-12);
        }
    }

    #[test]
    fn hungarian_beats_every_bijection(k in 1usize..7, raw in proptest::collection::vec(0.0f64..10.0, 36)) {
        let cost: Vec<Vec<f64>> = (0..k).map(|i| raw[i * 6..i * 6 + k].to_vec()).collect();
        let best = validate::hungarian(&cost);
        let c = validate::assignment_cost(&cost, &best);
        for p in permutations(k) {
            prop_assert!(c <= validate::assignment_cost(&cost, &p) + 1e-9);
        }
    }

    #[test]
    fn remove_after_duplicate_is_identity(m in random_model(), pick in 0usize..6) {
        let z = m.zone_labels[pick % m.n_zones()].clone();
        let d = adapt::duplicate_zone(&m, &z, "copy").unwrap();
        let back = adapt::remove_zone(&d, "copy").unwrap();
        for (a, b) in m.clusters.iter().zip(&back.clusters) {
            // self-loops do not survive the twin split
            let self_loop = a.matrix.prob(&z, &z);
            if self_loop == 0.0 {
                prop_assert!(a.matrix.frobenius_distance(&b.matrix) <= 1e-9);
            }
            prop_assert_eq!(&a.times, &b.times);
        }
    }

    #[test]
    fn adaptations_keep_invariants(m in random_model(), pick in 0usize..6, factor in 0.0f64..4.0) {
        let z = m.zone_labels[pick % m.n_zones()].clone();
        let d = adapt::duplicate_zone(&m, &z, "copy").unwrap();
        d.validate(model::ROW_SUM_TOL).unwrap();
        let s = adapt::scale_time(&d, "copy", factor).unwrap();
        s.validate(model::ROW_SUM_TOL).unwrap();
        if m.n_zones() > 1 {
            let r = adapt::remove_zone(&m, &z).unwrap();
            r.validate(model::ROW_SUM_TOL).unwrap();
            // untouched rows keep their relative proportions
            let removed = m.zone_index(&z).unwrap() + 2;
            for (a, b) in m.clusters.iter().zip(&r.clusters) {
                for (i, row) in a.matrix.entries().iter().enumerate() {
                    if i == OUT || i == removed || row[removed] == 1.0 {
                        continue;
                    }
                    let bi = if i > removed { i - 1 } else { i };
                    let kept: Vec<f64> = row.iter().enumerate().filter(|(j, _)| *j != removed).map(|(_, v)| *v).collect();
                    let scale: f64 = kept.iter().sum();
                    for (j, v) in kept.iter().enumerate() {
                        prop_assert!((b.matrix.get(bi, j) - v / scale).abs() <= 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn rmse_symmetric_under_inverse_mapping(a in random_model(), seed in 0u64..50) {
        let mut b = a.clone();
        for (i, c) in b.clusters.iter_mut().enumerate() {
            for t in c.times.0.iter_mut() {
                *t += (seed + i as u64) as f64;
            }
        }
        b.clusters.rotate_left(1);
        let map = validate::map_clusters(&a, &b).unwrap();
        let mut inverse = vec![0; map.mapping.len()];
        for (i, &j) in map.mapping.iter().enumerate() {
            inverse[j] = i;
        }
        let ab = validate::rmse(&a, &b, &map.mapping, Default::default()).unwrap();
        let ba = validate::rmse(&b, &a, &inverse, Default::default()).unwrap();
        prop_assert!((ab.matrix_avg - ba.matrix_avg).abs() < 1e-12);
        prop_assert!((ab.time_avg_s - ba.time_avg_s).abs() < 1e-9);
        prop_assert!(ab.matrix_avg <= ab.matrix_max + 1e-15);
        let self_report = validate::rmse(&a, &a, &(0..a.k()).collect::<Vec<_>>(), Default::default()).unwrap();
        prop_assert_eq!(self_report.matrix_max, 0.0);
    }

    #[test]
    fn model_json_round_trips(m in random_model()) {
        let back = MobilityModel::from_json(&m.to_json()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn cleaning_is_idempotent(raw in proptest::collection::vec((0u64..500, 0usize..5, 0usize..5), 0..80)) {
        let store = SampleStore::from_samples(
            raw.into_iter().map(|(t, u, a)| Sample::new(t, format!("u{u}"), format!("a{a}")).unwrap()).collect(),
        );
        let rules = CleaningConfig {
            drop_single_connection_users: true,
            excluded_ap_ids: ["a4".to_string()].into(),
            time_window: Some((50, 450)),
            ..CleaningConfig::default()
        };
        let once = ingest::clean(&store, &rules);
        prop_assert_eq!(ingest::clean(&once, &rules), once);
    }

    #[test]
    fn sweep_choice_survives_rescaling(counts in proptest::collection::vec(1.0f64..1e4, 2..20), times in proptest::collection::vec(1.0f64..1e5, 20), a in 0.1f64..100.0, b in 0.1f64..100.0) {
        let times = &times[..counts.len()];
        let argmin = |d: Vec<f64>| d.iter().enumerate().fold(0, |best, (i, x)| if *x < d[best] { i } else { best });
        let base = argmin(sessions::balance_distances(&counts, times));
        let scaled_c: Vec<f64> = counts.iter().map(|c| c * a + 7.0).collect();
        let scaled_t: Vec<f64> = times.iter().map(|t| t * b + 3.0).collect();
        let after = sessions::balance_distances(&scaled_c, &scaled_t);
        let d0 = sessions::balance_distances(&counts, times);
        // affine rescaling leaves normalized values unchanged up to rounding
        prop_assert!((after[base] - d0[base]).abs() < 1e-9);
        prop_assert!(after.iter().all(|x| *x >= after[base] - 1e-9));
    }
}

#[test]
fn generated_transitions_match_model() {
    let truth = ground_truth();
    let sampler = UserSampler::new(&truth, None).unwrap();
    let n = 12_000;
    let k = truth.k();
    let states = truth.n_zones() + 2;
    let mut types = vec![0usize; k];
    let mut counts = vec![vec![vec![0usize; states]; states]; k];
    for u in 0..n {
        let track = sampler.sample(u, &mut user_rng(3, u as u64)).unwrap();
        types[track.cluster] += 1;
        let mut prev = IN;
        for (z, _) in &track.visits {
            let s = truth.zone_index(z).unwrap() + 2;
            counts[track.cluster][prev][s] += 1;
            prev = s;
        }
        counts[track.cluster][prev][OUT] += 1;
    }
    for c in 0..k {
        let p = truth.clusters[c].popularity;
        let f = types[c] as f64 / n as f64;
        assert!((f - p).abs() <= 3.0 * (p * (1.0 - p) / n as f64).sqrt(), "popularity of {c}");
        for (i, row) in counts[c].iter().enumerate() {
            let row_n: usize = row.iter().sum();
            if row_n == 0 {
                continue;
            }
            for (j, &hits) in row.iter().enumerate() {
                let p = truth.clusters[c].matrix.get(i, j);
                let f = hits as f64 / row_n as f64;
                let se = (p * (1.0 - p) / row_n as f64).sqrt();
                assert!((f - p).abs() <= 3.0 * se + 1e-12, "cluster {c} [{i}][{j}]: {f} vs {p}");
            }
        }
    }
}

#[test]
fn weights_override_popularity() {
    let truth = ground_truth();
    let mut cfg = GenerationConfig::new(9_000, 30.0, 4);
    cfg.type_weights = Some(vec![0.1, 0.1, 0.8]);
    let trace = synth::generate_trace(&truth, &cfg).unwrap();
    let n = trace.user_types.len() as f64;
    let f = trace.user_types.iter().filter(|&&t| t == 2).count() as f64 / n;
    assert!((f - 0.8).abs() <= 3.0 * (0.8f64 * 0.2 / n).sqrt());
}

#[test]
fn synthetic_trace_reingests_through_csv() {
    let truth = ground_truth();
    let trace = synth::generate_trace(&truth, &GenerationConfig::new(300, 45.0, 9)).unwrap();
    let mut buf = Vec::new();
    ingest::write_tuple_log(&mut buf, &trace.samples, ingest::LogFormat::Csv).unwrap();
    let parsed = ingest::parse_tuple_log(buf.as_slice(), ingest::LogFormat::Csv).unwrap();
    assert_eq!(parsed.skipped, 0);
    assert_eq!(parsed.store, trace.to_store());
    let region = synth::synthetic_region(&truth);
    let sessions = sessions::split_sessions(&parsed.store, &region, f64::INFINITY).unwrap();
    assert_eq!(sessions.len(), 300);
}
