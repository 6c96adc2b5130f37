#![allow(dead_code)]

use std::path::PathBuf;

use apmob_core::hierarchy::{HierarchyDocument, RegionId};
use apmob_core::model::{self, ClusterModel, MobilityModel, Provenance, TimeVector, TransitionMatrix};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn load_model(rel: &str, tol: f64) -> MobilityModel {
    let text = std::fs::read_to_string(fixture(rel)).unwrap();
    MobilityModel::from_json_with_tolerance(&text, tol).unwrap()
}

pub fn hierarchy_docs() -> Vec<HierarchyDocument> {
    ["lv0.json", "lv1_bldgAT.json", "lv2_bldgAT_0flE.json"]
        .iter()
        .map(|f| {
            let text = std::fs::read_to_string(fixture(&format!("hierarchy/{f}"))).unwrap();
            HierarchyDocument::from_json(&text, f).unwrap()
        })
        .collect()
}

/// Matrix from `(from, to, p)` triples; missing rows exit.
pub fn matrix(zones: &[&str], flows: &[(&str, &str, f64)]) -> TransitionMatrix {
    let labels: Vec<String> = zones.iter().map(|s| s.to_string()).collect();
    let states = model::state_labels(&labels);
    let n = states.len();
    let idx = |s: &str| states.iter().position(|x| x == s).unwrap();
    let mut entries = vec![vec![0.0; n]; n];
    for &(from, to, p) in flows {
        entries[idx(from)][idx(to)] = p;
    }
    for row in entries.iter_mut().skip(2) {
        if row.iter().sum::<f64>() == 0.0 {
            row[model::OUT] = 1.0;
        }
    }
    TransitionMatrix::new(&labels, entries).unwrap()
}

pub const GT_ZONES: [&str; 6] = ["A", "B", "C", "D", "E", "F"];

/// Three user types over six zones. Each type lives in its own zones and
/// passes briefly through the shared zone F.
pub fn ground_truth() -> MobilityModel {
    let z = &GT_ZONES;
    let c0 = matrix(
        z,
        &[
            ("IN", "A", 0.6),
            ("IN", "F", 0.4),
            ("A", "B", 0.5),
            ("A", "OUT", 0.3),
            ("A", "F", 0.2),
            ("B", "A", 0.3),
            ("B", "OUT", 0.7),
            ("F", "A", 1.0),
        ],
    );
    let c1 = matrix(
        z,
        &[
            ("IN", "C", 0.7),
            ("IN", "F", 0.3),
            ("C", "D", 0.6),
            ("C", "OUT", 0.4),
            ("D", "C", 0.2),
            ("D", "OUT", 0.6),
            ("D", "F", 0.2),
            ("F", "C", 1.0),
        ],
    );
    let c2 = matrix(z, &[("IN", "E", 0.8), ("IN", "F", 0.2), ("E", "OUT", 0.9), ("E", "F", 0.1), ("F", "E", 1.0)]);
    let clusters = vec![
        ClusterModel { matrix: c0, times: TimeVector(vec![1200.0, 900.0, 0.0, 0.0, 0.0, 120.0]), popularity: 0.5 },
        ClusterModel { matrix: c1, times: TimeVector(vec![0.0, 0.0, 600.0, 1800.0, 0.0, 120.0]), popularity: 0.3 },
        ClusterModel { matrix: c2, times: TimeVector(vec![0.0, 0.0, 0.0, 0.0, 2400.0, 60.0]), popularity: 0.2 },
    ];
    let m = MobilityModel {
        region: RegionId::root(),
        zone_labels: z.iter().map(|s| s.to_string()).collect(),
        clusters,
        provenance: Provenance::default(),
        twins: vec![],
    };
    m.validate(model::ROW_SUM_TOL).unwrap();
    m
}

/// Whole-matrix RMSE by state label, independent of the library's indexing.
pub fn oracle_matrix_rmse(a: &TransitionMatrix, b: &TransitionMatrix) -> f64 {
    let mut sum = 0.0;
    let mut cells = 0.0;
    for from in a.states() {
        for to in a.states() {
            let d = a.prob(from, to) - b.prob(from, to);
            sum += d * d;
            cells += 1.0;
        }
    }
    (sum / cells).sqrt()
}

pub fn oracle_time_rmse(a: &MobilityModel, ca: usize, b: &MobilityModel, cb: usize) -> f64 {
    let mut sum = 0.0;
    for (i, z) in a.zone_labels.iter().enumerate() {
        let j = b.zone_index(z).unwrap();
        let d = a.clusters[ca].times.0[i] - b.clusters[cb].times.0[j];
        sum += d * d;
    }
    (sum / a.zone_labels.len() as f64).sqrt()
}
