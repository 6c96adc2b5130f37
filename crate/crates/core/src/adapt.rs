//! Model adaptation between scenarios: remove, duplicate and rename zones,
//! rescale stay times and reweight user types.
//!
//! Duplication records the pair in the model's twin list. Removing either
//! twin folds its incoming probability back into the other, so removing a
//! fresh duplicate restores the original model exactly. Other removals spread
//! the lost mass proportionally over the rest of each row.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::RegionId;
use crate::model::{
    state_labels, ClusterModel, MobilityModel, ModelError, TimeVector, TransitionMatrix, IN, IN_LABEL, OUT,
    OUT_LABEL, POPULARITY_TOL, ROW_SUM_TOL,
};

#[derive(Debug, Error)]
pub enum AdaptError {
    #[error("unknown zone `{0}`")]
    UnknownZone(String),
    #[error("zone label `{0}` already in use or reserved")]
    LabelInUse(String),
    #[error("cannot remove `{0}`: a region needs at least one zone")]
    LastZone(String),
    #[error("time scale factor must be finite and >= 0, got {0}")]
    BadFactor(f64),
    #[error("weights: {0}")]
    Weights(String),
    #[error("result violates model invariants: {0}")]
    Invalid(#[from] ModelError),
    #[error("directive {index} ({op}): {source}")]
    Directive { index: usize, op: &'static str, source: Box<AdaptError> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Directive {
    RemoveZone { label: String },
    DuplicateZone { label: String, new_label: String },
    RenameZone { old: String, new: String },
    ScaleTime { label: String, factor: f64 },
    SetWeights { weights: Vec<f64> },
    RelabelRegion { region: RegionId },
}

impl Directive {
    pub fn name(&self) -> &'static str {
        match self {
            Self::RemoveZone { .. } => "remove_zone",
            Self::DuplicateZone { .. } => "duplicate_zone",
            Self::RenameZone { .. } => "rename_zone",
            Self::ScaleTime { .. } => "scale_time",
            Self::SetWeights { .. } => "set_weights",
            Self::RelabelRegion { .. } => "relabel_region",
        }
    }
}

/// JSON array of directive objects, e.g. `[{"op":"remove_zone","label":"A"}]`.
pub type AdaptationScript = Vec<Directive>;

fn zone_of(model: &MobilityModel, label: &str) -> Result<usize, AdaptError> {
    model.zone_index(label).ok_or_else(|| AdaptError::UnknownZone(label.to_string()))
}

fn check_free(model: &MobilityModel, label: &str) -> Result<(), AdaptError> {
    if label.is_empty() || label == IN_LABEL || label == OUT_LABEL || model.zone_index(label).is_some() {
        return Err(AdaptError::LabelInUse(label.to_string()));
    }
    Ok(())
}

fn rebuild(model: &MobilityModel, zone_labels: Vec<String>, clusters: Vec<(Vec<Vec<f64>>, Vec<f64>)>) -> MobilityModel {
    let states = state_labels(&zone_labels);
    let clusters = clusters
        .into_iter()
        .zip(&model.clusters)
        .map(|((entries, times), old)| ClusterModel {
            matrix: TransitionMatrix::from_raw(states.clone(), entries),
            times: TimeVector(times),
            popularity: old.popularity,
        })
        .collect();
    MobilityModel { zone_labels, clusters, ..model.clone() }
}

/// Scales a row to sum 1. Empty zone rows exit; an empty IN row spreads
/// evenly over the zones so sessions stay non-empty.
fn renormalize(row: &mut [f64], state: usize) {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|v| *v /= sum);
    } else if state == IN {
        let n = row.len() - 2;
        row[2..].iter_mut().for_each(|v| *v = 1.0 / n as f64);
    } else {
        row[OUT] = 1.0;
    }
}

pub fn remove_zone(model: &MobilityModel, label: &str) -> Result<MobilityModel, AdaptError> {
    let zone = zone_of(model, label)?;
    if model.n_zones() < 2 {
        return Err(AdaptError::LastZone(label.to_string()));
    }
    let twin_pos = model.twins.iter().position(|(a, b)| a == label || b == label);
    let twin = twin_pos.map(|p| {
        let (a, b) = &model.twins[p];
        let other = if a == label { b } else { a };
        zone_of(model, other).expect("twins refer to existing zones") + 2
    });
    let r = zone + 2;
    let clusters = model
        .clusters
        .iter()
        .map(|c| {
            let mut entries: Vec<Vec<f64>> = c.matrix.entries().to_vec();
            entries.remove(r);
            for (i, row) in entries.iter_mut().enumerate() {
                let lost = row.remove(r);
                if i == OUT {
                    continue;
                }
                match twin {
                    Some(t) => row[if t > r { t - 1 } else { t }] += lost,
                    None if lost > 0.0 => renormalize(row, i),
                    None => {}
                }
            }
            let mut times = c.times.0.clone();
            times.remove(zone);
            (entries, times)
        })
        .collect();
    let mut labels = model.zone_labels.clone();
    labels.remove(zone);
    let mut out = rebuild(model, labels, clusters);
    if let Some(p) = twin_pos {
        out.twins.remove(p);
    }
    out.validate(ROW_SUM_TOL.max(row_tolerance(model)))?;
    Ok(out)
}

pub fn duplicate_zone(model: &MobilityModel, label: &str, new_label: &str) -> Result<MobilityModel, AdaptError> {
    let zone = zone_of(model, label)?;
    check_free(model, new_label)?;
    let l = zone + 2;
    let d = model.n_zones() + 2;
    let clusters = model
        .clusters
        .iter()
        .map(|c| {
            let mut entries: Vec<Vec<f64>> = c.matrix.entries().to_vec();
            for row in entries.iter_mut() {
                let half = row[l] / 2.0;
                row[l] = half;
                row.push(half);
            }
            let copy = entries[l].clone();
            entries.push(copy);
            for i in [l, d] {
                if entries[i][l] != 0.0 || entries[i][d] != 0.0 {
                    entries[i][l] = 0.0;
                    entries[i][d] = 0.0;
                    renormalize(&mut entries[i], i);
                }
            }
            let mut times = c.times.0.clone();
            times.push(times[zone]);
            (entries, times)
        })
        .collect();
    let mut labels = model.zone_labels.clone();
    labels.push(new_label.to_string());
    let mut out = rebuild(model, labels, clusters);
    out.twins.push((label.to_string(), new_label.to_string()));
    out.validate(ROW_SUM_TOL.max(row_tolerance(model)))?;
    Ok(out)
}

pub fn rename_zone(model: &MobilityModel, old: &str, new: &str) -> Result<MobilityModel, AdaptError> {
    let zone = zone_of(model, old)?;
    if old == new {
        return Ok(model.clone());
    }
    check_free(model, new)?;
    let mut labels = model.zone_labels.clone();
    labels[zone] = new.to_string();
    let clusters = model.clusters.iter().map(|c| (c.matrix.entries().to_vec(), c.times.0.clone())).collect();
    let mut out = rebuild(model, labels, clusters);
    for (a, b) in out.twins.iter_mut() {
        for s in [a, b] {
            if s == old {
                *s = new.to_string();
            }
        }
    }
    Ok(out)
}

pub fn scale_time(model: &MobilityModel, label: &str, factor: f64) -> Result<MobilityModel, AdaptError> {
    let zone = zone_of(model, label)?;
    if !(factor.is_finite() && factor >= 0.0) {
        return Err(AdaptError::BadFactor(factor));
    }
    let mut out = model.clone();
    for c in &mut out.clusters {
        c.times.0[zone] *= factor;
    }
    Ok(out)
}

pub fn set_weights(model: &MobilityModel, weights: &[f64]) -> Result<MobilityModel, AdaptError> {
    if weights.len() != model.k() {
        return Err(AdaptError::Weights(format!("{} weights for {} clusters", weights.len(), model.k())));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(0.0..=1.0).contains(w)) || (sum - 1.0).abs() > POPULARITY_TOL {
        return Err(AdaptError::Weights(format!("weights must lie in [0, 1] and sum to 1, got sum {sum}")));
    }
    let mut out = model.clone();
    for (c, &w) in out.clusters.iter_mut().zip(weights) {
        c.popularity = w;
    }
    Ok(out)
}

/// Moves the model under another region id, for splicing a sub-model into a
/// different place in the hierarchy.
pub fn relabel_region(model: &MobilityModel, region: RegionId) -> Result<MobilityModel, AdaptError> {
    region.check().map_err(|e| AdaptError::Invalid(ModelError::Structure(e)))?;
    Ok(MobilityModel { region, ..model.clone() })
}

/// Largest row-sum deviation in the model, so hand-transcribed inputs are not
/// rejected for imprecision they already had.
fn row_tolerance(model: &MobilityModel) -> f64 {
    model
        .clusters
        .iter()
        .flat_map(|c| c.matrix.entries().iter().enumerate().filter(|(i, _)| *i != OUT))
        .map(|(_, row)| (row.iter().sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max)
        + 1e-12
}

pub fn apply(model: &MobilityModel, directive: &Directive) -> Result<MobilityModel, AdaptError> {
    match directive {
        Directive::RemoveZone { label } => remove_zone(model, label),
        Directive::DuplicateZone { label, new_label } => duplicate_zone(model, label, new_label),
        Directive::RenameZone { old, new } => rename_zone(model, old, new),
        Directive::ScaleTime { label, factor } => scale_time(model, label, *factor),
        Directive::SetWeights { weights } => set_weights(model, weights),
        Directive::RelabelRegion { region } => relabel_region(model, region.clone()),
    }
}

/// Applies directives in order, re-checking every invariant after each one.
/// Input row sums within `tol` of 1 are accepted and never made worse.
pub fn apply_script(model: &MobilityModel, script: &[Directive]) -> Result<MobilityModel, AdaptError> {
    let mut current = model.clone();
    for (index, d) in script.iter().enumerate() {
        let wrap = |e: AdaptError| AdaptError::Directive { index, op: d.name(), source: Box::new(e) };
        let next = apply(&current, d).map_err(wrap)?;
        next.validate(ROW_SUM_TOL.max(row_tolerance(model))).map_err(|e| wrap(e.into()))?;
        current = next;
    }
    Ok(current)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Provenance;

    fn model(labels: &[&str], entries: Vec<Vec<f64>>, times: Vec<f64>) -> MobilityModel {
        let z: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        MobilityModel {
            region: RegionId::root(),
            clusters: vec![ClusterModel {
                matrix: TransitionMatrix::new(&z, entries).unwrap(),
                times: TimeVector(times),
                popularity: 1.0,
            }],
            zone_labels: z,
            provenance: Provenance::default(),
            twins: vec![],
        }
    }

    fn three_zone() -> MobilityModel {
        model(
            &["A", "B", "C"],
            vec![
                vec![0.0, 0.0, 0.5, 0.3, 0.2],
                vec![0.0; 5],
                vec![0.0, 0.4, 0.0, 0.6, 0.0],
                vec![0.0, 0.5, 0.25, 0.0, 0.25],
                vec![0.0, 0.0, 0.0, 1.0, 0.0],
            ],
            vec![60.0, 120.0, 30.0],
        )
    }

    #[test]
    fn single_zone_duplicate_splits_in_row() {
        let m = model(&["A"], vec![vec![0.0, 0.0, 1.0], vec![0.0; 3], vec![0.0, 1.0, 0.0]], vec![10.0]);
        let d = duplicate_zone(&m, "A", "A2").unwrap();
        let mx = &d.clusters[0].matrix;
        assert_eq!(mx.row(IN), &[0.0, 0.0, 0.5, 0.5]);
        assert_eq!(mx.prob("A2", "OUT"), 1.0);
        assert_eq!(d.clusters[0].times.0, vec![10.0, 10.0]);
    }

    #[test]
    fn duplicate_then_remove_is_identity() {
        let m = three_zone();
        for z in ["A", "B", "C"] {
            let back = remove_zone(&duplicate_zone(&m, z, "X").unwrap(), "X").unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn duplicate_zeroes_twin_links() {
        let d = duplicate_zone(&three_zone(), "B", "B2").unwrap();
        let mx = &d.clusters[0].matrix;
        assert_eq!(mx.prob("B", "B2"), 0.0);
        assert_eq!(mx.prob("B2", "B"), 0.0);
        assert_eq!(mx.prob("A", "B"), 0.3);
        assert_eq!(mx.prob("A", "B2"), 0.3);
        // B's row lost nothing to the twins, copy matches
        assert_eq!(mx.row(3)[..5], mx.row(5)[..5]);
    }

    #[test]
    fn remove_renormalizes_proportionally() {
        let r = remove_zone(&three_zone(), "C").unwrap();
        let mx = &r.clusters[0].matrix;
        assert!((mx.prob("IN", "A") - 0.5 / 0.8).abs() < 1e-12);
        assert!((mx.prob("B", "OUT") - 0.5 / 0.75).abs() < 1e-12);
        assert_eq!(mx.prob("A", "B"), 0.6);
        assert_eq!(r.clusters[0].times.0, vec![60.0, 120.0]);
    }

    #[test]
    fn emptied_rows_fall_back() {
        let m = model(
            &["A", "B"],
            vec![vec![0.0, 0.0, 0.0, 1.0], vec![0.0; 4], vec![0.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 0.0, 0.0]],
            vec![1.0, 1.0],
        );
        let r = remove_zone(&m, "B").unwrap();
        assert_eq!(r.clusters[0].matrix.prob("A", "OUT"), 1.0);
        assert_eq!(r.clusters[0].matrix.prob("IN", "A"), 1.0);
    }

    #[test]
    fn errors() {
        let m = three_zone();
        assert!(matches!(remove_zone(&m, "Z"), Err(AdaptError::UnknownZone(_))));
        assert!(matches!(duplicate_zone(&m, "A", "B"), Err(AdaptError::LabelInUse(_))));
        assert!(matches!(duplicate_zone(&m, "A", "OUT"), Err(AdaptError::LabelInUse(_))));
        let one = remove_zone(&remove_zone(&m, "A").unwrap(), "B").unwrap();
        assert!(matches!(remove_zone(&one, "C"), Err(AdaptError::LastZone(_))));
        assert!(matches!(scale_time(&m, "A", -1.0), Err(AdaptError::BadFactor(_))));
        assert!(set_weights(&m, &[0.5]).is_err());
    }

    #[test]
    fn rename_tracks_twins() {
        let d = duplicate_zone(&three_zone(), "A", "A2").unwrap();
        let r = rename_zone(&d, "A2", "Annex").unwrap();
        assert_eq!(r.twins, vec![("A".to_string(), "Annex".to_string())]);
        let back = rename_zone(&remove_zone(&r, "Annex").unwrap(), "A", "A").unwrap();
        assert_eq!(back, three_zone());
    }

    #[test]
    fn script_reports_failing_index() {
        let script: AdaptationScript = serde_json::from_str(
            r#"[{"op":"scale_time","label":"A","factor":2.0},
                {"op":"duplicate_zone","label":"B","new_label":"B2"},
                {"op":"remove_zone","label":"nope"}]"#,
        )
        .unwrap();
        let err = apply_script(&three_zone(), &script).unwrap_err();
        assert!(matches!(err, AdaptError::Directive { index: 2, op: "remove_zone", .. }), "{err}");
        assert_eq!(apply_script(&three_zone(), &[]).unwrap(), three_zone());
        let ok = apply_script(&three_zone(), &script[..2]).unwrap();
        assert_eq!(ok.clusters[0].times.0, vec![120.0, 120.0, 30.0, 120.0]);
    }
}
