//! Geospatial decomposition of the area under study.
//!
//! A region (campus, building, wing) is split into zones, each a disjoint set
//! of access points. A zone can be refined by exactly one child region one
//! level down whose zones cover exactly the parent zone's APs. Every region in
//! the tree is an independent modeling task.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::SampleStore;

/// `<level, building, wing>` identifier of a region under study.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RegionId {
    pub level: u32,
    #[serde(default)]
    pub building: Option<String>,
    #[serde(default)]
    pub wing: Option<String>,
}

impl RegionId {
    pub fn root() -> Self {
        Self { level: 0, building: None, wing: None }
    }

    pub fn building(building: impl Into<String>) -> Self {
        Self { level: 1, building: Some(building.into()), wing: None }
    }

    pub fn wing(building: impl Into<String>, wing: impl Into<String>) -> Self {
        Self { level: 2, building: Some(building.into()), wing: Some(wing.into()) }
    }

    /// Checks the level/field consistency rule.
    pub fn check(&self) -> Result<(), String> {
        match (self.level, &self.building, &self.wing) {
            (0, None, None) | (1, Some(_), None) | (2, Some(_), Some(_)) => Ok(()),
            (0, ..) => Err("level 0 must not name a building or wing".into()),
            (1, ..) => Err("level 1 needs a building and no wing".into()),
            (2, ..) => Err("level 2 needs both building and wing".into()),
            (l, ..) => Err(format!("level {l} is not supported (0..=2)")),
        }
    }

    /// Identifier of the region this one refines.
    pub fn parent(&self) -> Option<RegionId> {
        match self.level {
            0 => None,
            1 => Some(RegionId::root()),
            _ => self.building.clone().map(RegionId::building),
        }
    }

    /// File-name friendly slug, e.g. `lv1_bldgAT`.
    pub fn slug(&self) -> String {
        let mut s = format!("lv{}", self.level);
        for part in [&self.building, &self.wing].into_iter().flatten() {
            s.push('_');
            s.extend(part.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }));
        }
        s
    }
}

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "<lv{}, {}, {}>",
            self.level,
            self.building.as_deref().unwrap_or("-"),
            self.wing.as_deref().unwrap_or("-")
        )
    }
}

/// Parses `lv0`, `lv1/bldgAT` or `lv2/bldgAT/0flE`.
impl FromStr for RegionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split('/');
        let level = parts
            .next()
            .and_then(|p| p.strip_prefix("lv"))
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| format!("bad region `{s}`: expected lvN[/building[/wing]]"))?;
        let id = RegionId {
            level,
            building: parts.next().map(str::to_owned),
            wing: parts.next().map(str::to_owned),
        };
        if parts.next().is_some() {
            return Err(format!("bad region `{s}`: too many components"));
        }
        id.check().map_err(|e| format!("bad region `{s}`: {e}"))?;
        Ok(id)
    }
}

/// One problem found while validating hierarchy documents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HierarchyIssue {
    InvalidRegionId { region: RegionId, reason: String },
    DuplicateRegion { region: RegionId },
    NoZones { region: RegionId },
    EmptyZone { region: RegionId, zone: String },
    /// APs listed under more than one zone of the same region.
    Overlap { region: RegionId, aps: Vec<String> },
    MissingRoot,
    DanglingParent { region: RegionId, parent: RegionId },
    UnknownParentZone { region: RegionId, parent_zone: String },
    UnresolvedParentZone { region: RegionId },
    ZoneRefinedTwice { parent: RegionId, zone: String, children: Vec<RegionId> },
    Coverage { region: RegionId, parent_zone: String, missing: Vec<String>, extra: Vec<String> },
}

impl fmt::Display for HierarchyIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use HierarchyIssue::*;
        match self {
            InvalidRegionId { region, reason } => write!(f, "{region}: invalid region id: {reason}"),
            DuplicateRegion { region } => write!(f, "{region}: defined more than once"),
            NoZones { region } => write!(f, "{region}: region has no zones"),
            EmptyZone { region, zone } => write!(f, "{region}: zone `{zone}` has no APs"),
            Overlap { region, aps } => write!(f, "{region}: APs in more than one zone: {}", aps.join(", ")),
            MissingRoot => write!(f, "no level-0 region"),
            DanglingParent { region, parent } => write!(f, "{region}: parent region {parent} not defined"),
            UnknownParentZone { region, parent_zone } => {
                write!(f, "{region}: parent zone `{parent_zone}` does not exist")
            }
            UnresolvedParentZone { region } => write!(f, "{region}: cannot tell which parent zone it refines"),
            ZoneRefinedTwice { parent, zone, children } => {
                let names: Vec<_> = children.iter().map(ToString::to_string).collect();
                write!(f, "{parent}: zone `{zone}` refined by several regions: {}", names.join(", "))
            }
            Coverage { region, parent_zone, missing, extra } => write!(
                f,
                "{region}: APs do not match parent zone `{parent_zone}` (missing: [{}], extra: [{}])",
                missing.join(", "),
                extra.join(", ")
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum HierarchyError {
    #[error("invalid hierarchy:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<HierarchyIssue>),
    #[error("hierarchy json error in {source_name}: {error}")]
    Json { source_name: String, error: serde_json::Error },
    #[error("cannot read hierarchy file {path}: {error}")]
    Io { path: String, error: std::io::Error },
    #[error("region {0} not found in hierarchy")]
    UnknownRegion(RegionId),
}

/// On-disk form of one region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyDocument {
    pub region: RegionId,
    pub zones: IndexMap<String, Vec<String>>,
    /// Label of the parent zone this region refines. Optional: when absent it
    /// is inferred from the building/wing name or from AP overlap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_zone: Option<String>,
}

impl HierarchyDocument {
    pub fn from_json(text: &str, source_name: &str) -> Result<Self, HierarchyError> {
        serde_json::from_str(text)
            .map_err(|error| HierarchyError::Json { source_name: source_name.to_owned(), error })
    }
}

/// A validated region: ordered zones with pairwise-disjoint AP sets.
#[derive(Debug, Clone)]
pub struct RegionSpec {
    id: RegionId,
    zones: IndexMap<String, BTreeSet<String>>,
    parent: Option<(RegionId, String)>,
    ap_to_zone: HashMap<String, usize>,
}

impl PartialEq for RegionSpec {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.zones == other.zones && self.parent == other.parent
    }
}

impl RegionSpec {
    /// Builds a region, checking non-empty zones and disjointness.
    pub fn new(id: RegionId, zones: IndexMap<String, BTreeSet<String>>) -> Result<Self, HierarchyError> {
        let mut issues = Vec::new();
        let spec = Self::build(id, zones, &mut issues);
        if issues.is_empty() {
            Ok(spec)
        } else {
            Err(HierarchyError::Invalid(issues))
        }
    }

    fn build(id: RegionId, zones: IndexMap<String, BTreeSet<String>>, issues: &mut Vec<HierarchyIssue>) -> Self {
        if let Err(reason) = id.check() {
            issues.push(HierarchyIssue::InvalidRegionId { region: id.clone(), reason });
        }
        if zones.is_empty() {
            issues.push(HierarchyIssue::NoZones { region: id.clone() });
        }
        let mut ap_to_zone = HashMap::new();
        let mut overlap = BTreeSet::new();
        for (idx, (label, aps)) in zones.iter().enumerate() {
            if aps.is_empty() {
                issues.push(HierarchyIssue::EmptyZone { region: id.clone(), zone: label.clone() });
            }
            for ap in aps {
                if ap_to_zone.insert(ap.clone(), idx).is_some() {
                    overlap.insert(ap.clone());
                }
            }
        }
        if !overlap.is_empty() {
            issues.push(HierarchyIssue::Overlap { region: id.clone(), aps: overlap.into_iter().collect() });
        }
        Self { id, zones, parent: None, ap_to_zone }
    }

    /// Non-hierarchical region: one zone per AP, labelled by the AP id.
    pub fn flat<I, S>(id: RegionId, aps: I) -> Result<Self, HierarchyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let zones = aps
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<String>>()
            .into_iter()
            .map(|ap| (ap.clone(), BTreeSet::from([ap])))
            .collect();
        Self::new(id, zones)
    }

    pub fn id(&self) -> &RegionId {
        &self.id
    }

    pub fn zones(&self) -> &IndexMap<String, BTreeSet<String>> {
        &self.zones
    }

    pub fn zone_labels(&self) -> Vec<String> {
        self.zones.keys().cloned().collect()
    }

    pub fn n_zones(&self) -> usize {
        self.zones.len()
    }

    /// Parent region and the label of the parent zone this region refines.
    pub fn parent(&self) -> Option<(&RegionId, &str)> {
        self.parent.as_ref().map(|(id, zone)| (id, zone.as_str()))
    }

    pub fn zone_index(&self, ap: &str) -> Option<usize> {
        self.ap_to_zone.get(ap).copied()
    }

    /// The unique zone containing `ap`, or `None` when the AP is outside.
    pub fn zone_of(&self, ap: &str) -> Option<&str> {
        self.zone_index(ap).map(|i| self.zones.get_index(i).expect("index in range").0.as_str())
    }

    pub fn ap_union(&self) -> BTreeSet<String> {
        self.ap_to_zone.keys().cloned().collect()
    }

    /// True when every zone holds exactly one AP.
    pub fn is_leaf(&self) -> bool {
        self.zones.values().all(|aps| aps.len() == 1)
    }

    pub fn to_document(&self) -> HierarchyDocument {
        HierarchyDocument {
            region: self.id.clone(),
            zones: self.zones.iter().map(|(k, v)| (k.clone(), v.iter().cloned().collect())).collect(),
            parent_zone: self.parent.as_ref().map(|(_, z)| z.clone()),
        }
    }
}

/// Validated tree of regions keyed by id.
#[derive(Debug, Clone)]
pub struct HierarchyTree {
    regions: BTreeMap<RegionId, RegionSpec>,
}

impl HierarchyTree {
    pub fn regions(&self) -> &BTreeMap<RegionId, RegionSpec> {
        &self.regions
    }

    pub fn region(&self, id: &RegionId) -> Result<&RegionSpec, HierarchyError> {
        self.regions.get(id).ok_or_else(|| HierarchyError::UnknownRegion(id.clone()))
    }

    pub fn root(&self) -> &RegionSpec {
        &self.regions[&RegionId::root()]
    }

    /// Number of levels present.
    pub fn depth(&self) -> usize {
        self.regions.keys().map(|id| id.level as usize + 1).max().unwrap_or(0)
    }

    /// One task per region, breadth first by level, then by region id.
    pub fn enumerate_modeling_tasks(&self) -> Vec<&RegionSpec> {
        // BTreeMap order on RegionId is (level, building, wing).
        self.regions.values().collect()
    }

    /// Child region refining `zone` of `parent`, if one was loaded.
    pub fn child_of(&self, parent: &RegionId, zone: &str) -> Option<&RegionSpec> {
        self.regions
            .values()
            .find(|r| r.parent.as_ref().is_some_and(|(p, z)| p == parent && z == zone))
    }

    /// Zones with more than one AP that no loaded region refines.
    pub fn unrefined_zones(&self) -> Vec<(RegionId, String)> {
        let mut out = Vec::new();
        for region in self.regions.values() {
            for (label, aps) in region.zones() {
                if aps.len() > 1 && self.child_of(region.id(), label).is_none() {
                    out.push((region.id().clone(), label.clone()));
                }
            }
        }
        out
    }

    /// APs observed in the store that the hierarchy does not know about.
    pub fn unknown_aps(&self, store: &SampleStore) -> Vec<String> {
        let root = self.root();
        store.ap_index().iter().filter(|ap| root.zone_index(ap).is_none()).cloned().collect()
    }

    /// Flat, one-zone-per-AP region covering every AP of the root.
    pub fn flat_region(&self) -> RegionSpec {
        RegionSpec::flat(RegionId::root(), self.root().ap_union()).expect("root APs are disjoint")
    }
}

/// Validates a set of region documents and assembles the tree.
pub fn load_hierarchy(documents: Vec<HierarchyDocument>) -> Result<HierarchyTree, HierarchyError> {
    let mut issues = Vec::new();
    let mut regions: BTreeMap<RegionId, RegionSpec> = BTreeMap::new();
    let mut requested_parent_zone: HashMap<RegionId, String> = HashMap::new();

    for doc in documents {
        let zones = doc.zones.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
        let spec = RegionSpec::build(doc.region.clone(), zones, &mut issues);
        if regions.contains_key(&doc.region) {
            issues.push(HierarchyIssue::DuplicateRegion { region: doc.region });
            continue;
        }
        if let Some(pz) = doc.parent_zone {
            requested_parent_zone.insert(doc.region.clone(), pz);
        }
        regions.insert(doc.region, spec);
    }

    if !regions.contains_key(&RegionId::root()) {
        issues.push(HierarchyIssue::MissingRoot);
    }

    // Resolve which parent zone each non-root region refines.
    let mut links: Vec<(RegionId, RegionId, String)> = Vec::new();
    for (id, spec) in &regions {
        let Some(parent_id) = id.parent() else { continue };
        let Some(parent) = regions.get(&parent_id) else {
            issues.push(HierarchyIssue::DanglingParent { region: id.clone(), parent: parent_id });
            continue;
        };
        let zone = match requested_parent_zone.get(id) {
            Some(pz) if parent.zones.contains_key(pz) => Some(pz.clone()),
            Some(pz) => {
                issues.push(HierarchyIssue::UnknownParentZone { region: id.clone(), parent_zone: pz.clone() });
                continue;
            }
            None => infer_parent_zone(id, spec, parent),
        };
        match zone {
            Some(z) => links.push((id.clone(), parent_id, z)),
            None => issues.push(HierarchyIssue::UnresolvedParentZone { region: id.clone() }),
        }
    }

    let mut refiners: BTreeMap<(RegionId, String), Vec<RegionId>> = BTreeMap::new();
    for (child, parent, zone) in &links {
        refiners.entry((parent.clone(), zone.clone())).or_default().push(child.clone());
    }
    for ((parent, zone), children) in &refiners {
        if children.len() > 1 {
            issues.push(HierarchyIssue::ZoneRefinedTwice {
                parent: parent.clone(),
                zone: zone.clone(),
                children: children.clone(),
            });
        }
    }

    for (child, parent, zone) in &links {
        let expected = &regions[parent].zones[zone];
        let actual = regions[child].ap_union();
        let missing: Vec<String> = expected.difference(&actual).cloned().collect();
        let extra: Vec<String> = actual.difference(expected).cloned().collect();
        if !missing.is_empty() || !extra.is_empty() {
            issues.push(HierarchyIssue::Coverage {
                region: child.clone(),
                parent_zone: zone.clone(),
                missing,
                extra,
            });
        }
    }

    if !issues.is_empty() {
        return Err(HierarchyError::Invalid(issues));
    }
    for (child, parent, zone) in links {
        regions.get_mut(&child).expect("linked region exists").parent = Some((parent, zone));
    }
    Ok(HierarchyTree { regions })
}

/// Zone named like the child's building/wing, else the zone sharing most APs.
fn infer_parent_zone(id: &RegionId, child: &RegionSpec, parent: &RegionSpec) -> Option<String> {
    let name = if id.level == 1 { id.building.as_deref() } else { id.wing.as_deref() };
    if let Some(name) = name {
        if parent.zones.contains_key(name) {
            return Some(name.to_owned());
        }
    }
    let mut votes = vec![0usize; parent.n_zones()];
    for ap in child.ap_to_zone.keys() {
        if let Some(z) = parent.zone_index(ap) {
            votes[z] += 1;
        }
    }
    let (best, &count) = votes.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (count > 0).then(|| parent.zones.get_index(best).expect("index in range").0.clone())
}

pub fn load_hierarchy_files<P: AsRef<Path>>(paths: &[P]) -> Result<HierarchyTree, HierarchyError> {
    let mut docs = Vec::with_capacity(paths.len());
    for path in paths {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|error| HierarchyError::Io { path: path.display().to_string(), error })?;
        docs.push(HierarchyDocument::from_json(&text, &path.display().to_string())?);
    }
    load_hierarchy(docs)
}

/// Outcome of validating hierarchy documents, for humans and machines.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub regions: usize,
    pub depth: usize,
    pub issues: Vec<HierarchyIssue>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn from_result(result: &Result<HierarchyTree, HierarchyError>, store: Option<&SampleStore>) -> Self {
        match result {
            Ok(tree) => {
                let mut warnings: Vec<String> = tree
                    .unrefined_zones()
                    .into_iter()
                    .map(|(r, z)| format!("{r}: zone `{z}` has several APs but no child region"))
                    .collect();
                if let Some(store) = store {
                    let unknown = tree.unknown_aps(store);
                    if !unknown.is_empty() {
                        warnings.push(format!(
                            "{} AP(s) in the samples are not in the hierarchy and count as outside: {}",
                            unknown.len(),
                            unknown.join(", ")
                        ));
                    }
                }
                Self { valid: true, regions: tree.regions.len(), depth: tree.depth(), issues: vec![], warnings }
            }
            Err(HierarchyError::Invalid(issues)) => {
                Self { valid: false, regions: 0, depth: 0, issues: issues.clone(), warnings: vec![] }
            }
            Err(other) => Self {
                valid: false,
                regions: 0,
                depth: 0,
                issues: vec![],
                warnings: vec![other.to_string()],
            },
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = if self.valid {
            format!("hierarchy OK: {} region(s), depth {}\n", self.regions, self.depth)
        } else {
            "hierarchy INVALID\n".to_string()
        };
        for issue in &self.issues {
            out.push_str(&format!("error: {issue}\n"));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(region: RegionId, zones: &[(&str, &[&str])]) -> HierarchyDocument {
        HierarchyDocument {
            region,
            zones: zones
                .iter()
                .map(|(z, aps)| (z.to_string(), aps.iter().map(|a| a.to_string()).collect()))
                .collect(),
            parent_zone: None,
        }
    }

    fn small_tree_docs() -> Vec<HierarchyDocument> {
        vec![
            doc(RegionId::root(), &[("bA", &["a1", "a2", "a3"]), ("bB", &["b1"])]),
            doc(RegionId::building("bA"), &[("north", &["a1", "a2"]), ("east", &["a3"])]),
            doc(RegionId::wing("bA", "north"), &[("a1", &["a1"]), ("a2", &["a2"])]),
        ]
    }

    #[test]
    fn region_id_rules_and_parsing() {
        assert!(RegionId::root().check().is_ok());
        assert!(RegionId { level: 1, building: None, wing: None }.check().is_err());
        assert!(RegionId { level: 0, building: Some("x".into()), wing: None }.check().is_err());
        assert!(RegionId { level: 3, building: Some("x".into()), wing: Some("y".into()) }.check().is_err());
        assert_eq!("lv2/bldgAT/0flE".parse::<RegionId>().unwrap(), RegionId::wing("bldgAT", "0flE"));
        assert!("lv1".parse::<RegionId>().is_err());
        assert_eq!(RegionId::wing("bldgAT", "0flE").to_string(), "<lv2, bldgAT, 0flE>");
        assert_eq!(RegionId::building("bldg AT").slug(), "lv1_bldg_AT");
    }

    #[test]
    fn small_tree_loads() {
        let tree = load_hierarchy(small_tree_docs()).unwrap();
        assert_eq!(tree.depth(), 3);
        let tasks: Vec<_> = tree.enumerate_modeling_tasks().iter().map(|r| r.id().clone()).collect();
        assert_eq!(tasks, vec![RegionId::root(), RegionId::building("bA"), RegionId::wing("bA", "north")]);
        let lv1 = tree.region(&RegionId::building("bA")).unwrap();
        assert_eq!(lv1.parent(), Some((&RegionId::root(), "bA")));
        // `east` is a single AP and needs no refinement; `bB` likewise.
        assert!(tree.unrefined_zones().is_empty());
    }

    #[test]
    fn zone_of_inside_and_outside() {
        let tree = load_hierarchy(small_tree_docs()).unwrap();
        let lv1 = tree.region(&RegionId::building("bA")).unwrap();
        assert_eq!(lv1.zone_of("a3"), Some("east"));
        assert_eq!(lv1.zone_of("b1"), None);
        let leaf = tree.region(&RegionId::wing("bA", "north")).unwrap();
        assert!(leaf.is_leaf());
        assert_eq!(leaf.zone_of("a2"), Some("a2"));
    }

    #[test]
    fn degenerate_single_level() {
        let tree = load_hierarchy(vec![doc(RegionId::root(), &[("x", &["x"]), ("y", &["y"])])]).unwrap();
        assert_eq!(tree.depth(), 1);
        assert!(tree.root().is_leaf());
        assert_eq!(tree.enumerate_modeling_tasks().len(), 1);
    }

    #[test]
    fn coverage_error_names_missing_ap() {
        let mut docs = small_tree_docs();
        docs[1] = doc(RegionId::building("bA"), &[("north", &["a1", "a2"])]);
        let err = load_hierarchy(docs).unwrap_err();
        let HierarchyError::Invalid(issues) = err else { panic!() };
        assert!(issues.iter().any(|i| matches!(
            i,
            HierarchyIssue::Coverage { missing, extra, .. } if missing == &["a3"] && extra.is_empty()
        )));
    }

    #[test]
    fn overlap_names_aps() {
        let err = RegionSpec::new(
            RegionId::root(),
            [
                ("z1".to_string(), BTreeSet::from(["p".to_string(), "q".to_string()])),
                ("z2".to_string(), BTreeSet::from(["q".to_string()])),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("APs in more than one zone: q"));
    }

    #[test]
    fn dangling_and_double_refinement() {
        let docs = vec![
            doc(RegionId::root(), &[("bA", &["a1", "a2"])]),
            doc(RegionId::wing("bZ", "w"), &[("a1", &["a1"])]),
        ];
        let HierarchyError::Invalid(issues) = load_hierarchy(docs).unwrap_err() else { panic!() };
        assert!(matches!(issues[0], HierarchyIssue::DanglingParent { .. }));

        let mut second = doc(RegionId::building("other"), &[("n", &["a1"]), ("s", &["a2"])]);
        second.parent_zone = Some("bA".into());
        let docs = vec![
            doc(RegionId::root(), &[("bA", &["a1", "a2"])]),
            doc(RegionId::building("bA"), &[("n", &["a1"]), ("s", &["a2"])]),
            second,
        ];
        let HierarchyError::Invalid(issues) = load_hierarchy(docs).unwrap_err() else { panic!() };
        assert!(issues.iter().any(|i| matches!(i, HierarchyIssue::ZoneRefinedTwice { .. })));
    }

    #[test]
    fn parent_zone_inferred_from_overlap() {
        // Building id differs from the level-0 zone label.
        let docs = vec![
            doc(RegionId::root(), &[("bldg_AT", &["a1", "a2"]), ("bldg_X", &["x"])]),
            doc(RegionId::building("bldgAT"), &[("n", &["a1"]), ("s", &["a2"])]),
        ];
        let tree = load_hierarchy(docs).unwrap();
        let lv1 = tree.region(&RegionId::building("bldgAT")).unwrap();
        assert_eq!(lv1.parent().unwrap().1, "bldg_AT");
    }

    #[test]
    fn report_text_and_json() {
        let report = ValidationReport::from_result(&load_hierarchy(small_tree_docs()), None);
        assert!(report.valid);
        assert!(report.to_text().starts_with("hierarchy OK: 3 region(s), depth 3"));

        let mut docs = small_tree_docs();
        docs.push(docs[0].clone());
        let report = ValidationReport::from_result(&load_hierarchy(docs), None);
        assert!(!report.valid);
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["issues"][0]["kind"], "duplicate_region");
    }

    #[test]
    fn document_round_trip_keeps_zone_order() {
        let text = r#"{"region": {"level": 0, "building": null, "wing": null},
                       "zones": {"zeta": ["z"], "alpha": ["a"], "mid": ["m"]}}"#;
        let d = HierarchyDocument::from_json(text, "inline").unwrap();
        let tree = load_hierarchy(vec![d]).unwrap();
        assert_eq!(tree.root().zone_labels(), ["zeta", "alpha", "mid"]);
        assert_eq!(tree.root().to_document().zones.keys().collect::<Vec<_>>(), ["zeta", "alpha", "mid"]);
    }
}
