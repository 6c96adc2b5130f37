//! Synthetic campus scenario: a three-level hierarchy of buildings, wings and
//! APs, and an access log of users whose sessions center on a home AP.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::hierarchy::{load_hierarchy, HierarchyDocument, HierarchyTree, RegionId};
use crate::ingest::{Sample, SampleStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampusConfig {
    pub buildings: usize,
    /// Wings per building, cycled when shorter than `buildings`.
    pub wings: Vec<usize>,
    pub aps_per_wing: usize,
    /// Number of distinct home APs; user `u` has home type `u % user_types`.
    pub user_types: usize,
    pub users: usize,
    pub sessions_per_user: usize,
    pub poll_interval_s: u64,
    pub mean_home_stay_s: f64,
    /// Chance that a session includes a short visit to a random AP.
    pub detour_prob: f64,
    pub seed: u64,
}

impl Default for CampusConfig {
    fn default() -> Self {
        Self {
            buildings: 12,
            wings: vec![3],
            aps_per_wing: 4,
            user_types: 24,
            users: 1200,
            sessions_per_user: 3,
            poll_interval_s: 300,
            mean_home_stay_s: 3600.0,
            detour_prob: 0.3,
            seed: 0,
        }
    }
}

impl CampusConfig {
    /// 18 buildings and 74 wings: 93 regions in total.
    pub fn large() -> Self {
        let mut wings = vec![5, 5];
        wings.extend([4; 16]);
        Self { buildings: 18, wings, aps_per_wing: 3, user_types: 36, users: 1500, ..Self::default() }
    }

    fn wings_of(&self, building: usize) -> usize {
        self.wings[building % self.wings.len()]
    }
}

#[derive(Debug, Clone)]
pub struct Campus {
    pub documents: Vec<HierarchyDocument>,
    pub tree: HierarchyTree,
    pub store: SampleStore,
}

pub fn building_name(b: usize) -> String {
    format!("B{:02}", b + 1)
}

pub fn wing_name(b: usize, w: usize) -> String {
    format!("{}-W{}", building_name(b), w + 1)
}

pub fn ap_name(b: usize, w: usize, a: usize) -> String {
    format!("{}-AP{:02}", wing_name(b, w), a + 1)
}

pub fn campus_hierarchy(cfg: &CampusConfig) -> Vec<HierarchyDocument> {
    let mut root = IndexMap::new();
    let mut docs = Vec::new();
    for b in 0..cfg.buildings {
        let mut wings = IndexMap::new();
        for w in 0..cfg.wings_of(b) {
            let aps: Vec<String> = (0..cfg.aps_per_wing).map(|a| ap_name(b, w, a)).collect();
            docs.push(HierarchyDocument {
                region: RegionId::wing(building_name(b), wing_name(b, w)),
                zones: aps.iter().map(|ap| (ap.clone(), vec![ap.clone()])).collect(),
                parent_zone: Some(wing_name(b, w)),
            });
            wings.insert(wing_name(b, w), aps);
        }
        root.insert(building_name(b), wings.values().flatten().cloned().collect());
        docs.push(HierarchyDocument {
            region: RegionId::building(building_name(b)),
            zones: wings,
            parent_zone: Some(building_name(b)),
        });
    }
    docs.insert(0, HierarchyDocument { region: RegionId::root(), zones: root, parent_zone: None });
    docs
}

pub fn generate_campus(cfg: &CampusConfig) -> Campus {
    let documents = campus_hierarchy(cfg);
    let tree = load_hierarchy(documents.clone()).expect("generated hierarchy is valid");
    let all_aps: Vec<String> = tree.root().ap_union().into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let homes: Vec<String> = (0..cfg.user_types.max(1))
        .map(|t| {
            let b = t % cfg.buildings;
            let w = (t / cfg.buildings) % cfg.wings_of(b);
            let a = (t / cfg.buildings / cfg.wings_of(b)) % cfg.aps_per_wing;
            ap_name(b, w, a)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let poll = cfg.poll_interval_s.max(1);
    let mut samples = Vec::new();
    for u in 0..cfg.users {
        let user = format!("u{u:05}");
        let home = &homes[u % homes.len()];
        let mut clock: u64 = rng.random_range(0..86_400);
        for _ in 0..cfg.sessions_per_user {
            let stay = |rng: &mut ChaCha8Rng, mean: f64| {
                let e: f64 = rng.sample(Exp1);
                ((e * mean) as u64).max(poll)
            };
            let mut visits = vec![(home.clone(), stay(&mut rng, cfg.mean_home_stay_s))];
            if rng.random_bool(cfg.detour_prob) {
                let other = all_aps[rng.random_range(0..all_aps.len())].clone();
                let detour = (other, stay(&mut rng, cfg.mean_home_stay_s / 4.0));
                if rng.random_bool(0.5) {
                    visits.insert(0, detour);
                } else {
                    visits.push(detour);
                }
            }
            for (ap, duration) in visits {
                let end = clock + duration;
                while clock < end {
                    samples.push(Sample { timestamp: clock, user_id: user.clone(), ap_id: ap.clone() });
                    clock += poll;
                }
            }
            // the last poll closes the session
            samples.push(Sample { timestamp: clock, user_id: user.clone(), ap_id: samples.last().unwrap().ap_id.clone() });
            clock += rng.random_range(4 * 3600..10 * 3600);
        }
    }
    Campus { documents, tree, store: SampleStore::from_samples(samples) }
}
