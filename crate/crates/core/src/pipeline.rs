//! Runs the modeling process over every region of a hierarchy, one region per
//! task. Failures stay local to their region.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::hierarchy::{HierarchyTree, RegionId, RegionSpec};
use crate::ingest::SampleStore;
use crate::model::{self, ModelBuild, ModelConfig, ModelError};

#[derive(Debug)]
pub struct RegionRun {
    pub region: RegionId,
    pub outcome: Result<ModelBuild, ModelError>,
    pub elapsed: Duration,
}

#[derive(Debug)]
pub struct PipelineRun {
    /// In modeling-task order.
    pub regions: Vec<RegionRun>,
    pub wall_time: Duration,
    pub jobs: usize,
}

/// Deterministic per-region outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub region: String,
    pub slug: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sessions: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionTiming {
    pub region: String,
    pub seconds: f64,
}

impl RegionRun {
    pub fn summary(&self) -> SummaryRow {
        let mut row = SummaryRow {
            region: self.region.to_string(),
            slug: self.region.slug(),
            ok: self.outcome.is_ok(),
            k: None,
            k_star: None,
            threshold_min: None,
            sessions: None,
            error: None,
        };
        match &self.outcome {
            Ok(b) => {
                let p = &b.model.provenance;
                row.k = Some(p.k);
                row.k_star = p.k_star;
                row.threshold_min = p.threshold_min;
                row.sessions = Some(p.source_sessions);
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    }
}

impl PipelineRun {
    pub fn summary(&self) -> Vec<SummaryRow> {
        self.regions.iter().map(RegionRun::summary).collect()
    }

    pub fn timings(&self) -> Vec<RegionTiming> {
        self.regions
            .iter()
            .map(|r| RegionTiming { region: r.region.to_string(), seconds: r.elapsed.as_secs_f64() })
            .collect()
    }

    pub fn failed(&self) -> usize {
        self.regions.iter().filter(|r| r.outcome.is_err()).count()
    }

    /// Sum of per-region times, i.e. the cost of a serial run.
    pub fn serial_time(&self) -> Duration {
        self.regions.iter().map(|r| r.elapsed).sum()
    }

    /// Largest chosen k over successful regions.
    pub fn max_k(&self) -> Option<usize> {
        self.regions.iter().filter_map(|r| r.outcome.as_ref().ok()).map(|b| b.model.k()).max()
    }
}

/// Available cores, capped by the number of regions.
pub fn default_jobs(n_regions: usize) -> usize {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    cores.min(n_regions).max(1)
}

pub fn run_region(store: &SampleStore, region: &RegionSpec, config: &ModelConfig) -> RegionRun {
    let start = Instant::now();
    let outcome = model::build_mobility_model(store, region, config);
    RegionRun { region: region.id().clone(), outcome, elapsed: start.elapsed() }
}

pub fn run_regions(store: &SampleStore, regions: &[&RegionSpec], config: &ModelConfig, jobs: Option<usize>) -> PipelineRun {
    let jobs = jobs.unwrap_or_else(|| default_jobs(regions.len())).max(1);
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    let runs = pool.install(|| regions.par_iter().map(|r| run_region(store, r, config)).collect());
    PipelineRun { regions: runs, wall_time: start.elapsed(), jobs }
}

/// Every region of the tree, in modeling-task order.
pub fn run_hierarchy(store: &SampleStore, tree: &HierarchyTree, config: &ModelConfig, jobs: Option<usize>) -> PipelineRun {
    run_regions(store, &tree.enumerate_modeling_tasks(), config, jobs)
}

/// Single region with one zone per AP of the tree.
pub fn run_flat(store: &SampleStore, tree: &HierarchyTree, config: &ModelConfig) -> RegionRun {
    run_region(store, &tree.flat_region(), config)
}
