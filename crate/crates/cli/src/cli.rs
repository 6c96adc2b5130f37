use std::path::PathBuf;

use apmob_core::hierarchy::RegionId;
use apmob_core::model::{ClusterChoice, ThresholdChoice, ROW_SUM_TOL};
use apmob_core::sessions::default_grid;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::CliError;
use crate::files::InputFormat;

#[derive(Debug, Parser)]
#[command(name = "apmob", version, about = "Hierarchical user-mobility models from wireless access logs")]
pub struct Cli {
    /// Print errors as one JSON object on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse raw logs into a canonical sample store.
    Ingest(IngestArgs),
    /// Apply cleaning rules to a sample store.
    Clean(CleanArgs),
    /// Split a region's traffic into sessions and sweep the gap threshold.
    Sessions(SessionsArgs),
    /// Build the mobility model of one region.
    Model(ModelArgs),
    /// Generate a synthetic trace from a model.
    Synth(SynthArgs),
    /// Apply an adaptation script to a model.
    Adapt(AdaptArgs),
    /// Compare two models, or round-trip one through synthesis.
    Validate(ValidateArgs),
    /// Export chord flows and stay times for plotting.
    Plotdata(PlotdataArgs),
    /// Model every region of a hierarchy from a run configuration.
    Pipeline(PipelineArgs),
    /// Check hierarchy documents and report problems.
    CheckHierarchy(CheckHierarchyArgs),
    /// Write a synthetic campus: hierarchy, log and run configuration.
    Campus(CampusArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Log file (CSV, JSON lines or proximity JSON); repeat to merge.
    #[arg(long, short, value_name = "PATH")]
    pub input: Vec<PathBuf>,
    /// Input format; by default taken from each file's extension.
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegionArgs {
    /// Hierarchy document; repeat for every level.
    #[arg(long = "hierarchy", value_name = "PATH", required = true)]
    pub hierarchy: Vec<PathBuf>,
    /// Region to model, e.g. `lv1/bldgAT`; defaults to the root.
    #[arg(long, value_parser = parse_region, conflicts_with = "flat")]
    pub region: Option<RegionId>,
    /// Model every AP of the tree as one flat region.
    #[arg(long)]
    pub flat: bool,
}

fn parse_region(s: &str) -> Result<RegionId, String> {
    s.parse()
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(multiple = false)]
pub struct ThresholdArgs {
    /// Sweep grid in minutes, `start:end[:step]`.
    #[arg(long, value_name = "A:B[:STEP]")]
    pub sweep: Option<String>,
    /// Fixed session gap threshold in minutes.
    #[arg(long, value_name = "MIN")]
    pub threshold: Option<f64>,
    /// No gap rule: each user's stay in the region is one session.
    #[arg(long)]
    pub unbounded: bool,
}

impl ThresholdArgs {
    pub fn choice(&self) -> Result<ThresholdChoice, CliError> {
        Ok(match (&self.sweep, self.threshold, self.unbounded) {
            (Some(spec), _, _) => ThresholdChoice::Sweep(parse_grid(spec)?),
            (_, Some(t), _) => ThresholdChoice::Fixed(t),
            (_, _, true) => ThresholdChoice::Unbounded,
            _ => ThresholdChoice::Sweep(default_grid()),
        })
    }
}

/// `1:60` is 1, 2, ..., 60; `5:240:5` is 5, 10, ..., 240.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::usage(format!("bad sweep `{spec}`: expected start:end[:step] with 0 < start <= end, step > 0"));
    let parts: Vec<f64> = spec.split(':').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let (start, end, step) = match parts[..] {
        [a, b] => (a, b, 1.0),
        [a, b, s] => (a, b, s),
        _ => return Err(bad()),
    };
    if !(start > 0.0 && end >= start && step > 0.0 && end.is_finite()) {
        return Err(bad());
    }
    let n = ((end - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(multiple = false)]
pub struct ClusterArgs {
    /// Choose k at the elbow of k = 1..K.
    #[arg(long, value_name = "K")]
    pub elbow: Option<usize>,
    /// Fixed number of user types.
    #[arg(long)]
    pub k: Option<usize>,
}

impl ClusterArgs {
    pub fn choice(&self) -> ClusterChoice {
        match (self.k, self.elbow) {
            (Some(k), _) => ClusterChoice::Fixed(k),
            (_, Some(k_max)) => ClusterChoice::Elbow { k_max },
            _ => ClusterChoice::Elbow { k_max: 30 },
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Sample store to write (`.csv` or `.jsonl`).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CleanArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Cleaning rules JSON; the flags below add to it.
    #[arg(long)]
    pub rules: Option<PathBuf>,
    /// Drop users seen only once.
    #[arg(long)]
    pub drop_single_connection_users: bool,
    #[arg(long, value_name = "AP")]
    pub exclude_ap: Vec<String>,
    #[arg(long, value_name = "USER")]
    pub exclude_user: Vec<String>,
    /// Keep samples in `start:end` (inclusive, epoch seconds).
    #[arg(long, value_name = "START:END")]
    pub window: Option<String>,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SessionsArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Handoff-filtered session trace CSV; a sweep also writes
    /// `<stem>.sweep.csv` beside it.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ModelArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub region: RegionArgs,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub clusters: ClusterArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// k-means restarts per k.
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Model JSON; sweep and elbow CSVs are written beside it.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// Number of synthetic users.
    #[arg(long)]
    pub users: usize,
    /// Mean inter-arrival in seconds, or `from-data`.
    #[arg(long, default_value = "from-data")]
    pub interarrival: String,
    /// User-type weights replacing the model's popularities.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Epoch second of the first arrival.
    #[arg(long, default_value_t = 0)]
    pub start_time: u64,
    /// Row-sum tolerance accepted when loading the model.
    #[arg(long, default_value_t = ROW_SUM_TOL)]
    pub tolerance: f64,
    /// Trace to write (`.csv` or `.jsonl`).
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AdaptArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// JSON array of directives.
    #[arg(long)]
    pub script: PathBuf,
    #[arg(long, default_value_t = ROW_SUM_TOL)]
    pub tolerance: f64,
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    /// Reference model (model A).
    #[arg(long, short)]
    pub model: Option<PathBuf>,
    /// Model to compare against model A.
    #[arg(long, requires = "model", conflicts_with = "round_trip")]
    pub against: Option<PathBuf>,
    /// Regenerate a model from a synthetic trace of model A (or of a model
    /// built from `--input`) and compare.
    #[arg(long)]
    pub round_trip: bool,
    /// Synthetic users for the round trip; defaults to the source session count.
    #[arg(long)]
    pub sessions: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave out the IN column, the OUT row and IN -> OUT.
    #[arg(long)]
    pub exclude_structural_zeros: bool,
    #[arg(long, default_value_t = ROW_SUM_TOL)]
    pub tolerance: f64,
    #[command(flatten)]
    pub input: InputArgs,
    /// Hierarchy for a round trip from data.
    #[arg(long = "hierarchy", value_name = "PATH")]
    pub hierarchy: Vec<PathBuf>,
    #[arg(long, value_parser = parse_region)]
    pub region: Option<RegionId>,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    #[command(flatten)]
    pub clusters: ClusterArgs,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    /// Also write the regenerated model of a round trip.
    #[arg(long)]
    pub regenerated: Option<PathBuf>,
    /// RMSE report JSON.
    #[arg(long, short)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PlotdataArgs {
    #[arg(long, short)]
    pub model: PathBuf,
    /// Include zone -> OUT flows in the chord data.
    #[arg(long)]
    pub include_out: bool,
    /// Leave out IN -> zone flows.
    #[arg(long)]
    pub exclude_in: bool,
    #[arg(long, default_value_t = ROW_SUM_TOL)]
    pub tolerance: f64,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    /// Run configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Worker threads; defaults to available cores capped by region count.
    #[arg(long)]
    #[serde(skip)]
    pub jobs: Option<usize>,
    /// Overrides the configuration's output directory.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckHierarchyArgs {
    #[arg(long = "hierarchy", value_name = "PATH", required = true)]
    pub hierarchy: Vec<PathBuf>,
    /// Optional log; APs it contains that the tree lacks are reported.
    #[command(flatten)]
    pub input: InputArgs,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CampusArgs {
    /// The 93-region layout instead of the default 49-region one.
    #[arg(long)]
    pub large: bool,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
}
