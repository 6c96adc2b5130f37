use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use apmob_core::adapt::{self, AdaptationScript};
use apmob_core::campus::{self, CampusConfig};
use apmob_core::hierarchy::{self, HierarchyTree, RegionSpec, ValidationReport};
use apmob_core::ingest::{self, CleaningConfig, LogFormat, Sample};
use apmob_core::model::{self, ChordOptions, ClusterChoice, ModelBuild, ModelConfig, ThresholdChoice};
use apmob_core::pipeline;
use apmob_core::sessions;
use apmob_core::synth::{self, GenerationConfig, InterArrival};
use apmob_core::validate::{self, RmseOptions};
use apmob_core::ErrorKind;
use serde::{Deserialize, Serialize};

use crate::cli::*;
use crate::error::CliError;
use crate::files::{self, pretty, sibling, InputFormat, Run};

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Ingest(a) => ingest(a),
        Command::Clean(a) => clean(a),
        Command::Sessions(a) => sessions(a),
        Command::Model(a) => model(a),
        Command::Synth(a) => synth(a),
        Command::Adapt(a) => adapt(a),
        Command::Validate(a) => validate(a),
        Command::Plotdata(a) => plotdata(a),
        Command::Pipeline(a) => pipeline(a),
        Command::CheckHierarchy(a) => check_hierarchy(a),
        Command::Campus(a) => campus(a),
    }
}

fn log_bytes(samples: &[Sample], format: LogFormat) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    ingest::write_tuple_log(&mut out, samples, format)?;
    Ok(out)
}

fn ingest(args: IngestArgs) -> Result<(), CliError> {
    let mut run = Run::new("ingest", &args, None);
    let (store, skipped) = files::load_store(&mut run, &args.input.input, args.input.format)?;
    run.write(&args.output, &log_bytes(store.samples(), files::log_format(&args.output))?)?;
    run.note("store_digest", store.digest());
    run.finish_beside(&args.output)?;
    println!(
        "{} samples, {} users, {} APs; {skipped} rows skipped",
        store.len(),
        store.user_count(),
        store.ap_index().len()
    );
    Ok(())
}

fn parse_window(spec: &str) -> Result<(u64, u64), CliError> {
    let bad = || CliError::usage(format!("bad window `{spec}`: expected start:end epoch seconds"));
    let (a, b) = spec.split_once(':').ok_or_else(bad)?;
    let window = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
    if window.0 > window.1 {
        return Err(bad());
    }
    Ok(window)
}

fn clean(args: CleanArgs) -> Result<(), CliError> {
    let mut run = Run::new("clean", &args, None);
    let mut rules: CleaningConfig = match &args.rules {
        Some(path) => files::parse_config(&mut run, path)?,
        None => CleaningConfig::default(),
    };
    rules.drop_single_connection_users |= args.drop_single_connection_users;
    rules.excluded_ap_ids.extend(args.exclude_ap.iter().cloned());
    rules.excluded_user_ids.extend(args.exclude_user.iter().cloned());
    if let Some(w) = &args.window {
        rules.time_window = Some(parse_window(w)?);
    }
    let (store, _) = files::load_store(&mut run, &args.input.input, args.input.format)?;
    let cleaned = ingest::clean(&store, &rules);
    run.write(&args.output, &log_bytes(cleaned.samples(), files::log_format(&args.output))?)?;
    run.note("rules", &rules);
    run.note("store_digest", cleaned.digest());
    run.finish_beside(&args.output)?;
    println!("{} of {} samples kept, {} users", cleaned.len(), store.len(), cleaned.user_count());
    Ok(())
}

fn select_region(tree: &HierarchyTree, args: &RegionArgs) -> Result<RegionSpec, CliError> {
    if args.flat {
        return Ok(tree.flat_region());
    }
    match &args.region {
        Some(id) => tree.region(id).cloned().map_err(|e| CliError::usage(e.to_string())),
        None => Ok(tree.root().clone()),
    }
}

fn sessions(args: SessionsArgs) -> Result<(), CliError> {
    let mut run = Run::new("sessions", &args, None);
    let tree = files::load_tree(&mut run, &args.region.hierarchy)?;
    let region = select_region(&tree, &args.region)?;
    let (store, _) = files::load_store(&mut run, &args.input.input, args.input.format)?;
    let threshold = match args.threshold.choice()? {
        ThresholdChoice::Fixed(t) => t,
        ThresholdChoice::Unbounded => f64::INFINITY,
        ThresholdChoice::Sweep(grid) => {
            let sweep = sessions::sweep_threshold(&store, &region, &grid)?;
            run.write(&sibling(&args.output, "sweep.csv"), sweep.to_csv().as_bytes())?;
            if let Some(w) = &sweep.warning {
                eprintln!("warning: {w}");
            }
            sweep.chosen_min
        }
    };
    let split = sessions::split_sessions(&store, &region, threshold)?;
    let labels = region.zone_labels();
    let mut csv = String::from("session,user_id,time_stamp,zone\n");
    for (i, s) in split.iter().enumerate() {
        for e in &sessions::filter_handoffs(s).entries {
            csv.push_str(&format!("{i},{},{},{}\n", s.user_id, e.timestamp, labels[e.zone]));
        }
    }
    run.write(&args.output, csv.as_bytes())?;
    run.note("threshold_min", threshold_note(threshold));
    run.note("sessions", split.len());
    run.finish_beside(&args.output)?;
    println!("{} sessions in {} at threshold {}", split.len(), region.id(), threshold_text(threshold));
    Ok(())
}

fn threshold_note(t: f64) -> Option<f64> {
    t.is_finite().then_some(t)
}

fn threshold_text(t: f64) -> String {
    if t.is_finite() {
        format!("{t} min")
    } else {
        "unbounded".to_owned()
    }
}

/// Writes the model JSON and its sweep and elbow CSVs.
fn write_build(run: &mut Run, build: &ModelBuild, path: &Path) -> Result<(), CliError> {
    run.write(path, build.model.to_json().as_bytes())?;
    if let Some(sweep) = &build.sweep {
        run.write(&sibling(path, "sweep.csv"), sweep.to_csv().as_bytes())?;
    }
    if let Some(elbow) = &build.elbow {
        run.write(&sibling(path, "elbow.csv"), elbow.to_csv().as_bytes())?;
    }
    Ok(())
}

fn model(args: ModelArgs) -> Result<(), CliError> {
    let mut run = Run::new("model", &args, Some(args.seed));
    let tree = files::load_tree(&mut run, &args.region.hierarchy)?;
    let region = select_region(&tree, &args.region)?;
    let (store, _) = files::load_store(&mut run, &args.input.input, args.input.format)?;
    let config = ModelConfig {
        threshold: args.threshold.choice()?,
        clusters: args.clusters.choice(),
        seed: args.seed,
        restarts: args.restarts,
    };
    let build = model::build_mobility_model(&store, &region, &config)?;
    if let Some(w) = build.sweep.as_ref().and_then(|s| s.warning.as_ref()) {
        eprintln!("warning: {w}");
    }
    write_build(&mut run, &build, &args.output)?;
    run.note("model_config", &config);
    run.note("dropped_zero_duration_sessions", build.dropped_zero_duration);
    run.finish_beside(&args.output)?;
    let p = &build.model.provenance;
    println!(
        "{}: k = {}, threshold {}, {} sessions ({} zero-duration dropped)",
        build.model.region,
        p.k,
        p.threshold_min.map_or_else(|| "unbounded".to_owned(), |t| format!("{t} min")),
        p.source_sessions,
        build.dropped_zero_duration
    );
    Ok(())
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let mut run = Run::new("synth", &args, Some(args.seed));
    let model = files::load_model(&mut run, &args.model, args.tolerance)?;
    let mean_interarrival = if args.interarrival == "from-data" {
        InterArrival::from_data()
    } else {
        InterArrival::Seconds(args.interarrival.parse().map_err(|_| {
            CliError::usage(format!("bad --interarrival `{}`: expected seconds or from-data", args.interarrival))
        })?)
    };
    let config = GenerationConfig {
        n_users: args.users,
        mean_interarrival,
        type_weights: args.weights.clone(),
        seed: args.seed,
        start_time: args.start_time,
    };
    let trace = synth::generate_trace(&model, &config)?;
    run.write(&args.output, &log_bytes(&trace.samples, files::log_format(&args.output))?)?;
    run.note("model_region", model.region.to_string());
    run.finish_beside(&args.output)?;
    println!("{} users, {} samples", args.users, trace.samples.len());
    Ok(())
}

fn adapt(args: AdaptArgs) -> Result<(), CliError> {
    let mut run = Run::new("adapt", &args, None);
    let model = files::load_model(&mut run, &args.model, args.tolerance)?;
    let script: AdaptationScript = files::parse_config(&mut run, &args.script)?;
    let adapted = adapt::apply_script(&model, &script)?;
    run.write(&args.output, adapted.to_json().as_bytes())?;
    run.finish_beside(&args.output)?;
    println!("{} directives applied: {} zones, k = {}", script.len(), adapted.n_zones(), adapted.k());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let mut run = Run::new("validate", &args, Some(args.seed));
    let opts = RmseOptions { exclude_structural_zeros: args.exclude_structural_zeros };
    let report = if let Some(against) = &args.against {
        let model_path = args.model.as_ref().expect("clap requires --model with --against");
        let a = files::load_model(&mut run, model_path, args.tolerance)?;
        let b = files::load_model(&mut run, against, args.tolerance)?;
        let mapping = validate::map_clusters(&a, &b)?;
        validate::rmse(&a, &b, &mapping.mapping, opts)?
    } else if args.round_trip {
        let trip = match &args.model {
            Some(path) => {
                let model = files::load_model(&mut run, path, args.tolerance)?;
                let n = args.sessions.unwrap_or(model.provenance.source_sessions);
                if n == 0 {
                    return Err(CliError::usage("model records no source sessions: pass --sessions"));
                }
                validate::round_trip_model(&model, n, args.seed, opts)?
            }
            None => {
                let tree = files::load_tree(&mut run, &args.hierarchy)?;
                let region = match &args.region {
                    Some(id) => tree.region(id).cloned().map_err(|e| CliError::usage(e.to_string()))?,
                    None => tree.root().clone(),
                };
                let (store, _) = files::load_store(&mut run, &args.input.input, args.input.format)?;
                let config = ModelConfig {
                    threshold: args.threshold.choice()?,
                    clusters: args.clusters.choice(),
                    seed: args.seed,
                    restarts: args.restarts,
                };
                validate::round_trip(&store, &region, &config, opts)?
            }
        };
        if let Some(path) = &args.regenerated {
            run.write(path, trip.regenerated.to_json().as_bytes())?;
        }
        trip.report
    } else {
        return Err(CliError::usage("validate needs --against or --round-trip"));
    };
    run.write(&args.output, report.to_json().as_bytes())?;
    run.finish_beside(&args.output)?;
    print!("{}", report.to_table());
    Ok(())
}

fn plotdata(args: PlotdataArgs) -> Result<(), CliError> {
    let mut run = Run::new("plotdata", &args, None);
    let model = files::load_model(&mut run, &args.model, args.tolerance)?;
    let opts = ChordOptions { include_in: !args.exclude_in, include_out: args.include_out };
    let mut times = String::from("cluster,zone,seconds,minutes\n");
    let mut clusters = String::from("cluster,popularity\n");
    for (i, c) in model.clusters.iter().enumerate() {
        let flows = model::chord_export(&c.matrix, opts);
        run.write(&args.out_dir.join(format!("chord_c{i}.csv")), model::flows_to_csv(&flows).as_bytes())?;
        for (zone, (s, m)) in model.zone_labels.iter().zip(c.times.seconds().iter().zip(c.times.minutes())) {
            times.push_str(&format!("{i},{zone},{s},{m}\n"));
        }
        clusters.push_str(&format!("{i},{}\n", c.popularity));
    }
    run.write(&args.out_dir.join("times.csv"), times.as_bytes())?;
    run.write(&args.out_dir.join("clusters.csv"), clusters.as_bytes())?;
    run.finish(&args.out_dir, "plotdata")?;
    println!("{} clusters exported to {}", model.k(), args.out_dir.display());
    Ok(())
}

/// Pipeline configuration document. Relative paths are resolved against the
/// directory holding the document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    pub hierarchy: Vec<PathBuf>,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    #[serde(default = "default_threshold")]
    pub threshold: ThresholdChoice,
    #[serde(default = "default_clusters")]
    pub clusters: ClusterChoice,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    pub output_dir: PathBuf,
    /// Also model all APs as one flat region, for comparison.
    #[serde(default)]
    pub flat: bool,
}

fn default_threshold() -> ThresholdChoice {
    ModelConfig::default().threshold
}

fn default_clusters() -> ClusterChoice {
    ModelConfig::default().clusters
}

fn default_restarts() -> usize {
    ModelConfig::default().restarts
}

impl RunConfig {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.inputs.iter_mut().for_each(fix);
        self.hierarchy.iter_mut().for_each(fix);
        fix(&mut self.output_dir);
    }

    fn check(&self) -> Result<(), CliError> {
        if self.inputs.is_empty() || self.hierarchy.is_empty() {
            return Err(CliError::usage("run configuration needs at least one input and one hierarchy file"));
        }
        match self.inputs.iter().chain(&self.hierarchy).find(|p| !p.is_file()) {
            Some(missing) => Err(CliError::usage(format!("{}: file not found", missing.display()))),
            None => Ok(()),
        }
    }

    fn model_config(&self) -> ModelConfig {
        ModelConfig {
            threshold: self.threshold.clone(),
            clusters: self.clusters.clone(),
            seed: self.seed,
            restarts: self.restarts,
        }
    }
}

#[derive(Serialize)]
struct PipelineSummary {
    regions: Vec<pipeline::SummaryRow>,
    failed: usize,
    max_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    flat: Option<pipeline::SummaryRow>,
}

fn pipeline(args: PipelineArgs) -> Result<(), CliError> {
    let mut probe = Run::new("pipeline", &(), None);
    let mut cfg: RunConfig = files::parse_config(&mut probe, &args.config)?;
    cfg.resolve(args.config.parent().unwrap_or(Path::new("")));
    if let Some(dir) = &args.out_dir {
        cfg.output_dir = dir.clone();
    }
    cfg.check()?;

    let mut run = Run::new("pipeline", &cfg, Some(cfg.seed));
    run.read(&args.config)?;
    let tree = files::load_tree(&mut run, &cfg.hierarchy)?;
    let (raw, _) = files::load_store(&mut run, &cfg.inputs, cfg.format)?;
    let store = ingest::clean(&raw, &cfg.cleaning);
    let config = cfg.model_config();

    let result = pipeline::run_hierarchy(&store, &tree, &config, args.jobs);
    let models = cfg.output_dir.join("models");
    for r in &result.regions {
        if let Ok(build) = &r.outcome {
            write_build(&mut run, build, &models.join(format!("{}.json", r.region.slug())))?;
        }
    }
    let flat = cfg.flat.then(|| pipeline::run_flat(&store, &tree, &config));
    if let Some(Ok(build)) = flat.as_ref().map(|f| &f.outcome) {
        write_build(&mut run, build, &models.join("flat.json"))?;
    }

    let summary = PipelineSummary {
        regions: result.summary(),
        failed: result.failed(),
        max_k: result.max_k(),
        flat: flat.as_ref().map(|f| f.summary()),
    };
    run.write(&cfg.output_dir.join("summary.json"), &pretty(&summary))?;
    run.timing("jobs", result.jobs);
    run.timing("wall_s", result.wall_time.as_secs_f64());
    run.timing("serial_s", result.serial_time().as_secs_f64());
    run.timing("regions", result.timings());
    if let Some(f) = &flat {
        run.timing("flat_s", f.elapsed.as_secs_f64());
    }
    run.finish(&cfg.output_dir, "pipeline")?;

    for row in &summary.regions {
        match (&row.error, row.k) {
            (Some(e), _) => println!("{:<24} FAILED {e}", row.region),
            (None, Some(k)) => println!("{:<24} k = {k}", row.region),
            (None, None) => println!("{:<24}", row.region),
        }
    }
    println!(
        "{} regions, {} failed, wall {:.2} s on {} jobs",
        result.regions.len(),
        result.failed(),
        result.wall_time.as_secs_f64(),
        result.jobs
    );

    let failures: Vec<ErrorKind> = result
        .regions
        .iter()
        .filter_map(|r| r.outcome.as_ref().err())
        .map(|e| e.kind())
        .collect();
    if failures.is_empty() {
        return Ok(());
    }
    let kind = if failures.contains(&ErrorKind::Data) { ErrorKind::Data } else { ErrorKind::Validation };
    Err(CliError::Regions { failed: failures.len(), total: result.regions.len(), kind })
}

fn check_hierarchy(args: CheckHierarchyArgs) -> Result<(), CliError> {
    let mut run = Run::new("check-hierarchy", &args, None);
    let docs = files::load_documents(&mut run, &args.hierarchy)?;
    let store = if args.input.input.is_empty() {
        None
    } else {
        Some(files::load_store(&mut run, &args.input.input, args.input.format)?.0)
    };
    let result = hierarchy::load_hierarchy(docs);
    let report = ValidationReport::from_result(&result, store.as_ref());
    if args.json {
        print!("{}", String::from_utf8(pretty(&report)).expect("json is utf-8"));
    } else {
        print!("{}", report.to_text());
    }
    if report.valid {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("hierarchy is invalid: {} issue(s)", report.issues.len())))
    }
}

fn campus(args: CampusArgs) -> Result<(), CliError> {
    let mut run = Run::new("campus", &args, Some(args.seed));
    let mut cfg = if args.large { CampusConfig::large() } else { CampusConfig::default() };
    cfg.seed = args.seed;
    if let Some(users) = args.users {
        cfg.users = users;
    }
    let generated = campus::generate_campus(&cfg);
    let mut hierarchy = Vec::new();
    for doc in &generated.documents {
        let rel = PathBuf::from("hierarchy").join(format!("{}.json", doc.region.slug()));
        run.write(&args.out_dir.join(&rel), &pretty(doc))?;
        hierarchy.push(rel);
    }
    run.write(&args.out_dir.join("log.csv"), &log_bytes(generated.store.samples(), LogFormat::Csv)?)?;
    let config = RunConfig {
        inputs: vec!["log.csv".into()],
        format: None,
        hierarchy,
        cleaning: CleaningConfig::default(),
        threshold: ThresholdChoice::Fixed(30.0),
        clusters: ClusterChoice::Elbow { k_max: 30 },
        seed: args.seed,
        restarts: ModelConfig::default().restarts,
        output_dir: "out".into(),
        flat: false,
    };
    run.write(&args.out_dir.join("pipeline.json"), &pretty(&config))?;
    run.finish(&args.out_dir, "campus")?;
    let aps: BTreeSet<&str> = generated.store.samples().iter().map(|s| s.ap_id.as_str()).collect();
    println!(
        "{} regions, {} APs seen, {} samples written to {}",
        generated.tree.regions().len(),
        aps.len(),
        generated.store.len(),
        args.out_dir.display()
    );
    Ok(())
}
