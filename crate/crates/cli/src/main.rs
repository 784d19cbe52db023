//! `zoneseq` batch command line.
//!
//! Exit codes: 0 success, 1 invalid input data, 2 I/O failure, 3 bad
//! configuration or usage.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;

use config::{parse_weights, FileConfig, Overrides, RunConfig};
use zoneseq::ingest::{load_dataset, write_dataset, Dataset, IngestError};
use zoneseq::pipeline::{self, Sequencer, ZoneOrderStrategy};
use zoneseq::ppm::{PpmConfig, PpmError, PpmModel};
use zoneseq::rollout::RolloutOptions;
use zoneseq::scorer::{self, dataset_score, read_submission, submission_json, SdErpScorer};
use zoneseq::synth::{self, SynthConfig};
use zoneseq::tsp::{AtspSolver, BuiltinSolver, ExternalSolver};

#[derive(Parser, Debug)]
#[command(name = "zoneseq", version, about = "Learn zone-visit order and sequence delivery stops")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Dataset directory.
    #[arg(long, global = true, env = "ZSEQ_DATASET")]
    dataset: Option<PathBuf>,
    /// Model file.
    #[arg(long, global = true, env = "ZSEQ_MODEL")]
    model: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true, env = "ZSEQ_OUT")]
    out: Option<PathBuf>,
    /// Maximum PPM context order.
    #[arg(long, global = true, env = "ZSEQ_ORDER")]
    order: Option<usize>,
    /// Component weights, `w0,w1,w2,w3`, summing to 1.
    #[arg(long, global = true, env = "ZSEQ_WEIGHTS", value_parser = parse_weights)]
    weights: Option<[f64; 4]>,
    /// TSPLIB solver binary (LKH style) to use instead of the built-in one.
    #[arg(long, global = true, env = "ZSEQ_EXTERNAL_SOLVER")]
    external_solver: Option<PathBuf>,
    /// Worker threads for route-level parallelism.
    #[arg(long, global = true, env = "ZSEQ_THREADS")]
    threads: Option<usize>,
    /// Seed for every random choice. Defaults to 42.
    #[arg(long, global = true, env = "ZSEQ_SEED")]
    seed: Option<u64>,
    /// Keep Low quality routes in the training corpus.
    #[arg(long, global = true, env = "ZSEQ_INCLUDE_LOW")]
    include_low: bool,
    /// JSON config file; flags and ZSEQ_* variables take precedence over it.
    #[arg(long, global = true, env = "ZSEQ_CONFIG")]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, env = "ZSEQ_LOG_LEVEL")]
    log_level: Option<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a zone model on the dataset's actual sequences.
    Train,
    /// Write a submission with a stop sequence for every route.
    Sequence {
        #[arg(long, value_enum, default_value_t = Strategy::Rollout)]
        strategy: Strategy,
        /// Print zone-ordering and stop-ordering milliseconds per route.
        #[arg(long)]
        per_route_timing: bool,
    },
    /// Score a submission against the dataset's actual sequences.
    Evaluate {
        #[arg(long, env = "ZSEQ_SUBMISSION")]
        submission: PathBuf,
        /// Use haversine distances for routes without a travel time matrix.
        #[arg(long)]
        haversine_fallback: bool,
    },
    /// Generate a synthetic dataset into `<out>/train` and `<out>/eval`.
    Synth,
    /// Train on `<dataset>/train`, then sequence and score `<dataset>/eval`
    /// with rollout, alphabetical and ground-truth zone orders.
    Bench,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Strategy {
    Rollout,
    Alphabetical,
    GroundTruth,
}

impl From<Strategy> for ZoneOrderStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::Rollout => ZoneOrderStrategy::Rollout,
            Strategy::Alphabetical => ZoneOrderStrategy::Alphabetical,
            Strategy::GroundTruth => ZoneOrderStrategy::GroundTruth,
        }
    }
}

/// A failure tagged with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn invalid(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn io_fail(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn config_fail(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        error: error.into(),
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn ingest_fail(e: IngestError) -> Failure {
    if e.is_io() || matches!(e, IngestError::MissingFile(_)) {
        io_fail(e)
    } else {
        invalid(e)
    }
}

fn ppm_fail(e: PpmError) -> Failure {
    match e {
        PpmError::Io(_) => io_fail(e),
        PpmError::InvalidConfig(_) => config_fail(e),
        _ => invalid(e),
    }
}

fn write_out(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))
            .map_err(io_fail)?;
    }
    zoneseq::io::write_atomic(path, bytes)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(io_fail)
}

fn load(dir: &Path) -> Outcome<Dataset> {
    let ds = load_dataset(dir).map_err(ingest_fail)?;
    info!("loaded {} routes from {}", ds.len(), dir.display());
    Ok(ds)
}

fn ppm_config(cfg: &RunConfig) -> Outcome<PpmConfig> {
    let p = PpmConfig {
        max_order: cfg.order,
        weights: cfg.weights,
        ..PpmConfig::default()
    };
    p.validate().map_err(config_fail)?;
    Ok(p)
}

fn solver(cfg: &RunConfig) -> Box<dyn AtspSolver> {
    match &cfg.external_solver {
        Some(path) => Box::new(ExternalSolver::new(path)),
        None => Box::new(BuiltinSolver::default()),
    }
}

fn train_model(ds: &Dataset, cfg: &RunConfig) -> Outcome<(PpmModel, usize, f64)> {
    let t0 = Instant::now();
    let (model, n) = pipeline::train(ds, cfg.include_low, ppm_config(cfg)?).map_err(invalid)?;
    Ok((model, n, t0.elapsed().as_secs_f64()))
}

fn cmd_train(cfg: &RunConfig) -> Outcome {
    let dataset = cfg.require(&cfg.dataset, "dataset").map_err(config_fail)?;
    let model_path = cfg.require(&cfg.model, "model").map_err(config_fail)?;
    let ds = load(dataset)?;
    let (model, n, secs) = train_model(&ds, cfg)?;
    write_out(model_path, &model.to_bytes())?;
    println!("corpus: {n} zone sequences");
    println!("trained in {secs:.3} s; model written to {}", model_path.display());
    Ok(())
}

fn cmd_sequence(cfg: &RunConfig, strategy: ZoneOrderStrategy, per_route_timing: bool) -> Outcome {
    let dataset = cfg.require(&cfg.dataset, "dataset").map_err(config_fail)?;
    let out = cfg.require(&cfg.out, "out").map_err(config_fail)?;
    let model = match (&cfg.model, strategy) {
        (Some(p), _) => Some(PpmModel::read_file(p).map_err(ppm_fail)?),
        (None, ZoneOrderStrategy::Rollout) => return Err(config_fail(anyhow!("rollout needs --model"))),
        (None, _) => None,
    };
    let ds = load(dataset)?;
    let solver = solver(cfg);
    let seq = Sequencer {
        model: model.as_ref(),
        strategy,
        solver: solver.as_ref(),
        seed: cfg.seed,
        rollout: RolloutOptions::default(),
    };
    let done = seq.dataset(&ds).map_err(invalid)?;
    if per_route_timing {
        println!("{:<24} {:>10} {:>10}", "route", "zone ms", "stop ms");
        for d in &done {
            println!(
                "{:<24} {:>10.2} {:>10.2}",
                d.sequence.route_id, d.timing.zone_ms, d.timing.stop_ms
            );
        }
    }
    let n = done.len();
    let sub = scorer::submission_from_sequences(done.into_iter().map(|d| d.sequence));
    write_out(out, submission_json(&sub).as_bytes())?;
    println!("sequenced {n} routes; submission written to {}", out.display());
    Ok(())
}

fn cmd_evaluate(cfg: &RunConfig, submission: &Path, haversine_fallback: bool) -> Outcome {
    let dataset = cfg.require(&cfg.dataset, "dataset").map_err(config_fail)?;
    let ds = load(dataset)?;
    let sub = read_submission(submission)
        .with_context(|| format!("cannot read submission {}", submission.display()))
        .map_err(|e| {
            if e.root_cause().downcast_ref::<serde_json::Error>().is_some() {
                invalid(e)
            } else {
                io_fail(e)
            }
        })?;
    let scorer = SdErpScorer {
        haversine_fallback,
        ..Default::default()
    };
    let report = dataset_score(&ds, &sub, &scorer).map_err(invalid)?;
    if let Some(out) = &cfg.out {
        write_out(out, report.to_json().as_bytes())?;
    }
    println!("score: {:.6} over {} routes", report.mean, report.routes.len());
    Ok(())
}

fn cmd_synth(cfg: &RunConfig, file: &FileConfig) -> Outcome {
    let out = cfg.require(&cfg.out, "out").map_err(config_fail)?;
    let synth_cfg = SynthConfig {
        seed: cfg.seed,
        ..file.synth.clone().unwrap_or_default()
    };
    let data = synth::generate(&synth_cfg).map_err(config_fail)?;
    for (name, ds) in [("train", &data.train), ("eval", &data.eval)] {
        write_dataset(ds, out.join(name)).map_err(ingest_fail)?;
    }
    println!(
        "wrote {} train and {} eval routes to {}",
        data.train.len(),
        data.eval.len(),
        out.display()
    );
    Ok(())
}

fn cmd_bench(cfg: &RunConfig) -> Outcome {
    let dataset = cfg.require(&cfg.dataset, "dataset").map_err(config_fail)?;
    let train = load(&dataset.join("train"))?;
    let eval = load(&dataset.join("eval"))?;
    let solver = solver(cfg);
    let report = pipeline::bench(
        &train,
        &eval,
        ppm_config(cfg)?,
        cfg.include_low,
        solver.as_ref(),
        &SdErpScorer::default(),
        cfg.seed,
    )
    .map_err(invalid)?;
    if let Some(out) = &cfg.out {
        for row in &report.rows {
            let name = row.strategy.name();
            write_out(&out.join(format!("{name}_submission.json")), submission_json(&row.submission).as_bytes())?;
            write_out(&out.join(format!("{name}_report.json")), row.report.to_json().as_bytes())?;
        }
    }
    println!(
        "trained on {} zone sequences in {:.3} s",
        report.corpus_size,
        report.train_ms / 1e3
    );
    print!("{}", report.table());
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p).map_err(config_fail)?,
        None => FileConfig::default(),
    };
    let overrides = Overrides {
        dataset: cli.dataset,
        model: cli.model,
        out: cli.out,
        order: cli.order,
        weights: cli.weights,
        external_solver: cli.external_solver,
        threads: cli.threads,
        seed: cli.seed,
        include_low: cli.include_low.then_some(true),
        log_level: cli.log_level,
    };
    let cfg = RunConfig::merge(overrides, &file).map_err(config_fail)?;

    let level: log::LevelFilter = cfg
        .log_level
        .parse()
        .map_err(|_| config_fail(anyhow!("unknown log level {:?}", cfg.log_level)))?;
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(config_fail)?;
    }

    match cli.command {
        Command::Train => cmd_train(&cfg),
        Command::Sequence {
            strategy,
            per_route_timing,
        } => cmd_sequence(&cfg, strategy.into(), per_route_timing),
        Command::Evaluate {
            submission,
            haversine_fallback,
        } => cmd_evaluate(&cfg, &submission, haversine_fallback),
        Command::Synth => cmd_synth(&cfg, &file),
        Command::Bench => cmd_bench(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
