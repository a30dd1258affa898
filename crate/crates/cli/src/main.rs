//! `tactile`: generate synthetic sessions, train, evaluate and replay
//! gesture classifiers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use tactile_core::config::{RunConfig, Split};
use tactile_core::dataset::load_series;
use tactile_core::eval::{format_table, write_events_csv, write_records_csv, MetricRecord};
use tactile_core::nn::{load_model, save_model};
use tactile_core::pipeline::{evaluate_model, generate_dataset, load_split, train_on};
use tactile_core::stream::replay;
use tactile_core::{Error, GestureClass, RepresentationKind};

/// Overrides `paths.reports` from the config file.
const REPORT_DIR_ENV: &str = "TACTILE_REPORT_DIR";

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_REALTIME: u8 = 4;

#[derive(Parser)]
#[command(name = "tactile", version, about = "Tactile gesture recognition from joint sensors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic session CSV files
    Gen(GenArgs),
    /// Train a model on generated training sessions
    Train(TrainArgs),
    /// Evaluate a model on test sessions and write a report
    Eval(EvalArgs),
    /// Replay one session in real time and log per-window latency
    Stream(StreamArgs),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML); defaults apply when omitted
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides `seed`
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    common: Common,
    /// Output directory (overrides `paths.data`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Poses to generate, e.g. `1,2,3` (overrides `synth.poses`)
    #[arg(long, value_delimiter = ',')]
    poses: Option<Vec<u8>>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    /// Registered model name (overrides `model`)
    #[arg(long)]
    model: Option<String>,
    /// Training poses (overrides `train_poses`)
    #[arg(long, value_delimiter = ',')]
    poses: Option<Vec<u8>>,
    /// Dataset directory (overrides `paths.data`)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file to write (overrides `paths.model`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-epoch loss CSV; defaults to `<out>.loss.csv`
    #[arg(long)]
    loss_log: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Build these tensors instead of the model's own representation
    #[arg(long, value_parser = parse_kind)]
    tensors: Option<RepresentationKind>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Model file (overrides `paths.model`)
    #[arg(long)]
    model: Option<PathBuf>,
    /// Test poses (overrides `test_poses`)
    #[arg(long, value_delimiter = ',')]
    pose: Option<Vec<u8>>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Skip majority voting
    #[arg(long)]
    no_vote: bool,
    /// Report name; defaults to `<model>_pose<poses>`
    #[arg(long)]
    experiment: Option<String>,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Session CSV to replay
    #[arg(long)]
    session: PathBuf,
    /// Replay speed relative to the sample rate; 0 disables pacing
    #[arg(long, default_value_t = 1.0)]
    speed: f64,
    #[arg(long)]
    no_vote: bool,
    /// Print every window, not only events and the summary
    #[arg(long)]
    verbose: bool,
}

fn parse_kind(s: &str) -> Result<RepresentationKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "stft" => Ok(RepresentationKind::Stft),
        "stt" => Ok(RepresentationKind::Stt),
        "rt" => Ok(RepresentationKind::Rt),
        _ => Err(format!("unknown representation `{s}` (stft, stt, rt)")),
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn report_dir(cfg: &RunConfig) -> PathBuf {
    match std::env::var_os(REPORT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => cfg.paths.reports.clone(),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(out) = args.out {
        cfg.paths.data = out;
    }
    let poses = args.poses.unwrap_or_else(|| cfg.synth.poses.clone());
    cfg.synth.poses = poses.clone();
    cfg.validate()?;
    let written = generate_dataset(&cfg, &poses, &cfg.paths.data)?;
    let mut counts: BTreeMap<(u8, &str), [usize; GestureClass::COUNT]> = BTreeMap::new();
    for (path, series) in &written {
        let split = if path.to_string_lossy().contains("_train_") {
            "train"
        } else {
            "test"
        };
        let row = counts.entry((series.meta().pose.unwrap_or(0), split)).or_default();
        for ev in tactile_core::eval::extract_events(series.labels()) {
            row[ev.gesture.index()] += 1;
        }
    }
    println!("wrote {} sessions to {}", written.len(), cfg.paths.data.display());
    println!("{:<6} {:<6} {:>5} {:>5} {:>5}", "pose", "split", "ST", "P", "G");
    for ((pose, split), c) in counts {
        println!("{pose:<6} {split:<6} {:>5} {:>5} {:>5}", c[1], c[2], c[3]);
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(m) = args.model {
        cfg.model = m;
    }
    if let Some(p) = args.poses {
        cfg.train_poses = p;
    }
    if let Some(d) = args.data {
        cfg.paths.data = d;
    }
    if let Some(o) = args.out {
        cfg.paths.model = o;
    }
    if let Some(e) = args.epochs {
        cfg.train.epochs = e;
    }
    if args.tensors.is_some() {
        cfg.tensors = args.tensors;
    }
    cfg.validate()?;
    let series = load_split(&cfg.paths.data, &cfg.train_poses, Split::Train, cfg.synth.sample_rate)?;
    eprintln!(
        "training {} on {} sessions (poses {:?}), {} epochs",
        cfg.model,
        series.len(),
        cfg.train_poses,
        cfg.train.epochs
    );
    let out = train_on(&cfg, &series)?;
    save_model(&out.model, &cfg.paths.model)?;
    let loss_path = args
        .loss_log
        .unwrap_or_else(|| PathBuf::from(format!("{}.loss.csv", cfg.paths.model.display())));
    let mut w = csv::Writer::from_writer(create(&loss_path)?);
    w.write_record(["epoch", "loss"])?;
    for (i, l) in out.epoch_losses.iter().enumerate() {
        w.write_record([(i + 1).to_string(), l.to_string()])?;
    }
    w.flush()?;
    println!(
        "wrote {} (final loss {:.6}); loss log {}",
        cfg.paths.model.display(),
        out.epoch_losses.last().copied().unwrap_or(f64::NAN),
        loss_path.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(m) = args.model {
        cfg.paths.model = m;
    }
    if let Some(p) = args.pose {
        cfg.test_poses = p;
    }
    if let Some(d) = args.data {
        cfg.paths.data = d;
    }
    let vote = cfg.vote && !args.no_vote;
    let model = load_model(&cfg.paths.model)?;
    let series = load_split(&cfg.paths.data, &cfg.test_poses, Split::Test, cfg.synth.sample_rate)?;
    let (metrics, preds) = evaluate_model(&model, &series, vote)?;
    let poses: Vec<String> = cfg.test_poses.iter().map(u8::to_string).collect();
    let experiment = args.experiment.unwrap_or_else(|| {
        let mut name = format!("{}_pose{}", model.spec.name, poses.join(""));
        if !vote {
            name.push_str("_novote");
        }
        name
    });
    let record = MetricRecord {
        model: model.spec.name.clone(),
        experiment: experiment.clone(),
        metrics,
    };
    let dir = report_dir(&cfg);
    let table = format_table(std::slice::from_ref(&record));
    print!("{table}");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join(format!("{experiment}.txt")), &table)?;
    write_records_csv(
        std::slice::from_ref(&record),
        create(&dir.join(format!("{experiment}.csv")))?,
    )?;
    let events: Vec<(String, _)> = series
        .iter()
        .zip(&preds)
        .flat_map(|(s, p)| p.events.iter().map(|e| (s.meta().session.clone(), *e)))
        .collect();
    write_events_csv(
        &events,
        cfg.synth.sample_rate,
        create(&dir.join(format!("{experiment}.events.csv")))?,
    )?;
    println!("report written to {}", dir.display());
    Ok(())
}

/// Returns whether every window met the budget.
fn cmd_stream(args: StreamArgs) -> Result<bool> {
    let mut cfg = load_config(&args.common)?;
    if let Some(m) = args.model {
        cfg.paths.model = m;
    }
    if !(args.speed.is_finite() && args.speed >= 0.0) {
        bail!(Error::ConfigInvalid(format!("--speed {} must be >= 0", args.speed)));
    }
    let vote = cfg.vote && !args.no_vote;
    let model = load_model(&cfg.paths.model)?;
    let series = load_series(&args.session, cfg.synth.sample_rate)?;
    let session = series.meta().session.clone();
    let verbose = args.verbose;
    let report = replay(
        &model,
        &series,
        vote,
        args.speed,
        |w| {
            if verbose {
                println!(
                    "window {:>6}  raw {:<3} out {:<3} {:8.3} ms",
                    w.start,
                    w.raw.short_name(),
                    w.output.short_name(),
                    w.latency.as_secs_f64() * 1000.0
                );
            }
        },
        |e| {
            let dd = e.dd_ms.map_or_else(|| "-".to_string(), |d| format!("{d:.1} ms"));
            println!(
                "event {:<3} {:>10.1} ms .. {:>10.1} ms  DD {dd}",
                e.event.gesture.short_name(),
                e.start_ms,
                e.end_ms
            );
        },
    )?;

    let dir = report_dir(&cfg);
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut w = csv::Writer::from_writer(create(&dir.join(format!("{session}.latency.csv")))?);
    w.write_record(["start", "raw", "output", "latency_ms"])?;
    for win in &report.windows {
        w.write_record([
            win.start.to_string(),
            win.raw.short_name().to_string(),
            win.output.short_name().to_string(),
            format!("{:.4}", win.latency.as_secs_f64() * 1000.0),
        ])?;
    }
    w.flush()?;
    let events: Vec<(String, _)> = report.events.iter().map(|e| (session.clone(), e.event)).collect();
    write_events_csv(
        &events,
        series.sample_rate(),
        create(&dir.join(format!("{session}.stream.events.csv")))?,
    )?;

    println!(
        "{} windows, latency p50 {:.3} ms, p99 {:.3} ms, max {:.3} ms, budget {:.1} ms, {} over budget",
        report.windows.len(),
        report.percentile_ms(50.0),
        report.percentile_ms(99.0),
        report.max_ms(),
        report.budget_ms,
        report.violations()
    );
    Ok(report.violations() == 0)
}

/// Library errors other than I/O are configuration, data or shape problems.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::DivergedLoss { .. }) => EXIT_DIVERGED,
        Some(Error::Io { .. }) | None => EXIT_FAILURE,
        Some(_) => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Gen(a) => cmd_gen(a).map(|_| true),
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Stream(a) => cmd_stream(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: real-time budget exceeded");
            ExitCode::from(EXIT_REALTIME)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
