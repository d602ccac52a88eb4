//! `windgust` command-line tool.

mod manifest;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use windgust::corpus::{load_corpus, write_corpus, LoadOptions};
use windgust::datamodel::{FlightPacket, SensorKind, Task};
use windgust::experiment::{condition_correlation, cross_drone, fft_sweep, psd_by_condition, train};
use windgust::features::FEATURE_COUNT;
use windgust::learn::{load_model, save_model, HyperParams, ModelKind};
use windgust::pipeline::build_dataset;
use windgust::realtime::{file_lines, run_stream, run_stream_threaded, Detector, DetectorConfig, UdpLines};
use windgust::spectral::{correlation_csv, DEFAULT_K_CANDIDATES};
use windgust::synth::{gen_fleet, FleetConfig};
use windgust::Error;

use crate::manifest::ExperimentManifest;

const LOG_ENV: &str = "WINDGUST_LOG";

#[derive(Parser)]
#[command(name = "windgust", version, about = "Wind gust detection from drone IMU logs")]
#[command(after_help = "Exit codes: 0 ok, 2 configuration error, 3 I/O error, 4 data validation error.\n\
Log verbosity is read from WINDGUST_LOG (error, warn, info, debug, trace).")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth(SynthArgs),
    /// Split, grid-search, train and evaluate one model.
    Train(ExperimentArgs),
    /// Train on each drone and test on every other drone.
    Crosseval(ExperimentArgs),
    /// Correlation tables, power spectra or the FFT top-k sweep.
    Analyze(AnalyzeArgs),
    /// Run a trained model over a live or recorded sample stream.
    Stream(StreamArgs),
    /// Dump the 40-column feature matrix of a corpus as CSV.
    Featurize(FeaturizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Speed,
    Direction,
    Motion,
}

#[derive(Args)]
struct SynthArgs {
    /// Fleet configuration (JSON); without it the preset is used.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in fleet when no config file is given.
    #[arg(long, value_enum, default_value = "speed")]
    preset: Preset,
    /// Overrides the fleet seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output corpus directory.
    #[arg(long)]
    out: PathBuf,
    /// Write into a non-empty directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    sensor: Option<SensorKind>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    #[arg(long)]
    model_kind: Option<ModelKind>,
    #[arg(long)]
    split_seed: Option<u64>,
    #[arg(long)]
    fft_k: Option<usize>,
    #[arg(long)]
    window_step: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnalyzeMode {
    Xcorr,
    Psd,
    Fftsweep,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long, value_enum)]
    mode: AnalyzeMode,
    /// Top-k candidates for the sweep.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    #[command(flatten)]
    experiment: ExperimentArgs,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["stdin", "file", "udp"]))]
struct StreamArgs {
    /// Trained model file.
    #[arg(long)]
    model: PathBuf,
    /// Read CSV rows from standard input.
    #[arg(long)]
    stdin: bool,
    /// Read CSV rows from a file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Bind a UDP socket, e.g. `:7777`; one row per datagram.
    #[arg(long)]
    udp: Option<String>,
    /// End a UDP stream after this long without datagrams.
    #[arg(long)]
    udp_timeout_ms: Option<u64>,
    #[arg(long, default_value = "gyro")]
    sensor: SensorKind,
    #[arg(long, default_value_t = 0)]
    fft_k: usize,
    #[arg(long, default_value_t = 100)]
    window_width: usize,
    #[arg(long, default_value_t = 4)]
    stride: usize,
    /// Majority vote over the last N predictions.
    #[arg(long, default_value_t = 1)]
    smoothing: usize,
    /// Run ingestion and inference on separate threads.
    #[arg(long)]
    threaded: bool,
    /// Pending windows kept in threaded mode before the oldest are dropped.
    #[arg(long, default_value_t = 64)]
    queue: usize,
    /// Write the end-of-stream summary here instead of stderr.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value = "gyro")]
    sensor: SensorKind,
    #[arg(long, value_parser = parse_task, default_value = "speed")]
    task: Task,
    #[arg(long, default_value_t = 100)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[arg(long, default_value_t = 0)]
    fft_k: usize,
    /// Output CSV; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_task(s: &str) -> Result<Task, String> {
    serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
        .map_err(|_| format!("unknown task `{s}` (speed, direction_hover, direction_motion)"))
}

/// Exit code for an error chain: the first pipeline error found decides.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) | Error::InvalidArgument(_) => 2,
                Error::Io { .. } | Error::Stream(_) => 3,
                _ => 4,
            };
        }
        if cause.downcast_ref::<io::Error>().is_some() {
            return 3;
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Crosseval(a) => cmd_crosseval(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Stream(a) => cmd_stream(a),
        Command::Featurize(a) => cmd_featurize(a),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Creates `dir`, refusing to reuse a non-empty one unless forced.
fn prepare_out_dir(dir: &Path, force: bool) -> anyhow::Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (use --force to write anyway)",
                dir.display()
            ))
            .into());
        }
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).map_err(io_err(path))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let mut fleet = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str::<FleetConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => match a.preset {
            Preset::Speed => FleetConfig::speed_default(),
            Preset::Direction => FleetConfig::direction_default(),
            Preset::Motion => FleetConfig::for_task(Task::DirectionMotion, 3, 10, 1.0, 0),
        },
    };
    if let Some(seed) = a.seed {
        fleet.seed = seed;
    }
    prepare_out_dir(&a.out, a.force)?;
    let packets = gen_fleet(&fleet)?;
    write_corpus(&a.out, &packets)?;
    println!("wrote {} packets to {}", packets.len(), a.out.display());
    Ok(())
}

impl ExperimentArgs {
    fn manifest(&self) -> anyhow::Result<ExperimentManifest> {
        let mut m = match &self.manifest {
            Some(path) => ExperimentManifest::load(path)?,
            None => ExperimentManifest::default(),
        };
        if let Some(v) = &self.corpus {
            m.corpus = v.clone();
        }
        if let Some(v) = self.sensor {
            m.sensor = v;
        }
        if let Some(v) = self.task {
            m.task = v;
        }
        if let Some(v) = self.model_kind {
            m.model_kind = v;
        }
        if let Some(v) = self.split_seed {
            m.split_seed = v;
        }
        if let Some(v) = self.fft_k {
            m.fft_k = v;
        }
        if let Some(v) = self.window_step {
            m.window_step = v;
        }
        if let Some(v) = &self.out {
            m.output_dir = v.clone();
        }
        Ok(m)
    }
}

fn load_packets(m: &ExperimentManifest) -> anyhow::Result<Vec<FlightPacket>> {
    let mut packets = load_corpus(&m.corpus, &LoadOptions::default())?;
    if let Some(drones) = &m.drones {
        packets.retain(|p| drones.contains(&p.drone_id));
    }
    if packets.is_empty() {
        return Err(Error::Data(format!("corpus {} has no usable packets", m.corpus.display())).into());
    }
    Ok(packets)
}

fn cmd_train(a: ExperimentArgs) -> anyhow::Result<()> {
    let m = a.manifest()?;
    let spec = m.train_spec()?;
    let packets = load_packets(&m)?;
    prepare_out_dir(&m.output_dir, a.force)?;
    let outcome = train(&packets, &spec)?;
    save_model(&outcome.model, &m.output_dir.join("model.json"))?;
    write_file(&m.output_dir.join("confusion.csv"), &outcome.report.confusion_csv())?;
    write_file(&m.output_dir.join("summary.json"), &to_json(&outcome.summary(&spec))?)?;
    write_file(&m.output_dir.join("manifest.json"), &to_json(&m)?)?;
    println!(
        "{} accuracy {:.4}{}",
        spec.kind.label(),
        outcome.report.accuracy,
        outcome.report.r_squared.map(|r| format!(", R^2 {r:.4}")).unwrap_or_default()
    );
    Ok(())
}

fn cmd_crosseval(a: ExperimentArgs) -> anyhow::Result<()> {
    let m = a.manifest()?;
    let params = match &m.grid {
        Some(g) => g.first().cloned().ok_or_else(|| Error::Config("manifest grid is empty".into()))?,
        None => HyperParams {
            seed: m.split_seed,
            ..Default::default()
        },
    };
    let packets = load_packets(&m)?;
    prepare_out_dir(&m.output_dir, a.force)?;
    let matrix = cross_drone(&packets, m.task, &m.featurize(), m.model_kind, &params)?;
    write_file(&m.output_dir.join("crosseval.csv"), &matrix.to_csv())?;
    write_file(&m.output_dir.join("crosseval.json"), &to_json(&matrix)?)?;
    println!("mean cross-drone accuracy {:.4}", matrix.mean_off_diagonal());
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> anyhow::Result<()> {
    let m = a.experiment.manifest()?;
    let packets = load_packets(&m)?;
    prepare_out_dir(&m.output_dir, a.experiment.force)?;
    let axes = m.sensor.axis_names();
    match a.mode {
        AnalyzeMode::Xcorr => {
            for (axis, name) in axes.iter().enumerate() {
                let (names, table) = condition_correlation(&packets, m.task, m.sensor, axis)?;
                let path = m.output_dir.join(format!("xcorr_{name}.csv"));
                write_file(&path, &correlation_csv(&names, &table))?;
            }
        }
        AnalyzeMode::Psd => {
            for (axis, name) in axes.iter().enumerate() {
                for (condition, est) in psd_by_condition(&packets, m.task, m.sensor, axis)? {
                    let path = m.output_dir.join(format!("psd_{}_{name}.csv", condition.tag()));
                    write_file(&path, &est.to_csv())?;
                }
            }
        }
        AnalyzeMode::Fftsweep => {
            let candidates = a.k.unwrap_or_else(|| DEFAULT_K_CANDIDATES.to_vec());
            let sweep = fft_sweep(&packets, &m.train_spec()?, &candidates)?;
            write_file(&m.output_dir.join("fftsweep.csv"), &sweep.to_csv())?;
            println!("best k = {}", sweep.best_k);
        }
    }
    Ok(())
}

fn cmd_stream(a: StreamArgs) -> anyhow::Result<()> {
    let config = DetectorConfig {
        window_width: a.window_width,
        emit_stride: a.stride,
        fft_k: a.fft_k,
        sensor: a.sensor,
        model_path: a.model.clone(),
        smoothing: a.smoothing,
    };
    config.validate()?;
    let model = load_model(&a.model)?;
    let lines: Box<dyn Iterator<Item = io::Result<String>>> = if a.stdin {
        Box::new(io::stdin().lines())
    } else if let Some(path) = &a.file {
        Box::new(file_lines(path)?)
    } else {
        let addr = a.udp.as_deref().ok_or_else(|| anyhow!("no source given"))?;
        let source = UdpLines::bind(addr, a.udp_timeout_ms.map(Duration::from_millis))?;
        log::info!("listening on {}", source.local_addr()?);
        Box::new(source)
    };
    let mut out = io::BufWriter::new(io::stdout());
    let summary = if a.threaded {
        run_stream_threaded(lines, &config, model, a.queue, &mut out)?
    } else {
        let mut detector = Detector::new(&config, model)?;
        run_stream(lines, &mut detector, &mut out)?
    };
    drop(out);
    let text = to_json(&summary)?;
    match &a.summary {
        Some(path) => write_file(path, &text)?,
        None => io::stderr().write_all(text.as_bytes()).context("writing summary")?,
    }
    Ok(())
}

fn cmd_featurize(a: FeaturizeArgs) -> anyhow::Result<()> {
    let packets = load_corpus(&a.corpus, &LoadOptions::default())?;
    let config = windgust::pipeline::FeaturizeConfig {
        sensor: a.sensor,
        width: a.width,
        step: a.step,
        fft_k: a.fft_k,
    };
    let data = build_dataset(&packets, a.task, &config)?;
    let mut csv = windgust::features::feature_columns().join(",");
    csv.push_str(",label,drone_id,packet\n");
    for (i, p) in data.packets.iter().enumerate() {
        let label = &data.classes.names[p.label];
        for row in p.rows.rows() {
            debug_assert_eq!(row.len(), FEATURE_COUNT);
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            csv.push_str(&format!("{},{label},{},{i}\n", cells.join(","), p.drone_id));
        }
    }
    match &a.out {
        Some(path) => write_file(path, &csv)?,
        None => io::stdout().write_all(csv.as_bytes())?,
    }
    Ok(())
}
