//! `ecbe`: generate synthetic streams, run the ensemble over a CSV, sweep a
//! parameter.

mod config;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ecbe::entropy::write_drift_log_csv;
use ecbe::generators::{
    generate, DriftManifest, GeneratorConfig, GeneratorError, GeneratorKind, HyperplaneParams,
    LedParams, RbfParams, SeaParams,
};
use ecbe::harness::{
    prequential_run, run_baseline, sweep, write_sweep_csv, HarnessError, RunOptions,
    SourceTemplate, SweepParam, SweepSpec,
};
use ecbe::stream::{
    open_csv, open_csv_with_schema, LabelColumn, Schema, StreamError, StreamSource,
};
use ecbe::EnsembleError;

use config::{parse_list, parse_values, ConfigError, FileConfig};

#[derive(Parser)]
#[command(
    name = "ecbe",
    version,
    about = "Entropy-weighted ensemble for drifting data streams"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic stream as CSV plus a JSON drift manifest.
    Generate(GenerateArgs),
    /// Prequential run over a CSV stream.
    Run(RunArgs),
    /// Repeat runs over a grid of one parameter and several seeds.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Sea,
    Hyperplane,
    Led,
    Rbf,
}

#[derive(Args)]
struct StreamFlags {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    instances: Option<usize>,
    /// Label-noise probability applied on top of the generator.
    #[arg(long)]
    noise: Option<f64>,
    /// Instance positions where the swap toggles, e.g. `1000,2000`.
    #[arg(long, value_name = "I,J,..")]
    drift_at: Option<String>,
    /// The two labels exchanged at every drift position.
    #[arg(long, value_name = "A,B")]
    swap: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    stream: StreamFlags,
    /// CSV output path. The manifest goes next to it as `<stem>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
    /// JSON or TOML file with a `generator` table.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EnsembleFlags {
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    winsize: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Skip the drift decision on the block after each flagged drift.
    #[arg(long)]
    rearm: bool,
    /// Blocks after a true drift in which a flag still counts as a detection.
    #[arg(long)]
    tolerance: Option<usize>,
    /// JSON or TOML file; flags given on the command line take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DataFlags {
    /// Name of the label column; the last column when omitted.
    #[arg(long)]
    label_column: Option<String>,
    /// Schema JSON; inferred from the CSV when omitted.
    #[arg(long)]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    data_flags: DataFlags,
    /// Drift manifest used to score detections.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    ensemble: EnsembleFlags,
    /// Run the unweighted majority-vote baseline instead.
    #[arg(long)]
    baseline: bool,
    /// Leave the wall-clock column of blocks.csv empty.
    #[arg(long)]
    no_timings: bool,
    /// Directory for blocks.csv, summary.json and drift_log.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    param: SweepParam,
    /// Comma list, or `a..b` (five points) / `a..b:step`, both ends included.
    #[arg(long)]
    values: String,
    #[arg(long, default_value = "1")]
    seeds: String,
    /// Sweep over a CSV file instead of a generated stream.
    #[arg(long, conflicts_with_all = ["kind", "instances", "drift_at", "swap"])]
    data: Option<PathBuf>,
    #[command(flatten)]
    data_flags: DataFlags,
    #[command(flatten)]
    stream: StreamFlags,
    #[command(flatten)]
    ensemble: EnsembleFlags,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

/// The cause chain, skipping causes whose text the outer message already
/// includes.
fn describe(err: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in err.chain() {
        let part = cause.to_string();
        if !text.contains(&part) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&part);
        }
    }
    text
}

/// 2 for bad parameters, 3 for everything to do with the data.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<HarnessError>() {
            return if e.is_config() { 2 } else { 3 };
        }
        if let Some(GeneratorError::Param(_)) = cause.downcast_ref::<GeneratorError>() {
            return 2;
        }
        if let Some(EnsembleError::Config(_)) = cause.downcast_ref::<EnsembleError>() {
            return 2;
        }
    }
    3
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn default_kind(kind: Kind) -> GeneratorKind {
    match kind {
        Kind::Sea => GeneratorKind::Sea(SeaParams::default()),
        Kind::Hyperplane => GeneratorKind::Hyperplane(HyperplaneParams::default()),
        Kind::Led => GeneratorKind::Led(LedParams::default()),
        Kind::Rbf => GeneratorKind::Rbf(RbfParams::default()),
    }
}

fn kind_of(kind: &GeneratorKind) -> Kind {
    match kind {
        GeneratorKind::Sea(_) => Kind::Sea,
        GeneratorKind::Hyperplane(_) => Kind::Hyperplane,
        GeneratorKind::Led(_) => Kind::Led,
        GeneratorKind::Rbf(_) => Kind::Rbf,
    }
}

/// Merges the flags into the generator table of the config file.
fn generator_config(flags: &StreamFlags, file: Option<GeneratorConfig>) -> Result<GeneratorConfig> {
    let mut cfg = match (file, flags.kind) {
        (Some(cfg), Some(kind)) if kind_of(&cfg.kind) != kind => GeneratorConfig {
            kind: default_kind(kind),
            ..cfg
        },
        (Some(cfg), _) => cfg,
        (None, Some(kind)) => GeneratorConfig::new(default_kind(kind), 1, 10_000),
        (None, None) => {
            return Err(ConfigError::new("--kind is required without a generator config").into())
        }
    };
    if let Some(seed) = flags.seed {
        cfg.seed = seed;
    }
    if let Some(n) = flags.instances {
        cfg.instances = n;
    }
    if let Some(p) = flags.noise {
        cfg.label_noise = p;
    }
    match (&flags.drift_at, &flags.swap) {
        (Some(at), swap) => {
            let positions: Vec<usize> = parse_list(at, "--drift-at")?;
            let pair = match swap {
                Some(s) => match parse_list::<usize>(s, "--swap")?.as_slice() {
                    [a, b] => (*a, *b),
                    _ => return Err(ConfigError::new("--swap takes exactly two labels").into()),
                },
                None => cfg.drift.as_ref().map(|d| d.swap).unwrap_or((0, 1)),
            };
            cfg = cfg.with_swaps(positions, pair);
        }
        (None, Some(_)) => {
            return Err(ConfigError::new("--swap needs --drift-at").into());
        }
        (None, None) => {}
    }
    Ok(cfg)
}

fn manifest_path(csv: &Path) -> PathBuf {
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("stream");
    csv.with_file_name(format!("{stem}.manifest.json"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let file = load_file_config(args.config.as_deref())?;
    let cfg = generator_config(&args.stream, file.generator)?;
    let (source, manifest) = generate(&cfg)?;
    let written = source.write_csv(create(&args.out)?)?;
    let manifest_out = manifest_path(&args.out);
    manifest.save(&manifest_out)?;
    println!(
        "wrote {written} instances to {} and {} drift positions to {}",
        args.out.display(),
        manifest.drift_positions.len(),
        manifest_out.display()
    );
    Ok(())
}

fn label_column(flags: &DataFlags) -> LabelColumn {
    flags
        .label_column
        .clone()
        .map_or(LabelColumn::Last, LabelColumn::Named)
}

fn read_schema(flags: &DataFlags) -> Result<Option<Schema>> {
    flags
        .schema
        .as_ref()
        .map(|p| Schema::from_json_file(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

fn open_data(path: &Path, flags: &DataFlags) -> Result<StreamSource> {
    let column = label_column(flags);
    let source = match read_schema(flags)? {
        Some(schema) => open_csv_with_schema(path, column, schema),
        None => open_csv(path, column),
    };
    source
        .map_err(|e: StreamError| anyhow::Error::new(e))
        .with_context(|| format!("reading {}", path.display()))
}

fn run_options(
    file: &FileConfig,
    flags: &EnsembleFlags,
    manifest: Option<DriftManifest>,
) -> RunOptions {
    RunOptions {
        manifest,
        tolerance_blocks: flags
            .tolerance
            .or(file.tolerance_blocks)
            .unwrap_or(RunOptions::default().tolerance_blocks),
    }
}

fn ensemble_config(file: &FileConfig, flags: &EnsembleFlags) -> ecbe::EcbeConfig {
    let mut cfg = file.ensemble.clone();
    if let Some(k) = flags.k {
        cfg.k = k;
    }
    if let Some(w) = flags.winsize {
        cfg.winsize = w;
    }
    if let Some(a) = flags.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = flags.beta {
        cfg.beta = b;
    }
    if flags.rearm {
        cfg.rearm_after_drift = true;
    }
    cfg
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let file = load_file_config(args.ensemble.config.as_deref())?;
    let cfg = ensemble_config(&file, &args.ensemble);
    cfg.validate()?;
    let manifest = args
        .manifest
        .as_ref()
        .map(|p| DriftManifest::load(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let options = run_options(&file, &args.ensemble, manifest);
    let source = open_data(&args.data, &args.data_flags)?;

    let out = if args.baseline {
        run_baseline(&cfg, source, &options)?
    } else {
        prequential_run(&cfg, source, &options)?
    };

    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    out.write_block_csv(create(&args.out.join("blocks.csv"))?, !args.no_timings)?;
    serde_json::to_writer_pretty(create(&args.out.join("summary.json"))?, &out.summary)?;
    write_drift_log_csv(&out.drift_log, create(&args.out.join("drift_log.csv"))?)?;

    let s = &out.summary;
    let accuracy = s
        .average_accuracy
        .map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"));
    print!(
        "{} blocks, accuracy {accuracy}, {} drifts flagged",
        s.blocks, s.drifts_flagged
    );
    if let Some(d) = s.detection {
        print!(
            " ({} detected, {} false alarms, {} missed)",
            d.true_detections, d.false_alarms, d.missed
        );
    }
    println!();
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let file = load_file_config(args.ensemble.config.as_deref())?;
    let base = ensemble_config(&file, &args.ensemble);
    let spec = SweepSpec {
        param: args.param,
        values: parse_values(&args.values)?,
        seeds: parse_list(&args.seeds, "--seeds")?,
    };
    let template = match &args.data {
        Some(path) => SourceTemplate::Csv {
            path: path.clone(),
            label_column: label_column(&args.data_flags),
            schema: read_schema(&args.data_flags)?,
        },
        None => SourceTemplate::Generator(generator_config(&args.stream, file.generator.clone())?),
    };
    let options = run_options(&file, &args.ensemble, None);
    let rows = sweep(&spec, &base, &template, &options)?;
    write_sweep_csv(&rows, create(&args.out)?)?;
    println!(
        "{} runs over {} values written to {}",
        spec.values.len() * spec.seeds.len(),
        spec.values.len(),
        args.out.display()
    );
    Ok(())
}
