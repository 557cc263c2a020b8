//! Command-line front end: `estimate`, `simulate`, `compare` and `curve`.
//!
//! Data goes to stdout (or `--out`), diagnostics to stderr. Exit codes are 0
//! on success, 2 for usage errors and 3 for data or runtime errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::baselines::{argmax_k, baseline, BaselineRecord, IndexName};
use crate::error::Error;
use crate::geometry::DataMatrix;
use crate::index::{select_k_detailed, DEFAULT_K_MAX};
use crate::io::{format_sig, load_csv, sniff_header, write_labeled_csv, RunReport};
use crate::partition::{fit_range, Method, Partition, PartitionerConfig, DEFAULT_SEED};
use crate::synthgen::{generate, Preset, DEFAULT_SAMPLE_SIZE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

/// Table precision for CSV output.
const SIG_DIGITS: usize = 6;

#[derive(Debug, Parser)]
#[command(name = "bwdm", version, about = "Estimate the number of clusters with the BWDM stopping rule")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score K = 2..kmax and report the BWDM curve and the selected K.
    Estimate(EstimateArgs),
    /// Write a labelled sample from one of the simulation presets as CSV.
    Simulate(SimulateArgs),
    /// Tabulate several validity indices per K on shared partitions.
    Compare(CompareArgs),
    /// Emit the (K, BWDM) curve for plotting.
    Curve(CurveArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PresetArg {
    Sim1,
    Sim2,
    Sim3,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Sim1 => Preset::Sim1,
            PresetArg::Sim2 => Preset::Sim2,
            PresetArg::Sim3 => Preset::Sim3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PartitionerArg {
    Kmedians,
    Kmeans,
    Pam,
}

impl From<PartitionerArg> for Method {
    fn from(p: PartitionerArg) -> Self {
        match p {
            PartitionerArg::Kmedians => Method::KSpatialMedians,
            PartitionerArg::Kmeans => Method::KMeans,
            PartitionerArg::Pam => Method::Pam,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
struct SourceArgs {
    /// CSV file (comma separated; a header row is detected automatically).
    #[arg(long, value_name = "PATH", conflicts_with = "preset", required_unless_present = "preset")]
    input: Option<PathBuf>,
    /// Simulation preset.
    #[arg(long, value_enum)]
    preset: Option<PresetArg>,
    /// Sample size for presets.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    n: usize,
    /// Columns to drop by header name, comma separated.
    #[arg(long, value_name = "COL[,COL]", value_delimiter = ',')]
    drop: Vec<String>,
    /// Z-score every column before clustering.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    kmax: usize,
    #[arg(long, value_enum, default_value_t = PartitionerArg::Kmedians)]
    partitioner: PartitionerArg,
    /// Seeds both preset generation and partitioner restarts.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Random restarts per K.
    #[arg(long, default_value_t = 10)]
    n_init: usize,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Extra indices to report alongside BWDM (bwdm, ch, silhouette).
    #[arg(long, default_value = "bwdm")]
    indices: String,
    /// Include wall-clock time in the report.
    #[arg(long)]
    timing: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_SIZE)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    fit: FitArgs,
    /// Comma separated subset of bwdm, ch, silhouette.
    #[arg(long, default_value = "bwdm,ch,silhouette")]
    indices: String,
    /// Score silhouette on PAM partitions instead of the shared ones.
    #[arg(long)]
    pam_silhouette: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    fit: FitArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{rendered}")
            } else {
                write!(stdout, "{rendered}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Estimate(a) => estimate(a, stdout, stderr),
        Command::Simulate(a) => simulate(a, stdout),
        Command::Compare(a) => compare(a, stdout),
        Command::Curve(a) => curve(a, stdout),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let msg = match &e {
                CliError::Usage(m) => format!("usage error: {m}"),
                CliError::Data(m) => format!("error: {m}"),
            };
            let _ = writeln!(stderr, "{msg}");
            e.code()
        }
    }
}

struct Loaded {
    id: String,
    data: DataMatrix,
}

fn load(src: &SourceArgs, seed: u64) -> Result<Loaded, CliError> {
    let (id, data) = match (&src.input, src.preset) {
        (Some(path), _) => {
            let header = sniff_header(path)?;
            let data = load_csv(path, header, &src.drop)?;
            let id = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string());
            (id, data)
        }
        (None, Some(p)) => {
            if !src.drop.is_empty() {
                return Err(CliError::Usage("--drop only applies to --input".into()));
            }
            let preset = Preset::from(p);
            let sample = generate(&preset.config(src.n, seed))?;
            (preset.to_string(), sample.data)
        }
        (None, None) => return Err(CliError::Usage("one of --input or --preset is required".into())),
    };
    let data = if src.standardize { data.standardized() } else { data };
    Ok(Loaded { id, data })
}

fn partitioner(fit: &FitArgs) -> Result<PartitionerConfig, CliError> {
    if fit.kmax < 2 {
        return Err(CliError::Usage("--kmax must be at least 2".into()));
    }
    if fit.n_init < 1 {
        return Err(CliError::Usage("--n-init must be at least 1".into()));
    }
    Ok(PartitionerConfig {
        method: fit.partitioner.into(),
        seed: fit.seed,
        n_init: fit.n_init,
        ..Default::default()
    })
}

fn parse_indices(list: &str) -> Result<Vec<IndexName>, CliError> {
    let mut out = Vec::new();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let name: IndexName = item.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
        if !out.contains(&name) {
            out.push(name);
        }
    }
    if out.is_empty() {
        return Err(CliError::Usage("--indices must name at least one index".into()));
    }
    Ok(out)
}

fn emit(output: &OutputArgs, stdout: &mut dyn Write, body: &str) -> Result<(), CliError> {
    match &output.out {
        Some(path) => {
            let mut f = File::create(path)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            f.write_all(body.as_bytes())?;
        }
        None => stdout.write_all(body.as_bytes())?,
    }
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Data(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn baseline_rows(
    names: &[IndexName],
    data: &DataMatrix,
    partitions: &[Partition],
    silhouette_partitions: &[Partition],
) -> Result<Vec<BaselineRecord>, CliError> {
    let mut rows = Vec::new();
    for &name in names.iter().filter(|&&n| n != IndexName::Bwdm) {
        let parts = if name == IndexName::Silhouette {
            silhouette_partitions
        } else {
            partitions
        };
        for p in parts {
            rows.push(baseline(name, data, p)?);
        }
    }
    Ok(rows)
}

fn estimate(args: EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<(), CliError> {
    let config = partitioner(&args.fit)?;
    let indices = parse_indices(&args.indices)?;
    let loaded = load(&args.source, args.fit.seed)?;
    let started = Instant::now();

    let (curve, fits) = select_k_detailed(&loaded.data, args.fit.kmax, &config)?;
    let partitions: Vec<Partition> = fits.into_iter().map(|f| f.partition).collect();
    let baselines = if indices.iter().any(|&n| n != IndexName::Bwdm) {
        Some(baseline_rows(&indices, &loaded.data, &partitions, &partitions)?)
    } else {
        None
    };

    let _ = writeln!(
        stderr,
        "note: BWDM is defined for K >= 2; the one-cluster hypothesis is not tested"
    );
    let report = RunReport {
        dataset_id: loaded.id,
        k_max: args.fit.kmax,
        partitioner: config,
        curve,
        baselines,
        wall_time_ms: args.timing.then(|| started.elapsed().as_millis() as u64),
    };

    let body = match args.output.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from("k,abdm,awdm,bwdm\n");
            for r in &report.curve.records {
                s.push_str(&format!(
                    "{},{},{},{}\n",
                    r.k,
                    format_sig(r.abdm, SIG_DIGITS),
                    format_sig(r.awdm, SIG_DIGITS),
                    format_sig(r.bwdm, SIG_DIGITS)
                ));
            }
            s
        }
    };
    emit(&args.output, stdout, &body)
}

fn simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    if args.n < 1 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let sample = generate(&Preset::from(args.preset).config(args.n, args.seed))?;
    match &args.out {
        Some(path) => {
            let f = File::create(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            write_labeled_csv(&sample, BufWriter::new(f))?;
        }
        None => write_labeled_csv(&sample, &mut *stdout)?,
    }
    Ok(())
}

#[derive(Serialize)]
struct CompareReport {
    dataset_id: String,
    k_max: usize,
    partitioner: PartitionerConfig,
    records: Vec<BaselineRecord>,
    best_k: Vec<BestK>,
}

#[derive(Serialize)]
struct BestK {
    index_name: IndexName,
    k: usize,
}

fn compare(args: CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = partitioner(&args.fit)?;
    let indices = parse_indices(&args.indices)?;
    let loaded = load(&args.source, args.fit.seed)?;
    let data = &loaded.data;

    let (curve, fits) = select_k_detailed(data, args.fit.kmax, &config)?;
    let partitions: Vec<Partition> = fits.into_iter().map(|f| f.partition).collect();
    let pam_partitions;
    let silhouette_parts = if args.pam_silhouette && indices.contains(&IndexName::Silhouette) {
        let pam_cfg = PartitionerConfig {
            method: Method::Pam,
            ..config
        };
        pam_partitions = fit_range(data, 2..=args.fit.kmax, &pam_cfg)?
            .into_iter()
            .map(|f| f.partition)
            .collect::<Vec<_>>();
        &pam_partitions
    } else {
        &partitions
    };

    let mut records = Vec::new();
    let mut best_k = Vec::new();
    for &name in &indices {
        let rows: Vec<BaselineRecord> = match name {
            IndexName::Bwdm => curve
                .records
                .iter()
                .map(|r| BaselineRecord {
                    k: r.k,
                    value: r.bwdm,
                    index_name: IndexName::Bwdm,
                })
                .collect(),
            _ => baseline_rows(&[name], data, &partitions, silhouette_parts)?,
        };
        let k = if name == IndexName::Bwdm {
            curve.best_k
        } else {
            argmax_k(&rows).expect("k_max >= 2")
        };
        best_k.push(BestK { index_name: name, k });
        records.extend(rows);
    }

    let body = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("k,index,value\n");
            for r in &records {
                s.push_str(&format!("{},{},{}\n", r.k, r.index_name, format_sig(r.value, SIG_DIGITS)));
            }
            s
        }
        Format::Json => to_json(&CompareReport {
            dataset_id: loaded.id,
            k_max: args.fit.kmax,
            partitioner: config,
            records,
            best_k,
        })?,
    };
    emit(&args.output, stdout, &body)
}

#[derive(Serialize)]
struct CurvePoint {
    k: usize,
    bwdm: f64,
}

fn curve(args: CurveArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let config = partitioner(&args.fit)?;
    let loaded = load(&args.source, args.fit.seed)?;
    let (curve, _) = select_k_detailed(&loaded.data, args.fit.kmax, &config)?;
    let body = match args.output.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = String::from("k,bwdm\n");
            for r in &curve.records {
                s.push_str(&format!("{},{}\n", r.k, format_sig(r.bwdm, SIG_DIGITS)));
            }
            s
        }
        Format::Json => to_json(
            &curve
                .records
                .iter()
                .map(|r| CurvePoint { k: r.k, bwdm: r.bwdm })
                .collect::<Vec<_>>(),
        )?,
    };
    emit(&args.output, stdout, &body)
}
