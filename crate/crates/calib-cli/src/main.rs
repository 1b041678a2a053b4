use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use calib_cli::dataset::{self, SensorSamples};
use calib_cli::io;
use calib_cli::{demo_transform, exit_code, parse_box, parse_method, parse_methods, parse_sigmas};
use calib_core::estimate::apply_transform;
use calib_core::simulate::{Estimator, McConfig};
use calib_core::DataMatrix;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Affine calibration between paired sensor data sets: simulation, fitting,
/// application, and multi-sensor board evaluation.
#[derive(Parser)]
#[command(name = "calib", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo comparison of the estimators over a noise grid.
    Simulate(SimulateArgs),
    /// Fit a transform from paired sample CSVs.
    Calibrate(CalibrateArgs),
    /// Apply a transform JSON to a sample CSV.
    Apply(ApplyArgs),
    /// All-pairs calibration transfer on a multi-sensor board recording.
    EvaluateBoard(EvaluateBoardArgs),
    /// Feature-wise min-max normalization of board recordings.
    Normalize(NormalizeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation runs per sigma.
    #[arg(long, default_value_t = 100)]
    runs: usize,
    /// Data vectors per run.
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// Sigma grid: inclusive integer range `1..15` or a list `1,5,15`.
    #[arg(long, default_value = "1..15")]
    sigmas: String,
    /// `all` or a comma-separated subset of gleser-watson,
    /// gleser-watson-denoised, least-squares, hybrid.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Master seed; defaults to $CALIB_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Uniform origin box `lo,hi`, applied per coordinate.
    #[arg(long, default_value = "0,100")]
    origin_box: String,
    /// True transform JSON; defaults to a built-in q=2 demo transform.
    #[arg(long)]
    transform: Option<PathBuf>,
    /// Worker threads; 0 picks the rayon default.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Keep per-run raw errors in the JSON report.
    #[arg(long)]
    retain_raw: bool,
    #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
    format: OutputFormat,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Sample CSV of system 1 (rows = samples).
    #[arg(long)]
    x: PathBuf,
    /// Sample CSV of system 2, aligned row-for-row with `--x`.
    #[arg(long)]
    y: PathBuf,
    /// gleser-watson, gleser-watson-denoised, least-squares, or hybrid.
    #[arg(long, default_value = "gleser-watson-denoised")]
    method: String,
    /// Eigenvectors to keep for the hybrid origin estimate (hybrid only).
    #[arg(long)]
    denoise_rank: Option<usize>,
    /// Output transform JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ApplyArgs {
    /// Transform JSON.
    #[arg(long)]
    transform: PathBuf,
    /// Sample CSV to map (rows = samples).
    #[arg(long)]
    data: PathBuf,
    /// Output sample CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateBoardArgs {
    /// Board CSV (`sensor_id,timestamp_ms,heater_step,raw_value,label`),
    /// `.gz` accepted.
    #[arg(long)]
    input: PathBuf,
    /// `all` or a comma-separated method subset.
    #[arg(long, default_value = "all")]
    methods: String,
    /// Output directory for the per-method tables and the summary.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct NormalizeArgs {
    /// Board CSV, `.gz` accepted.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for per-sensor normalized samples and bounds.
    #[arg(long)]
    out_dir: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Apply(args) => cmd_apply(args),
        Command::EvaluateBoard(args) => cmd_evaluate_board(args),
        Command::Normalize(args) => cmd_normalize(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}

fn seed_or_env(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("CALIB_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("CALIB_SEED={v:?} is not a valid seed")),
        Err(_) => Ok(0),
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let sigmas = parse_sigmas(&args.sigmas)?;
    let estimators = parse_methods(&args.methods)?;
    let origin_box = parse_box(&args.origin_box)?;
    let transform = match &args.transform {
        Some(path) => io::read_transform(path)?,
        None => demo_transform(),
    };
    let seed = seed_or_env(args.seed)?;
    let mut cfg = McConfig::new(args.runs, args.samples, transform, seed);
    cfg.sigmas = sigmas;
    cfg.estimators = estimators;
    cfg.origin_box = origin_box;
    cfg.retain_raw = args.retain_raw;
    cfg.validate()?;

    let report = calib_cli::simrun::run_parallel(&cfg, args.threads)?;
    let bytes = match args.format {
        OutputFormat::Csv => io::report_to_csv(&report)?,
        OutputFormat::Json => io::report_to_json(&cfg, &report)?,
    };
    io::write_atomic(&args.out, &bytes)?;
    Ok(())
}

fn load_estimation_pair(x: &Path, y: &Path) -> Result<(DataMatrix, DataMatrix)> {
    let x = io::read_samples(x)?;
    let y = io::read_samples(y)?;
    if x.dim() != y.dim() || x.n_samples() != y.n_samples() {
        bail!(
            "x is {} samples x {} features, y is {} x {}; the files must be aligned",
            x.n_samples(),
            x.dim(),
            y.n_samples(),
            y.dim()
        );
    }
    let x = DataMatrix::for_estimation(x.into_values())?;
    let y = DataMatrix::for_estimation(y.into_values())?;
    Ok((x, y))
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<()> {
    let mut estimator = parse_method(&args.method)?;
    match (&mut estimator, args.denoise_rank) {
        (Estimator::Hybrid { denoise_rank }, rank @ Some(_)) => *denoise_rank = rank,
        (_, Some(_)) => bail!("--denoise-rank only applies to --method hybrid"),
        _ => {}
    }
    let (x, y) = load_estimation_pair(&args.x, &args.y)?;
    let result = estimator.fit(&x, &y)?;
    eprintln!(
        "method {}: augmentation-row deviation {:.3e}, gram condition {:.3e}",
        estimator.label(),
        result.bottom_row_deviation,
        result.gram_condition
    );
    io::write_transform(
        &args.out,
        &result.transform,
        Some(estimator.label().to_string()),
        (result.denoise_rank > 0).then_some(result.denoise_rank),
    )
}

fn cmd_apply(args: ApplyArgs) -> Result<()> {
    let transform = io::read_transform(&args.transform)?;
    let data = io::read_samples(&args.data)?;
    if transform.dim() != data.dim() {
        bail!(
            "transform is {}-dimensional but the data has {} features",
            transform.dim(),
            data.dim()
        );
    }
    let mapped = apply_transform(&transform, &data)?;
    io::write_samples(&args.out, &mapped)
}

fn load_normalized_board(path: &Path) -> Result<Vec<SensorSamples>> {
    let recordings = dataset::ingest(path)?;
    recordings
        .iter()
        .map(|rec| {
            let s = dataset::aggregate(rec)?;
            if s.dropped_cycles > 0 {
                log::warn!(
                    "sensor {}: dropped {} incomplete heater cycles",
                    s.sensor_id,
                    s.dropped_cycles
                );
            }
            dataset::normalize_featurewise(&s)
        })
        .collect()
}

fn cmd_evaluate_board(args: EvaluateBoardArgs) -> Result<()> {
    let estimators = parse_methods(&args.methods)?;
    let sensors = load_normalized_board(&args.input)?;
    let (tables, summary) = dataset::evaluate_board(&sensors, &estimators)?;

    for table in &tables {
        let mut out = Vec::new();
        {
            let mut wtr = csv::Writer::from_writer(&mut out);
            let mut header = vec!["source".to_string()];
            header.extend(table.sensor_ids.iter().map(|id| format!("to_{id}")));
            header.push("per_source_mean".to_string());
            wtr.write_record(&header)?;
            for (j, row) in table.errors.iter().enumerate() {
                let mut rec = vec![table.sensor_ids[j].to_string()];
                rec.extend(row.iter().map(|v| io::fmt_f64(*v)));
                rec.push(io::fmt_f64(table.per_source[j]));
                wtr.write_record(&rec)?;
            }
            wtr.flush()?;
        }
        io::write_atomic(&args.out_dir.join(format!("pairwise-{}.csv", table.method)), &out)?;
    }

    let mut out = Vec::new();
    {
        let mut wtr = csv::Writer::from_writer(&mut out);
        let mut header = vec!["method".to_string()];
        header.extend(summary.sensor_ids.iter().map(|id| format!("sensor_{id}")));
        wtr.write_record(&header)?;
        for (m, row) in summary.methods.iter().zip(&summary.normalized) {
            let mut rec = vec![m.clone()];
            rec.extend(row.iter().map(|v| io::fmt_f64(*v)));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
    }
    io::write_atomic(&args.out_dir.join("summary.csv"), &out)?;

    let mut json = Vec::new();
    serde_json::to_writer_pretty(&mut json, &summary)?;
    json.push(b'\n');
    io::write_atomic(&args.out_dir.join("summary.json"), &json)?;
    Ok(())
}

fn cmd_normalize(args: NormalizeArgs) -> Result<()> {
    let sensors = load_normalized_board(&args.input)?;
    let mut bounds = serde_json::Map::new();
    for s in &sensors {
        io::write_samples(
            &args.out_dir.join(format!("sensor-{}.csv", s.sensor_id)),
            &s.samples,
        )?;
        let b: Vec<Vec<f64>> = s
            .bounds
            .as_ref()
            .map(|bs| bs.iter().map(|(lo, hi)| vec![*lo, *hi]).collect())
            .unwrap_or_default();
        bounds.insert(s.sensor_id.to_string(), serde_json::json!(b));
    }
    let mut json = Vec::new();
    serde_json::to_writer_pretty(&mut json, &serde_json::Value::Object(bounds))?;
    json.push(b'\n');
    io::write_atomic(&args.out_dir.join("bounds.json"), &json)
}
