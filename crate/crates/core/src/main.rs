//! `groklab` command line: train, sweep, analyze, factor, verify-analytic, plot.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use groklab::experiment::{run_sweep, run_training, RunConfig, SweepConfig};
use groklab::network::load_checkpoint;
use groklab::{analytic, experiment, metrics, pca, plot, Error, FORMAT_VERSION};

/// Environment variable overriding the config root seed.
const SEED_ENV: &str = "GROKLAB_SEED";

#[derive(Parser)]
#[command(name = "groklab", version, about = "Grokking laboratory for modular addition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run from a JSON config.
    Train {
        /// Run config file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trace.csv, summary.json, and checkpoints.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every config in a sweep file on a worker pool.
    Sweep {
        /// Sweep config file.
        #[arg(long)]
        config: PathBuf,
        /// Root output directory; run i writes to run_XXX/ under it.
        #[arg(long)]
        out: PathBuf,
        /// Worker pool size.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Metric report for a checkpoint.
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Comma-separated subset of: entropy, autocorr, dft, deadweight.
        #[arg(long)]
        metrics: String,
        /// |w| threshold for the deadweight metric.
        #[arg(long, default_value_t = 1e-41)]
        threshold: f64,
        /// Also write one CSV per last-layer column for autocorr/dft.
        #[arg(long)]
        csv_dir: Option<PathBuf>,
        /// Entropy over per-neuron row norms instead of all connections.
        #[arg(long)]
        per_neuron: bool,
    },
    /// PCA-cluster factorization scan over projection pairs.
    Factor {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Number of (even, odd) projection pairs to scan.
        #[arg(long)]
        pairs: usize,
        /// Cluster cutoff in units of the median nearest-neighbor distance.
        #[arg(long, default_value_t = 2.0)]
        link_factor: f64,
        /// Directory for the per-pair SVG scatters.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Exhaustively check the closed-form construction for one seed.
    VerifyAnalytic {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a trace or checkpoint as SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// trace.csv for curve kinds, checkpoint JSON otherwise.
        #[arg(long)]
        input: PathBuf,
        /// Output SVG path.
        #[arg(long)]
        out: PathBuf,
        /// Projection pair index for pca_scatter.
        #[arg(long, default_value_t = 0)]
        pair: usize,
        /// Last-layer column for spectrum/autocorrelation.
        #[arg(long, default_value_t = 0)]
        column: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum PlotKind {
    AccuracyCurves,
    EntropyCurves,
    PcaScatter,
    Spectrum,
    Autocorrelation,
}

/// Exit status: 2 for config/usage problems, 1 for run failures.
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_)
            | Error::Config(_)
            | Error::Checkpoint(_)
            | Error::Json(_)
            | Error::DegenerateDataset(_)
            | Error::DegenerateSplit(_)
            | Error::Degenerate(_)
            | Error::DegenerateWeights
            | Error::ConstantSequence => 2,
            Error::NumericOverflow { .. } | Error::Io(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, CliError> {
    match command {
        Command::Train { config, out } => cmd_train(&config, &out),
        Command::Sweep {
            config,
            out,
            workers,
        } => cmd_sweep(&config, &out, workers),
        Command::Analyze {
            checkpoint,
            metrics,
            threshold,
            csv_dir,
            per_neuron,
        } => cmd_analyze(&checkpoint, &metrics, threshold, csv_dir.as_deref(), per_neuron),
        Command::Factor {
            checkpoint,
            pairs,
            link_factor,
            out,
        } => cmd_factor(&checkpoint, pairs, link_factor, &out),
        Command::VerifyAnalytic { p, n, seed } => cmd_verify_analytic(p, n, seed),
        Command::Plot {
            kind,
            input,
            out,
            pair,
            column,
        } => cmd_plot(kind, &input, &out, pair, column),
    }
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))
}

fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .parse::<u64>()
            .map(Some)
            .map_err(|e| CliError::usage(format!("{SEED_ENV}={v}: {e}"))),
        Err(_) => Ok(None),
    }
}

fn require_format_version(v: Option<u32>, what: &str) -> Result<(), CliError> {
    match v {
        Some(FORMAT_VERSION) => Ok(()),
        Some(other) => Err(CliError::usage(format!(
            "{what}: unsupported format_version {other} (expected {FORMAT_VERSION})"
        ))),
        None => Err(CliError::usage(format!(
            "{what}: missing required field format_version"
        ))),
    }
}

fn cmd_train(config_path: &Path, out: &Path) -> Result<ExitCode, CliError> {
    let text = read_to_string(config_path)?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", config_path.display())))?;
    require_format_version(config.format_version, "run config")?;
    config.out_dir = Some(out.to_path_buf());
    if let Some(seed) = env_seed()? {
        config.seed = seed;
        config.seed_from_env = true;
    }
    config.validate()?;
    let (_, summary) = run_training(&config)?;
    println!("{}", serde_json::to_string_pretty(&summary).map_err(Error::from)?);
    if summary.status.is_ok() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: run failed");
        Ok(ExitCode::from(1))
    }
}

fn cmd_sweep(config_path: &Path, out: &Path, workers: usize) -> Result<ExitCode, CliError> {
    let text = read_to_string(config_path)?;
    let mut sweep: SweepConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{}: {e}", config_path.display())))?;
    require_format_version(sweep.format_version, "sweep config")?;
    if let Some(seed) = env_seed()? {
        sweep.root_seed = Some(seed);
    }
    let configs = sweep.expand(out);
    for c in &configs {
        c.validate()?;
    }
    let summaries = run_sweep(&configs, workers)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "runs": summaries,
    });
    let pretty = serde_json::to_string_pretty(&doc).map_err(Error::from)?;
    fs::write(out.join("sweep_summary.json"), &pretty).map_err(Error::from)?;
    println!("{pretty}");
    if summaries.iter().all(|s| s.status.is_ok()) {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: at least one run failed");
        Ok(ExitCode::from(1))
    }
}

fn cmd_analyze(
    checkpoint: &Path,
    metric_list: &str,
    threshold: f64,
    csv_dir: Option<&Path>,
    per_neuron: bool,
) -> Result<ExitCode, CliError> {
    let (model, _, epoch) = load_checkpoint(checkpoint)?;
    let mut report = serde_json::Map::new();
    report.insert("format_version".into(), json!(FORMAT_VERSION));
    report.insert("checkpoint".into(), json!(checkpoint.display().to_string()));
    report.insert("epoch".into(), json!(epoch));

    if let Some(dir) = csv_dir {
        fs::create_dir_all(dir).map_err(Error::from)?;
    }
    let last = model.weights.last().expect("model has layers");

    for metric in metric_list.split(',') {
        match metric.trim() {
            "entropy" => {
                let mode = if per_neuron {
                    metrics::EntropyMode::NeuronNorms
                } else {
                    metrics::EntropyMode::Connections
                };
                let per_layer = model
                    .weights
                    .iter()
                    .map(|w| metrics::layer_entropy_mode(w.view(), mode))
                    .collect::<Result<Vec<f64>, _>>()?;
                let bounds: Vec<f64> = model
                    .weights
                    .iter()
                    .map(|w| (w.len() as f64).ln())
                    .collect();
                report.insert(
                    "entropy".into(),
                    json!({ "mode": mode, "per_layer": per_layer, "ln_count_bounds": bounds }),
                );
            }
            "deadweight" => {
                let per_layer = model
                    .weights
                    .iter()
                    .map(|w| metrics::dead_weight_fraction(w.view(), threshold))
                    .collect::<Result<Vec<f64>, _>>()?;
                report.insert(
                    "deadweight".into(),
                    json!({ "threshold": threshold, "per_layer": per_layer }),
                );
            }
            "autocorr" => {
                report.insert("autocorr".into(), autocorr_report(last, csv_dir)?);
            }
            "dft" => {
                report.insert("dft".into(), dft_report(last, csv_dir)?);
            }
            other => {
                return Err(CliError::usage(format!(
                    "unknown metric '{other}' (expected entropy, autocorr, dft, deadweight)"
                )))
            }
        }
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&serde_json::Value::Object(report)).map_err(Error::from)?
    );
    Ok(ExitCode::SUCCESS)
}

/// Per-hidden-unit sequences: column k of the last layer holds that unit's
/// weights to the P output classes.
fn autocorr_report(
    last: &ndarray::Array2<f64>,
    csv_dir: Option<&Path>,
) -> Result<serde_json::Value, CliError> {
    let p = last.nrows();
    let mut mean_curve = vec![0.0; p];
    let mut analyzed = 0usize;
    let mut skipped = 0usize;
    for (k, col) in last.columns().into_iter().enumerate() {
        let x: Vec<f64> = col.to_vec();
        match metrics::circular_autocorrelation(&x) {
            Ok(corr) => {
                for (acc, v) in mean_curve.iter_mut().zip(&corr) {
                    *acc += v;
                }
                analyzed += 1;
                if let Some(dir) = csv_dir {
                    metrics::write_sequence_csv(&dir.join(format!("autocorr_col_{k:03}.csv")), &corr)?;
                }
            }
            Err(Error::ConstantSequence) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    if analyzed > 0 {
        for v in mean_curve.iter_mut() {
            *v /= analyzed as f64;
        }
    }
    Ok(json!({
        "columns_analyzed": analyzed,
        "columns_skipped": skipped,
        "mean_curve": mean_curve,
    }))
}

fn dft_report(
    last: &ndarray::Array2<f64>,
    csv_dir: Option<&Path>,
) -> Result<serde_json::Value, CliError> {
    let mut ratios: Vec<f64> = Vec::new();
    let mut best: Option<(usize, metrics::PeakReport)> = None;
    let mut skipped = 0usize;
    for (k, col) in last.columns().into_iter().enumerate() {
        let x: Vec<f64> = col.to_vec();
        let spectrum = metrics::dft_power_spectrum(&x)?;
        match metrics::peak_frequency_ratio(&spectrum, true) {
            Ok(peak) => {
                ratios.push(peak.ratio);
                if best.as_ref().map_or(true, |(_, b)| peak.ratio > b.ratio) {
                    best = Some((k, peak));
                }
                if let Some(dir) = csv_dir {
                    metrics::write_sequence_csv(&dir.join(format!("dft_col_{k:03}.csv")), &spectrum)?;
                }
            }
            Err(Error::Degenerate(_)) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    ratios.sort_by(f64::total_cmp);
    let median = if ratios.is_empty() {
        0.0
    } else {
        ratios[ratios.len() / 2]
    };
    let ge5 = ratios.iter().filter(|&&r| r >= 5.0).count();
    Ok(json!({
        "columns_analyzed": ratios.len(),
        "columns_skipped": skipped,
        "max_ratio": best.as_ref().map(|(_, b)| b.ratio),
        "max_ratio_column": best.as_ref().map(|(k, _)| k),
        "max_ratio_peak_bin": best.as_ref().map(|(_, b)| b.peak_bin),
        "median_ratio": median,
        "columns_with_ratio_ge_5": ge5,
    }))
}

fn cmd_factor(
    checkpoint: &Path,
    pairs: usize,
    link_factor: f64,
    out: &Path,
) -> Result<ExitCode, CliError> {
    let (model, _, _) = load_checkpoint(checkpoint)?;
    let last = model.weights.last().expect("model has layers");
    let p = last.nrows();
    let result = pca::pca(last.view())?;
    let projection_pairs = pca::projection_pairs(&result, pairs)?;
    fs::create_dir_all(out).map_err(Error::from)?;
    let mut pair_reports = Vec::new();
    for pair in &projection_pairs {
        let svg_path = out.join(format!("pca_pair_{}.svg", pair.pair_index));
        fs::write(&svg_path, plot::render_pca_scatter(pair)).map_err(Error::from)?;
        pair_reports.push(json!({
            "pair_index": pair.pair_index,
            "circularity": pca::circularity_score(&pair.points).ok(),
            "svg": svg_path.display().to_string(),
        }));
    }
    let factorization = pca::scan_factorization(&result, p, pairs, link_factor)?;
    let doc = json!({
        "format_version": FORMAT_VERSION,
        "modulus": p,
        "link_factor": link_factor,
        "factorization": factorization,
        "pairs": pair_reports,
    });
    println!("{}", serde_json::to_string_pretty(&doc).map_err(Error::from)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_analytic(p: usize, n: usize, seed: u64) -> Result<ExitCode, CliError> {
    let report = analytic::verify_analytic(p, n, seed)?;
    println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(
    kind: PlotKind,
    input: &Path,
    out: &Path,
    pair: usize,
    column: usize,
) -> Result<ExitCode, CliError> {
    let svg = match kind {
        PlotKind::AccuracyCurves => {
            plot::render_accuracy_curves(&experiment::read_trace_csv(input)?)
        }
        PlotKind::EntropyCurves => {
            plot::render_entropy_curves(&experiment::read_trace_csv(input)?)
        }
        PlotKind::PcaScatter => {
            let (model, _, _) = load_checkpoint(input)?;
            let last = model.weights.last().expect("model has layers");
            let result = pca::pca(last.view())?;
            let pairs = pca::projection_pairs(&result, pair + 1)?;
            plot::render_pca_scatter(pairs.last().expect("pair + 1 >= 1"))
        }
        PlotKind::Spectrum | PlotKind::Autocorrelation => {
            let (model, _, _) = load_checkpoint(input)?;
            let last = model.weights.last().expect("model has layers");
            if column >= last.ncols() {
                return Err(CliError::usage(format!(
                    "column {column} out of range for last layer with {} columns",
                    last.ncols()
                )));
            }
            let x: Vec<f64> = last.column(column).to_vec();
            match kind {
                PlotKind::Spectrum => {
                    let spectrum = metrics::dft_power_spectrum(&x)?;
                    plot::render_spectrum(&spectrum, &format!("Power spectrum: column {column}"))
                }
                _ => {
                    let corr = metrics::circular_autocorrelation(&x)?;
                    plot::render_autocorrelation(
                        &corr,
                        &format!("Circular autocorrelation: column {column}"),
                    )
                }
            }
        }
    };
    fs::write(out, svg).map_err(Error::from)?;
    Ok(ExitCode::SUCCESS)
}
