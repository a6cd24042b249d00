//! Config-driven training runs and sweeps.
//!
//! A run is fully determined by its `RunConfig`: the dataset seed fixes the
//! split, the run seed fixes the weight init, and training is full batch, so
//! identical configs produce byte-identical traces and checkpoints.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{self, DatasetSpec, EncodedDataset};
use crate::metrics::{detect_grokking, layer_entropy, GrokReport, TraceRow, TrainingTrace};
use crate::network::{
    init_model, save_checkpoint, ActivationSpec, AdamWParams, ArchSpec, ModelState, OptimizerState,
};
use crate::{Error, Result, FORMAT_VERSION};

fn default_log_every() -> u64 {
    100
}

fn default_acc_threshold() -> f64 {
    0.99
}

/// One training run. `format_version` is optional so sweep files can omit it
/// on nested runs; top-level config files must carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    pub dataset: DatasetSpec,
    /// One or two hidden widths; input/output dims derive from the modulus.
    pub hidden_dims: Vec<usize>,
    pub activation: ActivationSpec,
    #[serde(default)]
    pub optimizer: AdamWParams,
    pub epochs: u64,
    #[serde(default = "default_log_every")]
    pub log_every: u64,
    /// 0 disables periodic checkpoints; the final checkpoint is always written.
    #[serde(default)]
    pub checkpoint_every: u64,
    #[serde(default = "default_acc_threshold")]
    pub acc_threshold: f64,
    /// Root seed of the run; seeds the weight initialization.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Set by the CLI when GROKLAB_SEED overrode `seed`; never serialized.
    #[serde(skip)]
    pub seed_from_env: bool,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(v) = self.format_version {
            if v != FORMAT_VERSION {
                return Err(Error::Config(format!(
                    "unsupported format_version {v} (expected {FORMAT_VERSION})"
                )));
            }
        }
        self.dataset.validate()?;
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.log_every < 1 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        if !(self.acc_threshold > 0.0 && self.acc_threshold <= 1.0) {
            return Err(Error::Config(format!(
                "acc_threshold must be in (0, 1], got {}",
                self.acc_threshold
            )));
        }
        self.optimizer.validate()?;
        self.arch().validate()
    }

    /// The architecture this config trains: `2P -> hidden -> P`.
    pub fn arch(&self) -> ArchSpec {
        ArchSpec {
            input_dim: self.dataset.input_dim(),
            hidden_dims: self.hidden_dims.clone(),
            output_dim: self.dataset.modulus,
            activation: self.activation,
        }
    }

    /// SHA-256 over the canonical JSON of the config with the output
    /// location stripped, so the digest identifies the experiment itself.
    pub fn digest(&self) -> String {
        let mut identity = self.clone();
        identity.out_dir = None;
        identity.format_version = Some(FORMAT_VERSION);
        let json = serde_json::to_string(&identity).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(json.as_bytes());
        format!("{:x}", hasher.finalize())
    }
}

/// Splitmix-style mixer deriving per-run seeds in sweeps:
/// `seed_i = mix_seed(root, i)`.
pub fn mix_seed(root: u64, index: u64) -> u64 {
    let mut z = root.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed {
        #[serde(skip_serializing_if = "Option::is_none")]
        epoch: Option<u64>,
        message: String,
    },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub config_digest: String,
    #[serde(flatten)]
    pub status: RunStatus,
    pub effective_seed: u64,
    pub seed_from_env: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grok: Option<GrokReport>,
    pub final_entropies: Vec<f64>,
    pub wall_clock_seconds: f64,
    pub trace_path: Option<String>,
    pub checkpoints: Vec<String>,
}

/// Trains one config: full-batch AdamW, a trace row at epoch 0, every
/// `log_every` epochs and the final epoch, periodic plus final checkpoints,
/// `trace.csv` and `summary.json` in the run's output directory.
///
/// Numeric overflow does not return an error: the run aborts and the failing
/// epoch lands in the summary, so sweeps can keep going.
pub fn run_training(config: &RunConfig) -> Result<(TrainingTrace, RunSummary)> {
    config.validate()?;
    let out_dir = config
        .out_dir
        .clone()
        .ok_or_else(|| Error::Config("out_dir is required to run".into()))?;
    fs::create_dir_all(&out_dir)?;
    let started = Instant::now();

    let pairs = dataset::generate_pairs(&config.dataset)?;
    let (train, test) = dataset::split(
        &pairs,
        config.dataset.modulus,
        config.dataset.train_frac,
        config.dataset.seed,
    )?;
    if train.is_empty() || test.is_empty() {
        return Err(Error::DegenerateSplit(format!(
            "training needs nonempty train and test sets, got {}/{}",
            train.len(),
            test.len()
        )));
    }

    let mut model = init_model(&config.arch(), config.seed)?;
    let mut opt = OptimizerState::new(&model, config.optimizer)?;
    let mut trace = TrainingTrace::default();
    let mut checkpoints: Vec<PathBuf> = Vec::new();
    let mut failure: Option<(u64, String)> = None;

    // Rows stream to disk as they are logged so long runs are observable.
    let trace_path = out_dir.join("trace.csv");
    let mut trace_file = io::BufWriter::new(fs::File::create(&trace_path)?);
    io::Write::write_all(
        &mut trace_file,
        trace_header(config.arch().num_layers()).as_bytes(),
    )?;
    let log_and_stream = |trace: &mut TrainingTrace,
                              epoch: u64,
                              model: &ModelState,
                              file: &mut io::BufWriter<fs::File>|
     -> Result<()> {
        log_row(trace, epoch, model, &train, &test)?;
        let row = trace.rows.last().expect("row just pushed");
        io::Write::write_all(file, format_trace_row(row).as_bytes())?;
        io::Write::flush(file)?;
        Ok(())
    };

    log_and_stream(&mut trace, 0, &model, &mut trace_file)?;

    let p = config.dataset.modulus;
    for epoch in 1..=config.epochs {
        match model.loss_and_grad_pairs(&train.pair_index, p, &train.labels) {
            Ok((_, grads)) => opt.step(&mut model, &grads)?,
            Err(Error::NumericOverflow { .. }) => {
                failure = Some((epoch, format!("numeric overflow at epoch {epoch}")));
                break;
            }
            Err(e) => return Err(e),
        }
        if epoch % config.log_every == 0 || epoch == config.epochs {
            match log_and_stream(&mut trace, epoch, &model, &mut trace_file) {
                Ok(()) => {}
                Err(Error::NumericOverflow { .. }) => {
                    failure = Some((epoch, format!("numeric overflow at epoch {epoch}")));
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        let periodic = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
        if periodic && epoch != config.epochs && failure.is_none() {
            let path = out_dir.join(format!("checkpoint_epoch_{epoch:07}.json"));
            save_checkpoint(&model, config.seed, epoch, &path)?;
            checkpoints.push(path);
        }
    }
    if failure.is_none() {
        let path = out_dir.join(format!("checkpoint_epoch_{:07}.json", config.epochs));
        save_checkpoint(&model, config.seed, config.epochs, &path)?;
        checkpoints.push(path);
    }
    drop(trace_file);

    let grok = if trace.is_empty() {
        None
    } else {
        Some(detect_grokking(&trace, config.acc_threshold)?)
    };
    let final_entropies = trace
        .rows
        .last()
        .map(|r| r.entropies.clone())
        .unwrap_or_default();
    let summary = RunSummary {
        format_version: FORMAT_VERSION,
        config_digest: config.digest(),
        status: match failure {
            None => RunStatus::Ok,
            Some((epoch, message)) => RunStatus::Failed {
                epoch: Some(epoch),
                message,
            },
        },
        effective_seed: config.seed,
        seed_from_env: config.seed_from_env,
        grok,
        final_entropies,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        trace_path: Some(trace_path.display().to_string()),
        checkpoints: checkpoints.iter().map(|p| p.display().to_string()).collect(),
    };
    fs::write(
        out_dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok((trace, summary))
}

fn log_row(
    trace: &mut TrainingTrace,
    epoch: u64,
    model: &ModelState,
    train: &EncodedDataset,
    test: &EncodedDataset,
) -> Result<()> {
    let (train_loss, train_acc) =
        model.evaluate_pairs(&train.pair_index, train.modulus, &train.labels)?;
    let (test_loss, test_acc) =
        model.evaluate_pairs(&test.pair_index, test.modulus, &test.labels)?;
    let entropies = model
        .weights
        .iter()
        .map(|w| layer_entropy(w.view()))
        .collect::<Result<Vec<f64>>>()?;
    trace.push(TraceRow {
        epoch,
        train_loss,
        test_loss,
        train_acc,
        test_acc,
        entropies,
    })
}

/// Runs configs on a bounded worker pool; summaries come back in input order
/// and a failed run becomes a failure summary instead of stopping the sweep.
pub fn run_sweep(configs: &[RunConfig], workers: usize) -> Result<Vec<RunSummary>> {
    if workers < 1 {
        return Err(Error::InvalidArgument("workers must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    let summaries = pool.install(|| {
        configs
            .par_iter()
            .map(|config| match run_training(config) {
                Ok((_, summary)) => summary,
                Err(e) => failure_summary(config, &e),
            })
            .collect()
    });
    Ok(summaries)
}

fn failure_summary(config: &RunConfig, err: &Error) -> RunSummary {
    let epoch = match err {
        Error::NumericOverflow { epoch } => *epoch,
        _ => None,
    };
    RunSummary {
        format_version: FORMAT_VERSION,
        config_digest: config.digest(),
        status: RunStatus::Failed {
            epoch,
            message: err.to_string(),
        },
        effective_seed: config.seed,
        seed_from_env: config.seed_from_env,
        grok: None,
        final_entropies: Vec::new(),
        wall_clock_seconds: 0.0,
        trace_path: None,
        checkpoints: Vec::new(),
    }
}

/// Sweep file: an explicit list of runs, optionally reseeded from a root.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format_version: Option<u32>,
    /// When present, run `i` gets `seed = mix_seed(root_seed, i)`.
    #[serde(default)]
    pub root_seed: Option<u64>,
    pub runs: Vec<RunConfig>,
}

impl SweepConfig {
    /// Assigns `run_XXX` output subdirectories (isolation between runs) and
    /// derives per-run seeds from the root seed when one is set.
    pub fn expand(&self, out_root: &Path) -> Vec<RunConfig> {
        self.runs
            .iter()
            .enumerate()
            .map(|(i, run)| {
                let mut c = run.clone();
                c.out_dir = Some(out_root.join(format!("run_{i:03}")));
                if let Some(root) = self.root_seed {
                    c.seed = mix_seed(root, i as u64);
                }
                c
            })
            .collect()
    }
}

fn trace_header(layers: usize) -> String {
    let mut out = String::from("epoch,train_loss,test_loss,train_acc,test_acc");
    for l in 1..=layers {
        out.push_str(&format!(",entropy_layer_{l}"));
    }
    out.push('\n');
    out
}

fn format_trace_row(r: &TraceRow) -> String {
    let mut out = format!(
        "{},{},{},{},{}",
        r.epoch, r.train_loss, r.test_loss, r.train_acc, r.test_acc
    );
    for e in &r.entropies {
        out.push_str(&format!(",{e}"));
    }
    out.push('\n');
    out
}

/// Writes the trace as CSV with one entropy column per layer.
pub fn write_trace_csv(path: &Path, trace: &TrainingTrace) -> Result<()> {
    let layers = trace.rows.first().map_or(0, |r| r.entropies.len());
    let mut out = trace_header(layers);
    for r in &trace.rows {
        out.push_str(&format_trace_row(r));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Parses a trace written by [`write_trace_csv`].
pub fn read_trace_csv(path: &Path) -> Result<TrainingTrace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty trace file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 5 || cols[0] != "epoch" {
        return Err(Error::Config(format!("unrecognized trace header: {header}")));
    }
    let mut trace = TrainingTrace::default();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Config(format!(
                "line {}: {} fields, expected {}",
                lineno + 2,
                fields.len(),
                cols.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)))
        };
        trace.push(TraceRow {
            epoch: fields[0]
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 2)))?,
            train_loss: parse(fields[1])?,
            test_loss: parse(fields[2])?,
            train_acc: parse(fields[3])?,
            test_acc: parse(fields[4])?,
            entropies: fields[5..]
                .iter()
                .map(|s| parse(s))
                .collect::<Result<Vec<f64>>>()?,
        })?;
    }
    Ok(trace)
}
