//! Shared training ensembles for the acceptance suite.
//!
//! The heavy criteria all read from the same five baseline runs (and the
//! other ensembles), each trained once per test-binary invocation and cached
//! behind a `OnceLock`. Hyperparameters here are the crate defaults that the
//! calibration sweeps settled on; the criteria themselves only pin what the
//! acceptance text pins (moduli, widths, activations, fractions, budgets).

use std::path::Path;
use std::sync::OnceLock;

use groklab::dataset::{DatasetSpec, SymmetryFilter};
use groklab::experiment::{mix_seed, run_training, RunConfig, RunSummary};
use groklab::metrics::TrainingTrace;
use groklab::network::{load_checkpoint, ActivationSpec, AdamWParams, ModelState};
use groklab::FORMAT_VERSION;

/// Root seed for every acceptance ensemble.
pub const ROOT_SEED: u64 = 20240817;

/// Baseline epoch budget (criterion text allows up to 30k).
pub const BASELINE_EPOCHS: u64 = 30_000;

pub struct TrainedRun {
    pub seed: u64,
    pub trace: TrainingTrace,
    pub summary: RunSummary,
    pub final_model: ModelState,
}

fn artifacts_root() -> &'static Path {
    static DIR: OnceLock<tempfile::TempDir> = OnceLock::new();
    DIR.get_or_init(|| tempfile::tempdir().expect("tempdir"))
        .path()
}

pub fn base_optimizer() -> AdamWParams {
    AdamWParams::default()
}

fn run_config(
    name: &str,
    dataset: DatasetSpec,
    hidden_dims: Vec<usize>,
    activation: ActivationSpec,
    epochs: u64,
    seed: u64,
) -> RunConfig {
    RunConfig {
        format_version: Some(FORMAT_VERSION),
        dataset,
        hidden_dims,
        activation,
        optimizer: base_optimizer(),
        epochs,
        log_every: 50,
        checkpoint_every: 0,
        acc_threshold: 0.99,
        seed,
        out_dir: Some(artifacts_root().join(name)),
        seed_from_env: false,
    }
}

pub fn execute(config: &RunConfig) -> TrainedRun {
    let (trace, summary) = run_training(config).expect("run executes");
    assert!(
        summary.status.is_ok(),
        "run {:?} aborted: {:?}",
        config.out_dir,
        summary.status
    );
    let last = summary
        .checkpoints
        .last()
        .expect("final checkpoint recorded");
    let (final_model, _, _) = load_checkpoint(Path::new(last)).expect("checkpoint loads");
    TrainedRun {
        seed: config.seed,
        trace,
        summary,
        final_model,
    }
}

/// Criterion 3/6/7b ensemble: P=53, TRAIN_FRAC=0.5, hidden 256, x^2,
/// weight decay on, five seeds.
pub fn baseline_ensemble() -> &'static Vec<TrainedRun> {
    static RUNS: OnceLock<Vec<TrainedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..5u64)
            .map(|i| {
                let seed = mix_seed(ROOT_SEED, i);
                let config = run_config(
                    &format!("baseline_{i}"),
                    DatasetSpec {
                        modulus: 53,
                        train_frac: 0.5,
                        filter: SymmetryFilter::none(),
                        seed: mix_seed(ROOT_SEED, 100 + i),
                    },
                    vec![256],
                    ActivationSpec::square(),
                    BASELINE_EPOCHS,
                    seed,
                );
                execute(&config)
            })
            .collect()
    })
}

/// Criterion 4 runs: P=27, TRAIN_FRAC=0.8, the x + a*x^2 family plus pure
/// x^2, three seeds per activation.
pub fn activation_delay_runs() -> &'static Vec<(f64, Vec<TrainedRun>)> {
    static RUNS: OnceLock<Vec<(f64, Vec<TrainedRun>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        // a = infinity encodes pure x^2 (no odd term)
        let cases: Vec<(f64, ActivationSpec)> = vec![
            (0.5, ActivationSpec::linear_plus_square(0.5)),
            (1.0, ActivationSpec::linear_plus_square(1.0)),
            (2.0, ActivationSpec::linear_plus_square(2.0)),
            (5.0, ActivationSpec::linear_plus_square(5.0)),
            (f64::INFINITY, ActivationSpec::square()),
        ];
        cases
            .into_iter()
            .enumerate()
            .map(|(ci, (a, act))| {
                let runs = (0..3u64)
                    .map(|i| {
                        let tag = 10 * (ci as u64 + 1) + i;
                        let config = run_config(
                            &format!("actdelay_a{ci}_{i}"),
                            DatasetSpec {
                                modulus: 27,
                                train_frac: 0.8,
                                filter: SymmetryFilter::none(),
                                seed: mix_seed(ROOT_SEED, 200 + tag),
                            },
                            vec![256],
                            act,
                            ACTIVATION_EPOCHS,
                            mix_seed(ROOT_SEED, 300 + tag),
                        );
                        execute(&config)
                    })
                    .collect();
                (a, runs)
            })
            .collect()
    })
}

/// Budget for the P=27 activation-family runs (criteria 4 and 5).
pub const ACTIVATION_EPOCHS: u64 = 30_000;

/// Criterion 5 runs: odd activations x^3 and x^2*sign(x), plus even |x^3|,
/// five seeds each at P=27, TRAIN_FRAC=0.8.
pub fn odd_activation_runs() -> &'static Vec<(ActivationSpec, Vec<TrainedRun>)> {
    static RUNS: OnceLock<Vec<(ActivationSpec, Vec<TrainedRun>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        [
            ActivationSpec::Cubic,
            ActivationSpec::SignedSquare,
            ActivationSpec::AbsCubic,
        ]
        .into_iter()
        .enumerate()
        .map(|(ci, act)| {
            let runs = (0..5u64)
                .map(|i| {
                    let tag = 10 * (ci as u64 + 1) + i;
                    let config = run_config(
                        &format!("odd_{ci}_{i}"),
                        DatasetSpec {
                            modulus: 27,
                            train_frac: 0.8,
                            filter: SymmetryFilter::none(),
                            seed: mix_seed(ROOT_SEED, 400 + tag),
                        },
                        vec![256],
                        act,
                        ACTIVATION_EPOCHS,
                        mix_seed(ROOT_SEED, 500 + tag),
                    );
                    execute(&config)
                })
                .collect();
            (act, runs)
        })
        .collect()
    })
}

/// Criterion 8 runs: P=20, two hidden layers of 256, x + 0.25x^2, trained
/// past grokking, five seeds. Checkpoints matter here, traces less.
pub fn factoring_runs() -> &'static Vec<TrainedRun> {
    static RUNS: OnceLock<Vec<TrainedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        (0..5u64)
            .map(|i| {
                let config = run_config(
                    &format!("factoring_{i}"),
                    DatasetSpec {
                        modulus: 20,
                        train_frac: 0.8,
                        filter: SymmetryFilter::none(),
                        seed: mix_seed(ROOT_SEED, 600 + i),
                    },
                    vec![256, 256],
                    ActivationSpec::linear_plus_square(0.25),
                    FACTORING_EPOCHS,
                    mix_seed(ROOT_SEED, 700 + i),
                );
                execute(&config)
            })
            .collect()
    })
}

pub const FACTORING_EPOCHS: u64 = 25_000;

/// Criterion 9 runs: P=53 with the j >= i commutativity filter, x^2, at
/// TRAIN_FRAC 0.5 and 0.8, five seeds each.
pub fn symmetry_runs(train_frac: f64) -> Vec<TrainedRun> {
    let frac_tag = (train_frac * 10.0) as u64;
    (0..5u64)
        .map(|i| {
            let tag = 10 * frac_tag + i;
            let config = run_config(
                &format!("symmetry_{frac_tag}_{i}"),
                DatasetSpec {
                    modulus: 53,
                    train_frac,
                    filter: SymmetryFilter {
                        require_j_ge_i: true,
                        ..Default::default()
                    },
                    seed: mix_seed(ROOT_SEED, 800 + tag),
                },
                vec![256],
                ActivationSpec::square(),
                BASELINE_EPOCHS,
                mix_seed(ROOT_SEED, 900 + tag),
            );
            execute(&config)
        })
        .collect()
}

pub fn symmetry_half() -> &'static Vec<TrainedRun> {
    static RUNS: OnceLock<Vec<TrainedRun>> = OnceLock::new();
    RUNS.get_or_init(|| symmetry_runs(0.5))
}

pub fn symmetry_eight() -> &'static Vec<TrainedRun> {
    static RUNS: OnceLock<Vec<TrainedRun>> = OnceLock::new();
    RUNS.get_or_init(|| symmetry_runs(0.8))
}
