//! Diagnostics over weights and training traces: entropy, circular
//! autocorrelation, Fourier power spectra, dead-weight fractions, and
//! grokking detection.

use ndarray::ArrayView2;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ratio cap reported when the off-peak spectrum is empty or identically
/// zero (a pure tone).
pub const PEAK_RATIO_CAP: f64 = 1e6;

/// One logged epoch of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: u64,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    /// Shannon entropy of each layer's weights, in nats.
    pub entropies: Vec<f64>,
}

/// Per-epoch records with strictly increasing epochs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub rows: Vec<TraceRow>,
}

impl TrainingTrace {
    pub fn push(&mut self, row: TraceRow) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.epoch <= last.epoch {
                return Err(Error::InvalidArgument(format!(
                    "trace epochs must increase: {} after {}",
                    row.epoch, last.epoch
                )));
            }
        }
        if !(0.0..=1.0).contains(&row.train_acc) || !(0.0..=1.0).contains(&row.test_acc) {
            return Err(Error::InvalidArgument("accuracy outside [0, 1]".into()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// When train and test accuracy first cross a threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrokReport {
    pub t_train: Option<u64>,
    pub t_test: Option<u64>,
    /// `t_test - t_train`, present only when both epochs are.
    pub delay: Option<i64>,
    pub max_test_acc: f64,
}

/// First epochs at which train/test accuracy reach `acc_threshold`.
pub fn detect_grokking(trace: &TrainingTrace, acc_threshold: f64) -> Result<GrokReport> {
    if trace.is_empty() {
        return Err(Error::InvalidArgument("empty trace".into()));
    }
    if !(acc_threshold > 0.0 && acc_threshold <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "acc_threshold must be in (0, 1], got {acc_threshold}"
        )));
    }
    let first = |pick: fn(&TraceRow) -> f64| {
        trace
            .rows
            .iter()
            .find(|r| pick(r) >= acc_threshold)
            .map(|r| r.epoch)
    };
    let t_train = first(|r| r.train_acc);
    let t_test = first(|r| r.test_acc);
    let delay = match (t_train, t_test) {
        (Some(tr), Some(te)) => Some(te as i64 - tr as i64),
        _ => None,
    };
    let max_test_acc = trace
        .rows
        .iter()
        .map(|r| r.test_acc)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GrokReport {
        t_train,
        t_test,
        delay,
        max_test_acc,
    })
}

/// How weights are turned into a probability distribution for entropy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMode {
    /// Every connection weight of the layer, flattened (the default reading).
    Connections,
    /// One mass per neuron: the L2 norm of its incoming weight row.
    NeuronNorms,
}

/// Shannon entropy (nats) of the layer's normalized absolute weight
/// distribution: `p_i = |w_i| / sum |w|`, `S = -sum p_i ln p_i`.
pub fn layer_entropy(weights: ArrayView2<f64>) -> Result<f64> {
    entropy_of(weights.iter().map(|w| w.abs()))
}

/// [`layer_entropy`] with a selectable weight-to-mass mapping.
pub fn layer_entropy_mode(weights: ArrayView2<f64>, mode: EntropyMode) -> Result<f64> {
    match mode {
        EntropyMode::Connections => layer_entropy(weights),
        EntropyMode::NeuronNorms => entropy_of(
            weights
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|w| w * w).sum::<f64>().sqrt()),
        ),
    }
}

fn entropy_of(masses: impl Iterator<Item = f64>) -> Result<f64> {
    let m: Vec<f64> = masses.collect();
    let total: f64 = m.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut s = 0.0;
    for &v in &m {
        if v > 0.0 {
            let p = v / total;
            s -= p * p.ln();
        }
    }
    Ok(s)
}

/// Circular autocorrelation `Corr(k) = sum_l x(l) x(l-k)` with periodic
/// indices, after mean subtraction, normalized so `Corr(0) = 1`.
pub fn circular_autocorrelation(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "autocorrelation needs at least 2 samples".into(),
        ));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let corr0: f64 = centered.iter().map(|v| v * v).sum();
    if corr0 <= 0.0 {
        return Err(Error::ConstantSequence);
    }
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = 0.0;
        for l in 0..n {
            acc += centered[l] * centered[(l + n - k) % n];
        }
        out.push(acc / corr0);
    }
    Ok(out)
}

/// Squared magnitudes of the length-N DFT, bins `0..N`.
pub fn dft_power_spectrum(x: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "spectrum needs at least 2 samples".into(),
        ));
    }
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok(buf.iter().map(|c| c.norm_sqr()).collect())
}

/// How sharply a spectrum is peaked.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    /// Peak bin folded into `[0, N/2]`.
    pub peak_bin: usize,
    /// Peak power over the mean of the remaining bins (the peak's mirror
    /// bin excluded), capped at [`PEAK_RATIO_CAP`].
    pub ratio: f64,
}

/// Finds the dominant bin and its power relative to the rest of the
/// spectrum. With `exclude_dc` the DC bin neither competes nor enters the
/// background mean.
pub fn peak_frequency_ratio(spectrum: &[f64], exclude_dc: bool) -> Result<PeakReport> {
    let n = spectrum.len();
    if n < 3 {
        return Err(Error::InvalidArgument(
            "peak ratio needs at least 3 bins".into(),
        ));
    }
    let start = usize::from(exclude_dc);
    if spectrum.iter().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("all-zero spectrum".into()));
    }
    let peak = (start..n)
        .max_by(|&a, &b| spectrum[a].total_cmp(&spectrum[b]))
        .expect("nonempty range");
    let mirror = (n - peak) % n;
    let background: Vec<f64> = (start..n)
        .filter(|&b| b != peak && b != mirror)
        .map(|b| spectrum[b])
        .collect();
    let mean = if background.is_empty() {
        0.0
    } else {
        background.iter().sum::<f64>() / background.len() as f64
    };
    let ratio = if mean > 0.0 {
        (spectrum[peak] / mean).min(PEAK_RATIO_CAP)
    } else {
        PEAK_RATIO_CAP
    };
    Ok(PeakReport {
        peak_bin: peak.min(n - peak),
        ratio,
    })
}

/// Fraction of entries with `|w| < threshold`.
pub fn dead_weight_fraction(weights: ArrayView2<f64>, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidArgument("threshold must be positive".into()));
    }
    let total = weights.len();
    if total == 0 {
        return Err(Error::InvalidArgument("empty weight matrix".into()));
    }
    let dead = weights.iter().filter(|w| w.abs() < threshold).count();
    Ok(dead as f64 / total as f64)
}

/// Centered moving average with an odd window, truncated at the ends.
pub fn smooth_centered(values: &[f64], window: usize) -> Vec<f64> {
    if window <= 1 || values.len() <= 1 {
        return values.to_vec();
    }
    let half = window / 2;
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Writes a sequence as `index,value` CSV.
pub fn write_sequence_csv(path: &std::path::Path, values: &[f64]) -> Result<()> {
    let mut out = String::from("index,value\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
