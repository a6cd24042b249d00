//! Bias-free MLP for modular addition.
//!
//! The two-layer map is `f(x) = (1/(D*N)) * W2 * phi(W1 x)` with no bias
//! terms anywhere; the `1/(D*N)` normalization is applied once at the output
//! layer. With an intermediate layer the hidden-to-hidden product picks up a
//! `1/sqrt(fan_in)` factor so logits stay O(1) at initialization.
//!
//! All arithmetic is f64: post-grokking weight decay drives magnitudes below
//! 1e-41, which would underflow f32.

mod activation;
mod checkpoint;
mod optimizer;

pub use activation::ActivationSpec;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use optimizer::{AdamWParams, OptimizerState};

use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Network architecture: `input_dim -> hidden_dims... -> output_dim` with the
/// same activation on every hidden layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub input_dim: usize,
    /// One or two hidden widths.
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: ActivationSpec,
}

impl ArchSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::InvalidArgument(
                "input_dim and output_dim must be positive".into(),
            ));
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.len() > 2 {
            return Err(Error::InvalidArgument(format!(
                "hidden_dims must have length 1 or 2, got {}",
                self.hidden_dims.len()
            )));
        }
        if self.hidden_dims.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument("hidden widths must be positive".into()));
        }
        self.activation.validate()
    }

    /// Full dimension chain `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.hidden_dims.len() + 2);
        d.push(self.input_dim);
        d.extend_from_slice(&self.hidden_dims);
        d.push(self.output_dim);
        d
    }

    /// Number of weight matrices.
    pub fn num_layers(&self) -> usize {
        self.hidden_dims.len() + 1
    }
}

/// Weight matrices `W_l` of shape `(fan_out, fan_in)`, no biases.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub arch: ArchSpec,
    pub weights: Vec<Array2<f64>>,
}

/// Draws every weight entry i.i.d. standard normal from a ChaCha generator,
/// so the same `(arch, seed)` always produces identical weights.
pub fn init_model(arch: &ArchSpec, seed: u64) -> Result<ModelState> {
    arch.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let dims = arch.dims();
    let mut weights = Vec::with_capacity(dims.len() - 1);
    for l in 0..dims.len() - 1 {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        let data: Vec<f64> = (0..fan_out * fan_in)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        weights.push(
            Array2::from_shape_vec((fan_out, fan_in), data)
                .expect("shape matches data length"),
        );
    }
    Ok(ModelState {
        arch: arch.clone(),
        weights,
    })
}

impl ModelState {
    /// Per-layer multiplicative normalization: 1 on the first layer,
    /// `1/sqrt(fan_in)` on hidden-to-hidden layers, `1/(D*fan_in)` on the
    /// output layer.
    pub fn layer_scale(&self, layer: usize) -> f64 {
        let last = self.weights.len() - 1;
        let fan_in = self.weights[layer].ncols();
        if layer == last {
            1.0 / (self.arch.input_dim as f64 * fan_in as f64)
        } else if layer == 0 {
            1.0
        } else {
            1.0 / (fan_in as f64).sqrt()
        }
    }

    /// Logits for a dense input batch (`rows x input_dim`).
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.arch.input_dim {
            return Err(Error::InvalidArgument(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.arch.input_dim
            )));
        }
        let cache = self.forward_cache(x.dot(&self.weights[0].t()))?;
        Ok(cache.pres.into_iter().last().expect("at least one layer"))
    }

    /// Logits for one-hot encoded pairs without materializing the input
    /// matrix: the first-layer product reduces to summing two weight columns
    /// per sample.
    pub fn forward_pairs(&self, pairs: &[(usize, usize)], modulus: usize) -> Result<Array2<f64>> {
        let cache = self.forward_cache(self.first_pre_from_pairs(pairs, modulus)?)?;
        Ok(cache.pres.into_iter().last().expect("at least one layer"))
    }

    /// Mean softmax cross-entropy and exact analytic gradients per weight
    /// matrix, for a dense batch.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<f64>,
        labels: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.loss_and_grad_impl(BatchInput::Dense(x), labels)
    }

    /// Same as [`loss_and_grad`](Self::loss_and_grad) on the one-hot fast path.
    pub fn loss_and_grad_pairs(
        &self,
        pairs: &[(usize, usize)],
        modulus: usize,
        labels: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        self.loss_and_grad_impl(BatchInput::Pairs { pairs, modulus }, labels)
    }

    /// Fraction of rows whose argmax logit equals the label. Argmax ties
    /// break toward the lowest class index.
    pub fn accuracy(&self, x: ArrayView2<f64>, labels: &[usize]) -> Result<f64> {
        let logits = self.forward(x)?;
        Ok(accuracy_from_logits(&logits, labels))
    }

    /// Post-update evaluation used by the training loop: (loss, accuracy)
    /// in one forward pass.
    pub fn evaluate_pairs(
        &self,
        pairs: &[(usize, usize)],
        modulus: usize,
        labels: &[usize],
    ) -> Result<(f64, f64)> {
        let logits = self.forward_pairs(pairs, modulus)?;
        let loss = mean_cross_entropy(&logits, labels)?;
        Ok((loss, accuracy_from_logits(&logits, labels)))
    }

    fn first_pre_from_pairs(
        &self,
        pairs: &[(usize, usize)],
        modulus: usize,
    ) -> Result<Array2<f64>> {
        let w0 = &self.weights[0];
        if w0.ncols() != 2 * modulus {
            return Err(Error::InvalidArgument(format!(
                "modulus {} implies input_dim {}, model expects {}",
                modulus,
                2 * modulus,
                w0.ncols()
            )));
        }
        // Contiguous rows of W0^T are the columns of W0.
        let w0t = w0.t().as_standard_layout().into_owned();
        let n_hidden = w0.nrows();
        let mut pre = Array2::zeros((pairs.len(), n_hidden));
        for (s, &(i, j)) in pairs.iter().enumerate() {
            if i >= modulus || j >= modulus {
                return Err(Error::InvalidArgument(format!(
                    "pair ({i}, {j}) out of range for modulus {modulus}"
                )));
            }
            let wi = w0t.row(i);
            let wj = w0t.row(modulus + j);
            let mut out = pre.row_mut(s);
            for k in 0..n_hidden {
                out[k] = wi[k] + wj[k];
            }
        }
        Ok(pre)
    }

    /// Runs layers 1..L given the first pre-activation, caching what backprop
    /// needs. Errors on any non-finite intermediate.
    fn forward_cache(&self, first_pre: Array2<f64>) -> Result<ForwardCache> {
        let num_layers = self.weights.len();
        let mut pres: Vec<Array2<f64>> = Vec::with_capacity(num_layers);
        let mut acts: Vec<Array2<f64>> = Vec::with_capacity(num_layers - 1);
        check_finite(&first_pre)?;
        pres.push(first_pre);
        for l in 1..num_layers {
            let act = pres[l - 1].mapv(|v| self.arch.activation.apply(v));
            let mut pre = act.dot(&self.weights[l].t());
            let scale = self.layer_scale(l);
            if scale != 1.0 {
                pre *= scale;
            }
            check_finite(&pre)?;
            acts.push(act);
            pres.push(pre);
        }
        Ok(ForwardCache { pres, acts })
    }

    fn loss_and_grad_impl(
        &self,
        input: BatchInput<'_>,
        labels: &[usize],
    ) -> Result<(f64, Vec<Array2<f64>>)> {
        let n = match input {
            BatchInput::Dense(x) => x.nrows(),
            BatchInput::Pairs { pairs, .. } => pairs.len(),
        };
        if n == 0 || labels.len() != n {
            return Err(Error::InvalidArgument(format!(
                "batch of {n} rows with {} labels",
                labels.len()
            )));
        }
        let p_out = self.arch.output_dim;
        if labels.iter().any(|&y| y >= p_out) {
            return Err(Error::InvalidArgument("label out of range".into()));
        }

        let first_pre = match input {
            BatchInput::Dense(x) => {
                if x.ncols() != self.arch.input_dim {
                    return Err(Error::InvalidArgument(format!(
                        "input has {} columns, model expects {}",
                        x.ncols(),
                        self.arch.input_dim
                    )));
                }
                x.dot(&self.weights[0].t())
            }
            BatchInput::Pairs { pairs, modulus } => self.first_pre_from_pairs(pairs, modulus)?,
        };
        let cache = self.forward_cache(first_pre)?;
        let num_layers = self.weights.len();
        let logits = &cache.pres[num_layers - 1];

        let loss = mean_cross_entropy(logits, labels)?;
        // dL/dZ = (softmax - onehot) / n
        let mut g = softmax(logits);
        for (s, &y) in labels.iter().enumerate() {
            g[(s, y)] -= 1.0;
        }
        g /= n as f64;

        let mut grads: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); num_layers];
        for l in (0..num_layers).rev() {
            let scale = self.layer_scale(l);
            if l == 0 {
                grads[0] = match input {
                    BatchInput::Dense(x) => g.t().dot(&x),
                    BatchInput::Pairs { pairs, modulus } => {
                        scatter_first_grad(&g, pairs, modulus)
                    }
                };
                // first-layer scale is 1.0 by construction
            } else {
                let mut gw = g.t().dot(&cache.acts[l - 1]);
                if scale != 1.0 {
                    gw *= scale;
                }
                grads[l] = gw;
                let mut da = g.dot(&self.weights[l]);
                if scale != 1.0 {
                    da *= scale;
                }
                let deriv = cache.pres[l - 1].mapv(|v| self.arch.activation.derivative(v));
                g = da * deriv;
            }
        }
        Ok((loss, grads))
    }
}

enum BatchInput<'a> {
    Dense(ArrayView2<'a, f64>),
    Pairs {
        pairs: &'a [(usize, usize)],
        modulus: usize,
    },
}

struct ForwardCache {
    /// Pre-activations per layer; the last entry is the logits.
    pres: Vec<Array2<f64>>,
    /// Hidden activations `phi(pres[l])`.
    acts: Vec<Array2<f64>>,
}

/// grad W0 = g^T X for two-hot rows: scatter each sample's backprop row into
/// the `i` and `P + j` input columns.
fn scatter_first_grad(g: &Array2<f64>, pairs: &[(usize, usize)], modulus: usize) -> Array2<f64> {
    let n_hidden = g.ncols();
    // Accumulate transposed (input_dim x hidden) so each sample touches two
    // contiguous rows, then transpose back.
    let mut gt = Array2::zeros((2 * modulus, n_hidden));
    for (s, &(i, j)) in pairs.iter().enumerate() {
        let gr = g.row(s);
        {
            let mut row = gt.row_mut(i);
            for k in 0..n_hidden {
                row[k] += gr[k];
            }
        }
        {
            let mut row = gt.row_mut(modulus + j);
            for k in 0..n_hidden {
                row[k] += gr[k];
            }
        }
    }
    gt.t().as_standard_layout().into_owned()
}

fn check_finite(a: &Array2<f64>) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NumericOverflow { epoch: None })
    }
}

/// Row-wise softmax with the usual max-shift for stability.
fn softmax(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over the batch.
pub fn mean_cross_entropy(logits: &Array2<f64>, labels: &[usize]) -> Result<f64> {
    if logits.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "{} logit rows vs {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    let mut total = 0.0;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let logsumexp = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        total += logsumexp - row[y];
    }
    let loss = total / labels.len() as f64;
    if loss.is_finite() {
        Ok(loss)
    } else {
        Err(Error::NumericOverflow { epoch: None })
    }
}

/// Argmax accuracy; ties resolve to the lowest class index.
pub fn accuracy_from_logits(logits: &Array2<f64>, labels: &[usize]) -> f64 {
    let mut correct = 0usize;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        let mut best = 0usize;
        let mut best_v = row[0];
        for (c, &v) in row.iter().enumerate().skip(1) {
            if v > best_v {
                best = c;
                best_v = v;
            }
        }
        if best == y {
            correct += 1;
        }
    }
    correct as f64 / labels.len() as f64
}
