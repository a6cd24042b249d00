//! Modular-addition pairs: generation, symmetry filters, one-hot encoding,
//! and deterministic train/test splits.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Restricts which `(i, j)` pairs enter the dataset.
///
/// `excluded_differences` holds plain integer `j - i` values (no modular
/// wraparound), so excluding `1` for `P = 5` removes exactly
/// `(0,1), (1,2), (2,3), (3,4)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymmetryFilter {
    #[serde(default)]
    pub require_j_ge_i: bool,
    #[serde(default)]
    pub require_i_gt_j: bool,
    #[serde(default)]
    pub excluded_differences: Vec<i64>,
}

impl SymmetryFilter {
    /// The identity filter: every pair passes.
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        if self.require_j_ge_i && self.require_i_gt_j {
            return Err(Error::InvalidArgument(
                "require_j_ge_i and require_i_gt_j are mutually exclusive".into(),
            ));
        }
        Ok(())
    }

    pub fn admits(&self, i: usize, j: usize) -> bool {
        if self.require_j_ge_i && j < i {
            return false;
        }
        if self.require_i_gt_j && i <= j {
            return false;
        }
        let diff = j as i64 - i as i64;
        !self.excluded_differences.contains(&diff)
    }
}

/// Everything needed to reproduce a dataset exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    /// Modulus `P`; inputs and labels live in `[0, P)`.
    pub modulus: usize,
    /// Fraction of the (post-filter) pairs used for training, in `(0, 1]`.
    pub train_frac: f64,
    #[serde(default)]
    pub filter: SymmetryFilter,
    /// Seed for the split shuffle.
    pub seed: u64,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.modulus < 2 {
            return Err(Error::InvalidArgument(format!(
                "modulus must be >= 2, got {}",
                self.modulus
            )));
        }
        if !(self.train_frac > 0.0 && self.train_frac <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "train_frac must be in (0, 1], got {}",
                self.train_frac
            )));
        }
        self.filter.validate()
    }

    /// Input dimension of the one-hot encoding, `2P`.
    pub fn input_dim(&self) -> usize {
        2 * self.modulus
    }
}

/// One-hot encoded samples with their labels and originating pairs.
///
/// Each input row has exactly two ones: position `i` in the first block of
/// `P` columns and position `P + j` in the second.
#[derive(Debug, Clone)]
pub struct EncodedDataset {
    /// `n x 2P` matrix of zeros and ones.
    pub inputs: Array2<f64>,
    /// `(i + j) % P` per row.
    pub labels: Vec<usize>,
    /// The `(i, j)` pair behind each row.
    pub pair_index: Vec<(usize, usize)>,
    /// Modulus the rows were encoded against.
    pub modulus: usize,
}

impl EncodedDataset {
    pub fn encode(pairs: &[(usize, usize, usize)], modulus: usize) -> Result<Self> {
        let n = pairs.len();
        let mut inputs = Array2::zeros((n, 2 * modulus));
        let mut labels = Vec::with_capacity(n);
        let mut pair_index = Vec::with_capacity(n);
        for (row, &(i, j, label)) in pairs.iter().enumerate() {
            let v = encode_one_hot(i, j, modulus)?;
            inputs.row_mut(row).assign(&ndarray::ArrayView1::from(&v));
            labels.push(label);
            pair_index.push((i, j));
        }
        Ok(Self {
            inputs,
            labels,
            pair_index,
            modulus,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Enumerates every `(i, j)` with `i, j` in `[0, P)` that passes the filter,
/// in row-major order (by `i`, then `j`), labelled with `(i + j) % P`.
pub fn generate_pairs(spec: &DatasetSpec) -> Result<Vec<(usize, usize, usize)>> {
    spec.validate()?;
    let p = spec.modulus;
    let mut pairs = Vec::with_capacity(p * p);
    for i in 0..p {
        for j in 0..p {
            if spec.filter.admits(i, j) {
                pairs.push((i, j, (i + j) % p));
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::DegenerateDataset(
            "no pairs remain after filtering".into(),
        ));
    }
    Ok(pairs)
}

/// One-hot encodes `(i, j)` into a vector of length `2P`: position `i` set in
/// the first block, position `P + j` in the second.
pub fn encode_one_hot(i: usize, j: usize, modulus: usize) -> Result<Vec<f64>> {
    if i >= modulus || j >= modulus {
        return Err(Error::InvalidArgument(format!(
            "pair ({i}, {j}) out of range for modulus {modulus}"
        )));
    }
    let mut v = vec![0.0; 2 * modulus];
    v[i] = 1.0;
    v[modulus + j] = 1.0;
    Ok(v)
}

/// Splits `pairs` into train/test with `floor(train_frac * n)` training rows.
///
/// The permutation is drawn from a ChaCha generator seeded with `seed`, so
/// the same `(pairs, train_frac, seed)` always yields the same member sets.
/// An empty test set (e.g. `train_frac = 1.0`) is allowed here; callers that
/// need both partitions check for themselves.
pub fn split(
    pairs: &[(usize, usize, usize)],
    modulus: usize,
    train_frac: f64,
    seed: u64,
) -> Result<(EncodedDataset, EncodedDataset)> {
    if pairs.is_empty() {
        return Err(Error::DegenerateDataset("cannot split zero pairs".into()));
    }
    if !(train_frac > 0.0 && train_frac <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train_frac must be in (0, 1], got {train_frac}"
        )));
    }
    let n = pairs.len();
    let n_train = ((train_frac * n as f64).floor() as usize).min(n);

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let pick = |idxs: &[usize]| -> Vec<(usize, usize, usize)> {
        idxs.iter().map(|&k| pairs[k]).collect()
    };
    let train = EncodedDataset::encode(&pick(&order[..n_train]), modulus)?;
    let test = EncodedDataset::encode(&pick(&order[n_train..]), modulus)?;
    Ok((train, test))
}

/// Generates, filters, and splits in one go.
pub fn build(spec: &DatasetSpec) -> Result<(EncodedDataset, EncodedDataset)> {
    let pairs = generate_pairs(spec)?;
    split(&pairs, spec.modulus, spec.train_frac, spec.seed)
}
