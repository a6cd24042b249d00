//! Versioned JSON checkpoints.
//!
//! Weights are written as row-major f64 arrays; serde_json prints the
//! shortest decimal that round-trips, so save/load reproduces every bit.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ActivationSpec, ArchSpec, ModelState};
use crate::{Error, Result, FORMAT_VERSION};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArchRecord {
    input_dim: usize,
    hidden_dims: Vec<usize>,
    output_dim: usize,
}

/// On-disk checkpoint document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    arch: ArchRecord,
    activation: ActivationSpec,
    pub seed: u64,
    pub epoch: u64,
    /// One row-major array per layer.
    weights: Vec<Vec<f64>>,
}

impl Checkpoint {
    pub fn from_model(model: &ModelState, seed: u64, epoch: u64) -> Result<Self> {
        for w in &model.weights {
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::Checkpoint(
                    "refusing to write non-finite weights".into(),
                ));
            }
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            arch: ArchRecord {
                input_dim: model.arch.input_dim,
                hidden_dims: model.arch.hidden_dims.clone(),
                output_dim: model.arch.output_dim,
            },
            activation: model.arch.activation,
            seed,
            epoch,
            weights: model
                .weights
                .iter()
                .map(|w| w.iter().copied().collect())
                .collect(),
        })
    }

    pub fn into_model(self) -> Result<ModelState> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let arch = ArchSpec {
            input_dim: self.arch.input_dim,
            hidden_dims: self.arch.hidden_dims,
            output_dim: self.arch.output_dim,
            activation: self.activation,
        };
        arch.validate()?;
        let dims = arch.dims();
        let mut weights = Vec::with_capacity(dims.len() - 1);
        if self.weights.len() != dims.len() - 1 {
            return Err(Error::Checkpoint(format!(
                "{} weight arrays for {} layers",
                self.weights.len(),
                dims.len() - 1
            )));
        }
        for (l, data) in self.weights.into_iter().enumerate() {
            let (fan_out, fan_in) = (dims[l + 1], dims[l]);
            if data.len() != fan_out * fan_in {
                return Err(Error::Checkpoint(format!(
                    "layer {l} has {} entries, expected {}x{}",
                    data.len(),
                    fan_out,
                    fan_in
                )));
            }
            if !data.iter().all(|v| v.is_finite()) {
                return Err(Error::Checkpoint(format!("layer {l} has non-finite entries")));
            }
            weights.push(
                ndarray::Array2::from_shape_vec((fan_out, fan_in), data)
                    .expect("shape matches data length"),
            );
        }
        Ok(ModelState { arch, weights })
    }
}

pub fn save_checkpoint(model: &ModelState, seed: u64, epoch: u64, path: &Path) -> Result<()> {
    let doc = Checkpoint::from_model(model, seed, epoch)?;
    let json = serde_json::to_string(&doc)?;
    fs::write(path, json)?;
    Ok(())
}

/// Returns the model plus the seed and epoch recorded alongside it.
pub fn load_checkpoint(path: &Path) -> Result<(ModelState, u64, u64)> {
    let text = fs::read_to_string(path)?;
    let doc: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
    let (seed, epoch) = (doc.seed, doc.epoch);
    Ok((doc.into_model()?, seed, epoch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::init_model;

    #[test]
    fn roundtrip_is_bit_exact() {
        let arch = ArchSpec {
            input_dim: 10,
            hidden_dims: vec![6],
            output_dim: 5,
            activation: ActivationSpec::linear_plus_square(0.25),
        };
        let model = init_model(&arch, 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        save_checkpoint(&model, 77, 123, &path).unwrap();
        let (loaded, seed, epoch) = load_checkpoint(&path).unwrap();
        assert_eq!(seed, 77);
        assert_eq!(epoch, 123);
        assert_eq!(loaded.arch, model.arch);
        for (a, b) in loaded.weights.iter().zip(&model.weights) {
            assert_eq!(a.dim(), b.dim());
            for (x, y) in a.iter().zip(b.iter()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let arch = ArchSpec {
            input_dim: 4,
            hidden_dims: vec![2],
            output_dim: 2,
            activation: ActivationSpec::square(),
        };
        let model = init_model(&arch, 1).unwrap();
        let mut doc = Checkpoint::from_model(&model, 1, 0).unwrap();
        doc.weights[0].pop();
        assert!(matches!(doc.into_model(), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn bad_version_is_rejected() {
        let arch = ArchSpec {
            input_dim: 4,
            hidden_dims: vec![2],
            output_dim: 2,
            activation: ActivationSpec::square(),
        };
        let model = init_model(&arch, 1).unwrap();
        let mut doc = Checkpoint::from_model(&model, 1, 0).unwrap();
        doc.format_version = 99;
        assert!(matches!(doc.into_model(), Err(Error::Checkpoint(_))));
    }
}
