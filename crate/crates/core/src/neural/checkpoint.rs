//! Model directory format: `model.json` plus `params.f32` (little-endian
//! `f32`, layer by layer, weights row-major `out x in` then bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::loss::LossKind;
use super::mlp::{validate_sizes, Mlp};
use super::optim::OptimizerKind;
use super::train::{LossHistory, TrainConfig};
use crate::datagen::store::{parse_versioned, read_blob, write_blob};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

const METADATA: &str = "model.json";
const PARAMS: &str = "params.f32";
const HISTORY: &str = "history.csv";

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalLosses {
    pub train: Option<f64>,
    pub test: Option<f64>,
}

impl FinalLosses {
    pub fn from_history(h: &LossHistory) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        match h.last() {
            Some(r) => Self {
                train: finite(r.train_loss),
                test: finite(r.test_loss),
            },
            None => Self::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub format_version: u32,
    pub layer_sizes: Vec<usize>,
    pub loss_kind: LossKind,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    pub train_config: Option<TrainConfig>,
    pub final_losses: FinalLosses,
}

impl ModelMetadata {
    pub fn new(model: &Mlp<f32>, cfg: &TrainConfig, history: &LossHistory) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            layer_sizes: model.layer_sizes(),
            loss_kind: cfg.loss_kind,
            seed: cfg.seed,
            optimizer: cfg.optimizer,
            train_config: Some(*cfg),
            final_losses: FinalLosses::from_history(history),
        }
    }
}

pub fn save_model(model: &Mlp<f32>, meta: &ModelMetadata, dir: impl AsRef<Path>) -> Result<()> {
    if meta.layer_sizes != model.layer_sizes() {
        return Err(Error::Shape(format!(
            "metadata sizes {:?} but model is {:?}",
            meta.layer_sizes,
            model.layer_sizes()
        )));
    }
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_blob(&dir.join(PARAMS), &model.to_flat())?;
    fs::write(dir.join(METADATA), serde_json::to_string_pretty(meta)?)?;
    Ok(())
}

/// Writes model, metadata and `history.csv`.
pub fn save_trained(model: &Mlp<f32>, cfg: &TrainConfig, history: &LossHistory, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    save_model(model, &ModelMetadata::new(model, cfg, history), dir)?;
    fs::write(dir.join(HISTORY), history.to_csv())?;
    Ok(())
}

pub fn load_model(dir: impl AsRef<Path>) -> Result<(Mlp<f32>, ModelMetadata)> {
    let dir = dir.as_ref();
    let meta: ModelMetadata = parse_versioned(&fs::read_to_string(dir.join(METADATA))?, MODEL_FORMAT_VERSION)?;
    validate_sizes(&meta.layer_sizes).map_err(|e| Error::Manifest(e.to_string()))?;
    let count: usize = meta.layer_sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
    let params = read_blob(dir, PARAMS, count)?;
    let model = Mlp::from_flat(&meta.layer_sizes, &params)?;
    Ok((model, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_model;

    fn saved() -> (tempfile::TempDir, Mlp<f32>, ModelMetadata) {
        let tmp = tempfile::tempdir().unwrap();
        let m: Mlp<f32> = init_model(&[6, 10, 24], 4).unwrap();
        let cfg = TrainConfig::reference(LossKind::PhaseCmae);
        let meta = ModelMetadata::new(&m, &cfg, &LossHistory::default());
        save_model(&m, &meta, tmp.path()).unwrap();
        (tmp, m, meta)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (tmp, m, meta) = saved();
        let (back, back_meta) = load_model(tmp.path()).unwrap();
        assert_eq!(back_meta, meta);
        let bits = |m: &Mlp<f32>| m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn truncated_params() {
        let (tmp, _, _) = saved();
        let p = tmp.path().join(PARAMS);
        let bytes = fs::read(&p).unwrap();
        fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_model(tmp.path()), Err(Error::SizeMismatch { .. })));
    }

    #[test]
    fn version_mismatch() {
        let (tmp, _, mut meta) = saved();
        meta.format_version = 2;
        fs::write(tmp.path().join(METADATA), serde_json::to_string(&meta).unwrap()).unwrap();
        assert!(matches!(
            load_model(tmp.path()),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn nan_losses_serialize_as_null() {
        let h = LossHistory {
            records: vec![crate::neural::EpochRecord {
                epoch: 1,
                learning_rate: 0.01,
                train_loss: 0.3,
                test_loss: f64::NAN,
            }],
        };
        let f = FinalLosses::from_history(&h);
        assert_eq!(serde_json::to_string(&f).unwrap(), "{\"train\":0.3,\"test\":null}");
    }
}
