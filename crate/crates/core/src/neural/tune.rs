//! Architecture sweep: train each candidate several times, rank by mean
//! validation loss.

use serde::{Deserialize, Serialize};

use super::mlp::init_model;
use super::train::{train, Samples, TrainConfig};
use crate::{Real, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneRun {
    pub seed: u64,
    /// Final validation loss; absent when training failed.
    pub validation_loss: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneEntry {
    pub layer_sizes: Vec<usize>,
    pub runs: Vec<TuneRun>,
    /// Mean over successful runs.
    pub mean_validation_loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneReport {
    pub train_config: TrainConfig,
    pub repeats: usize,
    /// Best first; candidates without a successful run last.
    pub entries: Vec<TuneEntry>,
}

/// Trains every candidate `repeats` times with seeds `cfg.seed + r` and
/// ranks them. A failing run is recorded and does not stop the sweep.
pub fn tune_architectures<T: Real>(
    candidates: &[Vec<usize>],
    data: &Samples<T>,
    repeats: usize,
    cfg: &TrainConfig,
) -> Result<TuneReport> {
    cfg.validate()?;
    let mut entries = Vec::with_capacity(candidates.len());
    for sizes in candidates {
        let runs: Vec<TuneRun> = (0..repeats as u64)
            .map(|r| {
                let seed = cfg.seed.wrapping_add(r);
                let run_cfg = TrainConfig { seed, ..*cfg };
                let outcome = init_model::<T>(sizes, seed).and_then(|m| train(&m, data, &run_cfg));
                match outcome {
                    Ok((_, hist)) => {
                        let loss = hist.last().map(|rec| rec.test_loss).filter(|v| v.is_finite());
                        TuneRun {
                            seed,
                            validation_loss: loss,
                            error: loss.is_none().then(|| "no finite validation loss".to_string()),
                        }
                    }
                    Err(e) => TuneRun {
                        seed,
                        validation_loss: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();
        let ok: Vec<f64> = runs.iter().filter_map(|r| r.validation_loss).collect();
        let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
        entries.push(TuneEntry {
            layer_sizes: sizes.clone(),
            runs,
            mean_validation_loss: mean,
        });
    }
    entries.sort_by(|a, b| match (a.mean_validation_loss, b.mean_validation_loss) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(TuneReport {
        train_config: *cfg,
        repeats,
        entries,
    })
}
