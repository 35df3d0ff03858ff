//! The dual estimator: independent phase and magnitude networks.

pub mod checkpoint;
pub mod loss;
pub mod mlp;
pub mod optim;
pub mod train;
pub mod tune;

use num_complex::Complex;

pub use checkpoint::{load_model, save_model, save_trained, FinalLosses, ModelMetadata};
pub use loss::{cmae_loss, loss, loss_gradient, rmse_loss, wrapped_difference, LossKind};
pub use mlp::{init_model, Dense, Gradients, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use train::{
    default_learning_rate, evaluate_loss, train, train_on_dataset, train_with_progress, EpochRecord, LossHistory,
    Samples, TrainConfig,
};
pub use tune::{tune_architectures, TuneEntry, TuneReport, TuneRun};

use crate::beamformer::NcbfWeights;
use crate::{Error, Real, Result};

/// Rebuilds unit-power weights from phase and power-dB vectors.
///
/// Magnitudes are `sqrt(10^(db/10))`, computed relative to the largest entry
/// so that very negative inputs do not underflow before normalization.
pub fn reconstruct_weights<T: Real>(phase: &[T], magnitude_db: &[T]) -> Result<NcbfWeights<T>> {
    if phase.len() != magnitude_db.len() {
        return Err(Error::Shape(format!(
            "{} phases but {} magnitudes",
            phase.len(),
            magnitude_db.len()
        )));
    }
    if phase.is_empty() {
        return Err(Error::Shape("empty weight vector".into()));
    }
    if phase.iter().chain(magnitude_db).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite label entry".into()));
    }
    let top = magnitude_db.iter().copied().fold(T::neg_infinity(), T::max);
    let ten = T::lit(10.0);
    let twenty = T::lit(20.0);
    let mags: Vec<T> = magnitude_db.iter().map(|&db| ten.powf((db - top) / twenty)).collect();
    let norm = mags.iter().map(|&a| a * a).sum::<T>().sqrt();
    let entries = mags
        .iter()
        .zip(phase)
        .map(|(&a, &p)| Complex::from_polar(a / norm, p))
        .collect();
    Ok(NcbfWeights::from_entries(entries))
}

/// Phase and magnitude networks used together.
#[derive(Debug, Clone, PartialEq)]
pub struct DualEstimator {
    pub phase: Mlp<f32>,
    pub magnitude: Mlp<f32>,
}

impl DualEstimator {
    pub fn new(phase: Mlp<f32>, magnitude: Mlp<f32>) -> Result<Self> {
        if phase.input_dim() != magnitude.input_dim() || phase.output_dim() != magnitude.output_dim() {
            return Err(Error::Shape(format!(
                "phase network {:?} and magnitude network {:?} disagree",
                phase.layer_sizes(),
                magnitude.layer_sizes()
            )));
        }
        Ok(Self { phase, magnitude })
    }

    pub fn num_users(&self) -> usize {
        self.phase.input_dim() / 2
    }

    pub fn num_elements(&self) -> usize {
        self.phase.output_dim()
    }

    /// Predicts `(phase, magnitude_db)` for one feature row.
    pub fn predict_labels(&self, features: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        Ok((self.phase.predict_row(features)?, self.magnitude.predict_row(features)?))
    }

    /// Predicted unit-power weights for one feature row.
    pub fn predict_weights(&self, features: &[f32]) -> Result<NcbfWeights<f64>> {
        let (p, m) = self.predict_labels(features)?;
        let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        reconstruct_weights(&widen(p), &widen(m))
    }
}
