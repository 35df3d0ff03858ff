//! Mini-batch training with exponential learning-rate decay.

use std::io::Write;

use ndarray::{s, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{row_loss, LossKind};
use super::mlp::Mlp;
use super::optim::{Optimizer, OptimizerKind};
use crate::datagen::Dataset;
use crate::{Error, Real, Result};

/// Rows per work unit in [`evaluate_loss`].
const EVAL_CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_learning_rate: f64,
    pub lr_decay_per_epoch: f64,
    pub epochs: usize,
    pub seed: u64,
    pub loss_kind: LossKind,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

impl TrainConfig {
    /// Reference recipe: batch 1024, decay 0.99 per epoch, 300 epochs,
    /// learning rate 0.01 for phase and 0.001 for magnitude.
    pub fn reference(loss_kind: LossKind) -> Self {
        Self {
            batch_size: 1024,
            initial_learning_rate: default_learning_rate(loss_kind),
            lr_decay_per_epoch: 0.99,
            epochs: 300,
            seed: 0,
            loss_kind,
            optimizer: OptimizerKind::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Configuration("batch_size must be at least 1".into()));
        }
        if !(self.lr_decay_per_epoch > 0.0 && self.lr_decay_per_epoch <= 1.0) {
            return Err(Error::Configuration(format!(
                "lr_decay_per_epoch must lie in (0, 1], got {}",
                self.lr_decay_per_epoch
            )));
        }
        if !(self.initial_learning_rate.is_finite() && self.initial_learning_rate > 0.0) {
            return Err(Error::Configuration(format!(
                "initial_learning_rate must be positive, got {}",
                self.initial_learning_rate
            )));
        }
        Ok(())
    }

    /// Learning rate used during 0-based epoch `e`.
    pub fn learning_rate(&self, e: usize) -> f64 {
        self.initial_learning_rate * self.lr_decay_per_epoch.powi(e as i32)
    }
}

pub fn default_learning_rate(kind: LossKind) -> f64 {
    match kind {
        LossKind::PhaseCmae => 0.01,
        LossKind::MagnitudeRmse => 0.001,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub learning_rate: f64,
    /// Mean of the mini-batch losses seen during the epoch, weighted by
    /// batch size.
    pub train_loss: f64,
    /// Loss over the held-out split after the epoch; NaN without one.
    pub test_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub records: Vec<EpochRecord>,
}

impl LossHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.records.last()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,test_loss")?;
        for r in &self.records {
            writeln!(out, "{},{},{}", r.epoch, r.train_loss, r.test_loss)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Train and test matrices for one network.
#[derive(Debug, Clone)]
pub struct Samples<T> {
    pub train_inputs: Array2<T>,
    pub train_targets: Array2<T>,
    pub test_inputs: Array2<T>,
    pub test_targets: Array2<T>,
}

impl<T: Real> Samples<T> {
    pub fn new(
        train_inputs: Array2<T>,
        train_targets: Array2<T>,
        test_inputs: Array2<T>,
        test_targets: Array2<T>,
    ) -> Result<Self> {
        if train_inputs.nrows() != train_targets.nrows() || test_inputs.nrows() != test_targets.nrows() {
            return Err(Error::Shape("inputs and targets disagree on row count".into()));
        }
        if train_inputs.ncols() != test_inputs.ncols() || train_targets.ncols() != test_targets.ncols() {
            return Err(Error::Shape("train and test splits disagree on width".into()));
        }
        Ok(Self {
            train_inputs,
            train_targets,
            test_inputs,
            test_targets,
        })
    }

    /// Splits a dataset with its recorded train fraction.
    pub fn from_dataset(d: &Dataset, kind: LossKind) -> Result<Self> {
        if d.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let (train, test) = d.split_indices();
        let cast = |m: Array2<f32>| m.mapv(|v| T::lit(v as f64));
        let (xa, ya) = d.gather(&train, kind);
        let (xb, yb) = d.gather(&test, kind);
        Self::new(cast(xa), cast(ya), cast(xb), cast(yb))
    }

    pub fn num_train(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn num_test(&self) -> usize {
        self.test_inputs.nrows()
    }
}

/// Batch-mean loss of `model` on `(x, y)`; NaN for zero rows.
pub fn evaluate_loss<T: Real>(
    model: &Mlp<T>,
    x: ArrayView2<T>,
    y: ArrayView2<T>,
    kind: LossKind,
) -> Result<f64> {
    if x.nrows() != y.nrows() || y.ncols() != model.output_dim() {
        return Err(Error::Shape(format!(
            "inputs {:?}, targets {:?}, network output {}",
            x.dim(),
            y.dim(),
            model.output_dim()
        )));
    }
    let b = x.nrows();
    if b == 0 {
        return Ok(f64::NAN);
    }
    let starts: Vec<usize> = (0..b).step_by(EVAL_CHUNK_ROWS).collect();
    let sums = starts
        .par_iter()
        .map(|&s| {
            let e = (s + EVAL_CHUNK_ROWS).min(b);
            let pred = model.forward(x.slice(s![s..e, ..]))?;
            Ok(pred
                .rows()
                .into_iter()
                .zip(y.slice(s![s..e, ..]).rows())
                .map(|(p, t)| row_loss(kind, p, t, None).as_f64())
                .sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sums.iter().sum::<f64>() / b as f64)
}

/// Trains `model` in place of a copy and returns it with its loss history.
pub fn train<T: Real>(model: &Mlp<T>, data: &Samples<T>, cfg: &TrainConfig) -> Result<(Mlp<T>, LossHistory)> {
    train_with_progress(model, data, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with_progress<T: Real>(
    model: &Mlp<T>,
    data: &Samples<T>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Mlp<T>, LossHistory)> {
    cfg.validate()?;
    if data.num_train() == 0 {
        return Err(Error::EmptyDataset);
    }
    if data.train_inputs.ncols() != model.input_dim() || data.train_targets.ncols() != model.output_dim() {
        return Err(Error::Shape(format!(
            "network {:?} does not match samples ({} inputs, {} targets)",
            model.layer_sizes(),
            data.train_inputs.ncols(),
            data.train_targets.ncols()
        )));
    }
    let mut model = model.clone();
    let mut history = LossHistory::default();
    if cfg.epochs == 0 {
        return Ok((model, history));
    }
    let mut opt = Optimizer::new(cfg.optimizer, &model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = data.num_train();
    let mut order: Vec<usize> = (0..n).collect();

    for e in 0..cfg.epochs {
        let lr = cfg.learning_rate(e);
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = data.train_inputs.select(Axis(0), batch);
            let y = data.train_targets.select(Axis(0), batch);
            let (loss, grads) = model.loss_and_gradients(x.view(), y.view(), cfg.loss_kind)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch: e + 1 });
            }
            loss_sum += loss * batch.len() as f64;
            opt.step(&mut model, &grads, lr);
        }
        if !model.all_finite() {
            return Err(Error::Diverged { epoch: e + 1 });
        }
        let test_loss = evaluate_loss(&model, data.test_inputs.view(), data.test_targets.view(), cfg.loss_kind)?;
        let record = EpochRecord {
            epoch: e + 1,
            learning_rate: lr,
            train_loss: loss_sum / n as f64,
            test_loss,
        };
        on_epoch(&record);
        history.records.push(record);
    }
    Ok((model, history))
}

/// Convenience: split `d`, train, return model and history.
pub fn train_on_dataset<T: Real>(model: &Mlp<T>, d: &Dataset, cfg: &TrainConfig) -> Result<(Mlp<T>, LossHistory)> {
    let samples = Samples::from_dataset(d, cfg.loss_kind)?;
    train(model, &samples, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::init_model;

    fn toy(rows: usize, out: usize) -> Samples<f64> {
        let x = Array2::from_shape_fn((rows, 2), |(i, j)| ((i * 3 + j) % 7) as f64 / 7.0 - 0.5);
        let y = Array2::from_shape_fn((rows, out), |(i, j)| x[[i, 0]] * (j as f64 + 1.0) - x[[i, 1]]);
        Samples::new(x.clone(), y.clone(), x, y).unwrap()
    }

    fn cfg(kind: LossKind, epochs: usize) -> TrainConfig {
        TrainConfig {
            batch_size: 4,
            initial_learning_rate: 0.01,
            lr_decay_per_epoch: 0.99,
            epochs,
            seed: 7,
            loss_kind: kind,
            optimizer: OptimizerKind::default(),
        }
    }

    #[test]
    fn zero_epochs_returns_initial_model() {
        let m: Mlp<f64> = init_model(&[2, 4, 3], 1).unwrap();
        let (out, hist) = train(&m, &toy(10, 3), &cfg(LossKind::MagnitudeRmse, 0)).unwrap();
        assert_eq!(out, m);
        assert!(hist.is_empty());
    }

    #[test]
    fn learning_rate_schedule_is_recorded() {
        let m: Mlp<f64> = init_model(&[2, 4, 3], 1).unwrap();
        let c = cfg(LossKind::MagnitudeRmse, 5);
        let (_, hist) = train(&m, &toy(10, 3), &c).unwrap();
        assert_eq!(hist.len(), 5);
        for (e, r) in hist.records.iter().enumerate() {
            assert_eq!(r.epoch, e + 1);
            assert!((r.learning_rate - 0.01 * 0.99f64.powi(e as i32)).abs() < 1e-12);
        }
    }

    #[test]
    fn training_is_deterministic() {
        let m: Mlp<f64> = init_model(&[2, 8, 3], 2).unwrap();
        let c = cfg(LossKind::PhaseCmae, 20);
        let (a, ha) = train(&m, &toy(37, 3), &c).unwrap();
        let (b, hb) = train(&m, &toy(37, 3), &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(ha.to_csv(), hb.to_csv());
    }

    #[test]
    fn invalid_config_rejected() {
        let m: Mlp<f64> = init_model(&[2, 3], 1).unwrap();
        let mut c = cfg(LossKind::MagnitudeRmse, 1);
        c.batch_size = 0;
        assert!(matches!(train(&m, &toy(4, 3), &c), Err(Error::Configuration(_))));
        c.batch_size = 1;
        c.lr_decay_per_epoch = 1.5;
        assert!(matches!(train(&m, &toy(4, 3), &c), Err(Error::Configuration(_))));
    }

    #[test]
    fn empty_training_split_rejected() {
        let m: Mlp<f64> = init_model(&[2, 3], 1).unwrap();
        let s = Samples::new(Array2::zeros((0, 2)), Array2::zeros((0, 3)), Array2::zeros((0, 2)), Array2::zeros((0, 3))).unwrap();
        assert!(matches!(train(&m, &s, &cfg(LossKind::MagnitudeRmse, 1)), Err(Error::EmptyDataset)));
    }

    #[test]
    fn huge_learning_rate_diverges() {
        let m: Mlp<f64> = init_model(&[2, 8, 3], 1).unwrap();
        let mut c = cfg(LossKind::MagnitudeRmse, 50);
        c.optimizer = OptimizerKind::Sgd;
        c.initial_learning_rate = 1e200;
        assert!(matches!(train(&m, &toy(16, 3), &c), Err(Error::Diverged { .. })));
    }

    #[test]
    fn empty_test_split_gives_nan() {
        let m: Mlp<f64> = init_model(&[2, 3], 1).unwrap();
        let t = toy(8, 3);
        let s = Samples::new(t.train_inputs, t.train_targets, Array2::zeros((0, 2)), Array2::zeros((0, 3))).unwrap();
        let (_, h) = train(&m, &s, &cfg(LossKind::MagnitudeRmse, 1)).unwrap();
        assert!(h.records[0].test_loss.is_nan());
    }

    #[test]
    fn csv_header() {
        let h = LossHistory {
            records: vec![EpochRecord {
                epoch: 1,
                learning_rate: 0.1,
                train_loss: 0.5,
                test_loss: 0.25,
            }],
        };
        assert_eq!(h.to_csv(), "epoch,train_loss,test_loss\n1,0.5,0.25\n");
    }
}
