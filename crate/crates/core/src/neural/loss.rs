//! Training/evaluation losses.
//!
//! Both losses are computed per sample over the `N` outputs and then averaged
//! over the batch; gradients follow the same order, so every entry of a batch
//! gradient carries a `1/B` factor.

use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, Zip};
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Per-sample RMSE below this has its gradient zeroed (sqrt singularity).
pub const RMSE_GRADIENT_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Circular mean absolute error on phases, radians.
    PhaseCmae,
    /// Root mean square error on magnitudes, dB.
    MagnitudeRmse,
}

impl LossKind {
    pub fn units(self) -> &'static str {
        match self {
            LossKind::PhaseCmae => "rad",
            LossKind::MagnitudeRmse => "dB",
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            LossKind::PhaseCmae => "phase",
            LossKind::MagnitudeRmse => "magnitude",
        })
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "phase" | "phase_cmae" | "cmae" => Ok(LossKind::PhaseCmae),
            "magnitude" | "mag" | "magnitude_rmse" | "rmse" => Ok(LossKind::MagnitudeRmse),
            other => Err(Error::InvalidInput(format!("unknown loss kind {other:?}"))),
        }
    }
}

/// Signed shortest angular difference `a - b`, in `(-pi, pi]`.
#[inline]
pub fn wrapped_difference<T: Real>(a: T, b: T) -> T {
    let tau = T::TAU();
    let mut d = (a - b) % tau;
    if d < T::zero() {
        d += tau;
    }
    if d > T::PI() {
        d -= tau;
    }
    d
}

/// Shortest distance between two angles, in `[0, pi]`.
#[inline]
pub fn circular_distance<T: Real>(a: T, b: T) -> T {
    wrapped_difference(a, b).abs()
}

fn check_shapes<T>(pred: &ArrayView2<T>, truth: &ArrayView2<T>) -> Result<()> {
    if pred.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.dim(),
            truth.dim()
        )));
    }
    if pred.nrows() == 0 || pred.ncols() == 0 {
        return Err(Error::Shape("loss over an empty batch".into()));
    }
    Ok(())
}

/// Loss of one row; writes `scale * d(row loss)/d(pred)` into `grad` when given.
pub(crate) fn row_loss<T: Real>(
    kind: LossKind,
    pred: ArrayView1<T>,
    truth: ArrayView1<T>,
    grad: Option<(ArrayViewMut1<T>, T)>,
) -> T {
    let n = T::from_usize(pred.len()).unwrap();
    match kind {
        LossKind::MagnitudeRmse => {
            let sq: T = pred
                .iter()
                .zip(truth.iter())
                .map(|(&p, &t)| (p - t) * (p - t))
                .sum();
            let rmse = (sq / n).sqrt();
            if let Some((mut g, scale)) = grad {
                if rmse.as_f64() < RMSE_GRADIENT_FLOOR {
                    g.fill(T::zero());
                } else {
                    let k = scale / (n * rmse);
                    Zip::from(&mut g)
                        .and(&pred)
                        .and(&truth)
                        .for_each(|g, &p, &t| *g = (p - t) * k);
                }
            }
            rmse
        }
        LossKind::PhaseCmae => {
            let mut total = T::zero();
            match grad {
                Some((mut g, scale)) => {
                    let k = scale / n;
                    Zip::from(&mut g)
                        .and(&pred)
                        .and(&truth)
                        .for_each(|g, &p, &t| {
                            let d = wrapped_difference(p, t);
                            total += d.abs();
                            *g = if d > T::zero() {
                                k
                            } else if d < T::zero() {
                                -k
                            } else {
                                T::zero()
                            };
                        });
                }
                None => {
                    for (&p, &t) in pred.iter().zip(truth.iter()) {
                        total += circular_distance(p, t);
                    }
                }
            }
            total / n
        }
    }
}

/// Batch-mean loss of the given kind.
pub fn loss<T: Real>(kind: LossKind, pred: ArrayView2<T>, truth: ArrayView2<T>) -> Result<T> {
    check_shapes(&pred, &truth)?;
    let b = T::from_usize(pred.nrows()).unwrap();
    let sum: T = pred
        .rows()
        .into_iter()
        .zip(truth.rows())
        .map(|(p, t)| row_loss(kind, p, t, None))
        .sum();
    Ok(sum / b)
}

/// Per-sample RMSE over the `N` entries, averaged over the batch (dB for
/// magnitude labels).
pub fn rmse_loss<T: Real>(pred: ArrayView2<T>, truth: ArrayView2<T>) -> Result<T> {
    loss(LossKind::MagnitudeRmse, pred, truth)
}

/// Per-sample circular mean absolute error, averaged over the batch (radians).
pub fn cmae_loss<T: Real>(pred: ArrayView2<T>, truth: ArrayView2<T>) -> Result<T> {
    loss(LossKind::PhaseCmae, pred, truth)
}

/// Gradient of the batch-mean loss with respect to `pred`.
///
/// CMAE uses the subgradient `sign(wrapped delta) / (B N)`, with `+1` at
/// `|delta| = pi` and `0` at `delta = 0`. RMSE rows whose loss is below
/// [`RMSE_GRADIENT_FLOOR`] get a zero gradient.
pub fn loss_gradient<T: Real>(
    kind: LossKind,
    pred: ArrayView2<T>,
    truth: ArrayView2<T>,
) -> Result<Array2<T>> {
    check_shapes(&pred, &truth)?;
    let scale = T::one() / T::from_usize(pred.nrows()).unwrap();
    let mut grad = Array2::zeros(pred.dim());
    for ((p, t), g) in pred.rows().into_iter().zip(truth.rows()).zip(grad.rows_mut()) {
        row_loss(kind, p, t, Some((g, scale)));
    }
    Ok(grad)
}
