//! Fully connected network: rectifier hidden layers, identity output.
//!
//! Weights are stored `(out, in)`; inputs are batches of rows.

use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{row_loss, LossKind};
use crate::{Error, Real, Result};

/// Rows per work unit when a batch is split for gradient computation. Fixed,
/// so the reduction order does not depend on the thread count.
pub const GRADIENT_CHUNK_ROWS: usize = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weights: Array2<T>,
    pub bias: Array1<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weights: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
        }
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn affine(&self, x: ArrayView2<T>) -> Array2<T> {
        let mut z = x.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

/// Checks `[input, hidden..., output]`.
pub fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Shape(format!(
            "need at least input and output sizes, got {sizes:?}"
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Shape(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
}

/// Parameter gradients, laid out like the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Array2<T>>,
    pub biases: Vec<Array1<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Self {
            weights: model.layers.iter().map(|l| Array2::zeros(l.weights.dim())).collect(),
            biases: model.layers.iter().map(|l| Array1::zeros(l.bias.len())).collect(),
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }

    /// Flattened in checkpoint order: per layer, weights then bias.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend(w.iter().copied());
            out.extend(b.iter().copied());
        }
        out
    }
}

impl<T: Real> Mlp<T> {
    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Shape("network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].output_dim(),
                    i + 1,
                    pair[1].input_dim()
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.output_dim() {
                return Err(Error::Shape(format!("layer {i} bias length mismatch")));
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        validate_sizes(sizes)?;
        Self::from_layers(sizes.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect())
    }

    #[inline]
    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    #[inline]
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        &mut self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(Dense::output_dim))
            .collect()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim()
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Multiply-accumulates per sample for one forward pass.
    pub fn macs_per_sample(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    fn check_input(&self, x: &ArrayView2<T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "batch width {} but network expects {}",
                x.ncols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `B x in` -> `B x out`.
    pub fn forward(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut a = self.layers[0].affine(x);
        if last > 0 {
            relu(&mut a);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            a = layer.affine(a.view());
            if i < last {
                relu(&mut a);
            }
        }
        Ok(a)
    }

    pub fn predict_row(&self, x: &[T]) -> Result<Vec<T>> {
        let view = ArrayView2::from_shape((1, x.len()), x)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(self.forward(view)?.into_raw_vec_and_offset().0)
    }

    /// Batch-mean loss and its parameter gradients.
    ///
    /// The batch is split into [`GRADIENT_CHUNK_ROWS`]-row chunks processed in
    /// parallel and summed in chunk order.
    pub fn loss_and_gradients(
        &self,
        x: ArrayView2<T>,
        y: ArrayView2<T>,
        kind: LossKind,
    ) -> Result<(T, Gradients<T>)> {
        self.check_input(&x)?;
        if y.nrows() != x.nrows() || y.ncols() != self.output_dim() {
            return Err(Error::Shape(format!(
                "targets {:?} for inputs {:?} and output width {}",
                y.dim(),
                x.dim(),
                self.output_dim()
            )));
        }
        let b = x.nrows();
        if b == 0 {
            return Err(Error::Shape("empty batch".into()));
        }
        let scale = T::one() / T::from_usize(b).unwrap();
        let ranges: Vec<(usize, usize)> = (0..b)
            .step_by(GRADIENT_CHUNK_ROWS)
            .map(|s| (s, (s + GRADIENT_CHUNK_ROWS).min(b)))
            .collect();
        let parts: Vec<(T, Gradients<T>)> = if ranges.len() == 1 {
            vec![self.chunk_gradients(x, y, kind, scale)]
        } else {
            ranges
                .par_iter()
                .map(|&(s, e)| {
                    self.chunk_gradients(x.slice(s![s..e, ..]), y.slice(s![s..e, ..]), kind, scale)
                })
                .collect()
        };
        let mut iter = parts.into_iter();
        let (mut loss_sum, mut grads) = iter.next().expect("at least one chunk");
        for (l, g) in iter {
            loss_sum += l;
            grads.add_assign(&g);
        }
        Ok((loss_sum * scale, grads))
    }

    /// Returns the chunk's summed per-sample loss and `scale`-weighted gradients.
    fn chunk_gradients(
        &self,
        x: ArrayView2<T>,
        y: ArrayView2<T>,
        kind: LossKind,
        scale: T,
    ) -> (T, Gradients<T>) {
        let last = self.layers.len() - 1;
        // activations[i] is the input of layer i
        let mut activations: Vec<Array2<T>> = Vec::with_capacity(self.layers.len());
        let mut a = self.layers[0].affine(x);
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            relu(&mut a);
            let next = layer.affine(a.view());
            activations.push(a);
            a = next;
            debug_assert!(i <= last);
        }
        let output = a;

        let mut delta = Array2::zeros(output.dim());
        let mut loss_sum = T::zero();
        for ((p, t), g) in output.rows().into_iter().zip(y.rows()).zip(delta.rows_mut()) {
            loss_sum += row_loss(kind, p, t, Some((g, scale)));
        }

        let mut grads = Gradients::zeros_like(self);
        for l in (0..=last).rev() {
            let input = if l == 0 { x } else { activations[l - 1].view() };
            grads.weights[l] = delta.t().dot(&input);
            grads.biases[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut prev = delta.dot(&self.layers[l].weights);
                Zip::from(&mut prev).and(&input).for_each(|d, &a| {
                    if a <= T::zero() {
                        *d = T::zero();
                    }
                });
                delta = prev;
            }
        }
        (loss_sum, grads)
    }

    /// Flattened parameters in checkpoint order: per layer, weights
    /// (row-major `out x in`) then bias.
    pub fn to_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend(l.weights.iter().copied());
            out.extend(l.bias.iter().copied());
        }
        out
    }

    /// Inverse of [`Self::to_flat`].
    pub fn from_flat(sizes: &[usize], params: &[T]) -> Result<Self> {
        let mut model = Self::zeros(sizes)?;
        model.set_flat(params)?;
        Ok(model)
    }

    pub fn set_flat(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::Shape(format!(
                "{} parameters supplied, network has {}",
                params.len(),
                self.num_parameters()
            )));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Dense {
                    weights: l.weights.mapv(|v| U::from_f64(v.as_f64()).unwrap()),
                    bias: l.bias.mapv(|v| U::from_f64(v.as_f64()).unwrap()),
                })
                .collect(),
        }
    }
}

#[inline]
fn relu<T: Real>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Glorot-uniform weights, `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`;
/// zero biases.
pub fn init_model<T: Real>(sizes: &[usize], seed: u64) -> Result<Mlp<T>> {
    validate_sizes(sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = sizes
        .windows(2)
        .map(|w| {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || T::lit(rng.random_range(-limit..limit)));
            Dense {
                weights,
                bias: Array1::zeros(fan_out),
            }
        })
        .collect();
    Mlp::from_layers(layers)
}
