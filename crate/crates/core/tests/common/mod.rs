#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use ncbf::linalg::CMatrix;
use ncbf::neural::{init_model, loss, LossKind, Mlp};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_hpd(rng: &mut impl Rng, n: usize) -> CMatrix<f64> {
    let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut r = a.conj_transpose_mul(&a);
    for i in 0..n {
        r[(i, i)] += Complex64::new(0.1, 0.0);
    }
    r
}

/// Solves min w^H R w s.t. C^H w = d through the full KKT system.
pub fn kkt_solve(r: &CMatrix<f64>, c: &CMatrix<f64>, d: &[f64]) -> Vec<Complex64> {
    let (n, k) = (c.rows(), c.cols());
    let mut a = DMatrix::<Complex64>::zeros(n + k, n + k);
    let mut b = DVector::<Complex64>::zeros(n + k);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = r[(i, j)];
        }
        for j in 0..k {
            a[(i, n + j)] = -c[(i, j)];
            a[(n + j, i)] = c[(i, j)].conj();
        }
    }
    for (j, &g) in d.iter().enumerate() {
        b[n + j] = Complex64::new(g, 0.0);
    }
    let x = a.lu().solve(&b).expect("KKT system is nonsingular");
    x.iter().take(n).copied().collect()
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

/// Straight-line forward pass over scalar loops.
pub fn naive_forward(m: &Mlp<f64>, x: &Array2<f64>) -> Array2<f64> {
    let layers = m.layers();
    let mut out = Array2::zeros((x.nrows(), m.output_dim()));
    for b in 0..x.nrows() {
        let mut a: Vec<f64> = x.row(b).to_vec();
        for (li, l) in layers.iter().enumerate() {
            let mut z = vec![0.0; l.weights.nrows()];
            for o in 0..z.len() {
                let mut acc = l.bias[o];
                for i in 0..a.len() {
                    acc += l.weights[[o, i]] * a[i];
                }
                z[o] = if li + 1 < layers.len() && acc < 0.0 { 0.0 } else { acc };
            }
            a = z;
        }
        for (j, v) in a.into_iter().enumerate() {
            out[[b, j]] = v;
        }
    }
    out
}

pub fn naive_rmse(p: &Array2<f64>, t: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for b in 0..p.nrows() {
        let mut s = 0.0;
        for n in 0..p.ncols() {
            s += (p[[b, n]] - t[[b, n]]).powi(2);
        }
        total += (s / p.ncols() as f64).sqrt();
    }
    total / p.nrows() as f64
}

pub fn naive_cmae(p: &Array2<f64>, t: &Array2<f64>) -> f64 {
    let mut total = 0.0;
    for b in 0..p.nrows() {
        let mut s = 0.0;
        for n in 0..p.ncols() {
            let d = (p[[b, n]] - t[[b, n]]).abs() % TAU;
            s += d.min(TAU - d);
        }
        total += s / p.ncols() as f64;
    }
    total / p.nrows() as f64
}

pub fn hidden_pre_activations(m: &Mlp<f64>, x: &Array2<f64>) -> Vec<f64> {
    let mut a = x.clone();
    let mut all = Vec::new();
    for l in &m.layers()[..m.layers().len() - 1] {
        let z = a.dot(&l.weights.t()) + &l.bias;
        all.extend(z.iter().copied());
        a = z.mapv(|v| v.max(0.0));
    }
    all
}

/// Backprop vs central differences on `[6, 8, 8, 24]`.
pub struct GradientCheck {
    /// Worst relative error over entries with magnitude at least `1e-6`.
    pub max_relative: f64,
    /// Worst absolute difference over the remaining, near-zero entries.
    pub max_absolute_small: f64,
    pub compared: usize,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.max_relative < 1e-4 && self.max_absolute_small < 1e-10
    }
}

/// Redraws instances within `1e-3` of a rectifier or circular kink.
pub fn gradient_check(kind: LossKind, seed: u64) -> GradientCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut m: Mlp<f64> = init_model(&[6, 8, 8, 24], rng.random()).unwrap();
        for l in m.layers_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.2..0.2));
        }
        let x = Array2::from_shape_simple_fn((5, 6), || rng.random_range(-1.0..1.0));
        let y = Array2::from_shape_simple_fn((5, 24), || rng.random_range(-3.0..TAU));
        if hidden_pre_activations(&m, &x).iter().any(|z| z.abs() < 1e-3) {
            continue;
        }
        let pred = m.forward(x.view()).unwrap();
        if kind == LossKind::PhaseCmae {
            let kink = pred.iter().zip(y.iter()).any(|(p, t)| {
                let d = (p - t).rem_euclid(TAU);
                d.min(TAU - d) < 1e-3 || (d - PI).abs() < 1e-3
            });
            if kink {
                continue;
            }
        }
        let (_, g) = m.loss_and_gradients(x.view(), y.view(), kind).unwrap();
        let analytic = g.to_flat();
        let theta = m.to_flat();
        let h = 1e-5;
        let mut out = GradientCheck {
            max_relative: 0.0,
            max_absolute_small: 0.0,
            compared: 0,
        };
        for i in 0..theta.len() {
            let mut tp = theta.clone();
            tp[i] += h;
            let mut tm = theta.clone();
            tm[i] -= h;
            let lp = {
                let mp = Mlp::from_flat(&m.layer_sizes(), &tp).unwrap();
                loss(kind, mp.forward(x.view()).unwrap().view(), y.view()).unwrap()
            };
            let lm = {
                let mm = Mlp::from_flat(&m.layer_sizes(), &tm).unwrap();
                loss(kind, mm.forward(x.view()).unwrap().view(), y.view()).unwrap()
            };
            let fd = (lp - lm) / (2.0 * h);
            let diff = (fd - analytic[i]).abs();
            let scale = fd.abs().max(analytic[i].abs());
            if scale >= 1e-6 {
                out.max_relative = out.max_relative.max(diff / scale);
                out.compared += 1;
            } else {
                out.max_absolute_small = out.max_absolute_small.max(diff);
            }
        }
        return out;
    }
}
