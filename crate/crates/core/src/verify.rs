//! Fast self-check suite: physics anchor, LCMV constraints and optimality,
//! loss oracles, backprop gradients, label gauge invariance, persistence.

use std::f64::consts::{PI, TAU};
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::beamformer::{build_constraints, lcmv_weights, NcbfWeights};
use crate::datagen::{
    generate_dataset, load_dataset, make_labels, sample_rng, sample_scenario, save_dataset, GenerationOptions,
    SamplingBounds,
};
use crate::evalmetrics::beam_gain;
use crate::linalg::CMatrix;
use crate::neural::{init_model, load_model, loss, save_model, LossKind, Mlp, ModelMetadata, TrainConfig};
use crate::neural::{wrapped_difference, LossHistory};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn outcome(name: &str, r: Result<(bool, String)>) -> CheckOutcome {
    let (passed, detail) = r.unwrap_or_else(|e| (false, format!("error: {e}")));
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// Runs every check. `scratch` holds the persistence round trip; a
/// temporary directory is used and removed when it is `None`.
pub fn run_verify(seed: u64, scratch: Option<&Path>) -> VerifyReport {
    let checks = vec![
        outcome("rayleigh_distance", check_rayleigh()),
        outcome("lcmv_constraints", check_lcmv_constraints(seed, 200)),
        outcome("lcmv_kkt_oracle", check_kkt(seed, 20)),
        outcome("loss_oracles", check_loss_oracles(seed, 200)),
        outcome("gradient_phase", check_gradients(seed, LossKind::PhaseCmae)),
        outcome("gradient_magnitude", check_gradients(seed, LossKind::MagnitudeRmse)),
        outcome("label_gauge", check_gauge(seed, 200)),
        outcome("persistence", check_persistence(seed, scratch)),
    ];
    VerifyReport { seed, checks }
}

fn check_rayleigh() -> Result<(bool, String)> {
    let d = ArrayConfig::<f64>::reference_ula().rayleigh_distance();
    Ok(((d - 19.8).abs() <= 0.005 * 19.8, format!("{d:.4} m")))
}

fn check_lcmv_constraints(seed: u64, count: usize) -> Result<(bool, String)> {
    let cfg = ArrayConfig::reference_ula();
    let bounds = SamplingBounds::default();
    let (mut worst_residual, mut worst_null) = (0.0f64, 0.0f64);
    for i in 0..count {
        let s = sample_scenario(&mut sample_rng(seed, i as u64), &cfg, 3, &bounds)?;
        let c = build_constraints(&cfg, &s.positions(), 0)?;
        let w = lcmv_weights(&c, None)?;
        let r = c.residual(&w).iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst_residual = worst_residual.max(r);
        for p in s.interferers() {
            worst_null = worst_null.max(beam_gain(&w, &cfg, p)?);
        }
    }
    Ok((
        worst_residual < 1e-9 && worst_null < 1e-16,
        format!("max residual {worst_residual:.2e}, max interferer gain {worst_null:.2e}"),
    ))
}

/// Dense complex solve by Gaussian elimination with partial pivoting.
fn gauss_solve(mut a: Vec<Vec<Complex64>>, mut b: Vec<Complex64>) -> Option<Vec<Complex64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))?;
        if a[piv][col].norm() == 0.0 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for i in (0..n).rev() {
        let s: Complex64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

fn random_hpd(rng: &mut impl Rng, n: usize) -> CMatrix<f64> {
    let a = CMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let mut r = a.conj_transpose_mul(&a);
    for i in 0..n {
        r[(i, i)] += Complex64::new(0.5, 0.0);
    }
    r
}

fn check_kkt(seed: u64, per_case: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b6b74);
    let bounds = SamplingBounds::default();
    let mut worst = 0.0f64;
    let mut solved = 0usize;
    for n in 3..=6 {
        let cfg = ArrayConfig::reference_spacing(n)?;
        for k in 1..=3 {
            for _ in 0..per_case {
                let s = sample_scenario(&mut rng, &cfg, k, &bounds)?;
                let c = build_constraints(&cfg, &s.positions(), 0)?;
                let r = random_hpd(&mut rng, n);
                let w = lcmv_weights(&c, Some(&r))?;
                let cm = c.matrix();
                let dim = n + k;
                let mut a = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
                let mut b = vec![Complex64::new(0.0, 0.0); dim];
                for i in 0..n {
                    for j in 0..n {
                        a[i][j] = r[(i, j)];
                    }
                    for j in 0..k {
                        a[i][n + j] = -cm[(i, j)];
                        a[n + j][i] = cm[(i, j)].conj();
                    }
                }
                for (j, g) in c.gains().iter().enumerate() {
                    b[n + j] = Complex64::new(*g, 0.0);
                }
                let Some(x) = gauss_solve(a, b) else { continue };
                let num: f64 = w.entries().iter().zip(&x).map(|(p, q)| (p - q).norm_sqr()).sum::<f64>().sqrt();
                let den: f64 = x[..n].iter().map(|q| q.norm_sqr()).sum::<f64>().sqrt();
                worst = worst.max(num / den);
                solved += 1;
            }
        }
    }
    Ok((worst < 1e-6 && solved > 0, format!("{solved} instances, max relative error {worst:.2e}")))
}

fn naive_loss(kind: LossKind, p: ArrayView2<f64>, t: ArrayView2<f64>) -> f64 {
    let (b, n) = p.dim();
    let mut total = 0.0;
    for i in 0..b {
        let mut acc = 0.0;
        for j in 0..n {
            let d = p[[i, j]] - t[[i, j]];
            match kind {
                LossKind::MagnitudeRmse => acc += d * d,
                LossKind::PhaseCmae => {
                    let a = d.rem_euclid(TAU);
                    acc += a.min(TAU - a);
                }
            }
        }
        total += match kind {
            LossKind::MagnitudeRmse => (acc / n as f64).sqrt(),
            LossKind::PhaseCmae => acc / n as f64,
        };
    }
    total / b as f64
}

fn check_loss_oracles(seed: u64, count: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c6f7373);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let b = rng.random_range(1..16);
        let n = rng.random_range(1..32);
        let p = Array2::from_shape_simple_fn((b, n), || rng.random_range(-10.0..10.0));
        let t = Array2::from_shape_simple_fn((b, n), || rng.random_range(-10.0..10.0));
        for kind in [LossKind::PhaseCmae, LossKind::MagnitudeRmse] {
            worst = worst.max((loss(kind, p.view(), t.view())? - naive_loss(kind, p.view(), t.view())).abs());
        }
    }
    let wrap = loss(
        LossKind::PhaseCmae,
        Array2::from_elem((1, 1), 0.1).view(),
        Array2::from_elem((1, 1), TAU - 0.1).view(),
    )?;
    let wrap_ok = (wrap - 0.2).abs() < 1e-12;
    Ok((worst < 1e-12 && wrap_ok, format!("max deviation {worst:.2e}, wraparound {wrap:.15}")))
}

/// Hidden-layer pre-activations of `m` on `x`.
fn pre_activations(m: &Mlp<f64>, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
    let mut out = Vec::new();
    let mut a = x.to_owned();
    let layers = m.layers();
    for l in &layers[..layers.len() - 1] {
        let z = a.dot(&l.weights.t()) + &l.bias;
        a = z.mapv(|v| v.max(0.0));
        out.push(z);
    }
    out
}

/// Worst relative error between backprop and central differences on a
/// `[6, 8, 8, 24]` network, redrawing instances that sit within `1e-3` of a
/// kink.
pub fn gradient_check_error(seed: u64, kind: LossKind) -> Result<f64> {
    const MARGIN: f64 = 1e-3;
    const H: f64 = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x67726164);
    for attempt in 0..1000u64 {
        let mut model: Mlp<f64> = init_model(&[6, 8, 8, 24], seed.wrapping_add(attempt))?;
        for l in model.layers_mut() {
            l.bias.mapv_inplace(|_| rng.random_range(-0.1..0.1));
        }
        let x = Array2::from_shape_simple_fn((4, 6), || rng.random_range(-1.0..1.0));
        let y = match kind {
            LossKind::PhaseCmae => Array2::from_shape_simple_fn((4, 24), || rng.random_range(0.0..TAU)),
            LossKind::MagnitudeRmse => Array2::from_shape_simple_fn((4, 24), || rng.random_range(-20.0..5.0)),
        };
        if pre_activations(&model, x.view()).iter().flatten().any(|z| z.abs() < MARGIN) {
            continue;
        }
        let pred = model.forward(x.view())?;
        if kind == LossKind::PhaseCmae {
            let near_kink = pred.iter().zip(y.iter()).any(|(&p, &t)| {
                let d = wrapped_difference(p, t).abs();
                d < MARGIN || PI - d < MARGIN
            });
            if near_kink {
                continue;
            }
        }
        let (_, grads) = model.loss_and_gradients(x.view(), y.view(), kind)?;
        let analytic = grads.to_flat();
        let base = model.to_flat();
        let mut worst = 0.0f64;
        for (i, &g) in analytic.iter().enumerate() {
            let mut plus = base.clone();
            plus[i] += H;
            let mut minus = base.clone();
            minus[i] -= H;
            model.set_flat(&plus)?;
            let lp = loss(kind, model.forward(x.view())?.view(), y.view())?;
            model.set_flat(&minus)?;
            let lm = loss(kind, model.forward(x.view())?.view(), y.view())?;
            let fd = (lp - lm) / (2.0 * H);
            let diff = (g - fd).abs();
            let scale = g.abs().max(fd.abs());
            // near-zero entries are compared absolutely
            if scale >= 1e-6 {
                worst = worst.max(diff / scale);
            } else if diff >= 1e-10 {
                worst = f64::INFINITY;
            }
        }
        return Ok(worst);
    }
    Err(crate::Error::Configuration("could not draw a kink-free gradient-check instance".into()))
}

fn check_gradients(seed: u64, kind: LossKind) -> Result<(bool, String)> {
    let e = gradient_check_error(seed, kind)?;
    Ok((e < 1e-4, format!("max relative error {e:.2e}")))
}

fn check_gauge(seed: u64, count: usize) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6761);
    let mut mismatches = 0usize;
    for _ in 0..count {
        let n = rng.random_range(2..40);
        let w = NcbfWeights::from_entries(
            (0..n)
                .map(|_| Complex64::from_polar(rng.random_range(0.05..2.0), rng.random_range(0.0..TAU)))
                .collect(),
        );
        let c = Complex64::from_polar(rng.random_range(1e-3..1e3), rng.random_range(0.0..TAU));
        let a = make_labels(&w)?;
        let b = make_labels(&w.scaled(c))?;
        let bits = |v: &[f64]| v.iter().map(|&x| (x as f32).to_bits()).collect::<Vec<_>>();
        if bits(a.phase()) != bits(b.phase()) || bits(a.magnitude_db()) != bits(b.magnitude_db()) {
            mismatches += 1;
        }
    }
    Ok((mismatches == 0, format!("{mismatches} of {count} label pairs differ after f32 rounding")))
}

fn check_persistence(seed: u64, scratch: Option<&Path>) -> Result<(bool, String)> {
    let (dir, cleanup): (PathBuf, bool) = match scratch {
        Some(p) => (p.to_path_buf(), false),
        None => (
            std::env::temp_dir().join(format!("ncbf-verify-{}-{seed}", std::process::id())),
            true,
        ),
    };
    let result = (|| -> Result<(bool, String)> {
        let d = generate_dataset(&ArrayConfig::reference_ula(), 32, seed, &GenerationOptions::default())?;
        save_dataset(&d, dir.join("dataset"))?;
        let d_ok = load_dataset(dir.join("dataset"))? == d;
        let m: Mlp<f32> = init_model(&[6, 16, 24], seed)?;
        let cfg = TrainConfig::reference(LossKind::PhaseCmae);
        save_model(&m, &ModelMetadata::new(&m, &cfg, &LossHistory::default()), dir.join("model"))?;
        let (back, _) = load_model(dir.join("model"))?;
        let bits = |m: &Mlp<f32>| m.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        let m_ok = bits(&back) == bits(&m);
        Ok((d_ok && m_ok, format!("dataset {}, model {}", ok_str(d_ok), ok_str(m_ok))))
    })();
    if cleanup {
        let _ = std::fs::remove_dir_all(&dir);
    }
    result
}

fn ok_str(b: bool) -> &'static str {
    if b {
        "bit-exact"
    } else {
        "differs"
    }
}
