//! Per-sample timing of LCMV synthesis and network inference.

use std::hint::black_box;
use std::io::Write;
use std::time::Instant;

use ndarray::{s, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array_model::ArrayConfig;
use crate::beamformer::{build_constraints, lcmv_weights, signal_covariance};
use crate::datagen::{sample_rng, sample_scenario, SamplingBounds, Scenario};
use crate::neural::DualEstimator;
use crate::{Error, Result};

pub const DEFAULT_REPEATS: usize = 5;
/// Noise power added to the signal covariance in LCMV timing.
pub const BENCH_NOISE_POWER: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lcmv,
    Dnn,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Lcmv => "lcmv",
            Method::Dnn => "dnn",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Method,
    pub n: usize,
    pub k: usize,
    pub batch_size: usize,
    pub samples: usize,
    /// Wall time of the median repeat.
    pub wall_time_total_s: f64,
    pub time_per_sample_s: f64,
}

pub fn write_csv<W: Write>(records: &[BenchRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "method,N,K,batch,samples,time_per_sample_s")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{:e}",
            r.method, r.n, r.k, r.batch_size, r.samples, r.time_per_sample_s
        )?;
    }
    Ok(())
}

/// Covariance used when timing LCMV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceMode {
    /// `R = I`; only the `K x K` system is solved.
    Identity,
    /// `R = C C^H + sigma^2 I`, factored per sample.
    #[default]
    Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LcmvBenchConfig {
    pub ns: Vec<usize>,
    pub k: usize,
    pub samples: usize,
    pub repeats: usize,
    pub seed: u64,
    pub covariance: CovarianceMode,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn check_counts(samples: usize, repeats: usize) -> Result<()> {
    if samples == 0 || repeats == 0 {
        return Err(Error::Configuration("samples and repeats must be at least 1".into()));
    }
    Ok(())
}

/// Weight synthesis for one scenario, as timed: constraint build, optional
/// covariance, solves.
pub fn lcmv_once(cfg: &ArrayConfig<f64>, scenario: &Scenario, mode: CovarianceMode) -> Result<()> {
    let c = build_constraints(cfg, &scenario.positions(), 0)?;
    let w = match mode {
        CovarianceMode::Identity => lcmv_weights(&c, None)?,
        CovarianceMode::Signal => {
            let r = signal_covariance(&c, BENCH_NOISE_POWER);
            lcmv_weights(&c, Some(&r))?
        }
    };
    black_box(w);
    Ok(())
}

/// Median over repeats of per-sample LCMV time, per array size. Scenario
/// sampling and a 10% warmup are excluded from the measurement.
pub fn bench_lcmv(bc: &LcmvBenchConfig) -> Result<Vec<BenchRecord>> {
    check_counts(bc.samples, bc.repeats)?;
    let bounds = SamplingBounds::default();
    bc.ns
        .iter()
        .map(|&n| {
            let cfg = ArrayConfig::<f64>::reference_spacing(n)?;
            let scenarios = (0..bc.samples)
                .map(|i| sample_scenario(&mut sample_rng(bc.seed, i as u64), &cfg, bc.k, &bounds))
                .collect::<Result<Vec<_>>>()?;
            for s in scenarios.iter().take(bc.samples.div_ceil(10)) {
                lcmv_once(&cfg, s, bc.covariance)?;
            }
            let mut totals = Vec::with_capacity(bc.repeats);
            for _ in 0..bc.repeats {
                let t0 = Instant::now();
                for s in &scenarios {
                    lcmv_once(&cfg, s, bc.covariance)?;
                }
                totals.push(t0.elapsed().as_secs_f64());
            }
            let total = median(totals);
            Ok(BenchRecord {
                method: Method::Lcmv,
                n,
                k: bc.k,
                batch_size: 1,
                samples: bc.samples,
                wall_time_total_s: total,
                time_per_sample_s: total / bc.samples as f64,
            })
        })
        .collect()
}

/// Median over repeats of per-sample inference time of both networks, per
/// batch size. The last batch may be short; a batch larger than `samples`
/// becomes a single partial batch.
pub fn bench_dnn(
    est: &DualEstimator,
    batch_sizes: &[usize],
    samples: usize,
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    check_counts(samples, repeats)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = est.phase.input_dim();
    let inputs = Array2::from_shape_simple_fn((samples, width), || rng.random_range(-1.0f32..1.0));
    batch_sizes
        .iter()
        .map(|&b| {
            if b == 0 {
                return Err(Error::Configuration("batch size must be at least 1".into()));
            }
            let run = || -> Result<()> {
                for start in (0..samples).step_by(b) {
                    let x = inputs.slice(s![start..(start + b).min(samples), ..]);
                    black_box(est.phase.forward(x)?);
                    black_box(est.magnitude.forward(x)?);
                }
                Ok(())
            };
            run()?;
            let mut totals = Vec::with_capacity(repeats);
            for _ in 0..repeats {
                let t0 = Instant::now();
                run()?;
                totals.push(t0.elapsed().as_secs_f64());
            }
            let total = median(totals);
            Ok(BenchRecord {
                method: Method::Dnn,
                n: est.num_elements(),
                k: est.num_users(),
                batch_size: b,
                samples,
                wall_time_total_s: total,
                time_per_sample_s: total / samples as f64,
            })
        })
        .collect()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput("need at least two (x, y) pairs".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidInput("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("x values are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Slope of LCMV per-sample time against N over the given records.
pub fn lcmv_slope(records: &[BenchRecord]) -> Result<f64> {
    let (ns, ts): (Vec<f64>, Vec<f64>) = records
        .iter()
        .filter(|r| r.method == Method::Lcmv)
        .map(|r| (r.n as f64, r.time_per_sample_s))
        .unzip();
    loglog_slope(&ns, &ts)
}
