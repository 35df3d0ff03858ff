use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use ncbf::benchtime::{self, BenchRecord, LcmvBenchConfig};
use ncbf::datagen::{generate_dataset, load_dataset, make_features, save_dataset, GenerationOptions};
use ncbf::evalmetrics::{beam_gain, beam_pattern, evaluate_model, EvalOptions, PolarGrid};
use ncbf::neural::{
    default_learning_rate, init_model, load_model, save_trained, train_with_progress, tune_architectures,
    DualEstimator, Samples,
};
use ncbf::{ArrayConfig, LossKind, Mlp, PolarPosition, Scenario, TrainConfig};

use crate::manifest::ManifestBuilder;
use crate::{BenchArgs, EvalArgs, GenDataArgs, PatternArgs, TrainArgs, TuneArgs, VerifyArgs, WeightSource};

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Parses comma-separated numbers.
pub fn parse_numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("not a number: {t:?}")))
        .collect()
}

/// Parses flattened `theta_deg,range_m` pairs.
pub fn parse_positions(s: &str) -> Result<Vec<PolarPosition<f64>>> {
    let v = parse_numbers(s)?;
    ensure!(v.len() % 2 == 0, "positions need theta_deg,range_m pairs, got {} numbers", v.len());
    v.chunks(2)
        .map(|p| PolarPosition::from_degrees(p[0], p[1]).map_err(Into::into))
        .collect()
}

fn parse_axis(s: &str, what: &str) -> Result<(f64, f64, f64)> {
    match parse_numbers(s)?.as_slice() {
        &[lo, hi, step] => Ok((lo, hi, step)),
        _ => bail!("{what} axis must be lo,hi,step"),
    }
}

/// Parses `WIDTHxDEPTH`.
pub fn parse_hidden(s: &str) -> Result<Vec<usize>> {
    let (w, d) = s.split_once('x').with_context(|| format!("expected WIDTHxDEPTH, got {s:?}"))?;
    let w: usize = w.trim().parse().with_context(|| format!("bad width in {s:?}"))?;
    let d: usize = d.trim().parse().with_context(|| format!("bad depth in {s:?}"))?;
    Ok(vec![w; d])
}

fn load_checked(dir: &Path, kind: LossKind) -> Result<Mlp<f32>> {
    let (model, meta) = load_model(dir).with_context(|| format!("loading model from {}", dir.display()))?;
    ensure!(
        meta.loss_kind == kind,
        "{} holds a {} network, expected {}",
        dir.display(),
        meta.loss_kind,
        kind
    );
    Ok(model)
}

fn load_estimator(phase: &Path, mag: &Path) -> Result<DualEstimator> {
    Ok(DualEstimator::new(
        load_checked(phase, LossKind::PhaseCmae)?,
        load_checked(mag, LossKind::MagnitudeRmse)?,
    )?)
}

pub fn gen_data(a: &GenDataArgs) -> Result<()> {
    prepare_out(&a.out)?;
    let cfg = ArrayConfig::<f64>::reference_spacing(a.elements)?;
    let opts = GenerationOptions {
        num_users: a.num_users,
        split_fraction: a.split,
        canonical_order: a.canonical_order,
        ..GenerationOptions::default()
    };
    let mut m = ManifestBuilder::new("gen-data", a)?;
    m.seed("dataset", a.seed);
    let d = generate_dataset(&cfg, a.count, a.seed, &opts)?;
    save_dataset(&d, &a.out)?;
    for f in ["manifest.json", "features.f32", "phase_labels.f32", "mag_labels_db.f32"] {
        m.artifact(a.out.join(f));
    }
    eprintln!(
        "wrote {} samples (N = {}, K = {}) to {}",
        d.len(),
        d.num_elements(),
        d.num_users,
        a.out.display()
    );
    m.finish(&a.out)?;
    Ok(())
}

fn train_config(loss: LossKind, batch: usize, lr: Option<f64>, decay: f64, epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: batch,
        initial_learning_rate: lr.unwrap_or_else(|| default_learning_rate(loss)),
        lr_decay_per_epoch: decay,
        epochs,
        seed,
        ..TrainConfig::reference(loss)
    }
}

pub fn train(a: &TrainArgs) -> Result<()> {
    prepare_out(&a.out)?;
    let d = load_dataset(&a.data).with_context(|| format!("loading dataset from {}", a.data.display()))?;
    let sizes = match &a.arch {
        Some(s) => s.clone(),
        None => {
            let mut s = vec![d.feature_width()];
            s.extend([1024; 6]);
            s.push(d.num_elements());
            s
        }
    };
    ensure!(
        sizes.first() == Some(&d.feature_width()) && sizes.last() == Some(&d.num_elements()),
        "architecture {sizes:?} must start at {} inputs and end at {} outputs",
        d.feature_width(),
        d.num_elements()
    );
    let cfg = train_config(a.loss, a.batch, a.lr, a.decay, a.epochs, a.seed);
    let mut m = ManifestBuilder::new("train", &serde_json::json!({"args": a, "train_config": cfg}))?;
    m.seed("init_and_shuffle", a.seed).seed("dataset", d.seed);

    let samples = Samples::<f32>::from_dataset(&d, a.loss)?;
    let model = init_model::<f32>(&sizes, a.seed)?;
    let every = (a.epochs / 20).max(1);
    let (model, history) = train_with_progress(&model, &samples, &cfg, |r| {
        if r.epoch % every == 0 || r.epoch == a.epochs {
            eprintln!(
                "epoch {:>4}  lr {:.3e}  train {:.5}  test {:.5} {}",
                r.epoch,
                r.learning_rate,
                r.train_loss,
                r.test_loss,
                a.loss.units()
            );
        }
    })?;
    save_trained(&model, &cfg, &history, &a.out)?;
    for f in ["model.json", "params.f32", "history.csv"] {
        m.artifact(a.out.join(f));
    }
    m.finish(&a.out)?;
    Ok(())
}

pub fn tune(a: &TuneArgs) -> Result<()> {
    prepare_out(&a.out)?;
    ensure!(a.repeats > 0, "repeats must be at least 1");
    let d = load_dataset(&a.data).with_context(|| format!("loading dataset from {}", a.data.display()))?;
    let candidates = a
        .hidden
        .iter()
        .map(|h| {
            let mut s = vec![d.feature_width()];
            s.extend(parse_hidden(h)?);
            s.push(d.num_elements());
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    let cfg = train_config(a.loss, a.batch, a.lr, a.decay, a.epochs, a.seed);
    let mut m = ManifestBuilder::new("tune", &serde_json::json!({"args": a, "train_config": cfg}))?;
    m.seed("base", a.seed).seed("dataset", d.seed);
    let samples = Samples::<f32>::from_dataset(&d, a.loss)?;
    let report = tune_architectures(&candidates, &samples, a.repeats, &cfg)?;
    for e in &report.entries {
        match e.mean_validation_loss {
            Some(v) => println!("{:?}: {v:.5} {}", e.layer_sizes, a.loss.units()),
            None => println!("{:?}: failed", e.layer_sizes),
        }
    }
    let path = a.out.join("tune.json");
    write_json(&path, &report)?;
    m.artifact(path);
    m.finish(&a.out)?;
    Ok(())
}

pub fn eval(a: &EvalArgs) -> Result<()> {
    prepare_out(&a.out)?;
    let est = load_estimator(&a.phase_model, &a.mag_model)?;
    let cfg = ArrayConfig::<f64>::reference_spacing(est.num_elements())?;
    let mut opts = EvalOptions::new(a.scenarios, a.seed);
    opts.canonical_order = a.canonical_order;
    let mut m = ManifestBuilder::new("eval", &serde_json::json!({"args": a, "eval_options": opts}))?;
    m.seed("scenarios", a.seed);
    let report = evaluate_model(&est, &cfg, &opts)?;
    let show = |name: &str, s: &ncbf::evalmetrics::MetricSummary| {
        let mean = |v: &Option<ncbf::evalmetrics::Stats>| v.as_ref().map_or(f64::NAN, |s| s.mean);
        println!(
            "{name}: NCBF gain {:.2} dB ({} clamped), null deviation {:.3} deg ({} at window edge), radial {:.4} m",
            mean(&s.ncbf_gain_db),
            s.clamped_count,
            mean(&s.null_deviation_deg),
            s.null_boundary_count,
            mean(&s.radial_deviation_m)
        );
    };
    show("dnn", &report.dnn);
    show("lcmv", &report.lcmv);
    if !report.failures.is_empty() {
        eprintln!("{} scenarios failed", report.failures.len());
    }
    let path = a.out.join("eval_report.json");
    write_json(&path, &report)?;
    m.artifact(path);
    m.finish(&a.out)?;
    Ok(())
}

pub fn pattern(a: &PatternArgs) -> Result<()> {
    prepare_out(&a.out)?;
    let desired = parse_positions(&a.desired)?;
    ensure!(desired.len() == 1, "--desired takes exactly one theta_deg,range_m pair");
    let scenario = Scenario::new(desired[0], parse_positions(&a.interferers)?);
    let grid = PolarGrid::stepped(parse_axis(&a.angles, "angle")?, parse_axis(&a.ranges, "range")?)?;
    let (w, cfg) = match a.weights_from {
        WeightSource::Lcmv => {
            let cfg = ArrayConfig::<f64>::reference_spacing(a.elements)?;
            (scenario.lcmv_weights(&cfg)?, cfg)
        }
        WeightSource::Model => {
            let (Some(p), Some(mg)) = (&a.phase_model, &a.mag_model) else {
                bail!("--weights-from model needs --phase-model and --mag-model");
            };
            let est = load_estimator(p, mg)?;
            ensure!(
                est.num_users() == scenario.num_users(),
                "model expects {} users, got {}",
                est.num_users(),
                scenario.num_users()
            );
            let cfg = ArrayConfig::<f64>::reference_spacing(est.num_elements())?;
            let features: Vec<f32> = make_features(&scenario).values().iter().map(|&v| v as f32).collect();
            (est.predict_weights(&features)?, cfg)
        }
    };
    let reference = beam_gain(&w, &cfg, scenario.desired())?;
    ensure!(reference > 0.0, "weights have no gain at the desired user");
    let pat = beam_pattern(&w, &cfg, &grid)?;
    let mut m = ManifestBuilder::new("pattern", a)?;
    let path = a.out.join("pattern.csv");
    let mut out = BufWriter::new(File::create(&path)?);
    pat.write_csv(&mut out, 10.0 * reference.log10())?;
    out.flush()?;
    m.artifact(path);
    m.finish(&a.out)?;
    Ok(())
}

fn estimator_for(a: &BenchArgs, n: usize) -> Result<DualEstimator> {
    let mut sizes = vec![2 * a.k];
    sizes.extend(&a.hidden);
    sizes.push(n);
    Ok(DualEstimator::new(
        init_model(&sizes, a.seed)?,
        init_model(&sizes, a.seed.wrapping_add(1))?,
    )?)
}

fn bench_all(a: &BenchArgs) -> Result<Vec<BenchRecord>> {
    let mut records = benchtime::bench_lcmv(&LcmvBenchConfig {
        ns: a.grid_n.clone(),
        k: a.k,
        samples: a.samples,
        repeats: a.repeats,
        seed: a.seed,
        covariance: a.covariance.into(),
    })?;
    match (&a.phase_model, &a.mag_model) {
        (Some(p), Some(mg)) => {
            let est = load_estimator(p, mg)?;
            records.extend(benchtime::bench_dnn(&est, &a.batches, a.samples, a.repeats, a.seed)?);
        }
        _ => {
            for &n in &a.grid_n {
                let est = estimator_for(a, n)?;
                records.extend(benchtime::bench_dnn(&est, &a.batches, a.samples, a.repeats, a.seed)?);
            }
        }
    }
    Ok(records)
}

pub fn bench(a: &BenchArgs) -> Result<()> {
    prepare_out(&a.out)?;
    let mut m = ManifestBuilder::new("bench", a)?;
    m.seed("scenarios_and_init", a.seed);
    let records = if a.multi_threaded {
        bench_all(a)?
    } else {
        rayon::ThreadPoolBuilder::new().num_threads(1).build()?.install(|| bench_all(a))?
    };
    for r in &records {
        println!(
            "{:<4} N={:<4} K={} batch={:<5} {:.3e} s/sample",
            r.method, r.n, r.k, r.batch_size, r.time_per_sample_s
        );
    }
    if let Ok(slope) = benchtime::lcmv_slope(&records) {
        println!("lcmv log-log slope vs N: {slope:.2}");
    }
    let path = a.out.join("bench.csv");
    let mut out = BufWriter::new(File::create(&path)?);
    benchtime::write_csv(&records, &mut out)?;
    out.flush()?;
    m.artifact(path);
    m.finish(&a.out)?;
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<bool> {
    let scratch: Option<PathBuf> = a.out.as_ref().map(|o| o.join("persistence"));
    if let Some(o) = &a.out {
        prepare_out(o)?;
    }
    let mut m = ManifestBuilder::new("verify", a)?;
    m.seed("checks", a.seed);
    let report = ncbf::verify::run_verify(a.seed, scratch.as_deref());
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let ok = report.all_passed();
    println!("{}", if ok { "PASS" } else { "FAIL" });
    if let Some(o) = &a.out {
        let path = o.join("verify.json");
        write_json(&path, &report)?;
        m.artifact(path);
        if let Some(s) = scratch {
            m.artifact(s);
        }
        m.finish(o)?;
    }
    Ok(ok)
}
