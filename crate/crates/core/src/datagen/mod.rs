//! Random multi-user scenarios, feature/label encoding, and dataset
//! generation.
//!
//! Features for `K` users are `(theta_1/(pi/2), r_1/6, ..., theta_K/(pi/2), r_K/6)`
//! with the desired user first. Labels are the LCMV weights split into a
//! phase vector (relative to element 1, wrapped to `[0, 2 pi)`) and a
//! magnitude vector in power dB after unit-power normalization.

pub(crate) mod store;

pub use store::{load_dataset, save_dataset, DatasetManifest, FORMAT_VERSION};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{ArrayConfig, PolarPosition};
use crate::beamformer::{self, wrap_phase, NcbfWeights};
use crate::neural::LossKind;
use crate::{Error, Result};

/// Angle normalization for features (radians).
pub const ANGLE_SCALE: f64 = std::f64::consts::FRAC_PI_2;
/// Range normalization for features (meters).
pub const RANGE_SCALE: f64 = 6.0;
/// Floor for magnitude labels; zero magnitudes would otherwise be `-inf` dB.
pub const MIN_LABEL_DB: f64 = -300.0;
/// Consecutive rejected draws before sampling gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 1000;

/// Per-user sampling box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingBounds {
    pub theta_min: f64,
    pub theta_max: f64,
    pub range_min: f64,
    pub range_max: f64,
}

impl Default for SamplingBounds {
    fn default() -> Self {
        Self {
            theta_min: -ANGLE_SCALE,
            theta_max: ANGLE_SCALE,
            range_min: 0.5,
            range_max: 6.0,
        }
    }
}

impl SamplingBounds {
    pub fn validate(&self) -> Result<()> {
        let ok_theta = self.theta_min.is_finite()
            && self.theta_max.is_finite()
            && self.theta_min <= self.theta_max
            && self.theta_min >= -ANGLE_SCALE
            && self.theta_max <= ANGLE_SCALE;
        let ok_range = self.range_min.is_finite()
            && self.range_max.is_finite()
            && self.range_min > 0.0
            && self.range_min <= self.range_max;
        if ok_theta && ok_range {
            Ok(())
        } else {
            Err(Error::Configuration(format!("invalid sampling bounds {self:?}")))
        }
    }

    fn draw(&self, rng: &mut (impl Rng + ?Sized)) -> PolarPosition<f64> {
        let theta = uniform(rng, self.theta_min, self.theta_max);
        let r = uniform(rng, self.range_min, self.range_max);
        PolarPosition::new(theta, r).expect("bounds validated")
    }
}

fn uniform(rng: &mut (impl Rng + ?Sized), lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Independent random substream for sample `index` under `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// One desired user plus `K - 1` interferers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    desired: PolarPosition<f64>,
    interferers: Vec<PolarPosition<f64>>,
    /// Number of draws the sampler needed (1 when the first draw passed).
    #[serde(default)]
    draws: usize,
}

impl Scenario {
    pub fn new(desired: PolarPosition<f64>, interferers: Vec<PolarPosition<f64>>) -> Self {
        Self {
            desired,
            interferers,
            draws: 1,
        }
    }

    #[inline]
    pub fn desired(&self) -> &PolarPosition<f64> {
        &self.desired
    }

    #[inline]
    pub fn interferers(&self) -> &[PolarPosition<f64>] {
        &self.interferers
    }

    #[inline]
    pub fn draws(&self) -> usize {
        self.draws
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        1 + self.interferers.len()
    }

    /// All users, desired first.
    pub fn positions(&self) -> Vec<PolarPosition<f64>> {
        std::iter::once(self.desired)
            .chain(self.interferers.iter().copied())
            .collect()
    }

    /// Interferers sorted by angle, then range.
    pub fn canonicalized(&self) -> Self {
        let mut interferers = self.interferers.clone();
        interferers.sort_by(|a, b| {
            a.angle_theta()
                .total_cmp(&b.angle_theta())
                .then(a.range_r().total_cmp(&b.range_r()))
        });
        Self {
            desired: self.desired,
            interferers,
            draws: self.draws,
        }
    }

    /// Unnormalized LCMV weights with `R = I`, desired user first.
    pub fn lcmv_weights(&self, cfg: &ArrayConfig<f64>) -> Result<NcbfWeights<f64>> {
        let c = beamformer::build_constraints(cfg, &self.positions(), 0)?;
        beamformer::lcmv_weights(&c, None)
    }
}

/// Draws a `num_users` scenario, redrawing until the LCMV conditioning guard
/// passes.
pub fn sample_scenario(
    rng: &mut (impl Rng + ?Sized),
    cfg: &ArrayConfig<f64>,
    num_users: usize,
    bounds: &SamplingBounds,
) -> Result<Scenario> {
    bounds.validate()?;
    if num_users == 0 {
        return Err(Error::Configuration("num_users must be >= 1".into()));
    }
    if num_users > cfg.num_elements() {
        return Err(Error::OverConstrained {
            users: num_users,
            elements: cfg.num_elements(),
        });
    }
    for attempt in 1..=MAX_CONSECUTIVE_REJECTIONS {
        let desired = bounds.draw(rng);
        let interferers: Vec<_> = (1..num_users).map(|_| bounds.draw(rng)).collect();
        let scenario = Scenario {
            desired,
            interferers,
            draws: attempt,
        };
        let accepted = beamformer::build_constraints(cfg, &scenario.positions(), 0)
            .and_then(|c| beamformer::constraint_condition(&c, None))
            .is_ok();
        if accepted {
            return Ok(scenario);
        }
    }
    Err(Error::Configuration(format!(
        "{MAX_CONSECUTIVE_REJECTIONS} consecutive degenerate draws; sampling bounds too tight"
    )))
}

/// Normalized network input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

pub fn make_features(s: &Scenario) -> FeatureVector {
    FeatureVector(
        s.positions()
            .iter()
            .flat_map(|p| [p.angle_theta() / ANGLE_SCALE, p.range_r() / RANGE_SCALE])
            .collect(),
    )
}

/// Inverse of [`make_features`].
pub fn scenario_from_features(values: &[f64]) -> Result<Scenario> {
    if values.is_empty() || values.len() % 2 != 0 {
        return Err(Error::Shape(format!(
            "feature vector length {} is not a positive even number",
            values.len()
        )));
    }
    let mut positions = values
        .chunks_exact(2)
        .map(|p| PolarPosition::new(p[0] * ANGLE_SCALE, p[1] * RANGE_SCALE))
        .collect::<Result<Vec<_>>>()?;
    let interferers = positions.split_off(1);
    Ok(Scenario::new(positions[0], interferers))
}

/// Phase and power-dB magnitude labels for one weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPair {
    phase: Vec<f64>,
    magnitude_db: Vec<f64>,
    clamped_entries: usize,
}

impl LabelPair {
    pub fn new(phase: Vec<f64>, magnitude_db: Vec<f64>) -> Self {
        assert_eq!(phase.len(), magnitude_db.len(), "label length mismatch");
        Self {
            phase,
            magnitude_db,
            clamped_entries: 0,
        }
    }

    /// Phases relative to element 1, in `[0, 2 pi)`.
    #[inline]
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// `10 log10(a_n^2)` of the unit-power magnitudes.
    #[inline]
    pub fn magnitude_db(&self) -> &[f64] {
        &self.magnitude_db
    }

    /// Entries clamped to [`MIN_LABEL_DB`] because their magnitude was zero.
    #[inline]
    pub fn clamped_entries(&self) -> usize {
        self.clamped_entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }
}

/// Label pipeline: decompose, reference phases to element 1, re-wrap,
/// normalize to unit power, convert to power dB.
pub fn make_labels(w: &NcbfWeights<f64>) -> Result<LabelPair> {
    if w.is_empty() {
        return Err(Error::InvalidInput("empty weight vector".into()));
    }
    let (magnitudes, phases) = w.decompose();
    let reference = phases[0];
    let phase: Vec<f64> = phases.iter().map(|&p| wrap_phase(p - reference)).collect();

    let power: f64 = magnitudes.iter().map(|a| a * a).sum();
    if !(power > 0.0) || !power.is_finite() {
        return Err(Error::InvalidInput(
            "cannot label a zero or non-finite weight vector".into(),
        ));
    }
    let mut clamped_entries = 0;
    let magnitude_db = magnitudes
        .iter()
        .map(|&a| {
            let db = 10.0 * (a * a / power).log10();
            if db.is_finite() && db >= MIN_LABEL_DB {
                db
            } else {
                clamped_entries += 1;
                MIN_LABEL_DB
            }
        })
        .collect();
    Ok(LabelPair {
        phase,
        magnitude_db,
        clamped_entries,
    })
}

/// Knobs for [`generate_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationOptions {
    pub num_users: usize,
    pub bounds: SamplingBounds,
    pub split_fraction: f64,
    /// Sort interferers by angle in the feature vector.
    pub canonical_order: bool,
}

impl Default for GenerationOptions {
    fn default() -> Self {
        Self {
            num_users: 3,
            bounds: SamplingBounds::default(),
            split_fraction: 0.8,
            canonical_order: false,
        }
    }
}

/// One generated sample in full precision.
#[derive(Debug, Clone)]
pub struct GeneratedSample {
    pub scenario: Scenario,
    pub features: FeatureVector,
    pub labels: LabelPair,
}

/// Generates sample `index` of the dataset identified by `seed`.
pub fn generate_sample(
    cfg: &ArrayConfig<f64>,
    seed: u64,
    index: u64,
    opts: &GenerationOptions,
) -> Result<GeneratedSample> {
    let mut rng = sample_rng(seed, index);
    let mut scenario = sample_scenario(&mut rng, cfg, opts.num_users, &opts.bounds)?;
    if opts.canonical_order {
        scenario = scenario.canonicalized();
    }
    let w = scenario.lcmv_weights(cfg)?;
    let labels = make_labels(&w)?;
    Ok(GeneratedSample {
        features: make_features(&scenario),
        scenario,
        labels,
    })
}

/// Generates `count` samples in parallel; bytes depend only on
/// `(cfg, count, seed, opts)`.
pub fn generate_dataset(
    cfg: &ArrayConfig<f64>,
    count: usize,
    seed: u64,
    opts: &GenerationOptions,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidInput("dataset count must be >= 1".into()));
    }
    opts.bounds.validate()?;
    if !(opts.split_fraction > 0.0 && opts.split_fraction <= 1.0) {
        return Err(Error::Configuration(format!(
            "split_fraction must be in (0, 1], got {}",
            opts.split_fraction
        )));
    }
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            generate_sample(cfg, seed, i as u64, opts).map_err(|e| Error::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = cfg.num_elements();
    let k = opts.num_users;
    let mut features = Vec::with_capacity(count * 2 * k);
    let mut phase_labels = Vec::with_capacity(count * n);
    let mut magnitude_labels_db = Vec::with_capacity(count * n);
    let mut clamped = 0;
    for s in &samples {
        features.extend(s.features.values().iter().map(|&v| v as f32));
        phase_labels.extend(s.labels.phase().iter().map(|&v| v as f32));
        magnitude_labels_db.extend(s.labels.magnitude_db().iter().map(|&v| v as f32));
        clamped += s.labels.clamped_entries();
    }
    Ok(Dataset {
        array_config: *cfg,
        num_users: k,
        seed,
        bounds: opts.bounds,
        split_fraction: opts.split_fraction,
        canonical_order: opts.canonical_order,
        clamped_label_entries: clamped,
        count,
        features,
        phase_labels,
        magnitude_labels_db,
    })
}

/// Training corpus stored as flat row-major `f32` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub array_config: ArrayConfig<f64>,
    pub num_users: usize,
    pub seed: u64,
    pub bounds: SamplingBounds,
    pub split_fraction: f64,
    pub canonical_order: bool,
    pub clamped_label_entries: usize,
    count: usize,
    features: Vec<f32>,
    phase_labels: Vec<f32>,
    magnitude_labels_db: Vec<f32>,
}

impl Dataset {
    #[inline]
    pub fn len(&self) -> usize {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.array_config.num_elements()
    }

    #[inline]
    pub fn feature_width(&self) -> usize {
        2 * self.num_users
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn phase_labels(&self) -> &[f32] {
        &self.phase_labels
    }

    pub fn magnitude_labels_db(&self) -> &[f32] {
        &self.magnitude_labels_db
    }

    pub fn feature_row(&self, i: usize) -> &[f32] {
        let w = self.feature_width();
        &self.features[i * w..(i + 1) * w]
    }

    pub fn phase_row(&self, i: usize) -> &[f32] {
        let n = self.num_elements();
        &self.phase_labels[i * n..(i + 1) * n]
    }

    pub fn magnitude_row(&self, i: usize) -> &[f32] {
        let n = self.num_elements();
        &self.magnitude_labels_db[i * n..(i + 1) * n]
    }

    /// Labels that train the network of the given kind.
    pub fn labels(&self, kind: LossKind) -> &[f32] {
        match kind {
            LossKind::PhaseCmae => &self.phase_labels,
            LossKind::MagnitudeRmse => &self.magnitude_labels_db,
        }
    }

    /// Deterministic shuffle by the recorded seed; first `split_fraction`
    /// of the permutation is the training split, the rest the test split.
    pub fn split_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.count).collect();
        let mut rng = sample_rng(self.seed, u64::MAX);
        rand::seq::SliceRandom::shuffle(idx.as_mut_slice(), &mut rng);
        let n_train = ((self.count as f64) * self.split_fraction).round() as usize;
        let test = idx.split_off(n_train.min(self.count));
        (idx, test)
    }

    /// Gathers `(inputs, targets)` matrices for the given rows.
    pub fn gather(&self, rows: &[usize], kind: LossKind) -> (Array2<f32>, Array2<f32>) {
        let w = self.feature_width();
        let n = self.num_elements();
        let labels = self.labels(kind);
        let mut x = Array2::zeros((rows.len(), w));
        let mut y = Array2::zeros((rows.len(), n));
        for (r, &i) in rows.iter().enumerate() {
            x.row_mut(r)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(self.feature_row(i));
            y.row_mut(r)
                .as_slice_mut()
                .unwrap()
                .copy_from_slice(&labels[i * n..(i + 1) * n]);
        }
        (x, y)
    }

    pub(crate) fn from_parts(manifest: &DatasetManifest, features: Vec<f32>, phase_labels: Vec<f32>, magnitude_labels_db: Vec<f32>) -> Self {
        Self {
            array_config: manifest.array_config,
            num_users: manifest.k,
            seed: manifest.seed,
            bounds: manifest.bounds,
            split_fraction: manifest.split_fraction,
            canonical_order: manifest.canonical_order,
            clamped_label_entries: manifest.clamped_label_entries,
            count: manifest.count,
            features,
            phase_labels,
            magnitude_labels_db,
        }
    }
}
