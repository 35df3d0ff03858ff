//! Beam patterns, NCBF gain and null-placement accuracy under the
//! spherical-wavefront model.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array_model::{ArrayConfig, PolarPosition};
use crate::beamformer::{unit_power_normalize, NcbfWeights};
use crate::datagen::{make_features, sample_rng, sample_scenario, SamplingBounds, Scenario};
use crate::neural::DualEstimator;
use crate::{Error, Real, Result};

/// Ceiling applied to NCBF gains; reached by exact nulls.
pub const NCBF_GAIN_CLAMP_DB: f64 = 300.0;
/// Floor applied when a pattern gain is exactly zero.
pub const MIN_PATTERN_DB: f64 = -300.0;

pub const DEFAULT_NULL_HALFWIDTH_DEG: f64 = 5.0;
pub const DEFAULT_NULL_STEP_DEG: f64 = 0.01;
pub const DEFAULT_RADIAL_HALFWIDTH_M: f64 = 0.5;
pub const DEFAULT_RADIAL_STEP_M: f64 = 0.001;

/// `|w^T h'(p)|^2`.
pub fn beam_gain<T: Real>(w: &NcbfWeights<T>, cfg: &ArrayConfig<T>, p: &PolarPosition<T>) -> Result<T> {
    gain_at(w, cfg, p.angle_theta(), p.range_r())
}

fn gain_at<T: Real>(w: &NcbfWeights<T>, cfg: &ArrayConfig<T>, theta: T, range: T) -> Result<T> {
    if w.len() != cfg.num_elements() {
        return Err(Error::Shape(format!(
            "{} weights for {} elements",
            w.len(),
            cfg.num_elements()
        )));
    }
    Ok(w.response(&cfg.response_at(theta, range)).norm_sqr())
}

fn to_db(gain: f64) -> f64 {
    if gain > 0.0 {
        10.0 * gain.log10()
    } else {
        MIN_PATTERN_DB
    }
}

/// Ratio in dB of the gain at `desired` to the gain at `interferer`, capped
/// at [`NCBF_GAIN_CLAMP_DB`].
pub fn ncbf_gain(
    w: &NcbfWeights<f64>,
    cfg: &ArrayConfig<f64>,
    desired: &PolarPosition<f64>,
    interferer: &PolarPosition<f64>,
) -> Result<f64> {
    let gd = beam_gain(w, cfg, desired)?;
    if !(gd > 0.0) {
        return Err(Error::DegenerateWeights("zero gain at the desired user".into()));
    }
    let gi = beam_gain(w, cfg, interferer)?;
    let ratio = gd / gi;
    if gi == 0.0 || !ratio.is_finite() {
        return Ok(NCBF_GAIN_CLAMP_DB);
    }
    Ok((10.0 * ratio.log10()).min(NCBF_GAIN_CLAMP_DB))
}

pub fn is_clamped(gain_db: f64) -> bool {
    gain_db >= NCBF_GAIN_CLAMP_DB
}

/// Inclusive evaluation lattice; angles in radians, ranges in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    angles: Vec<f64>,
    ranges: Vec<f64>,
}

fn inclusive_steps(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && lo.is_finite() && hi.is_finite() && lo <= hi) {
        return Err(Error::Configuration(format!(
            "invalid axis [{lo}, {hi}] step {step}"
        )));
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

impl PolarGrid {
    /// Angles in degrees, ranges in meters.
    pub fn stepped(angle_deg: (f64, f64, f64), range_m: (f64, f64, f64)) -> Result<Self> {
        let angles = inclusive_steps(angle_deg.0, angle_deg.1, angle_deg.2)?
            .into_iter()
            .map(f64::to_radians)
            .collect();
        let ranges = inclusive_steps(range_m.0, range_m.1, range_m.2)?;
        Self::from_samples(angles, ranges)
    }

    /// Explicit sample lists (radians, meters).
    pub fn from_samples(angles: Vec<f64>, ranges: Vec<f64>) -> Result<Self> {
        if angles.is_empty() || ranges.is_empty() {
            return Err(Error::Configuration("grid needs at least one sample per axis".into()));
        }
        if angles.iter().any(|a| !a.is_finite()) || ranges.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Configuration("grid samples must be finite with positive ranges".into()));
        }
        Ok(Self { angles, ranges })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn ranges(&self) -> &[f64] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.angles.len() * self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Gains in dB over a [`PolarGrid`], indexed `[range][angle]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamPattern {
    pub grid: PolarGrid,
    pub gain_db: Vec<Vec<f64>>,
}

impl BeamPattern {
    /// `(angle_rad, range_m, gain_db)` of the largest gain.
    pub fn argmax(&self) -> (f64, f64, f64) {
        self.extreme(|a, b| a > b)
    }

    /// `(angle_rad, range_m, gain_db)` of the smallest gain.
    pub fn argmin(&self) -> (f64, f64, f64) {
        self.extreme(|a, b| a < b)
    }

    fn extreme(&self, better: impl Fn(f64, f64) -> bool) -> (f64, f64, f64) {
        let mut best = (self.grid.angles[0], self.grid.ranges[0], self.gain_db[0][0]);
        for (ri, row) in self.gain_db.iter().enumerate() {
            for (ai, &g) in row.iter().enumerate() {
                if better(g, best.2) {
                    best = (self.grid.angles[ai], self.grid.ranges[ri], g);
                }
            }
        }
        best
    }

    /// CSV `theta_deg,range_m,gain_db` with gains shifted by `-reference_db`.
    pub fn write_csv<W: Write>(&self, mut out: W, reference_db: f64) -> std::io::Result<()> {
        writeln!(out, "theta_deg,range_m,gain_db")?;
        for (ri, row) in self.gain_db.iter().enumerate() {
            for (ai, g) in row.iter().enumerate() {
                writeln!(
                    out,
                    "{},{},{}",
                    (self.grid.angles[ai].to_degrees() * 1e9).round() / 1e9,
                    self.grid.ranges[ri],
                    g - reference_db
                )?;
            }
        }
        Ok(())
    }
}

/// `10 log10 |w^T h'|^2` at every lattice point.
pub fn beam_pattern(w: &NcbfWeights<f64>, cfg: &ArrayConfig<f64>, grid: &PolarGrid) -> Result<BeamPattern> {
    let gain_db = grid
        .ranges
        .par_iter()
        .map(|&r| {
            grid.angles
                .iter()
                .map(|&a| gain_at(w, cfg, a, r).map(to_db))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BeamPattern {
        grid: grid.clone(),
        gain_db,
    })
}

/// Outcome of a one-dimensional null search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NullSearch {
    /// Absolute offset from the interferer (degrees or meters).
    pub deviation: f64,
    /// Refined null coordinate (degrees or meters).
    pub location: f64,
    pub gain_db: f64,
    /// The minimum fell on the first or last scan sample, so no interior null
    /// was found in the window.
    pub at_boundary: bool,
}

fn scan_minimum(center: f64, halfwidth: f64, step: f64, gain: impl Fn(f64) -> Result<f64>) -> Result<NullSearch> {
    if !(halfwidth > 0.0 && step > 0.0 && halfwidth.is_finite() && step.is_finite()) {
        return Err(Error::Configuration(format!(
            "null search needs positive halfwidth and step, got {halfwidth} and {step}"
        )));
    }
    let half = (halfwidth / step + 1e-9).floor() as i64;
    let xs: Vec<f64> = (-half..=half).map(|k| center + k as f64 * step).collect();
    let gs = xs.iter().map(|&x| gain(x)).collect::<Result<Vec<_>>>()?;
    let (imin, &gmin) = gs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("scan has samples");
    let at_boundary = imin == 0 || imin == gs.len() - 1;
    let mut location = xs[imin];
    if !at_boundary {
        let (g0, g1, g2) = (gs[imin - 1], gmin, gs[imin + 1]);
        let curvature = g0 - 2.0 * g1 + g2;
        if curvature > 0.0 {
            let shift = 0.5 * (g0 - g2) / curvature;
            location += shift.clamp(-0.5, 0.5) * step;
        }
    }
    Ok(NullSearch {
        deviation: (location - center).abs(),
        location,
        gain_db: to_db(gmin),
        at_boundary,
    })
}

/// Searches the angular cut at the interferer's range for the gain minimum;
/// result in degrees.
pub fn null_angular_deviation(
    w: &NcbfWeights<f64>,
    cfg: &ArrayConfig<f64>,
    interferer: &PolarPosition<f64>,
    halfwidth_deg: f64,
    step_deg: f64,
) -> Result<NullSearch> {
    let r = interferer.range_r();
    scan_minimum(interferer.angle_deg(), halfwidth_deg, step_deg, |deg| {
        gain_at(w, cfg, deg.to_radians(), r)
    })
}

/// Searches the radial line through the interferer for the gain minimum;
/// result in meters. Samples at non-positive range are skipped by clipping
/// the window.
pub fn null_radial_deviation(
    w: &NcbfWeights<f64>,
    cfg: &ArrayConfig<f64>,
    interferer: &PolarPosition<f64>,
    halfwidth_m: f64,
    step_m: f64,
) -> Result<NullSearch> {
    let r = interferer.range_r();
    let theta = interferer.angle_theta();
    let halfwidth = halfwidth_m.min(r - step_m).max(step_m);
    scan_minimum(r, halfwidth, step_m, |range| gain_at(w, cfg, theta, range))
}

/// Anything that maps a feature row to `(phase, magnitude_db)` labels.
pub trait WeightPredictor: Sync {
    fn num_users(&self) -> usize;
    fn num_elements(&self) -> usize;
    fn predict_labels(&self, features: &[f32]) -> Result<(Vec<f32>, Vec<f32>)>;
}

impl WeightPredictor for DualEstimator {
    fn num_users(&self) -> usize {
        DualEstimator::num_users(self)
    }

    fn num_elements(&self) -> usize {
        DualEstimator::num_elements(self)
    }

    fn predict_labels(&self, features: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
        DualEstimator::predict_labels(self, features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub num_scenarios: usize,
    pub seed: u64,
    pub bounds: SamplingBounds,
    pub canonical_order: bool,
    pub null_halfwidth_deg: f64,
    pub null_step_deg: f64,
    pub radial_halfwidth_m: f64,
    pub radial_step_m: f64,
}

impl EvalOptions {
    pub fn new(num_scenarios: usize, seed: u64) -> Self {
        Self {
            num_scenarios,
            seed,
            bounds: SamplingBounds::default(),
            canonical_order: false,
            null_halfwidth_deg: DEFAULT_NULL_HALFWIDTH_DEG,
            null_step_deg: DEFAULT_NULL_STEP_DEG,
            radial_halfwidth_m: DEFAULT_RADIAL_HALFWIDTH_M,
            radial_step_m: DEFAULT_RADIAL_STEP_M,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfererMetrics {
    pub ncbf_gain_db: f64,
    pub clamped: bool,
    pub null_deviation_deg: f64,
    pub null_at_boundary: bool,
    pub radial_deviation_m: f64,
    pub radial_at_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMetrics {
    /// Gain of the unit-power weights at the desired user.
    pub gain_at_desired_db: f64,
    pub interferers: Vec<InterfererMetrics>,
}

/// All metrics for one weight vector in one scenario.
pub fn weight_metrics(
    w: &NcbfWeights<f64>,
    cfg: &ArrayConfig<f64>,
    scenario: &Scenario,
    opts: &EvalOptions,
) -> Result<WeightMetrics> {
    let w = unit_power_normalize(w)?;
    let desired = scenario.desired();
    let gain_at_desired_db = to_db(beam_gain(&w, cfg, desired)?);
    let interferers = scenario
        .interferers()
        .iter()
        .map(|p| {
            let g = ncbf_gain(&w, cfg, desired, p)?;
            let ang = null_angular_deviation(&w, cfg, p, opts.null_halfwidth_deg, opts.null_step_deg)?;
            let rad = null_radial_deviation(&w, cfg, p, opts.radial_halfwidth_m, opts.radial_step_m)?;
            Ok(InterfererMetrics {
                ncbf_gain_db: g,
                clamped: is_clamped(g),
                null_deviation_deg: ang.deviation,
                null_at_boundary: ang.at_boundary,
                radial_deviation_m: rad.deviation,
                radial_at_boundary: rad.at_boundary,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WeightMetrics {
        gain_at_desired_db,
        interferers,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub index: usize,
    pub scenario: Scenario,
    pub dnn: WeightMetrics,
    pub lcmv: WeightMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let mut count = 0usize;
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            count += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        (count > 0).then(|| Self {
            mean: sum / count as f64,
            min,
            max,
            count,
        })
    }
}

/// Aggregates over every (scenario, interferer) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub ncbf_gain_db: Option<Stats>,
    /// Same, over non-clamped entries only.
    pub ncbf_gain_db_unclamped: Option<Stats>,
    pub clamped_count: usize,
    pub null_deviation_deg: Option<Stats>,
    pub null_boundary_count: usize,
    pub radial_deviation_m: Option<Stats>,
    pub gain_at_desired_db: Option<Stats>,
}

impl MetricSummary {
    pub fn of<'a>(metrics: impl Iterator<Item = &'a WeightMetrics> + Clone) -> Self {
        let inter = || metrics.clone().flat_map(|m| m.interferers.iter());
        Self {
            ncbf_gain_db: Stats::of(inter().map(|i| i.ncbf_gain_db)),
            ncbf_gain_db_unclamped: Stats::of(inter().filter(|i| !i.clamped).map(|i| i.ncbf_gain_db)),
            clamped_count: inter().filter(|i| i.clamped).count(),
            null_deviation_deg: Stats::of(inter().map(|i| i.null_deviation_deg)),
            null_boundary_count: inter().filter(|i| i.null_at_boundary).count(),
            radial_deviation_m: Stats::of(inter().map(|i| i.radial_deviation_m)),
            gain_at_desired_db: Stats::of(metrics.clone().map(|m| m.gain_at_desired_db)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFailure {
    pub index: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub options: EvalOptions,
    pub records: Vec<ScenarioRecord>,
    pub failures: Vec<ScenarioFailure>,
    pub dnn: MetricSummary,
    pub lcmv: MetricSummary,
}

impl EvalReport {
    pub fn failure_count(&self) -> usize {
        self.failures.len()
    }
}

fn evaluate_scenario<P: WeightPredictor + ?Sized>(
    predictor: &P,
    cfg: &ArrayConfig<f64>,
    opts: &EvalOptions,
    index: usize,
) -> Result<ScenarioRecord> {
    let mut rng = sample_rng(opts.seed, index as u64);
    let mut scenario = sample_scenario(&mut rng, cfg, predictor.num_users(), &opts.bounds)?;
    if opts.canonical_order {
        scenario = scenario.canonicalized();
    }
    let features: Vec<f32> = make_features(&scenario).values().iter().map(|&v| v as f32).collect();
    let (phase, mag) = predictor.predict_labels(&features)?;
    let widen = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
    let w_dnn = crate::neural::reconstruct_weights(&widen(phase), &widen(mag))?;
    let w_lcmv = scenario.lcmv_weights(cfg)?;
    Ok(ScenarioRecord {
        index,
        dnn: weight_metrics(&w_dnn, cfg, &scenario, opts)?,
        lcmv: weight_metrics(&w_lcmv, cfg, &scenario, opts)?,
        scenario,
    })
}

/// Samples fresh scenarios, predicts weights, and scores them next to the
/// LCMV ground truth. Scenario failures are recorded and skipped.
pub fn evaluate_model<P: WeightPredictor + ?Sized>(
    predictor: &P,
    cfg: &ArrayConfig<f64>,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if predictor.num_elements() != cfg.num_elements() {
        return Err(Error::Shape(format!(
            "predictor outputs {} weights for a {}-element array",
            predictor.num_elements(),
            cfg.num_elements()
        )));
    }
    opts.bounds.validate()?;
    let outcomes: Vec<Result<ScenarioRecord>> = (0..opts.num_scenarios)
        .into_par_iter()
        .map(|i| evaluate_scenario(predictor, cfg, opts, i))
        .collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => records.push(r),
            Err(e) => failures.push(ScenarioFailure {
                index,
                error: e.to_string(),
            }),
        }
    }
    Ok(EvalReport {
        options: *opts,
        dnn: MetricSummary::of(records.iter().map(|r| &r.dnn)),
        lcmv: MetricSummary::of(records.iter().map(|r| &r.lcmv)),
        records,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beamformer::{build_constraints, lcmv_weights, mdb_weights};
    use crate::datagen::make_labels;
    use num_complex::Complex;

    fn cfg() -> ArrayConfig<f64> {
        ArrayConfig::reference_ula()
    }

    fn pos(deg: f64, r: f64) -> PolarPosition<f64> {
        PolarPosition::from_degrees(deg, r).unwrap()
    }

    fn figure_scenario() -> Scenario {
        Scenario::new(pos(8.0, 1.6), vec![pos(-8.0, 0.8), pos(-16.0, 4.9)])
    }

    fn lcmv(s: &Scenario) -> NcbfWeights<f64> {
        let c = build_constraints(&cfg(), &s.positions(), 0).unwrap();
        lcmv_weights(&c, None).unwrap()
    }

    #[test]
    fn lcmv_gains_at_constraint_points() {
        let s = figure_scenario();
        let w = lcmv(&s);
        assert!((beam_gain(&w, &cfg(), s.desired()).unwrap() - 1.0).abs() < 1e-12);
        for p in s.interferers() {
            assert!(beam_gain(&w, &cfg(), p).unwrap() < 1e-16);
        }
    }

    #[test]
    fn gain_scales_with_weight_scale() {
        let s = figure_scenario();
        let w = lcmv(&s);
        let p = pos(20.0, 3.0);
        let g = beam_gain(&w, &cfg(), &p).unwrap();
        let rotated = w.scaled(Complex::from_polar(1.0, 1.234));
        assert!((beam_gain(&rotated, &cfg(), &p).unwrap() - g).abs() < 1e-12 * g.max(1.0));
        let scaled = w.scaled(Complex::new(0.0, 3.0));
        assert!((beam_gain(&scaled, &cfg(), &p).unwrap() - 9.0 * g).abs() < 1e-10 * g.max(1.0));
    }

    #[test]
    fn mdb_focuses_in_range() {
        let c = cfg();
        let focus = pos(10.0, 1.5);
        let w = mdb_weights(&c.steering_vector(&focus)).unwrap();
        let far = pos(10.0, 4.5);
        assert!(beam_gain(&w, &c, &focus).unwrap() > beam_gain(&w, &c, &far).unwrap());
    }

    #[test]
    fn length_mismatch_is_error() {
        let w = NcbfWeights::from_entries(vec![Complex::new(1.0, 0.0); 3]);
        assert!(beam_gain(&w, &cfg(), &pos(0.0, 1.0)).is_err());
    }

    #[test]
    fn ncbf_gain_cases() {
        let s = figure_scenario();
        let w = lcmv(&s);
        assert!(ncbf_gain(&w, &cfg(), s.desired(), &s.interferers()[0]).unwrap() > 150.0);
        let p = pos(3.0, 2.0);
        assert_eq!(ncbf_gain(&w, &cfg(), &p, &p).unwrap(), 0.0);
    }

    #[test]
    fn exact_null_clamps() {
        let two = ArrayConfig::new(2, 0.04, 3.5e9).unwrap();
        let w = NcbfWeights::from_entries(vec![Complex::new(1.0, 0.0), Complex::new(-1.0, 0.0)]);
        let g = ncbf_gain(&w, &two, &pos(30.0, 1.0), &pos(0.0, 1.0)).unwrap();
        assert_eq!(g, NCBF_GAIN_CLAMP_DB);
        assert!(is_clamped(g));
    }

    #[test]
    fn zero_desired_gain_is_degenerate() {
        let w = NcbfWeights::from_entries(vec![Complex::new(0.0, 0.0); 24]);
        assert!(matches!(
            ncbf_gain(&w, &cfg(), &pos(0.0, 1.0), &pos(5.0, 1.0)),
            Err(Error::DegenerateWeights(_))
        ));
    }

    #[test]
    fn lcmv_beats_mdb() {
        let s = figure_scenario();
        let c = cfg();
        let wl = lcmv(&s);
        let wm = mdb_weights(&c.steering_vector(s.desired())).unwrap();
        for p in s.interferers() {
            assert!(ncbf_gain(&wl, &c, s.desired(), p).unwrap() >= ncbf_gain(&wm, &c, s.desired(), p).unwrap());
        }
    }

    #[test]
    fn single_point_grid() {
        let s = figure_scenario();
        let w = lcmv(&s);
        let grid = PolarGrid::stepped((8.0, 8.0, 1.0), (1.6, 1.6, 0.1)).unwrap();
        let pat = beam_pattern(&w, &cfg(), &grid).unwrap();
        assert_eq!(grid.len(), 1);
        let g = beam_gain(&w, &cfg(), s.desired()).unwrap();
        assert!((pat.gain_db[0][0] - 10.0 * g.log10()).abs() < 1e-9);
    }

    #[test]
    fn invalid_grids() {
        assert!(PolarGrid::stepped((0.0, 1.0, 0.0), (1.0, 2.0, 0.1)).is_err());
        assert!(PolarGrid::stepped((1.0, 0.0, 0.1), (1.0, 2.0, 0.1)).is_err());
        assert!(PolarGrid::from_samples(vec![0.0], vec![-1.0]).is_err());
    }

    #[test]
    fn pattern_cut_finds_null_and_peak() {
        let s = figure_scenario();
        let w = lcmv(&s);
        let null_cut = PolarGrid::stepped((-20.0, 0.0, 0.05), (0.8, 0.8, 1.0)).unwrap();
        let (a, _, _) = beam_pattern(&w, &cfg(), &null_cut).unwrap().argmin();
        assert!((a.to_degrees() + 8.0).abs() < 0.5);
        let cut = PolarGrid::stepped((-90.0, 90.0, 0.1), (1.6, 1.6, 1.0)).unwrap();
        let (a, _, _) = beam_pattern(&w, &cfg(), &cut).unwrap().argmax();
        assert!((a.to_degrees() - 8.0).abs() < 1.0, "peak at {}", a.to_degrees());
    }

    #[test]
    fn csv_is_relative() {
        let w = lcmv(&figure_scenario());
        let grid = PolarGrid::stepped((8.0, 9.0, 1.0), (1.6, 1.6, 1.0)).unwrap();
        let pat = beam_pattern(&w, &cfg(), &grid).unwrap();
        let mut buf = Vec::new();
        pat.write_csv(&mut buf, pat.gain_db[0][0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta_deg,range_m,gain_db");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].ends_with(",0"));
    }

    #[test]
    fn lcmv_null_is_on_target() {
        let s = figure_scenario();
        let w = lcmv(&s);
        for p in s.interferers() {
            let n = null_angular_deviation(&w, &cfg(), p, 5.0, 0.01).unwrap();
            assert!(!n.at_boundary);
            assert!(n.deviation < 0.01, "{n:?}");
            let r = null_radial_deviation(&w, &cfg(), p, 0.5, 0.001).unwrap();
            assert!(r.deviation < 1e-3, "{r:?}");
        }
    }

    #[test]
    fn parabolic_refinement_recovers_offgrid_minimum() {
        let n = scan_minimum(0.0, 1.0, 0.1, |x| Ok((x - 0.0372) * (x - 0.0372))).unwrap();
        assert!((n.location - 0.0372).abs() < 1e-12);
        assert!(!n.at_boundary);
    }

    #[test]
    fn no_null_is_flagged_at_boundary() {
        let n = scan_minimum(0.0, 1.0, 0.1, |x| Ok(x + 2.0)).unwrap();
        assert!(n.at_boundary);
        assert!((n.deviation - 1.0).abs() < 1e-12);
        assert!(scan_minimum(0.0, 0.0, 0.1, |x| Ok(x)).is_err());
    }

    #[test]
    fn mdb_has_no_steered_null() {
        let s = figure_scenario();
        let c = cfg();
        let w = mdb_weights(&c.steering_vector(s.desired())).unwrap();
        let n = null_angular_deviation(&w, &c, &s.interferers()[0], 5.0, 0.01).unwrap();
        assert!(n.at_boundary || n.deviation > 0.1, "{n:?}");
    }

    struct Oracle;

    impl WeightPredictor for Oracle {
        fn num_users(&self) -> usize {
            3
        }
        fn num_elements(&self) -> usize {
            24
        }
        fn predict_labels(&self, features: &[f32]) -> Result<(Vec<f32>, Vec<f32>)> {
            let f: Vec<f64> = features.iter().map(|&v| f64::from(v)).collect();
            let s = crate::datagen::scenario_from_features(&f)?;
            let l = make_labels(&s.lcmv_weights(&cfg())?)?;
            let narrow = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<_>>();
            Ok((narrow(l.phase()), narrow(l.magnitude_db())))
        }
    }

    #[test]
    fn zero_scenarios_is_empty_report() {
        let r = evaluate_model(&Oracle, &cfg(), &EvalOptions::new(0, 1)).unwrap();
        assert!(r.records.is_empty());
        assert_eq!(r.failure_count(), 0);
        assert!(r.dnn.ncbf_gain_db.is_none());
    }

    #[test]
    fn oracle_predictor_matches_lcmv() {
        let r = evaluate_model(&Oracle, &cfg(), &EvalOptions::new(12, 5)).unwrap();
        assert_eq!(r.records.len(), 12);
        for rec in &r.records {
            assert!((rec.dnn.gain_at_desired_db - rec.lcmv.gain_at_desired_db).abs() < 1e-3);
            for (d, l) in rec.dnn.interferers.iter().zip(&rec.lcmv.interferers) {
                assert!((d.null_deviation_deg - l.null_deviation_deg).abs() < 0.05);
                // f32 label rounding limits the achievable null depth
                assert!(d.ncbf_gain_db > 60.0, "{d:?}");
            }
        }
        assert!(r.lcmv.null_deviation_deg.unwrap().max < 0.01);
    }

    #[test]
    fn stats_aggregate() {
        let s = Stats::of([1.0, 3.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.count), (2.0, 1.0, 3.0, 3));
        assert!(Stats::of(std::iter::empty()).is_none());
    }
}
