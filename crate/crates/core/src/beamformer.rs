//! Closed-form beam focusing weights: maximum-directivity (MDB) and the
//! LCMV nulling-control beamformer.
//!
//! Received gain at `p` is `w^T h'(p)`. Constraint columns are therefore
//! `conj(h'(p_k))`, which makes `C^H w` the vector of received gains.

use num_complex::Complex;

use crate::array_model::{ArrayConfig, PolarPosition, SteeringVector};
use crate::linalg::{condition_one_norm, CMatrix, Cholesky};
use crate::{Error, Real, Result};

/// Scenarios whose Gram matrix `C^H R^-1 C` has a 1-norm condition estimate
/// above this are rejected as degenerate.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Wraps a phase into `[0, 2 pi)`.
#[inline]
pub fn wrap_phase<T: Real>(x: T) -> T {
    let tau = T::TAU();
    let mut r = x % tau;
    if r < T::zero() {
        r += tau;
    }
    // x slightly below zero can round up to exactly tau
    if r >= tau {
        r = T::zero();
    }
    r
}

/// Complex weight vector `w = a ⊙ exp(j phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NcbfWeights<T> {
    entries: Vec<Complex<T>>,
}

impl<T: Real> NcbfWeights<T> {
    pub fn from_entries(entries: Vec<Complex<T>>) -> Self {
        Self { entries }
    }

    /// Builds `a ⊙ exp(j phi)`.
    pub fn from_polar(magnitudes: &[T], phases: &[T]) -> Self {
        assert_eq!(magnitudes.len(), phases.len(), "magnitude/phase length mismatch");
        Self {
            entries: magnitudes
                .iter()
                .zip(phases)
                .map(|(&a, &p)| Complex::from_polar(a, p))
                .collect(),
        }
    }

    #[inline]
    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `sum |w_n|^2`.
    pub fn power(&self) -> T {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn magnitudes(&self) -> Vec<T> {
        self.entries.iter().map(|z| z.norm()).collect()
    }

    /// Phases wrapped to `[0, 2 pi)`; zero entries get phase 0.
    pub fn phases(&self) -> Vec<T> {
        self.entries
            .iter()
            .map(|z| {
                if z.re == T::zero() && z.im == T::zero() {
                    T::zero()
                } else {
                    wrap_phase(z.arg())
                }
            })
            .collect()
    }

    /// Splits into magnitudes and wrapped phases.
    pub fn decompose(&self) -> (Vec<T>, Vec<T>) {
        (self.magnitudes(), self.phases())
    }

    pub fn scaled(&self, c: Complex<T>) -> Self {
        Self {
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    /// Received gain amplitude `w^T h`.
    pub fn response(&self, h: &[Complex<T>]) -> Complex<T> {
        assert_eq!(self.entries.len(), h.len(), "weight/channel length mismatch");
        self.entries
            .iter()
            .zip(h)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (w, h)| acc + w * h)
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.entries
    }
}

/// Rescales `w` to unit power, leaving phases untouched.
pub fn unit_power_normalize<T: Real>(w: &NcbfWeights<T>) -> Result<NcbfWeights<T>> {
    let power = w.power();
    if !(power > T::zero()) || !power.is_finite() {
        return Err(Error::InvalidInput(
            "cannot normalize a zero or non-finite weight vector".into(),
        ));
    }
    let s = T::one() / power.sqrt();
    Ok(NcbfWeights {
        entries: w.entries.iter().map(|z| z * s).collect(),
    })
}

/// Maximum-directivity beamformer: `conj(h')`, normalized to unit power.
pub fn mdb_weights<T: Real>(h: &SteeringVector<T>) -> Result<NcbfWeights<T>> {
    let w = NcbfWeights::from_entries(h.entries().iter().map(|z| z.conj()).collect());
    unit_power_normalize(&w)
}

/// Constraint set `C^H w = d` for one desired user and its interferers.
#[derive(Debug, Clone)]
pub struct ScenarioConstraints<T> {
    matrix: CMatrix<T>,
    gains: Vec<T>,
    desired_index: usize,
    positions: Vec<PolarPosition<T>>,
}

impl<T: Real> ScenarioConstraints<T> {
    /// `N x K` matrix with columns `conj(h'(p_k))`.
    #[inline]
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    /// Gain vector `d`: 1 at the desired user, 0 elsewhere.
    #[inline]
    pub fn gains(&self) -> &[T] {
        &self.gains
    }

    /// 0-based index of the desired user.
    #[inline]
    pub fn desired_index(&self) -> usize {
        self.desired_index
    }

    #[inline]
    pub fn positions(&self) -> &[PolarPosition<T>] {
        &self.positions
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.gains.len()
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.matrix.rows()
    }

    /// `C^H w - d`, the constraint residual.
    pub fn residual(&self, w: &NcbfWeights<T>) -> Vec<Complex<T>> {
        self.matrix
            .conj_transpose_mul_vec(w.entries())
            .into_iter()
            .zip(&self.gains)
            .map(|(g, &d)| g - Complex::new(d, T::zero()))
            .collect()
    }
}

/// Assembles `C` and `d` for users at `positions`; `desired_index` is 0-based.
pub fn build_constraints<T: Real>(
    cfg: &ArrayConfig<T>,
    positions: &[PolarPosition<T>],
    desired_index: usize,
) -> Result<ScenarioConstraints<T>> {
    let k = positions.len();
    if k == 0 {
        return Err(Error::InvalidInput("at least one user position is required".into()));
    }
    if desired_index >= k {
        return Err(Error::InvalidInput(format!(
            "desired index {desired_index} out of range for {k} users"
        )));
    }
    if k > cfg.num_elements() {
        return Err(Error::OverConstrained {
            users: k,
            elements: cfg.num_elements(),
        });
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if positions[i] == positions[j] {
                return Err(Error::SingularConstraints(format!(
                    "users {i} and {j} share the same position"
                )));
            }
        }
    }
    let columns: Vec<Vec<Complex<T>>> = positions
        .iter()
        .map(|p| {
            cfg.steering_vector(p)
                .into_entries()
                .into_iter()
                .map(|z| z.conj())
                .collect()
        })
        .collect();
    let mut gains = vec![T::zero(); k];
    gains[desired_index] = T::one();
    Ok(ScenarioConstraints {
        matrix: CMatrix::from_columns(&columns),
        gains,
        desired_index,
        positions: positions.to_vec(),
    })
}

/// Interference-plus-noise covariance `C C^H + sigma^2 I` in the weight
/// convention used here. For the LCMV problem it yields the same weights as
/// the identity, but exercises the full `O(N^3)` solve path.
pub fn signal_covariance<T: Real>(constraints: &ScenarioConstraints<T>, noise_power: T) -> CMatrix<T> {
    let c = constraints.matrix();
    let n = c.rows();
    let mut r = CMatrix::from_fn(n, n, |i, j| {
        let mut acc = Complex::new(T::zero(), T::zero());
        for k in 0..c.cols() {
            acc += c[(i, k)] * c[(j, k)].conj();
        }
        acc
    });
    for i in 0..n {
        r[(i, i)] += Complex::new(noise_power, T::zero());
    }
    r
}

struct Whitened<T> {
    /// `R^-1 C`
    solved: CMatrix<T>,
    gram: CMatrix<T>,
    gram_chol: Cholesky<T>,
    condition: T,
}

fn whiten<T: Real>(
    constraints: &ScenarioConstraints<T>,
    covariance: Option<&CMatrix<T>>,
) -> Result<Whitened<T>> {
    let c = constraints.matrix();
    let solved = match covariance {
        None => c.clone(),
        Some(r) => {
            let n = c.rows();
            if r.rows() != n || r.cols() != n {
                return Err(Error::Shape(format!(
                    "covariance is {}x{}, expected {n}x{n}",
                    r.rows(),
                    r.cols()
                )));
            }
            let tol = T::lit(1e-10) * r.one_norm().max(T::one());
            if !r.is_hermitian(tol) {
                return Err(Error::InvalidInput("covariance is not Hermitian".into()));
            }
            let chol = Cholesky::factor(r).map_err(|_| {
                Error::InvalidInput("covariance is not positive definite".into())
            })?;
            chol.solve_matrix(c)
        }
    };
    let gram = c.conj_transpose_mul(&solved);
    let limit = CONDITION_LIMIT;
    let gram_chol = Cholesky::factor(&gram).map_err(|_| Error::DegenerateScenario {
        condition: f64::INFINITY,
        limit,
    })?;
    let condition = condition_one_norm(&gram, &gram_chol);
    let cond = condition.as_f64();
    if !cond.is_finite() || cond > limit {
        return Err(Error::DegenerateScenario {
            condition: cond,
            limit,
        });
    }
    Ok(Whitened {
        solved,
        gram,
        gram_chol,
        condition,
    })
}

/// Condition estimate of `C^H R^-1 C`; errors exactly when [`lcmv_weights`]
/// would reject the scenario as degenerate.
pub fn constraint_condition<T: Real>(
    constraints: &ScenarioConstraints<T>,
    covariance: Option<&CMatrix<T>>,
) -> Result<T> {
    whiten(constraints, covariance).map(|w| w.condition)
}

/// LCMV weights `R^-1 C (C^H R^-1 C)^-1 d` via Cholesky solves.
///
/// `covariance = None` means `R = I`. The result is not power-normalized: the
/// constraints fix its scale.
pub fn lcmv_weights<T: Real>(
    constraints: &ScenarioConstraints<T>,
    covariance: Option<&CMatrix<T>>,
) -> Result<NcbfWeights<T>> {
    let Whitened {
        solved,
        gram,
        gram_chol,
        ..
    } = whiten(constraints, covariance)?;
    debug_assert_eq!(gram.rows(), constraints.num_users());
    let d: Vec<Complex<T>> = constraints
        .gains()
        .iter()
        .map(|&g| Complex::new(g, T::zero()))
        .collect();
    let y = gram_chol.solve(&d);
    Ok(NcbfWeights::from_entries(solved.mul_vec(&y)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn cfg() -> ArrayConfig<f64> {
        ArrayConfig::reference_ula()
    }

    fn pos(deg: f64, r: f64) -> PolarPosition<f64> {
        PolarPosition::from_degrees(deg, r).unwrap()
    }

    fn random_positions(rng: &mut impl Rng, k: usize) -> Vec<PolarPosition<f64>> {
        (0..k)
            .map(|_| PolarPosition::new(rng.random_range(-1.5..1.5), rng.random_range(0.5..6.0)).unwrap())
            .collect()
    }

    #[test]
    fn wrap_phase_range() {
        assert_eq!(wrap_phase(0.0), 0.0);
        assert!((wrap_phase(-PI / 2.0) - 1.5 * PI).abs() < 1e-15);
        assert!((wrap_phase(5.0 * PI) - PI).abs() < 1e-12);
        let w = wrap_phase(-1e-18_f64);
        assert!((0.0..TAU).contains(&w));
        assert_eq!(wrap_phase(TAU), 0.0);
    }

    #[test]
    fn mdb_single_element_has_unit_magnitude() {
        let cfg1 = ArrayConfig::<f64>::new(1, 0.04, 3.5e9).unwrap();
        let w = mdb_weights(&cfg1.steering_vector(&pos(10.0, 2.0))).unwrap();
        assert!((w.entries()[0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mdb_response_is_real_positive() {
        let h = cfg().steering_vector(&pos(-20.0, 1.1));
        let w = mdb_weights(&h).unwrap();
        let g = w.response(h.entries());
        assert!(g.re > 0.0);
        assert!(g.im.abs() < 1e-12 * g.re);
    }

    #[test]
    fn mdb_rejects_zero() {
        let h = SteeringVector::from_entries(vec![Complex::new(0.0, 0.0); 3], 1.0);
        assert!(matches!(mdb_weights(&h), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn constraints_layout() {
        let c = build_constraints(&cfg(), &[pos(8.0, 1.6)], 0).unwrap();
        assert_eq!(c.matrix().cols(), 1);
        assert_eq!(c.gains(), &[1.0]);

        let users = [pos(8.0, 1.6), pos(-8.0, 0.8), pos(-16.0, 4.9)];
        let c = build_constraints(&cfg(), &users, 0).unwrap();
        assert_eq!(c.gains(), &[1.0, 0.0, 0.0]);
        let h2 = cfg().steering_vector(&users[1]);
        for (i, z) in h2.entries().iter().enumerate() {
            assert_eq!(c.matrix()[(i, 1)], z.conj());
        }

        let swapped = [users[0], users[2], users[1]];
        let s = build_constraints(&cfg(), &swapped, 0).unwrap();
        assert_eq!(s.gains(), c.gains());
        assert_eq!(s.matrix().column(1), c.matrix().column(2));
        assert_eq!(s.matrix().column(2), c.matrix().column(1));
    }

    #[test]
    fn constraints_errors() {
        let small = ArrayConfig::<f64>::new(2, 0.04, 3.5e9).unwrap();
        let three = [pos(1.0, 1.0), pos(2.0, 2.0), pos(3.0, 3.0)];
        assert!(matches!(
            build_constraints(&small, &three, 0),
            Err(Error::OverConstrained { users: 3, elements: 2 })
        ));
        assert!(matches!(
            build_constraints(&cfg(), &[pos(5.0, 2.0), pos(5.0, 2.0)], 0),
            Err(Error::SingularConstraints(_))
        ));
        assert!(build_constraints(&cfg(), &three, 3).is_err());
        assert!(build_constraints(&cfg(), &[], 0).is_err());
    }

    #[test]
    fn lcmv_single_user_is_scaled_matched_filter() {
        let p = pos(12.0, 2.2);
        let h = cfg().steering_vector(&p);
        let c = build_constraints(&cfg(), &[p], 0).unwrap();
        let w = lcmv_weights(&c, None).unwrap();
        let hn = h.norm_sqr();
        for (wn, hn_) in w.entries().iter().zip(h.entries()) {
            assert!((wn - hn_.conj() / hn).norm() < 1e-14);
        }
        let g = w.response(h.entries());
        assert!((g - Complex::new(1.0, 0.0)).norm() < 1e-14);

        let mdb = mdb_weights(&h).unwrap();
        let ratio = w.entries()[0] / mdb.entries()[0];
        assert!(ratio.re > 0.0 && ratio.im.abs() < 1e-12 * ratio.re);
        for (a, b) in w.entries().iter().zip(mdb.entries()) {
            assert!((a - b * ratio).norm() < 1e-13);
        }
    }

    #[test]
    fn lcmv_satisfies_constraints_and_nulls() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = cfg();
        for _ in 0..200 {
            let users = random_positions(&mut rng, 3);
            let c = build_constraints(&cfg, &users, 0).unwrap();
            let w = lcmv_weights(&c, None).unwrap();
            let worst = c.residual(&w).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst < 1e-9, "residual {worst}");
            for p in &users[1..] {
                assert!(w.response(cfg.steering_vector(p).entries()).norm() < 1e-8);
            }
        }
    }

    #[test]
    fn lcmv_covariance_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = ArrayConfig::<f64>::new(6, 0.04, 3.5e9).unwrap();
        let users = random_positions(&mut rng, 2);
        let c = build_constraints(&cfg, &users, 1).unwrap();
        let b = CMatrix::from_fn(6, 6, |_, _| Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let mut r = b.conj_transpose_mul(&b);
        for i in 0..6 {
            r[(i, i)] += Complex::new(0.5, 0.0);
        }
        let w1 = lcmv_weights(&c, Some(&r)).unwrap();
        let w2 = lcmv_weights(&c, Some(&r.scaled(37.5))).unwrap();
        for (a, b) in w1.entries().iter().zip(w2.entries()) {
            assert!((a - b).norm() < 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn signal_covariance_matches_identity_solution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = cfg();
        let users = random_positions(&mut rng, 3);
        let c = build_constraints(&cfg, &users, 0).unwrap();
        let r = signal_covariance(&c, 0.1);
        let w_id = lcmv_weights(&c, None).unwrap();
        let w_r = lcmv_weights(&c, Some(&r)).unwrap();
        for (a, b) in w_id.entries().iter().zip(w_r.entries()) {
            assert!((a - b).norm() < 1e-8 * a.norm().max(1e-3));
        }
    }

    #[test]
    fn lcmv_rejects_bad_covariance() {
        let c = build_constraints(&cfg(), &[pos(0.0, 1.0)], 0).unwrap();
        let wrong = CMatrix::<f64>::identity(3);
        assert!(matches!(lcmv_weights(&c, Some(&wrong)), Err(Error::Shape(_))));
        let mut neg = CMatrix::<f64>::identity(24);
        neg[(4, 4)] = Complex::new(-1.0, 0.0);
        assert!(matches!(lcmv_weights(&c, Some(&neg)), Err(Error::InvalidInput(_))));
        let mut nonherm = CMatrix::<f64>::identity(24);
        nonherm[(0, 1)] = Complex::new(0.0, 0.5);
        assert!(matches!(lcmv_weights(&c, Some(&nonherm)), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn near_coincident_users_are_degenerate() {
        let users = [pos(10.0, 2.0), pos(10.0, 2.0 + 1e-12)];
        let c = build_constraints(&cfg(), &users, 0).unwrap();
        assert!(matches!(lcmv_weights(&c, None), Err(Error::DegenerateScenario { .. })));
        assert!(constraint_condition(&c, None).is_err());
    }

    #[test]
    fn normalize_and_decompose() {
        let w = NcbfWeights::from_entries(vec![Complex::new(2.0, 0.0), Complex::new(0.0, 0.0)]);
        let n = unit_power_normalize(&w).unwrap();
        assert_eq!(n.entries(), &[Complex::new(1.0, 0.0), Complex::new(0.0, 0.0)]);
        let again = unit_power_normalize(&n).unwrap();
        assert_eq!(again, n);
        assert!(unit_power_normalize(&NcbfWeights::<f64>::from_entries(vec![Complex::new(0.0, 0.0)])).is_err());

        let (a, p) = NcbfWeights::from_entries(vec![Complex::new(-1.0, 0.0), Complex::new(1.0, -1e-18), Complex::new(0.0, 0.0)]).decompose();
        assert_eq!(a[0], 1.0);
        assert!((p[0] - PI).abs() < 1e-15);
        assert!((0.0..TAU).contains(&p[1]));
        assert!(p[1] < 1e-15 || TAU - p[1] < 1e-15);
        assert_eq!((a[2], p[2]), (0.0, 0.0));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn decompose_round_trip(entries in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..32)) {
                let w = NcbfWeights::from_entries(entries.iter().map(|&(r, i)| Complex::new(r, i)).collect());
                let (a, p) = w.decompose();
                prop_assert!(p.iter().all(|x| (0.0..TAU).contains(x)));
                let back = NcbfWeights::from_polar(&a, &p);
                for (x, y) in w.entries().iter().zip(back.entries()) {
                    prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1e-300) + 1e-300);
                }
            }

            #[test]
            fn normalized_power_is_one(entries in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 24)) {
                let w = NcbfWeights::from_entries(entries.iter().map(|&(r, i)| Complex::new(r, i)).collect());
                prop_assume!(w.power() > 1e-12);
                let n = unit_power_normalize(&w).unwrap();
                let independent: f64 = n.entries().iter().map(|z| z.re * z.re + z.im * z.im).sum();
                prop_assert!((independent - 1.0).abs() < 1e-12);
                let (pa, pb) = (w.phases(), n.phases());
                for (x, y) in pa.iter().zip(&pb) {
                    let d = (x - y).abs();
                    prop_assert!(d.min(TAU - d) < 1e-12);
                }
            }
        }
    }
}
