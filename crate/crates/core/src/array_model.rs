//! Uniform linear array geometry and the radiative near-field channel.
//!
//! Elements lie on the x-axis, centered at the origin. A user at polar
//! position `(theta, r)` sits at Cartesian `(r sin(theta), r cos(theta))`:
//! `theta` is measured from broadside (the +y axis) and positive angles lie on
//! the +x side of the array.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// ULA geometry and carrier frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig<T> {
    num_elements: usize,
    element_spacing: T,
    carrier_frequency: T,
}

impl<T: Real> ArrayConfig<T> {
    pub fn new(num_elements: usize, element_spacing: T, carrier_frequency: T) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::InvalidConfig("num_elements must be >= 1".into()));
        }
        if !(element_spacing > T::zero()) || !element_spacing.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "element_spacing must be positive and finite, got {element_spacing}"
            )));
        }
        if !(carrier_frequency > T::zero()) || !carrier_frequency.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "carrier_frequency must be positive and finite, got {carrier_frequency}"
            )));
        }
        Ok(Self {
            num_elements,
            element_spacing,
            carrier_frequency,
        })
    }

    /// The 1x24 array with 4 cm spacing at 3.5 GHz.
    pub fn reference_ula() -> Self {
        Self::new(24, T::lit(0.04), T::lit(3.5e9)).expect("reference config is valid")
    }

    /// Same spacing and frequency as [`Self::reference_ula`], different element count.
    pub fn reference_spacing(num_elements: usize) -> Result<Self> {
        Self::new(num_elements, T::lit(0.04), T::lit(3.5e9))
    }

    #[inline]
    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    #[inline]
    pub fn element_spacing(&self) -> T {
        self.element_spacing
    }

    #[inline]
    pub fn carrier_frequency(&self) -> T {
        self.carrier_frequency
    }

    #[inline]
    pub fn wavelength(&self) -> T {
        T::lit(SPEED_OF_LIGHT) / self.carrier_frequency
    }

    /// Propagation constant `2 pi / lambda`.
    #[inline]
    pub fn propagation_constant(&self) -> T {
        T::TAU() / self.wavelength()
    }

    /// Edge-to-edge aperture `(N - 1) * spacing`.
    #[inline]
    pub fn aperture(&self) -> T {
        T::from_usize(self.num_elements - 1).unwrap() * self.element_spacing
    }

    /// x-coordinate of element `n` (0-based).
    #[inline]
    fn element_x(&self, n: usize) -> T {
        let offset = T::from_usize(n).unwrap() - T::from_usize(self.num_elements - 1).unwrap() / T::lit(2.0);
        offset * self.element_spacing
    }

    /// Cartesian `[x, y]` coordinates of every element, in meters.
    pub fn element_positions(&self) -> Vec<[T; 2]> {
        (0..self.num_elements)
            .map(|n| [self.element_x(n), T::zero()])
            .collect()
    }

    /// Boundary between the radiative near field and the far field, `2 D^2 / lambda`.
    pub fn rayleigh_distance(&self) -> T {
        let d = self.aperture();
        T::lit(2.0) * d * d / self.wavelength()
    }

    /// Reference range `r_c` and the per-element ranges `r_n` for a user at `p`.
    pub fn element_ranges(&self, p: &PolarPosition<T>) -> (T, Vec<T>) {
        (p.range_r, self.ranges_at(p.angle_theta, p.range_r))
    }

    fn ranges_at(&self, theta: T, range: T) -> Vec<T> {
        let (ux, uy) = (range * theta.sin(), range * theta.cos());
        (0..self.num_elements)
            .map(|n| {
                let dx = ux - self.element_x(n);
                (dx * dx + uy * uy).sqrt()
            })
            .collect()
    }

    /// Normalized channel vector with entries `(r_c / r_n) exp(j beta r_n)`.
    pub fn steering_vector(&self, p: &PolarPosition<T>) -> SteeringVector<T> {
        SteeringVector {
            entries: self.response_at(p.angle_theta, p.range_r),
            reference_range: p.range_r,
        }
    }

    /// Channel entries for an arbitrary angle and range, without the
    /// `[-pi/2, pi/2]` restriction of [`PolarPosition`]. Angles beyond end-fire
    /// mirror the other half-plane, which pattern scans rely on.
    pub fn response_at(&self, theta: T, range: T) -> Vec<Complex<T>> {
        let beta = self.propagation_constant();
        self.ranges_at(theta, range)
            .into_iter()
            .map(|rn| Complex::from_polar(range / rn, beta * rn))
            .collect()
    }
}

/// User location in the array's polar frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarPosition<T> {
    angle_theta: T,
    range_r: T,
}

impl<T: Real> PolarPosition<T> {
    pub fn new(angle_theta: T, range_r: T) -> Result<Self> {
        let half_pi = T::FRAC_PI_2();
        if !angle_theta.is_finite() || angle_theta < -half_pi || angle_theta > half_pi {
            return Err(Error::InvalidPosition(format!(
                "angle {angle_theta} rad outside [-pi/2, pi/2]"
            )));
        }
        if !(range_r > T::zero()) || !range_r.is_finite() {
            return Err(Error::InvalidPosition(format!(
                "range must be positive and finite, got {range_r}"
            )));
        }
        Ok(Self {
            angle_theta,
            range_r,
        })
    }

    pub fn from_degrees(angle_deg: T, range_r: T) -> Result<Self> {
        Self::new(angle_deg.to_radians(), range_r)
    }

    #[inline]
    pub fn angle_theta(&self) -> T {
        self.angle_theta
    }

    #[inline]
    pub fn angle_deg(&self) -> T {
        self.angle_theta.to_degrees()
    }

    #[inline]
    pub fn range_r(&self) -> T {
        self.range_r
    }

    pub fn cartesian(&self) -> [T; 2] {
        [
            self.range_r * self.angle_theta.sin(),
            self.range_r * self.angle_theta.cos(),
        ]
    }
}

/// Normalized array response `h'(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    entries: Vec<Complex<T>>,
    reference_range: T,
}

impl<T: Real> SteeringVector<T> {
    pub fn from_entries(entries: Vec<Complex<T>>, reference_range: T) -> Self {
        Self {
            entries,
            reference_range,
        }
    }

    #[inline]
    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    #[inline]
    pub fn reference_range(&self) -> T {
        self.reference_range
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.entries
    }
}
