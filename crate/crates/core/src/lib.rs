//! Near-field nulling-control beam focusing (NCBF) for uniform linear arrays.
//!
//! The crate covers the full pipeline:
//!
//! - [`array_model`]: ULA geometry and the spherical-wavefront channel model.
//! - [`beamformer`]: maximum-directivity and LCMV weight synthesis.
//! - [`datagen`]: random multi-user scenarios, feature/label encoding and the
//!   on-disk dataset format.
//! - [`neural`]: the dual estimator (phase and magnitude networks), its losses,
//!   training loop, architecture sweep and checkpoint format.
//! - [`evalmetrics`]: beam patterns, NCBF gain and null-placement accuracy.
//! - [`benchtime`]: LCMV vs network inference timing.
//! - [`verify`]: a fast self-check suite used by the `verify` CLI command.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`). The channel
//! model and weight synthesis are normally run in `f64`; networks are trained
//! and stored in `f32`. Concrete aliases for both are exported below.
//!
//! # Conjugation convention
//!
//! The received gain of weights `w` at position `p` is `w^T h'(p)`. Columns of
//! the LCMV constraint matrix are `conj(h'(p_k))`, so `C^H w = d` states the
//! received gains directly and a zero in `d` is a literal null of `w^T h'`.

pub mod array_model;
pub mod beamformer;
pub mod benchtime;
pub mod datagen;
pub mod error;
pub mod evalmetrics;
pub mod linalg;
pub mod neural;
pub mod scalar;
pub mod verify;

pub use error::{Error, Result};
pub use scalar::Real;

pub use array_model::{ArrayConfig, PolarPosition, SteeringVector};
pub use beamformer::{NcbfWeights, ScenarioConstraints};
pub use datagen::{Dataset, LabelPair, Scenario};
pub use neural::{LossKind, Mlp, TrainConfig};

/// Array geometry in double precision.
pub type ArrayConfig64 = ArrayConfig<f64>;
/// User position in double precision.
pub type PolarPosition64 = PolarPosition<f64>;
/// Steering vector in double precision.
pub type SteeringVector64 = SteeringVector<f64>;
/// Beamforming weights in double precision.
pub type NcbfWeights64 = NcbfWeights<f64>;
/// Beamforming weights in single precision.
pub type NcbfWeights32 = NcbfWeights<f32>;
/// Network with single-precision parameters (the storage precision).
pub type Mlp32 = Mlp<f32>;
/// Network with double-precision parameters, used for gradient checks.
pub type Mlp64 = Mlp<f64>;
