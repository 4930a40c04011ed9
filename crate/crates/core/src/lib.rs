//! Scalar Preisach hysteresis: relays, the memory staircase on a quantized
//! Preisach plane, forward evaluation, and identification of a
//! piecewise-constant kernel from measured input/output series.
//!
//! All numerical code is generic over [`Real`] (`f32`, `f64`); the aliases
//! below fix the common `f64` instantiation.

pub mod dataio;
pub mod error;
pub mod identify;
pub mod operator;
pub mod plane;
pub mod relay;
pub mod scalar;
pub mod synth;

pub use error::{Error, Result};
pub use identify::{
    assemble, cross_validate, reduce, solve, solve_nonneg, FitReport, FoldResult, IdentificationSystem,
    ReducedSystem, DEFAULT_SVD_TOL,
};
pub use operator::{eval_discrete, eval_relay_quadrature, hysteresis_loop, KernelField, KernelVector};
pub use plane::{Cell, CellKind, Level, MemoryCurve, PreisachGrid, SignRow, Triangle};
pub use relay::{RelayConfig, RelayState};
pub use scalar::Real;

pub type Grid = PreisachGrid<f64>;
pub type Kernel = KernelVector<f64>;
pub type System = IdentificationSystem<f64>;
pub type Reduced = ReducedSystem<f64>;
pub type Report = FitReport<f64>;
pub type Series = dataio::ExperimentSeries<f64>;
pub type Quantized = dataio::QuantizedSeries<f64>;
pub type Program = synth::InputProgram<f64>;
pub type Relay = RelayConfig<f64>;

pub type GridF32 = PreisachGrid<f32>;
pub type KernelF32 = KernelVector<f32>;
pub type SystemF32 = IdentificationSystem<f32>;
