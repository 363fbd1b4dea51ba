//! Echo state networks and their reduced-order counterparts.
//!
//! The crate trains leaky-tanh echo state networks with a ridge readout,
//! compresses them with proper orthogonal decomposition (POD), optionally
//! interpolates the nonlinearity with the discrete empirical interpolation
//! method (DEIM), and provides the benchmark tasks used to compare the
//! models: memory capacity, NARMA10, snapshot energy profiles and per-step
//! timing.
//!
//! All model math is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the file formats store.

pub mod deim;
pub mod error;
pub mod esn;
pub mod io;
pub mod linalg;
pub mod pod;
pub mod reservoir;
pub mod scalar;
pub mod stability;
pub mod tasks;
pub mod timing;
pub mod training;

pub use deim::{deim_select, DeimErrorBound, DeimEsn, DeimOperators};
pub use error::{EsnError, Result};
pub use esn::{EchoStateNetwork, HyperParams, StateTrajectory};
pub use linalg::spectral_radius;
pub use pod::{PodBasis, PodEsn};
pub use reservoir::Reservoir;
pub use scalar::Scalar;
pub use stability::StabilityReport;
pub use tasks::memory::{McConfig, McResult};
pub use tasks::signals::{SignalKind, SignalSpec};
pub use timing::TimingStats;
pub use training::{Dataset, FitReport, Regularization};

/// Version string stamped into every file the toolkit writes.
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Esn = EchoStateNetwork<f64>;
pub type Esn32 = EchoStateNetwork<f32>;
pub type Pod = PodEsn<f64>;
pub type Pod32 = PodEsn<f32>;
pub type Deim = DeimEsn<f64>;
pub type Deim32 = DeimEsn<f32>;
pub type Basis = PodBasis<f64>;
pub type Trajectory = StateTrajectory<f64>;
