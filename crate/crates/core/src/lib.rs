//! One-bit leader–follower consensus tracking.
//!
//! Followers see their neighbors only through single comparator bits
//! `1{x_j + noise <= B}`, estimate them with a recursive projection
//! algorithm, and steer toward the estimates. The crate provides the
//! simulator, the spectral reduction of the Laplacian, the Lyapunov
//! solver and the constants that enter the convergence guarantees.

pub mod analysis;
pub mod channel;
pub mod config;
pub mod control;
pub mod engine;
pub mod error;
pub mod estimation;
mod linalg;
pub mod presets;
pub mod spectral;
pub mod theory;
pub mod topology;

pub use analysis::{prepare, theory_report, Prepared, TheoryReport};
pub use channel::{ExcitationGain, NoiseModel, SensorBank};
pub use config::RunConfig;
pub use control::{GainPolicy, ReferenceGenerator};
pub use engine::{fit_rate, run, Experiment, LogSchedule, MetricSeries, Model, RateFit, RunOutput, TrajectoryLog};
pub use error::{Error, Result};
pub use estimation::{EstimatorBank, StepPolicy};
pub use presets::{preset, PRESET_NAMES};
pub use spectral::{reduce, solve_lyapunov, LyapunovSolution, SpectralReduction};
pub use theory::{RateClass, TheoryConstants};
pub use topology::{Edge, EdgeIndex, Topology};
