//! Lower bounds on the secret-key capacity of phase-insensitive bosonic
//! Gaussian channels (thermal loss, thermal amplification, added noise).
//!
//! The bound is the coherent-information baseline plus the gain `Δᴳ`
//! obtained by optimizing a single-mode Gaussian measurement on the sender
//! side. Every closed form in [`bounds`] has an independent finite-μ
//! counterpart that propagates the full Alice–Bob–Eve covariance matrix.
//!
//! Conventions: shot-noise units with vacuum = identity, modes interleaved
//! as `(x₁, p₁, x₂, p₂, …)`, entropies in bits.

pub mod bounds;
pub mod channels;
pub mod cli;
mod error;
pub mod optimize;
pub mod sweep;
pub mod symplectic;
pub mod thresholds;
pub mod tolerance;
pub mod verify;

pub use bounds::{
    coherent_info, lower_bound, maximize_delta, upper_bound, BoundResult, Diagnostic, Direction,
    EvalPath, OptimizerOptions, Transcription,
};
pub use channels::{build_joint_state, ChannelSpec, JointState, Mode};
pub use error::{Error, Result};
pub use sweep::{run_sweep, Axis, ChannelFamily, Spacing, SweepGrid, SweepRow, SweepTable};
pub use symplectic::{CovarianceMatrix, MeasurementSpec, Target};
pub use thresholds::{security_threshold, threshold_of_info, ThresholdFamily, ThresholdQuery};
pub use tolerance::TOL;
