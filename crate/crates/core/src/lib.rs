//! Physics-informed neural control of the van der Pol oscillator.
//!
//! A small tanh network maps time to a position signal. It is trained with
//! L-BFGS on a composite loss: a fit to simulated oscillator data, an
//! initial-position penalty, and a weighted residual that pushes the output
//! onto a desired sinusoid. The trained output is the control signal.
//!
//! Modules, bottom up:
//!
//! - [`sim`]: the oscillator and its adaptive Dormand–Prince integrator
//! - [`signal`]: the desired sinusoid
//! - [`nn`]: network, second-order jets, reverse-mode gradients
//! - [`loss`]: loss components and the composite objective
//! - [`optim`]: L-BFGS with a strong-Wolfe line search
//! - [`metrics`]: run-level estimates and error traces
//! - [`harness`]: runs, sweeps, persistence and plot data

pub mod error;
pub mod harness;
pub mod loss;
pub mod metrics;
pub mod nn;
pub mod optim;
pub mod signal;
pub mod sim;

pub use error::{Error, Result};
pub use harness::{ExperimentConfig, RunRecord};
pub use loss::{LambdaMode, LossBreakdown};
pub use nn::{Jet2, LayerSpec, NetworkParams};
pub use optim::{LbfgsOptions, OptimResult, Termination};
pub use signal::DesiredSignal;
pub use sim::{Trajectory, VdpConfig};
