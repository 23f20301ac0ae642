//! Training laboratory for autoregressive forecasters of deterministic
//! dynamical systems.
//!
//! The crate is organized around the lifecycle of a forecasting experiment:
//!
//! * [`dynamics`] — the built-in ODE systems (Lorenz, double pendulum,
//!   seven-species food web, limit cycle), numerical integration, flow-map
//!   Jacobians, Lyapunov spectra, observation noise, and normalization.
//! * [`net`] — a from-scratch MLP (embed / LayerNorm+affine+ReLU blocks /
//!   unembed, optional residual skips and softplus activation) with exact
//!   reverse-mode gradients over a flat parameter vector.
//! * [`arloss`] — autoregressive rollout and the multi-step horizon loss,
//!   its backpropagation-through-rollout gradient, the piecewise shooting
//!   loss for mechanistic models, and long-horizon error diagnostics.
//! * [`optimize`] — SGD/Adam training loops under epoch or wall-clock
//!   budgets, horizon-curriculum training, multi-horizon evaluation, and a
//!   grid-sweep harness.
//! * [`landscape`] — loss-landscape probes: gradient-norm scaling over the
//!   horizon, segment roughness, Hutchinson Hessian traces, paired-minima
//!   generalization ratios, local-linearization checks, and parameter scans.
//! * [`scheduler`] — an iterative controller that raises the training
//!   horizon on gradient plateaus and shrinks the learning rate from the
//!   fitted gradient-norm trend.
//!
//! Everything is deterministic given a seed: randomness flows from one
//! 64-bit seed through the per-purpose streams in [`rng`].

pub mod arloss;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod landscape;
pub mod linalg;
pub mod net;
pub mod optimize;
pub mod rng;
pub mod scheduler;

pub use error::{Error, Result};
