//! Autoregressive rollout and the multi-step horizon loss.
//!
//! The loss over a trajectory of M states with horizon T averages, over
//! every window start m and every step τ = 1..T, the distance between the
//! observed state x(m+τ) and the τ-fold composition of the model from
//! x(m). `Euclidean` mode uses the plain norm, `Squared` its square (the
//! smooth default used for training and MSE reporting).
//!
//! Gradients backpropagate through the whole rollout: one forward chain
//! per window, then a reverse sweep that accumulates both the parameter
//! path and the state path of each composition step.
//!
//! Window contributions are summed in fixed-size chunks (sequential within
//! a chunk, chunk partials combined in chunk order), so results are
//! identical no matter how many rayon workers execute the chunks.

use crate::dynamics::{integrate, Method, SystemSpec, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::{dist2, Mat};
use crate::net::{self, MlpConfig, ParamVector};
use crate::rng::{stream, Stream};
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Windows per reduction chunk; part of the determinism contract.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    /// Plain Euclidean norm per step, exactly as the horizon loss is
    /// defined; not differentiable at zero residuals.
    Euclidean,
    /// Squared norm per step; smooth everywhere, the training default.
    Squared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonLossConfig {
    /// Training temporal horizon T, in samples.
    pub horizon: usize,
    pub norm_mode: NormMode,
    /// Optional subset of window starts; `None` means every start.
    pub batch: Option<Vec<usize>>,
}

impl HorizonLossConfig {
    pub fn new(horizon: usize) -> Self {
        HorizonLossConfig {
            horizon,
            norm_mode: NormMode::Squared,
            batch: None,
        }
    }

    pub fn euclidean(mut self) -> Self {
        self.norm_mode = NormMode::Euclidean;
        self
    }

    pub fn with_batch(mut self, batch: Vec<usize>) -> Self {
        self.batch = Some(batch);
        self
    }
}

/// Number of window starts available in a trajectory at horizon T.
pub fn window_count(traj: &Trajectory, horizon: usize) -> usize {
    traj.len().saturating_sub(horizon)
}

fn check_lcfg(traj: &Trajectory, lcfg: &HorizonLossConfig) -> Result<Vec<usize>> {
    if lcfg.horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    let n = window_count(traj, lcfg.horizon);
    if n == 0 {
        return Err(Error::Argument(format!(
            "horizon {} needs more than {} samples",
            lcfg.horizon,
            traj.len()
        )));
    }
    match &lcfg.batch {
        None => Ok((0..n).collect()),
        Some(batch) => {
            if batch.is_empty() {
                return Err(Error::Argument("batch must not be empty".into()));
            }
            if let Some(&bad) = batch.iter().find(|&&m| m >= n) {
                return Err(Error::Argument(format!(
                    "window start {bad} out of range (max {})",
                    n - 1
                )));
            }
            Ok(batch.clone())
        }
    }
}

/// Rolls the model out `n` steps from `x0`; row τ-1 holds f^τ(x0, θ).
pub fn rollout(
    config: &MlpConfig,
    params: &ParamVector,
    x0: &[f64],
    n: usize,
) -> Result<Mat> {
    if n == 0 {
        return Err(Error::Argument("rollout needs at least one step".into()));
    }
    let d = config.input_dim;
    let mut out = Mat::zeros(n, d);
    let mut x = x0.to_vec();
    for step in 0..n {
        let (y, _) = net::forward(config, params, &x).map_err(|e| match e {
            Error::Numeric(msg) => Error::Divergence {
                step: step + 1,
                context: msg,
            },
            other => other,
        })?;
        if !crate::linalg::all_finite(&y) {
            return Err(Error::Divergence {
                step: step + 1,
                context: "rollout produced non-finite state".into(),
            });
        }
        out.row_mut(step).copy_from_slice(&y);
        x = y;
    }
    Ok(out)
}

/// Horizon loss per the window/step double mean.
pub fn horizon_loss(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    lcfg: &HorizonLossConfig,
) -> Result<f64> {
    horizon_loss_dual(config, params, traj, lcfg).map(|(eu, sq)| match lcfg.norm_mode {
        NormMode::Euclidean => eu,
        NormMode::Squared => sq,
    })
}

/// Both norm modes of the horizon loss in one pass (shared rollouts).
pub fn horizon_loss_dual(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    lcfg: &HorizonLossConfig,
) -> Result<(f64, f64)> {
    let starts = check_lcfg(traj, lcfg)?;
    let t = lcfg.horizon;
    let partials: Vec<Result<(f64, f64)>> = starts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut eu = 0.0;
            let mut sq = 0.0;
            for &m in chunk {
                let roll = rollout(config, params, traj.row(m), t)?;
                for tau in 1..=t {
                    let d2 = dist2(roll.row(tau - 1), traj.row(m + tau));
                    eu += d2.sqrt();
                    sq += d2;
                }
            }
            Ok((eu, sq))
        })
        .collect();
    let mut eu = 0.0;
    let mut sq = 0.0;
    for p in partials {
        let (e, s) = p?;
        eu += e;
        sq += s;
    }
    let scale = 1.0 / (starts.len() as f64 * t as f64);
    Ok((eu * scale, sq * scale))
}

/// Horizon loss and its exact gradient by backpropagation through the
/// rollout. Euclidean mode errors on a zero residual (non-differentiable
/// point); squared mode is smooth everywhere.
pub fn horizon_loss_grad(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    lcfg: &HorizonLossConfig,
) -> Result<(f64, ParamVector)> {
    let starts = check_lcfg(traj, lcfg)?;
    let t = lcfg.horizon;
    let scale = 1.0 / (starts.len() as f64 * t as f64);

    let partials: Vec<Result<(f64, ParamVector)>> = starts
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss = 0.0;
            let mut grad = ParamVector::zeros(config);
            let mut caches = Vec::with_capacity(t);
            for &m in chunk {
                caches.clear();
                // forward chain, keeping every cache and output
                let mut xs = Vec::with_capacity(t);
                let mut x = traj.row(m).to_vec();
                for tau in 1..=t {
                    let (y, cache) = net::forward(config, params, &x).map_err(|e| match e {
                        Error::Numeric(msg) => Error::Divergence {
                            step: tau,
                            context: format!("window {m}: {msg}"),
                        },
                        other => other,
                    })?;
                    if !crate::linalg::all_finite(&y) {
                        return Err(Error::Divergence {
                            step: tau,
                            context: format!("window {m}: non-finite rollout"),
                        });
                    }
                    caches.push(cache);
                    xs.push(y);
                    x = xs.last().unwrap().clone();
                }
                // reverse sweep: cotangent on f^τ accumulates the direct
                // loss term at each τ plus the chain from later steps
                let mut cot = vec![0.0; config.input_dim];
                for tau in (1..=t).rev() {
                    let target = traj.row(m + tau);
                    let pred = &xs[tau - 1];
                    match lcfg.norm_mode {
                        NormMode::Squared => {
                            for i in 0..cot.len() {
                                loss += (pred[i] - target[i]) * (pred[i] - target[i]);
                                cot[i] += 2.0 * (pred[i] - target[i]);
                            }
                        }
                        NormMode::Euclidean => {
                            let d2 = dist2(pred, target);
                            let nrm = d2.sqrt();
                            if nrm <= 1e-12 {
                                return Err(Error::GradientSingularity {
                                    window: m,
                                    step: tau,
                                });
                            }
                            loss += nrm;
                            for i in 0..cot.len() {
                                cot[i] += (pred[i] - target[i]) / nrm;
                            }
                        }
                    }
                    cot = net::backward_into(config, params, &caches[tau - 1], &cot, &mut grad)?;
                }
            }
            Ok((loss, grad))
        })
        .collect();

    let mut loss = 0.0;
    let mut grad = ParamVector::zeros(config);
    for p in partials {
        let (l, g) = p?;
        loss += l;
        grad.add_scaled(1.0, &g);
    }
    loss *= scale;
    for g in grad.values_mut() {
        *g *= scale;
    }
    Ok((loss, grad))
}

/// Piecewise shooting loss for a mechanistic model: segments of length T
/// restart from the observed state x(mT) and compare the numerical
/// solution against the observations at every step. Plain Euclidean norms,
/// summed (no averaging), matching the stride-T segmenting.
pub fn mechanistic_loss(
    spec: &SystemSpec,
    theta: &[f64],
    traj: &Trajectory,
    horizon: usize,
    method: Method,
) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::Argument("horizon must be at least 1".into()));
    }
    if traj.len() < horizon + 1 {
        return Err(Error::Argument(format!(
            "horizon {} needs more than {} samples",
            horizon,
            traj.len()
        )));
    }
    let fitted = spec.clone().with_params(theta.to_vec())?;
    let mut loss = 0.0;
    let mut seg = 0;
    while seg * horizon + horizon < traj.len() {
        let s = seg * horizon;
        let sol = integrate(&fitted, traj.row(s), traj.dt, horizon, method).map_err(|e| {
            match e {
                Error::Divergence { step, .. } => Error::Divergence {
                    step,
                    context: format!("segment {seg} (rows {s}..{})", s + horizon),
                },
                other => other,
            }
        })?;
        for tau in 1..=horizon {
            loss += dist2(sol.row(tau), traj.row(s + tau)).sqrt();
        }
        seg += 1;
    }
    Ok(loss)
}

/// Upper bound on the squared-mode horizon loss inside a well-approximating
/// parameter region: max pairwise squared distance between trajectory
/// states, plus 2ε.
pub fn loss_upper_bound(traj: &Trajectory, epsilon: f64) -> f64 {
    assert!(epsilon >= 0.0);
    let m = traj.len();
    let mut max_d2 = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            max_d2 = max_d2.max(dist2(traj.row(i), traj.row(j)));
        }
    }
    max_d2 + 2.0 * epsilon
}

/// Long-horizon forecast error against the scale on which any imperfect
/// model's forecasts decorrelate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LongHorizonReport {
    /// Mean squared T-step forecast error over the sampled starts.
    pub mean_sq_error: f64,
    /// 2 · trace of the empirical state covariance: the expected squared
    /// distance between two independent attractor samples.
    pub decorrelated_scale: f64,
}

impl LongHorizonReport {
    pub fn ratio(&self) -> f64 {
        self.mean_sq_error / self.decorrelated_scale
    }
}

/// Generic version: `forecast(x0, n)` produces the n-step-ahead prediction.
pub fn long_horizon_error_with<F>(
    mut forecast: F,
    traj: &Trajectory,
    n_starts: usize,
    t_long: usize,
    seed: u64,
) -> Result<LongHorizonReport>
where
    F: FnMut(&[f64], usize) -> Result<Vec<f64>>,
{
    if n_starts == 0 {
        return Err(Error::Argument("need at least one start".into()));
    }
    let max_start = traj.len().checked_sub(t_long + 1).ok_or_else(|| {
        Error::Argument(format!(
            "t_long {} needs more than {} samples",
            t_long,
            traj.len()
        ))
    })?;
    let mut rng = stream(seed, Stream::Starts);
    let mut mse = 0.0;
    for _ in 0..n_starts {
        let s = rng.gen_range(0..=max_start);
        let pred = forecast(traj.row(s), t_long)?;
        mse += dist2(&pred, traj.row(s + t_long));
    }
    mse /= n_starts as f64;
    Ok(LongHorizonReport {
        mean_sq_error: mse,
        decorrelated_scale: 2.0 * traj.total_variance(),
    })
}

/// MLP flavor: forecasts by autoregressive rollout in the trajectory's own
/// coordinates.
pub fn long_horizon_error(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    n_starts: usize,
    t_long: usize,
    seed: u64,
) -> Result<LongHorizonReport> {
    long_horizon_error_with(
        |x0, n| {
            let roll = rollout(config, params, x0, n)?;
            Ok(roll.row(n - 1).to_vec())
        },
        traj,
        n_starts,
        t_long,
        seed,
    )
}
