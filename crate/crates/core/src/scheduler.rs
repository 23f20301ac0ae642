//! Iterative joint scheduling of the training horizon T and learning rate
//! η under a wall-clock budget.
//!
//! The controller alternates between short "look" phases (a fixed number of
//! epochs from the last committed parameters) and open-ended "commit"
//! phases. A look that improves validation loss is committed and training
//! continues on the remaining budget; a look that does not improve shrinks
//! η by the fitted growth of the recorded gradient norms and restores the
//! committed parameters bitwise. Whenever training early-stops on the
//! gradient threshold γ, the horizon is incremented and the controller
//! re-enters a look phase at the new T.

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::linear_fit;
use crate::net::{self, MlpConfig, ParamVector};
use crate::optimize::{
    train_from, Budget, StopReason, TrainConfig, TrainOpts, TrainReport,
};
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendFit {
    /// Fit ln‖∇L‖ against step; suited to chaotic systems.
    Exponential,
    /// Fit ‖∇L‖ against step; suited to limit cycles.
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    /// Initial learning rate η₀ (also the ceiling after shrinks).
    pub eta0: f64,
    /// Gradient-norm early-stop threshold γ.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Look-phase length E, in epochs.
    #[serde(default = "default_lookahead")]
    pub lookahead_epochs: usize,
    /// Total wall-clock budget, seconds.
    pub wall_limit_seconds: f64,
    pub trend_fit: TrendFit,
    /// Relative validation improvement demanded of a look phase.
    #[serde(default = "default_improve_delta")]
    pub improve_delta: f64,
    #[serde(default = "default_eta_min")]
    pub eta_min: f64,
    /// Largest horizon the controller will schedule.
    #[serde(default = "default_horizon_cap")]
    pub horizon_cap: usize,
}

fn default_gamma() -> f64 {
    1.5e-4
}
fn default_lookahead() -> usize {
    20
}
fn default_improve_delta() -> f64 {
    1e-3
}
fn default_eta_min() -> f64 {
    1e-8
}
fn default_horizon_cap() -> usize {
    32
}

impl SchedulerConfig {
    pub fn new(eta0: f64, wall_limit_seconds: f64, trend_fit: TrendFit) -> Self {
        SchedulerConfig {
            eta0,
            gamma: default_gamma(),
            lookahead_epochs: default_lookahead(),
            wall_limit_seconds,
            trend_fit,
            improve_delta: default_improve_delta(),
            eta_min: default_eta_min(),
            horizon_cap: default_horizon_cap(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) || !(self.eta_min > 0.0) || self.eta_min > self.eta0 {
            return Err(Error::Argument(
                "need 0 < eta_min <= eta0 for the scheduler".into(),
            ));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::Argument("gamma must be positive".into()));
        }
        if self.lookahead_epochs == 0 {
            return Err(Error::Argument("lookahead_epochs must be positive".into()));
        }
        if !(self.wall_limit_seconds > 0.0) {
            return Err(Error::Argument("wall limit must be positive".into()));
        }
        if !(self.improve_delta > 0.0) {
            return Err(Error::Argument("improve_delta must be positive".into()));
        }
        if self.horizon_cap == 0 {
            return Err(Error::Argument("horizon_cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Look,
    Commit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Accept,
    RejectEtaAdjust,
    HorizonIncrement,
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Accept => "accept",
            Action::RejectEtaAdjust => "reject_eta_adjust",
            Action::HorizonIncrement => "horizon_increment",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCause {
    WallLimit,
    HorizonCap,
    EtaFloor,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceEvent {
    pub wall_time: f64,
    pub horizon: usize,
    pub eta: f64,
    pub phase: Phase,
    pub val_loss: f64,
    pub grad_norm: f64,
    pub action: Action,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub events: Vec<TraceEvent>,
    pub stop: StopCause,
}

impl ScheduleTrace {
    pub const CSV_HEADER: &'static str = "wall_time,T,eta,phase,val_loss,grad_norm,action";

    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.events {
            let phase = match e.phase {
                Phase::Look => "look",
                Phase::Commit => "commit",
            };
            out.push_str(&format!(
                "{:.16e},{},{:.16e},{},{:.16e},{:.16e},{}\n",
                e.wall_time,
                e.horizon,
                e.eta,
                phase,
                e.val_loss,
                e.grad_norm,
                e.action.name()
            ));
        }
        out
    }
}

/// Shrink factor derived from the fitted trend of the recorded gradient
/// norms over the look window. The fitted growth over the window length is
/// undone; when the fit reports no growth, a fixed factor of 2 guarantees
/// every rejection strictly decreases η.
fn eta_shrink_factor(grad_norms: &[f64], trend: TrendFit) -> f64 {
    const FALLBACK: f64 = 2.0;
    if grad_norms.len() < 2 {
        return FALLBACK;
    }
    let steps: Vec<f64> = (0..grad_norms.len()).map(|i| i as f64).collect();
    let w = (grad_norms.len() - 1) as f64;
    let factor = match trend {
        TrendFit::Exponential => {
            if grad_norms.iter().any(|&g| !(g > 0.0)) {
                return FALLBACK;
            }
            let logs: Vec<f64> = grad_norms.iter().map(|g| g.ln()).collect();
            let (_, b, _) = linear_fit(&steps, &logs);
            (b * w).exp()
        }
        TrendFit::Linear => {
            let (c, b, _) = linear_fit(&steps, grad_norms);
            if c <= 0.0 {
                return FALLBACK;
            }
            1.0 + b * w / c
        }
    };
    if factor.is_finite() && factor > 1.0 {
        factor
    } else {
        FALLBACK
    }
}

/// Runs the controller; returns the best-validation parameters seen on any
/// committed phase and the full decision trace.
pub fn run_scheduler(
    config: &MlpConfig,
    traj: &Trajectory,
    scfg: &SchedulerConfig,
    base_tcfg: &TrainConfig,
) -> Result<(ParamVector, ScheduleTrace)> {
    scfg.validate()?;
    config.validate()?;
    let started = Instant::now();
    let deadline = started + std::time::Duration::from_secs_f64(scfg.wall_limit_seconds);

    let theta0 = net::init(config);
    let mut theta_prev = theta0.clone();
    let mut horizon = 1usize;
    let mut eta = scfg.eta0;
    let mut look = true;
    let mut best: Option<(f64, ParamVector)> = None;
    let mut events = Vec::new();
    let stop;

    // largest horizon the trajectory itself can support (≥ 2 windows)
    let feasible_cap = traj.len().saturating_sub(3).min(scfg.horizon_cap);

    loop {
        let elapsed = started.elapsed().as_secs_f64();
        if elapsed >= scfg.wall_limit_seconds {
            stop = StopCause::WallLimit;
            break;
        }
        if horizon > feasible_cap {
            stop = StopCause::HorizonCap;
            break;
        }
        let mut tcfg = base_tcfg.clone();
        tcfg.eta = eta;
        tcfg.grad_stop = scfg.gamma;
        tcfg.budget = if look {
            Budget::Epochs(scfg.lookahead_epochs)
        } else {
            Budget::WallSeconds(scfg.wall_limit_seconds - elapsed)
        };
        let phase = if look { Phase::Look } else { Phase::Commit };
        let report: TrainReport = train_from(
            config,
            traj,
            horizon,
            &tcfg,
            TrainOpts {
                initial: Some(&theta_prev),
                deadline: Some(deadline),
            },
        )?;

        let cut_short = look
            && report.stop_reason == StopReason::Budget
            && report.epochs_completed < scfg.lookahead_epochs;
        if cut_short {
            // wall expired inside an unfinished look: nothing to record
            stop = StopCause::WallLimit;
            break;
        }

        let wall_time = started.elapsed().as_secs_f64();
        let val_end = report.val_curve.last().copied().unwrap_or(f64::INFINITY);
        let grad_end = report
            .grad_norm_curve
            .last()
            .copied()
            .unwrap_or(f64::INFINITY);
        let mut event = TraceEvent {
            wall_time,
            horizon,
            eta,
            phase,
            val_loss: val_end,
            grad_norm: grad_end,
            action: Action::Accept,
        };

        match report.stop_reason {
            StopReason::GradStop => {
                // plateau: keep the parameters, raise the horizon, look again
                theta_prev = report.final_params.clone();
                if report.best_val.is_finite() {
                    update_best(&mut best, report.best_val, &report.best_params);
                }
                event.action = Action::HorizonIncrement;
                events.push(event);
                horizon += 1;
                look = true;
            }
            StopReason::Divergence => {
                // failed phase: shrink η from the trend, restore parameters
                let factor = eta_shrink_factor(&report.grad_norm_curve, scfg.trend_fit);
                let new_eta = (eta / factor).clamp(scfg.eta_min, scfg.eta0);
                event.action = Action::RejectEtaAdjust;
                events.push(event);
                if new_eta >= eta && eta <= scfg.eta_min {
                    stop = StopCause::EtaFloor;
                    break;
                }
                eta = new_eta;
                look = true;
            }
            StopReason::Budget => {
                if look {
                    let val_start = compute_val(config, &theta_prev, traj, horizon, &tcfg)?;
                    let improved = val_end.is_finite()
                        && val_start.is_finite()
                        && (val_start - val_end) / val_start.abs().max(1e-300)
                            > scfg.improve_delta;
                    if improved {
                        theta_prev = report.final_params.clone();
                        update_best(&mut best, report.best_val, &report.best_params);
                        event.action = Action::Accept;
                        events.push(event);
                        look = false;
                    } else {
                        let factor =
                            eta_shrink_factor(&report.grad_norm_curve, scfg.trend_fit);
                        let new_eta = (eta / factor).clamp(scfg.eta_min, scfg.eta0);
                        event.action = Action::RejectEtaAdjust;
                        events.push(event);
                        if new_eta >= eta && eta <= scfg.eta_min {
                            stop = StopCause::EtaFloor;
                            break;
                        }
                        eta = new_eta;
                        // θ_prev untouched: the next look restores it bitwise
                    }
                } else {
                    // commit phase ran out the wall clock
                    update_best(&mut best, report.best_val, &report.best_params);
                    event.action = Action::Accept;
                    events.push(event);
                    stop = StopCause::WallLimit;
                    break;
                }
            }
        }
    }

    let final_params = match best {
        Some((_, p)) => p,
        None => theta0,
    };
    Ok((final_params, ScheduleTrace { events, stop }))
}

fn update_best(best: &mut Option<(f64, ParamVector)>, val: f64, params: &ParamVector) {
    if !val.is_finite() {
        return;
    }
    match best {
        Some((b, _)) if *b <= val => {}
        _ => *best = Some((val, params.clone())),
    }
}

fn compute_val(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    horizon: usize,
    tcfg: &TrainConfig,
) -> Result<f64> {
    let (_, val_starts) = crate::optimize::split_windows(traj, horizon, tcfg.val_fraction)?;
    let lcfg = crate::arloss::HorizonLossConfig::new(horizon).with_batch(val_starts);
    crate::arloss::horizon_loss(config, params, traj, &lcfg)
}
