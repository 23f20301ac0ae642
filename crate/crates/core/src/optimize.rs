//! SGD/Adam training under epoch or wall-clock budgets, horizon-curriculum
//! training, multi-horizon evaluation, and the grid-sweep harness.
//!
//! Window starts are split chronologically: the earliest (1 − val_fraction)
//! of starts train, the rest validate, so the two index sets never overlap.
//! Epoch-budget runs are bit-reproducible from (config, seed); wall-clock
//! budgets are not, which is why reports also record step counts.

use crate::arloss::{self, HorizonLossConfig, NormMode};
use crate::dynamics::{add_observation_noise, normalize, Trajectory};
use crate::error::{Error, Result};
use crate::net::{self, MlpConfig, ParamVector};
use crate::rng::{mix, stream, Stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Epochs(usize),
    WallSeconds(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    /// Learning rate η.
    pub eta: f64,
    pub batch_size: usize,
    pub budget: Budget,
    /// Early-stop threshold γ on the batch gradient norm.
    pub grad_stop: f64,
    pub seed: u64,
    /// Fraction of window starts held out for validation, chronologically
    /// at the end.
    pub val_fraction: f64,
    pub norm_mode: NormMode,
    /// Optional global-norm gradient clip (off by default).
    pub grad_clip: Option<f64>,
}

impl TrainConfig {
    pub fn new(eta: f64, budget: Budget) -> Self {
        TrainConfig {
            optimizer: OptimizerKind::adam(),
            eta,
            batch_size: 512,
            budget,
            grad_stop: 1.5e-4,
            seed: 0,
            val_fraction: 0.2,
            norm_mode: NormMode::Squared,
            grad_clip: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_optimizer(mut self, opt: OptimizerKind) -> Self {
        self.optimizer = opt;
        self
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n;
        self
    }

    pub fn with_grad_stop(mut self, gamma: f64) -> Self {
        self.grad_stop = gamma;
        self
    }

    pub fn with_val_fraction(mut self, f: f64) -> Self {
        self.val_fraction = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::Argument("eta must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be positive".into()));
        }
        if !(self.grad_stop >= 0.0) {
            return Err(Error::Argument("grad_stop must be non-negative".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Argument("val_fraction must lie in (0, 1)".into()));
        }
        match self.budget {
            Budget::Epochs(n) if n == 0 => {
                Err(Error::Argument("epoch budget must be positive".into()))
            }
            Budget::WallSeconds(s) if !(s > 0.0) => {
                Err(Error::Argument("wall budget must be positive".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    GradStop,
    Divergence,
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StopReason::Budget => "budget",
            StopReason::GradStop => "grad_stop",
            StopReason::Divergence => "divergence",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Batch training loss per optimizer step.
    pub loss_curve: Vec<f64>,
    /// Batch gradient norm per optimizer step.
    pub grad_norm_curve: Vec<f64>,
    /// Per-epoch validation loss, squared mode.
    pub val_curve: Vec<f64>,
    /// Per-epoch validation loss, euclidean mode (same rollouts).
    pub val_curve_euclidean: Vec<f64>,
    pub wall_seconds: f64,
    pub initial_params: ParamVector,
    pub final_params: ParamVector,
    /// Parameters at the recorded minimum of `val_curve`.
    pub best_params: ParamVector,
    pub best_val: f64,
    pub stop_reason: StopReason,
    pub steps: usize,
    pub epochs_completed: usize,
}

/// First-order parameter update rule with per-run state.
pub struct Optimizer {
    kind: OptimizerKind,
    eta: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, eta: f64, n_params: usize) -> Self {
        let state = match kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam { .. } => n_params,
        };
        Optimizer {
            kind,
            eta,
            m: vec![0.0; state],
            v: vec![0.0; state],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= self.eta * g;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for i in 0..params.len() {
                    let g = grad[i];
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
                    let mhat = self.m[i] / bc1;
                    let vhat = self.v[i] / bc2;
                    params[i] -= self.eta * mhat / (vhat.sqrt() + eps);
                }
            }
        }
    }
}

/// Chronological train/validation split of the window starts at horizon T.
pub fn split_windows(
    traj: &Trajectory,
    horizon: usize,
    val_fraction: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = arloss::window_count(traj, horizon);
    if n < 2 {
        return Err(Error::Argument(format!(
            "horizon {horizon} leaves {n} windows; need at least 2"
        )));
    }
    let n_val = ((n as f64 * val_fraction).round() as usize).clamp(1, n - 1);
    let n_train = n - n_val;
    Ok(((0..n_train).collect(), (n_train..n).collect()))
}

/// Extra knobs for training phases that continue from existing parameters
/// or must respect an external deadline.
#[derive(Default)]
pub struct TrainOpts<'a> {
    pub initial: Option<&'a ParamVector>,
    pub deadline: Option<Instant>,
}

/// Trains a fresh model on the trajectory at horizon T.
pub fn train(
    config: &MlpConfig,
    traj: &Trajectory,
    horizon: usize,
    tcfg: &TrainConfig,
) -> Result<TrainReport> {
    train_from(config, traj, horizon, tcfg, TrainOpts::default())
}

pub fn train_from(
    config: &MlpConfig,
    traj: &Trajectory,
    horizon: usize,
    tcfg: &TrainConfig,
    opts: TrainOpts<'_>,
) -> Result<TrainReport> {
    config.validate()?;
    tcfg.validate()?;
    traj.validate()?;
    if traj.dim() != config.input_dim {
        return Err(Error::Argument(format!(
            "trajectory dimension {} does not match model input {}",
            traj.dim(),
            config.input_dim
        )));
    }
    let (train_starts, val_starts) = split_windows(traj, horizon, tcfg.val_fraction)?;
    let divergence_bar = 1e6 * traj.total_variance().max(1e-12);

    let mut params = match opts.initial {
        Some(p) => p.clone(),
        None => net::init(config),
    };
    let initial_params = params.clone();
    let mut optimizer = Optimizer::new(tcfg.optimizer, tcfg.eta, params.len());
    let mut shuffle_rng = stream(tcfg.seed, Stream::Shuffle);
    let batch_size = tcfg.batch_size.min(train_starts.len());

    let mut report = TrainReport {
        loss_curve: Vec::new(),
        grad_norm_curve: Vec::new(),
        val_curve: Vec::new(),
        val_curve_euclidean: Vec::new(),
        wall_seconds: 0.0,
        initial_params,
        final_params: params.clone(),
        best_params: params.clone(),
        best_val: f64::INFINITY,
        stop_reason: StopReason::Budget,
        steps: 0,
        epochs_completed: 0,
    };

    let started = Instant::now();
    let out_of_time = |started: &Instant| -> bool {
        if let Some(deadline) = opts.deadline {
            if Instant::now() >= deadline {
                return true;
            }
        }
        match tcfg.budget {
            Budget::WallSeconds(s) => started.elapsed().as_secs_f64() >= s,
            Budget::Epochs(_) => false,
        }
    };
    let val_cfg = HorizonLossConfig::new(horizon).with_batch(val_starts.clone());

    let mut epoch = 0usize;
    'outer: loop {
        if let Budget::Epochs(n) = tcfg.budget {
            if epoch >= n {
                break;
            }
        }
        if out_of_time(&started) {
            break;
        }
        let mut order = train_starts.clone();
        order.shuffle(&mut shuffle_rng);
        for batch in order.chunks(batch_size) {
            if out_of_time(&started) {
                break 'outer;
            }
            let lcfg = HorizonLossConfig {
                horizon,
                norm_mode: tcfg.norm_mode,
                batch: Some(batch.to_vec()),
            };
            let (loss, mut grad) = match arloss::horizon_loss_grad(config, &params, traj, &lcfg) {
                Ok(pair) => pair,
                Err(Error::Divergence { .. }) => {
                    report.stop_reason = StopReason::Divergence;
                    break 'outer;
                }
                Err(other) => return Err(other),
            };
            if !loss.is_finite() || loss > divergence_bar {
                report.loss_curve.push(loss);
                report.grad_norm_curve.push(grad.norm());
                report.steps += 1;
                report.stop_reason = StopReason::Divergence;
                break 'outer;
            }
            if let Some(max_norm) = tcfg.grad_clip {
                let n = grad.norm();
                if n > max_norm {
                    let s = max_norm / n;
                    for g in grad.values_mut() {
                        *g *= s;
                    }
                }
            }
            let grad_norm = grad.norm();
            optimizer.step(params.values_mut(), grad.values());
            report.loss_curve.push(loss);
            report.grad_norm_curve.push(grad_norm);
            report.steps += 1;
            if grad_norm < tcfg.grad_stop {
                report.stop_reason = StopReason::GradStop;
                break 'outer;
            }
        }
        epoch += 1;
        report.epochs_completed = epoch;
        let (val_eu, val_sq) = arloss::horizon_loss_dual(config, &params, traj, &val_cfg)?;
        report.val_curve.push(val_sq);
        report.val_curve_euclidean.push(val_eu);
        if val_sq < report.best_val {
            report.best_val = val_sq;
            report.best_params = params.clone();
        }
    }

    // Post-loop validation point for early-stopped runs that never reached
    // an epoch boundary, so best_params is meaningful.
    if report.val_curve.is_empty() && report.steps > 0 {
        let (val_eu, val_sq) = arloss::horizon_loss_dual(config, &params, traj, &val_cfg)?;
        report.val_curve.push(val_sq);
        report.val_curve_euclidean.push(val_eu);
        report.best_val = val_sq;
        report.best_params = params.clone();
    }

    report.final_params = params;
    report.wall_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}

fn divide_budget(budget: Budget, phases: usize) -> Budget {
    match budget {
        Budget::Epochs(n) => Budget::Epochs((n / phases).max(1)),
        Budget::WallSeconds(s) => Budget::WallSeconds(s / phases as f64),
    }
}

/// Trains sequentially at T = 1, 2, ..., t_max, splitting the total budget
/// equally and carrying parameters across phases.
pub fn curriculum_train(
    config: &MlpConfig,
    traj: &Trajectory,
    t_max: usize,
    total_budget: Budget,
    tcfg: &TrainConfig,
) -> Result<Vec<TrainReport>> {
    if t_max == 0 {
        return Err(Error::Argument("t_max must be at least 1".into()));
    }
    let phase_budget = divide_budget(total_budget, t_max);
    let mut reports = Vec::with_capacity(t_max);
    let mut carried: Option<ParamVector> = None;
    for t in 1..=t_max {
        let mut phase_cfg = tcfg.clone();
        phase_cfg.budget = phase_budget;
        let report = train_from(
            config,
            traj,
            t,
            &phase_cfg,
            TrainOpts {
                initial: carried.as_ref(),
                deadline: None,
            },
        )?;
        carried = Some(report.final_params.clone());
        reports.push(report);
    }
    Ok(reports)
}

/// Final-step squared forecast error at each requested horizon, over the
/// chronologically-last `val_fraction` of window starts. All horizons share
/// one start set (taken from the largest horizon) so the numbers are
/// comparable across T.
pub fn evaluate(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    eval_horizons: &[usize],
    val_fraction: f64,
) -> Result<std::collections::BTreeMap<usize, f64>> {
    if eval_horizons.is_empty() {
        return Err(Error::Argument("need at least one horizon".into()));
    }
    let &max_t = eval_horizons.iter().max().unwrap();
    if max_t == 0 {
        return Err(Error::Argument("horizons must be positive".into()));
    }
    let (_, val_starts) = split_windows(traj, max_t, val_fraction)?;
    let mut sums: std::collections::BTreeMap<usize, f64> =
        eval_horizons.iter().map(|&t| (t, 0.0)).collect();
    for &m in &val_starts {
        let roll = arloss::rollout(config, params, traj.row(m), max_t)?;
        for (&t, sum) in sums.iter_mut() {
            *sum += crate::linalg::dist2(roll.row(t - 1), traj.row(m + t));
        }
    }
    for (_, sum) in sums.iter_mut() {
        *sum /= val_starts.len() as f64;
    }
    Ok(sums)
}

/// One axis combination of the sweep grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepCell {
    pub system: String,
    pub horizon: usize,
    pub eta: f64,
    pub sigma: f64,
    pub width_factor: usize,
    pub n_blocks: usize,
    pub seed: u64,
    pub best_val_loss: f64,
    pub stop_reason: String,
    pub steps: usize,
    pub wall_seconds: f64,
    /// Divergence or failure to learn: non-finite/divergent training, or a
    /// best validation loss at or above the trajectory-variance baseline.
    pub failed: bool,
}

impl SweepCell {
    pub const CSV_HEADER: &'static str =
        "system,T,eta,sigma,width_factor,n_blocks,seed,best_val_loss,stop_reason,steps,wall_seconds";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.16e},{:.16e},{},{},{},{:.16e},{},{},{:.16e}",
            self.system,
            self.horizon,
            self.eta,
            self.sigma,
            self.width_factor,
            self.n_blocks,
            self.seed,
            self.best_val_loss,
            self.stop_reason,
            self.steps,
            self.wall_seconds
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub horizons: Vec<usize>,
    pub etas: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// (width_factor, n_blocks) pairs.
    pub sizes: Vec<(usize, usize)>,
}

impl SweepGrid {
    pub fn cell_count(&self) -> usize {
        self.horizons.len() * self.etas.len() * self.sigmas.len() * self.sizes.len()
    }
}

/// Trains one model per grid cell on noisy copies of the raw trajectory,
/// recording best validation loss and failure flags. Cell failures are
/// recorded, never propagated. Cells run in parallel; the output order is
/// the deterministic grid order regardless of worker count.
pub fn sweep(
    base_model: &MlpConfig,
    raw_traj: &Trajectory,
    grid: &SweepGrid,
    tcfg: &TrainConfig,
    system_name: &str,
) -> Vec<SweepCell> {
    if grid.cell_count() == 0 {
        return Vec::new();
    }
    let mut combos = Vec::with_capacity(grid.cell_count());
    for &sigma in &grid.sigmas {
        for &(a, blocks) in &grid.sizes {
            for &t in &grid.horizons {
                for &eta in &grid.etas {
                    combos.push((sigma, a, blocks, t, eta));
                }
            }
        }
    }
    combos
        .par_iter()
        .enumerate()
        .map(|(idx, &(sigma, a, blocks, t, eta))| {
            let seed = mix(tcfg.seed, idx as u64);
            let mut cell = SweepCell {
                system: system_name.to_string(),
                horizon: t,
                eta,
                sigma,
                width_factor: a,
                n_blocks: blocks,
                seed,
                best_val_loss: f64::INFINITY,
                stop_reason: "error".into(),
                steps: 0,
                wall_seconds: 0.0,
                failed: true,
            };
            let noisy = add_observation_noise(raw_traj, sigma, seed);
            let prepared = match normalize(&noisy) {
                Ok(p) => p,
                Err(_) => return cell,
            };
            let model = MlpConfig {
                width_factor: a,
                n_blocks: blocks,
                seed,
                ..base_model.clone()
            };
            let mut cell_tcfg = tcfg.clone();
            cell_tcfg.eta = eta;
            cell_tcfg.seed = seed;
            match train(&model, &prepared, t, &cell_tcfg) {
                Ok(report) => {
                    cell.best_val_loss = report.best_val;
                    cell.stop_reason = report.stop_reason.to_string();
                    cell.steps = report.steps;
                    cell.wall_seconds = report.wall_seconds;
                    cell.failed = report.stop_reason == StopReason::Divergence
                        || !report.best_val.is_finite()
                        || report.best_val >= prepared.total_variance();
                }
                Err(_) => {}
            }
            cell
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, Method, SystemSpec};
    use crate::linalg::Mat;
    use crate::net::Activation;

    fn cycle_traj(samples: usize, seed: u64) -> Trajectory {
        let spec = SystemSpec::limit_cycle().with_hopf_normal_form(true);
        let x0 = spec.default_initial_state(seed);
        let raw = integrate(&spec, &x0, 0.5, samples + samples / 4, Method::Dopri5)
            .unwrap()
            .with_seed(seed);
        normalize(&raw.drop_transient(0.2)).unwrap()
    }

    fn quick_tcfg(epochs: usize) -> TrainConfig {
        TrainConfig::new(1e-3, Budget::Epochs(epochs))
            .with_seed(5)
            .with_batch_size(64)
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let traj = cycle_traj(200, 1);
        let cfg = MlpConfig::new(2, 4, 1).with_seed(2);
        let mut tcfg = quick_tcfg(3);
        tcfg.eta = 1e-300; // effectively zero without tripping validation
        let report = train(&cfg, &traj, 1, &tcfg).unwrap();
        let drift: f64 = report
            .final_params
            .values()
            .iter()
            .zip(report.initial_params.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-290, "drift {drift}");
    }

    #[test]
    fn sgd_on_quadratic_is_monotone() {
        // L(θ) = θ₁² + 2 θ₂², gradient (2θ₁, 4θ₂); η < 1/4 converges
        let mut theta = vec![2.0, -1.5];
        let mut opt = Optimizer::new(OptimizerKind::Sgd, 0.1, 2);
        let loss = |th: &[f64]| th[0] * th[0] + 2.0 * th[1] * th[1];
        let mut last = loss(&theta);
        for _ in 0..50 {
            let g = vec![2.0 * theta[0], 4.0 * theta[1]];
            opt.step(&mut theta, &g);
            let now = loss(&theta);
            assert!(now <= last, "loss increased {last} -> {now}");
            last = now;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn adam_zero_gradient_fixed_point() {
        let mut theta = vec![1.0, -2.0, 3.0];
        let before = theta.clone();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.1, 3);
        for _ in 0..5 {
            opt.step(&mut theta, &[0.0, 0.0, 0.0]);
        }
        assert_eq!(theta, before);
    }

    #[test]
    fn epoch_budget_runs_are_bitwise_deterministic() {
        let traj = cycle_traj(300, 3);
        let cfg = MlpConfig::new(2, 4, 1)
            .with_activation(Activation::Softplus { beta: 8.0 })
            .with_seed(4);
        let tcfg = quick_tcfg(4);
        let a = train(&cfg, &traj, 2, &tcfg).unwrap();
        let b = train(&cfg, &traj, 2, &tcfg).unwrap();
        assert_eq!(a.loss_curve, b.loss_curve);
        assert_eq!(a.grad_norm_curve, b.grad_norm_curve);
        assert_eq!(a.val_curve, b.val_curve);
        assert_eq!(a.final_params.values(), b.final_params.values());
    }

    #[test]
    fn validation_split_is_disjoint_and_chronological() {
        let traj = cycle_traj(120, 6);
        let (tr, va) = split_windows(&traj, 5, 0.2).unwrap();
        assert!(tr.iter().all(|m| !va.contains(m)));
        assert_eq!(*va.first().unwrap(), *tr.last().unwrap() + 1);
        assert_eq!(tr.len() + va.len(), arloss::window_count(&traj, 5));
    }

    #[test]
    fn grad_stop_fires_iff_last_grad_below_gamma() {
        let traj = cycle_traj(200, 7);
        let cfg = MlpConfig::new(2, 4, 1).with_seed(8);
        // enormous gamma: first step always stops
        let tcfg = quick_tcfg(50).with_grad_stop(1e9);
        let report = train(&cfg, &traj, 1, &tcfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::GradStop);
        assert_eq!(report.steps, 1);
        assert!(report.grad_norm_curve.last().unwrap() < &1e9);
        // zero gamma: never stops early
        let tcfg = quick_tcfg(2).with_grad_stop(0.0);
        let report = train(&cfg, &traj, 1, &tcfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::Budget);
    }

    #[test]
    fn divergence_is_reported_not_propagated() {
        let traj = cycle_traj(200, 9);
        let cfg = MlpConfig::new(2, 4, 2).with_seed(10);
        let mut tcfg = quick_tcfg(40);
        tcfg.optimizer = OptimizerKind::Sgd;
        tcfg.eta = 1e4;
        let report = train(&cfg, &traj, 5, &tcfg).unwrap();
        assert_eq!(report.stop_reason, StopReason::Divergence);
    }

    #[test]
    fn training_reduces_validation_loss() {
        let traj = cycle_traj(400, 11);
        let cfg = MlpConfig::new(2, 6, 2)
            .with_activation(Activation::Softplus { beta: 8.0 })
            .with_seed(12);
        let tcfg = TrainConfig::new(3e-3, Budget::Epochs(60))
            .with_seed(13)
            .with_batch_size(128);
        let report = train(&cfg, &traj, 1, &tcfg).unwrap();
        // normalized data has total variance ≈ dim
        let variance = traj.total_variance();
        assert!(
            report.best_val < 0.1 * variance,
            "best val {} vs variance {}",
            report.best_val,
            variance
        );
        assert!(report.val_curve.first().unwrap() > report.val_curve.last().unwrap());
    }

    #[test]
    fn curriculum_single_phase_reduces_to_train() {
        let traj = cycle_traj(200, 14);
        let cfg = MlpConfig::new(2, 4, 1).with_seed(15);
        let tcfg = quick_tcfg(6);
        let reports = curriculum_train(&cfg, &traj, 1, Budget::Epochs(6), &tcfg).unwrap();
        assert_eq!(reports.len(), 1);
        let direct = train(&cfg, &traj, 1, &tcfg).unwrap();
        assert_eq!(
            reports[0].final_params.values(),
            direct.final_params.values()
        );
        assert_eq!(reports[0].loss_curve, direct.loss_curve);
    }

    #[test]
    fn curriculum_carries_parameters() {
        let traj = cycle_traj(240, 16);
        let cfg = MlpConfig::new(2, 4, 1).with_seed(17);
        let tcfg = quick_tcfg(9);
        let reports = curriculum_train(&cfg, &traj, 3, Budget::Epochs(9), &tcfg).unwrap();
        assert_eq!(reports.len(), 3);
        for k in 1..3 {
            assert_eq!(
                reports[k].initial_params.values(),
                reports[k - 1].final_params.values()
            );
        }
    }

    #[test]
    fn evaluate_perfect_model_zero_everywhere() {
        let cfg = MlpConfig::new(2, 3, 1).with_residual(true);
        let params = net::identity_params(&cfg);
        let traj = Trajectory::new(Mat::from_vec(40, 2, vec![0.25; 80]), 1.0);
        let map = evaluate(&cfg, &params, &traj, &[1, 3, 7], 0.2).unwrap();
        assert_eq!(map.len(), 3);
        for (&t, &v) in &map {
            assert!(v < 1e-28, "horizon {t} loss {v}");
        }
        assert!(map.contains_key(&7));
    }

    #[test]
    fn evaluate_reports_exactly_requested_horizons() {
        let traj = cycle_traj(150, 18);
        let cfg = MlpConfig::new(2, 4, 1).with_seed(19);
        let params = net::init(&cfg);
        let map = evaluate(&cfg, &params, &traj, &[2, 5], 0.2).unwrap();
        let keys: Vec<usize> = map.keys().copied().collect();
        assert_eq!(keys, vec![2, 5]);
    }

    #[test]
    fn sweep_single_cell_matches_direct_train() {
        let spec = SystemSpec::limit_cycle().with_hopf_normal_form(true);
        let raw = integrate(&spec, &spec.default_initial_state(20), 0.5, 250, Method::Dopri5)
            .unwrap();
        let base = MlpConfig::new(2, 4, 1);
        let grid = SweepGrid {
            horizons: vec![2],
            etas: vec![1e-3],
            sigmas: vec![0.0],
            sizes: vec![(4, 1)],
        };
        let tcfg = quick_tcfg(25);
        let cells = sweep(&base, &raw, &grid, &tcfg, "limit_cycle");
        assert_eq!(cells.len(), 1);
        let cell = &cells[0];
        // replicate the cell's deterministic pipeline
        let seed = mix(tcfg.seed, 0);
        let noisy = add_observation_noise(&raw, 0.0, seed);
        let prepared = normalize(&noisy).unwrap();
        let model = MlpConfig {
            seed,
            ..base.clone()
        };
        let mut cell_tcfg = tcfg.clone();
        cell_tcfg.seed = seed;
        let direct = train(&model, &prepared, 2, &cell_tcfg).unwrap();
        assert_eq!(cell.best_val_loss, direct.best_val);
        assert_eq!(cell.steps, direct.steps);
        assert!(!cell.failed);
    }

    #[test]
    fn sweep_grid_order_is_deterministic() {
        let spec = SystemSpec::limit_cycle().with_hopf_normal_form(true);
        let raw = integrate(&spec, &spec.default_initial_state(21), 0.5, 200, Method::Dopri5)
            .unwrap();
        let base = MlpConfig::new(2, 2, 1);
        let grid = SweepGrid {
            horizons: vec![1, 2],
            etas: vec![1e-3, 1e-2],
            sigmas: vec![0.0],
            sizes: vec![(2, 1)],
        };
        let tcfg = quick_tcfg(2);
        let a = sweep(&base, &raw, &grid, &tcfg, "limit_cycle");
        let b = sweep(&base, &raw, &grid, &tcfg, "limit_cycle");
        assert_eq!(a.len(), 4);
        for (x, y) in a.iter().zip(&b) {
            // identical up to wall time, which is not deterministic
            let strip = |r: &SweepCell| {
                let row = r.csv_row();
                row.rsplit_once(',').unwrap().0.to_string()
            };
            assert_eq!(strip(x), strip(y));
        }
    }
}
