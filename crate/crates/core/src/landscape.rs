//! Loss-landscape probes: gradient-norm scaling over the horizon,
//! roughness along parameter segments, Hutchinson Hessian traces, paired
//! minima and their cross-horizon generalization ratio, local-linearization
//! checks against the true flow, parameter scans, and the closed-form
//! noise bound on usable horizons.

use crate::arloss::{self, HorizonLossConfig, NormMode};
use crate::dynamics::{flow_jacobian, Trajectory, VectorField};
use crate::error::{Error, Result};
use crate::linalg::{linear_fit, norm};
use crate::net::{self, MlpConfig, ParamVector};
use crate::optimize::{train_from, TrainConfig, TrainOpts};
use crate::rng::{stream, Stream};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    GradRatio,
    Roughness,
    HessianRatio,
    GenRatio,
    Scan1d,
    Scan2d,
    EpsCheck,
}

impl ProbeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProbeKind::GradRatio => "grad_ratio",
            ProbeKind::Roughness => "roughness",
            ProbeKind::HessianRatio => "hessian_ratio",
            ProbeKind::GenRatio => "gen_ratio",
            ProbeKind::Scan1d => "scan1d",
            ProbeKind::Scan2d => "scan2d",
            ProbeKind::EpsCheck => "eps_check",
        }
    }
}

/// A probe result as a numeric table with kind-specific columns.
///
/// Column schemas: `grad_ratio: T,g` — `roughness: T,z,n_points` —
/// `hessian_ratio: T,trace,ratio,flag` — `gen_ratio: T_l,T_h,r,seed` —
/// `scan1d: coord0,loss,flag` — `scan2d: coord0,coord1,loss,flag` —
/// `eps_check: epsilon,max_deviation,pass`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LandscapeProbe {
    pub kind: ProbeKind,
    /// Echo of the call's arguments, for the manifest.
    pub inputs: serde_json::Value,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub seed: u64,
}

impl LandscapeProbe {
    pub fn to_csv_string(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v:.16e}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// g(T) = ‖∇L(θ, T)‖ / ‖∇L(θ, 1)‖ on the full trajectory (no batching).
pub fn gradient_ratio(
    config: &MlpConfig,
    params: &ParamVector,
    traj: &Trajectory,
    t_list: &[usize],
    norm_mode: NormMode,
) -> Result<LandscapeProbe> {
    if t_list.is_empty() {
        return Err(Error::Argument("need at least one horizon".into()));
    }
    let lcfg1 = HorizonLossConfig {
        horizon: 1,
        norm_mode,
        batch: None,
    };
    let (_, g1) = arloss::horizon_loss_grad(config, params, traj, &lcfg1)?;
    let base = g1.norm();
    if base <= 1e-12 {
        return Err(Error::DegenerateMinimum { min_norm: 1e-12 });
    }
    let mut rows = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let g = if t == 1 {
            1.0
        } else {
            let lcfg = HorizonLossConfig {
                horizon: t,
                norm_mode,
                batch: None,
            };
            let (_, gt) = arloss::horizon_loss_grad(config, params, traj, &lcfg)?;
            gt.norm() / base
        };
        rows.push(vec![t as f64, g]);
    }
    Ok(LandscapeProbe {
        kind: ProbeKind::GradRatio,
        inputs: serde_json::json!({"t_list": t_list, "samples": traj.len()}),
        columns: vec!["T".into(), "g".into()],
        rows,
        seed: 0,
    })
}

/// Model comparison for g(T) growth: an exponential `A·exp(b·t)` fitted by
/// log-linear regression against a straight line, both scored on the
/// original scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GrowthFits {
    pub exp_rate: f64,
    pub exp_r2: f64,
    pub lin_slope: f64,
    pub lin_r2: f64,
    /// Gaussian AIC difference (exp − lin); negative favors the exponential.
    pub aic_exp_minus_lin: f64,
}

/// Fits both growth models to (t, g) pairs. `ts` should be in system time
/// units (T·dt) so rates are comparable across sampling steps.
pub fn fit_growth(ts: &[f64], gs: &[f64]) -> Result<GrowthFits> {
    if ts.len() != gs.len() || ts.len() < 3 {
        return Err(Error::Argument("need at least 3 fit points".into()));
    }
    if gs.iter().any(|&g| !(g > 0.0)) {
        return Err(Error::Numeric("gradient ratios must be positive".into()));
    }
    let logs: Vec<f64> = gs.iter().map(|g| g.ln()).collect();
    let (log_a, b, _) = linear_fit(ts, &logs);
    let (c, m, _) = linear_fit(ts, gs);
    let n = ts.len() as f64;
    let mean_g = gs.iter().sum::<f64>() / n;
    let mut ss_tot = 0.0;
    let mut rss_exp = 0.0;
    let mut rss_lin = 0.0;
    for (t, g) in ts.iter().zip(gs) {
        let pe = (log_a + b * t).exp();
        let pl = c + m * t;
        rss_exp += (g - pe) * (g - pe);
        rss_lin += (g - pl) * (g - pl);
        ss_tot += (g - mean_g) * (g - mean_g);
    }
    let r2 = |rss: f64| if ss_tot > 0.0 { 1.0 - rss / ss_tot } else { 1.0 };
    // same parameter count (2), so the AIC difference reduces to the RSS term
    let aic = n * (rss_exp.max(1e-300) / n).ln() - n * (rss_lin.max(1e-300) / n).ln();
    Ok(GrowthFits {
        exp_rate: b,
        exp_r2: r2(rss_exp),
        lin_slope: m,
        lin_r2: r2(rss_lin),
        aic_exp_minus_lin: aic,
    })
}

/// Counts interior extrema of `values` sampled along a segment: strict sign
/// changes of consecutive differences, with |difference| below
/// `flat_tol · (max − min)` treated as zero slope.
pub fn count_extrema(values: &[f64], flat_tol: f64) -> usize {
    if values.len() < 3 {
        return 0;
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    if span <= 0.0 {
        return 0;
    }
    let tol = flat_tol * span;
    let mut signs = Vec::with_capacity(values.len() - 1);
    for pair in values.windows(2) {
        let d = pair[1] - pair[0];
        if d.abs() <= tol {
            continue; // flat: carries no slope information
        }
        signs.push(d > 0.0);
    }
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Evaluates `loss` at `n_points` equispaced points on the segment from
/// `theta1` to `theta2` (inclusive) and counts interior extrema.
pub fn segment_roughness<F>(
    loss: F,
    theta1: &[f64],
    theta2: &[f64],
    n_points: usize,
    flat_tol: f64,
) -> Result<usize>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if n_points < 3 {
        return Err(Error::Argument("n_points must be at least 3".into()));
    }
    if theta1.len() != theta2.len() {
        return Err(Error::Argument("segment endpoints differ in length".into()));
    }
    if theta1 == theta2 {
        return Err(Error::Argument("segment endpoints coincide".into()));
    }
    let values: Vec<Result<f64>> = (0..n_points)
        .into_par_iter()
        .map(|k| {
            let s = k as f64 / (n_points - 1) as f64;
            let point: Vec<f64> = theta1
                .iter()
                .zip(theta2)
                .map(|(a, b)| a + s * (b - a))
                .collect();
            loss(&point)
        })
        .collect();
    let values: Result<Vec<f64>> = values.into_iter().collect();
    Ok(count_extrema(&values?, flat_tol))
}

/// Default segment resolution: points per unit parameter-space distance.
pub const ROUGHNESS_POINTS_PER_UNIT: usize = 512;
pub const ROUGHNESS_FLAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_probes: usize,
}

/// Hutchinson trace estimator with Hessian-vector products by central
/// differences of the gradient: Hv ≈ (∇L(θ+sv) − ∇L(θ−sv)) / 2s with
/// s = fd_step·(1+‖θ‖)/‖v‖ and Rademacher probes v.
pub fn hessian_trace<G>(
    loss_grad: G,
    params: &[f64],
    n_probes: usize,
    fd_step: f64,
    seed: u64,
) -> Result<TraceEstimate>
where
    G: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if n_probes == 0 {
        return Err(Error::Argument("need at least one probe".into()));
    }
    if !(fd_step > 0.0) {
        return Err(Error::Argument("fd_step must be positive".into()));
    }
    let n = params.len();
    let mut rng = stream(seed, Stream::Hessian);
    let probes: Vec<Vec<f64>> = (0..n_probes)
        .map(|_| {
            (0..n)
                .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();
    let scale = fd_step * (1.0 + norm(params));
    let samples: Vec<Result<f64>> = probes
        .par_iter()
        .map(|v| {
            let s = scale / norm(v);
            let plus: Vec<f64> = params.iter().zip(v).map(|(p, vi)| p + s * vi).collect();
            let minus: Vec<f64> = params.iter().zip(v).map(|(p, vi)| p - s * vi).collect();
            let gp = loss_grad(&plus)?;
            let gm = loss_grad(&minus)?;
            let mut quad = 0.0;
            for i in 0..n {
                quad += v[i] * (gp[i] - gm[i]) / (2.0 * s);
            }
            Ok(quad)
        })
        .collect();
    let samples: Result<Vec<f64>> = samples.into_iter().collect();
    let samples = samples?;
    let mean = samples.iter().sum::<f64>() / n_probes as f64;
    let var = samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / n_probes as f64;
    let std_error = if n_probes > 1 {
        (var / (n_probes - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(TraceEstimate {
        estimate: mean,
        std_error,
        n_probes,
    })
}

pub const HESSIAN_PROBES_DEFAULT: usize = 100;
pub const HESSIAN_FD_STEP_DEFAULT: f64 = 1e-4;

/// Hessian-trace ratios of per-horizon minima against the T = 1 minimum.
/// Each minimum must be stationary for its own loss: ‖∇L(θ_T, T)‖ < 10γ.
/// Saddle-like negative traces are kept in the table but flagged (flag = 1)
/// and excluded from trend analysis by callers.
pub fn hessian_ratio(
    config: &MlpConfig,
    traj: &Trajectory,
    minima: &BTreeMap<usize, ParamVector>,
    t_list: &[usize],
    gamma: f64,
    windows: Option<Vec<usize>>,
    seed: u64,
) -> Result<LandscapeProbe> {
    if !minima.contains_key(&1) {
        return Err(Error::Argument("minima must include T = 1".into()));
    }
    let loss_cfg = |t: usize| HorizonLossConfig {
        horizon: t,
        norm_mode: NormMode::Squared,
        batch: windows.clone(),
    };
    let mut traces: BTreeMap<usize, f64> = BTreeMap::new();
    for (&t, theta) in minima {
        let lcfg = loss_cfg(t);
        let (_, grad) = arloss::horizon_loss_grad(config, theta, traj, &lcfg)?;
        let gn = grad.norm();
        if gn >= 10.0 * gamma {
            return Err(Error::NonStationary {
                horizon: t,
                grad_norm: gn,
                threshold: 10.0 * gamma,
            });
        }
        let grad_fn = |values: &[f64]| -> Result<Vec<f64>> {
            let p = ParamVector::from_values(config, values.to_vec())?;
            let (_, g) = arloss::horizon_loss_grad(config, &p, traj, &lcfg)?;
            Ok(g.values().to_vec())
        };
        let est = hessian_trace(
            grad_fn,
            theta.values(),
            HESSIAN_PROBES_DEFAULT,
            HESSIAN_FD_STEP_DEFAULT,
            seed,
        )?;
        traces.insert(t, est.estimate);
    }
    let base = traces[&1];
    if base.abs() <= 1e-300 {
        return Err(Error::DegenerateMinimum { min_norm: 1e-300 });
    }
    let mut rows = Vec::new();
    for &t in t_list {
        let trace = *traces.get(&t).ok_or_else(|| {
            Error::Argument(format!("no minimum supplied for horizon {t}"))
        })?;
        let flag = if trace < 0.0 { 1.0 } else { 0.0 };
        rows.push(vec![t as f64, trace, trace / base, flag]);
    }
    Ok(LandscapeProbe {
        kind: ProbeKind::HessianRatio,
        inputs: serde_json::json!({"t_list": t_list, "gamma": gamma}),
        columns: vec!["T".into(), "trace".into(), "ratio".into(), "flag".into()],
        rows,
        seed,
    })
}

/// Trains a verified basin pair: θ_l at T_l from scratch, θ_h at T_h from
/// θ_l, then re-trains from θ_h at T_l and requires landing back within
/// `delta_pair` relative parameter distance of θ_l.
pub fn paired_minima(
    config: &MlpConfig,
    traj: &Trajectory,
    t_low: usize,
    t_high: usize,
    tcfg: &TrainConfig,
    delta_pair: f64,
) -> Result<(ParamVector, ParamVector)> {
    if t_low >= t_high {
        return Err(Error::Argument("t_low must be below t_high".into()));
    }
    let low = train_from(config, traj, t_low, tcfg, TrainOpts::default())?;
    let theta_l = low.final_params;
    let high = train_from(
        config,
        traj,
        t_high,
        tcfg,
        TrainOpts {
            initial: Some(&theta_l),
            deadline: None,
        },
    )?;
    let theta_h = high.final_params;
    let check = train_from(
        config,
        traj,
        t_low,
        tcfg,
        TrainOpts {
            initial: Some(&theta_h),
            deadline: None,
        },
    )?;
    let rel = check.final_params.rel_distance(&theta_l);
    if rel > delta_pair {
        return Err(Error::BasinMismatch {
            rel_dist: rel,
            tolerance: delta_pair,
        });
    }
    Ok((theta_l, theta_h))
}

pub const DELTA_PAIR_DEFAULT: f64 = 0.05;

/// Cross-horizon generalization ratio of a verified pair, on the given
/// validation windows (squared mode, matching the training objective):
/// r = (L(θ_h,T_h) − L(θ_l,T_h)) / (L(θ_l,T_l) − L(θ_h,T_l)).
pub fn generalization_ratio(
    config: &MlpConfig,
    traj: &Trajectory,
    theta_l: &ParamVector,
    theta_h: &ParamVector,
    t_low: usize,
    t_high: usize,
    val_windows: Option<Vec<usize>>,
) -> Result<f64> {
    let lcfg = |t: usize| HorizonLossConfig {
        horizon: t,
        norm_mode: NormMode::Squared,
        batch: val_windows.clone(),
    };
    let l_h_th = arloss::horizon_loss(config, theta_h, traj, &lcfg(t_high))?;
    let l_l_th = arloss::horizon_loss(config, theta_l, traj, &lcfg(t_high))?;
    let l_l_tl = arloss::horizon_loss(config, theta_l, traj, &lcfg(t_low))?;
    let l_h_tl = arloss::horizon_loss(config, theta_h, traj, &lcfg(t_low))?;
    let denom = l_l_tl - l_h_tl;
    if denom.abs() <= 1e-12 {
        return Err(Error::IndeterminateRatio {
            denom: denom.abs(),
            min_denom: 1e-12,
        });
    }
    Ok((l_h_th - l_l_th) / denom)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsCheck {
    pub max_deviation: f64,
    pub pass: bool,
}

/// Checks the local-linearization condition against the true flow: for
/// states x and random unit directions r̂,
/// ‖f(x+εr̂) − (f(x) + J_φ(x)·εr̂)‖ < ε², with J_φ the one-sampling-step
/// flow Jacobian of the reference system.
pub fn epsilon_region_check_with<F, V>(
    mut model: F,
    reference: &V,
    dt: f64,
    states: &[Vec<f64>],
    epsilon: f64,
    n_directions: usize,
    seed: u64,
) -> Result<EpsCheck>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
    V: VectorField + ?Sized,
{
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    if states.is_empty() || n_directions == 0 {
        return Err(Error::Argument(
            "need at least one state and one direction".into(),
        ));
    }
    let d = reference.dim();
    let mut rng = stream(seed, Stream::Directions);
    let mut max_dev = 0.0f64;
    for x in states {
        let fx = model(x)?;
        let jac = flow_jacobian(reference, x, dt)?;
        for _ in 0..n_directions {
            let mut r: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
            let rn = norm(&r);
            r.iter_mut().for_each(|v| *v /= rn);
            let xp: Vec<f64> = x.iter().zip(&r).map(|(xi, ri)| xi + epsilon * ri).collect();
            let fxp = model(&xp)?;
            let lin = jac.matvec(&r);
            let mut dev = 0.0;
            for i in 0..d {
                let diff = fxp[i] - (fx[i] + lin[i] * epsilon);
                dev += diff * diff;
            }
            max_dev = max_dev.max(dev.sqrt());
        }
    }
    Ok(EpsCheck {
        max_deviation: max_dev,
        pass: max_dev < epsilon * epsilon,
    })
}

/// MLP flavor of the check; model and states share the trajectory's
/// coordinate system (pass raw-space states for raw-space models).
pub fn epsilon_region_check<V>(
    config: &MlpConfig,
    params: &ParamVector,
    reference: &V,
    dt: f64,
    states: &[Vec<f64>],
    epsilon: f64,
    n_directions: usize,
    seed: u64,
) -> Result<EpsCheck>
where
    V: VectorField + ?Sized,
{
    epsilon_region_check_with(
        |x| net::forward(config, params, x).map(|(y, _)| y),
        reference,
        dt,
        states,
        epsilon,
        n_directions,
        seed,
    )
}

/// Grid evaluation of a loss along 1 or 2 parameter dimensions around a
/// center point. Divergent cells are flagged (flag = 1, loss NaN) rather
/// than failing the scan. With `normalize`, finite losses are divided by
/// the grid maximum so the top of the scan is exactly 1.
pub fn param_scan<F>(
    loss: F,
    theta_center: &[f64],
    dims: &[usize],
    ranges: &[(f64, f64)],
    n_per_dim: usize,
    normalize: bool,
) -> Result<LandscapeProbe>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    if dims.is_empty() || dims.len() > 2 {
        return Err(Error::Argument("dims must have 1 or 2 entries".into()));
    }
    if dims.len() != ranges.len() {
        return Err(Error::Argument("dims and ranges differ in length".into()));
    }
    if n_per_dim < 3 {
        return Err(Error::Argument("n_per_dim must be at least 3".into()));
    }
    if let Some(&bad) = dims.iter().find(|&&d| d >= theta_center.len()) {
        return Err(Error::Argument(format!("dim {bad} out of range")));
    }
    for &(lo, hi) in ranges {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Argument("ranges must be finite with lo < hi".into()));
        }
    }
    let coord = |axis: usize, k: usize| -> f64 {
        let (lo, hi) = ranges[axis];
        lo + (hi - lo) * k as f64 / (n_per_dim - 1) as f64
    };
    let total = if dims.len() == 1 {
        n_per_dim
    } else {
        n_per_dim * n_per_dim
    };
    let evaluated: Vec<(Vec<f64>, Option<f64>)> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let coords: Vec<f64> = if dims.len() == 1 {
                vec![coord(0, idx)]
            } else {
                vec![coord(0, idx / n_per_dim), coord(1, idx % n_per_dim)]
            };
            let mut theta = theta_center.to_vec();
            for (axis, &dim) in dims.iter().enumerate() {
                theta[dim] = coords[axis];
            }
            let value = match loss(&theta) {
                Ok(v) if v.is_finite() => Some(v),
                _ => None,
            };
            (coords, value)
        })
        .collect();

    let max = evaluated
        .iter()
        .filter_map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = if normalize && max > 0.0 { max } else { 1.0 };
    let mut rows = Vec::with_capacity(total);
    for (coords, value) in evaluated {
        let mut row = coords;
        match value {
            Some(v) => {
                row.push(v / scale);
                row.push(0.0);
            }
            None => {
                row.push(f64::NAN);
                row.push(1.0);
            }
        }
        rows.push(row);
    }
    let (kind, columns) = if dims.len() == 1 {
        (
            ProbeKind::Scan1d,
            vec!["coord0".into(), "loss".into(), "flag".into()],
        )
    } else {
        (
            ProbeKind::Scan2d,
            vec![
                "coord0".into(),
                "coord1".into(),
                "loss".into(),
                "flag".into(),
            ],
        )
    };
    Ok(LandscapeProbe {
        kind,
        inputs: serde_json::json!({"dims": dims, "ranges": ranges, "n_per_dim": n_per_dim, "normalize": normalize}),
        columns,
        rows,
        seed: 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmaxKind {
    Chaotic,
    LimitCycle,
}

/// Closed-form bound on the usable forecasting horizon under observation
/// noise σ: (ln S − ln σ)/λ for chaotic systems (S the state-space radius),
/// L/σ for limit cycles (L the cycle length). σ = 0 signals an unbounded
/// horizon via +∞, a distinguished value rather than an error.
pub fn t_max_estimate(kind: TmaxKind, rate: f64, sigma: f64, scale: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::Argument("sigma must be non-negative".into()));
    }
    if sigma == 0.0 {
        return Ok(f64::INFINITY);
    }
    match kind {
        TmaxKind::Chaotic => {
            if !(rate > 0.0) {
                return Err(Error::Argument(
                    "chaotic bound needs a positive Lyapunov exponent".into(),
                ));
            }
            if !(scale > 0.0) {
                return Err(Error::Argument("state-space radius must be positive".into()));
            }
            Ok((scale.ln() - sigma.ln()) / rate)
        }
        TmaxKind::LimitCycle => {
            if !(scale > 0.0) {
                return Err(Error::Argument("cycle length must be positive".into()));
            }
            Ok(scale / sigma)
        }
    }
}

use rand::Rng as _;
