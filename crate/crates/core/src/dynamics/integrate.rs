//! Fixed-step RK4 and adaptive Dormand–Prince integration.
//!
//! Both integrators restart their step-size state at every sampling
//! boundary, so integrating `a+b` samples is bit-identical to integrating
//! `a` samples and continuing for `b` more from the stored row. Shooting
//! losses rely on this to reproduce observed segments exactly at the true
//! parameters.

use super::trajectory::Trajectory;
use super::VectorField;
use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4,
    Dopri5,
}

impl Method {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "rk4" => Ok(Method::Rk4),
            "dopri5" => Ok(Method::Dopri5),
            other => Err(Error::Argument(format!("unknown method '{other}'"))),
        }
    }
}

/// Largest internal RK4 step, in system time units.
pub const RK4_H_MAX: f64 = 0.01;

const DOPRI_RTOL: f64 = 1e-9;
const DOPRI_ATOL: f64 = 1e-9;
const BLOWUP: f64 = 1e12;
const MAX_SUBSTEPS: usize = 200_000;

/// One classical RK4 step of size `h`, in place.
pub fn rk4_step<F: VectorField + ?Sized>(field: &F, x: &mut [f64], h: f64) -> Result<()> {
    let d = x.len();
    let mut k1 = vec![0.0; d];
    let mut k2 = vec![0.0; d];
    let mut k3 = vec![0.0; d];
    let mut k4 = vec![0.0; d];
    let mut tmp = vec![0.0; d];

    field.eval(x, &mut k1)?;
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    field.eval(&tmp, &mut k2)?;
    for i in 0..d {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    field.eval(&tmp, &mut k3)?;
    for i in 0..d {
        tmp[i] = x[i] + h * k3[i];
    }
    field.eval(&tmp, &mut k4)?;
    for i in 0..d {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    Ok(())
}

fn rk4_interval<F: VectorField + ?Sized>(field: &F, x: &mut [f64], dt: f64) -> Result<()> {
    let n_sub = (dt / RK4_H_MAX).ceil().max(1.0) as usize;
    let h = dt / n_sub as f64;
    for _ in 0..n_sub {
        rk4_step(field, x, h)?;
    }
    Ok(())
}

// Dormand–Prince 5(4) tableau.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// 5th-order weights equal the last A row; these are the embedded 4th-order ones.
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri5_interval<F: VectorField + ?Sized>(field: &F, x: &mut Vec<f64>, dt: f64) -> Result<()> {
    let d = x.len();
    let mut t = 0.0;
    let mut h = dt.min(RK4_H_MAX);
    let mut k: Vec<Vec<f64>> = (0..7).map(|_| vec![0.0; d]).collect();
    let mut stage = vec![0.0; d];
    let mut y5 = vec![0.0; d];
    let mut substeps = 0;

    while t < dt {
        if substeps > MAX_SUBSTEPS {
            return Err(Error::Numeric(
                "dopri5: step budget exhausted within one sampling interval".into(),
            ));
        }
        substeps += 1;
        if h < 1e-14 * dt.max(1.0) {
            return Err(Error::Numeric("dopri5: step size underflow".into()));
        }
        let h_eff = h.min(dt - t);

        field.eval(x, &mut k[0])?;
        for s in 1..7 {
            for i in 0..d {
                let mut acc = x[i];
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s - 1][j];
                    if a != 0.0 {
                        acc += h_eff * a * kj[i];
                    }
                }
                stage[i] = acc;
            }
            if s < 6 {
                let (head, tail) = k.split_at_mut(s);
                let _ = head;
                field.eval(&stage, &mut tail[0])?;
            } else {
                // stage 7 is evaluated at the 5th-order solution
                y5.copy_from_slice(&stage);
                field.eval(&y5, &mut k[6])?;
            }
        }

        // embedded error estimate: y5 - y4
        let mut err_norm2 = 0.0;
        let b5 = &A[5];
        for i in 0..d {
            let mut e = 0.0;
            for s in 0..7 {
                let b5s = if s < 6 { b5[s] } else { 0.0 };
                e += (b5s - B4[s]) * k[s][i];
            }
            e *= h_eff;
            let sc = DOPRI_ATOL + DOPRI_RTOL * x[i].abs().max(y5[i].abs());
            err_norm2 += (e / sc) * (e / sc);
        }
        let err = (err_norm2 / d as f64).sqrt();

        if err <= 1.0 {
            t += h_eff;
            x.copy_from_slice(&y5);
            if !crate::linalg::all_finite(x) {
                return Err(Error::Numeric("dopri5: non-finite state".into()));
            }
        }
        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = h_eff * factor;
    }
    Ok(())
}

/// Advances `x` by one sampling interval `dt`.
pub fn advance<F: VectorField + ?Sized>(
    field: &F,
    x: &mut Vec<f64>,
    dt: f64,
    method: Method,
) -> Result<()> {
    match method {
        Method::Rk4 => rk4_interval(field, x, dt),
        Method::Dopri5 => dopri5_interval(field, x, dt),
    }
}

/// Integrates `steps` sampling intervals of length `dt` from `x0`,
/// returning a trajectory of `steps + 1` rows whose first row is `x0`.
pub fn integrate<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    dt: f64,
    steps: usize,
    method: Method,
) -> Result<Trajectory> {
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be positive".into()));
    }
    if steps < 1 {
        return Err(Error::Argument("steps must be at least 1".into()));
    }
    if x0.len() != field.dim() {
        return Err(Error::Argument(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            field.dim()
        )));
    }
    let d = x0.len();
    let mut states = Mat::zeros(steps + 1, d);
    states.row_mut(0).copy_from_slice(x0);
    let mut x = x0.to_vec();
    for step in 1..=steps {
        advance(field, &mut x, dt, method).map_err(|e| match e {
            Error::Numeric(msg) => Error::Divergence { step, context: msg },
            other => other,
        })?;
        if x.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP) {
            return Err(Error::Divergence {
                step,
                context: "state exceeded blow-up bound".into(),
            });
        }
        states.row_mut(step).copy_from_slice(&x);
    }
    Ok(Trajectory::new(states, dt))
}

/// Variational system: state augmented with the flow-map Jacobian columns,
/// dJ/dt = J_f(x(t))·J.
struct Variational<'a, F: VectorField + ?Sized> {
    field: &'a F,
    d: usize,
}

impl<F: VectorField + ?Sized> VectorField for Variational<'_, F> {
    fn dim(&self) -> usize {
        self.d + self.d * self.d
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.d;
        self.field.eval(&x[..d], &mut out[..d])?;
        let a = self.field.jacobian_at(&x[..d])?;
        // J is stored row-major after the state.
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for l in 0..d {
                    acc += a.get(i, l) * x[d + l * d + j];
                }
                out[d + i * d + j] = acc;
            }
        }
        Ok(())
    }
}

/// Jacobian of the time-`delta_t` flow map at `x`, by integrating the
/// variational equation with J(0) = I alongside the state (RK4 with the
/// same `RK4_H_MAX` substepping as `integrate`).
pub fn flow_jacobian<F: VectorField + ?Sized>(field: &F, x: &[f64], delta_t: f64) -> Result<Mat> {
    if !(delta_t > 0.0) {
        return Err(Error::Argument("delta_t must be positive".into()));
    }
    let d = field.dim();
    if x.len() != d {
        return Err(Error::Argument(format!(
            "state has length {}, expected {}",
            x.len(),
            d
        )));
    }
    let var = Variational { field, d };
    let mut aug = vec![0.0; d + d * d];
    aug[..d].copy_from_slice(x);
    for i in 0..d {
        aug[d + i * d + i] = 1.0;
    }
    rk4_interval(&var, &mut aug, delta_t)?;
    if !crate::linalg::all_finite(&aug) {
        return Err(Error::Divergence {
            step: 1,
            context: "variational integration produced non-finite values".into(),
        });
    }
    Ok(Mat::from_vec(d, d, aug[d..].to_vec()))
}

/// Advances state and tangent frame jointly over one sampling interval;
/// used by the Lyapunov routine so the frame follows the exact RK4 path.
pub(super) fn advance_with_frame<F: VectorField + ?Sized>(
    field: &F,
    x: &mut Vec<f64>,
    frame: &mut Mat,
    dt: f64,
) -> Result<()> {
    let d = field.dim();
    let var = Variational { field, d };
    let mut aug = vec![0.0; d + d * d];
    aug[..d].copy_from_slice(x);
    aug[d..].copy_from_slice(frame.data());
    rk4_interval(&var, &mut aug, dt)?;
    if !crate::linalg::all_finite(&aug) {
        return Err(Error::Numeric(
            "variational integration produced non-finite values".into(),
        ));
    }
    x.copy_from_slice(&aug[..d]);
    frame.data_mut().copy_from_slice(&aug[d..]);
    Ok(())
}
