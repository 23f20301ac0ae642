//! Lyapunov spectrum estimation (tangent-frame QR method) and an
//! independent two-trajectory divergence-slope estimate of the leading
//! exponent.

use super::integrate::{advance, advance_with_frame, Method};
use super::VectorField;
use crate::error::{Error, Result};
use crate::linalg::{linear_fit, norm, Mat};
use crate::rng::{stream, Stream};
use rand_distr::{Distribution, StandardNormal};

/// Full Lyapunov spectrum, per unit system time, sorted descending.
///
/// Propagates an orthonormal tangent frame through the flow-map Jacobian
/// one sampling step at a time, re-orthonormalizing with QR and averaging
/// the log diagonal growth factors over the steps after `discard`.
pub fn lyapunov_spectrum<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    dt: f64,
    n_steps: usize,
    discard: usize,
) -> Result<Vec<f64>> {
    if n_steps <= discard {
        return Err(Error::Argument("n_steps must exceed discard".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Argument("dt must be positive".into()));
    }
    let d = field.dim();
    if x0.len() != d {
        return Err(Error::Argument(format!(
            "initial state has length {}, expected {}",
            x0.len(),
            d
        )));
    }
    let mut x = x0.to_vec();
    let mut frame = Mat::identity(d);
    let mut sums = vec![0.0; d];
    for step in 0..n_steps {
        advance_with_frame(field, &mut x, &mut frame, dt).map_err(|e| match e {
            Error::Numeric(msg) => Error::Divergence {
                step: step + 1,
                context: msg,
            },
            other => other,
        })?;
        let rdiag = frame.qr_in_place();
        if step >= discard {
            for (s, r) in sums.iter_mut().zip(&rdiag) {
                if *r <= 0.0 {
                    return Err(Error::Numeric(
                        "degenerate tangent frame in QR step".into(),
                    ));
                }
                *s += r.ln();
            }
        }
    }
    let span = (n_steps - discard) as f64 * dt;
    let mut exps: Vec<f64> = sums.into_iter().map(|s| s / span).collect();
    exps.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(exps)
}

/// Independent estimate of the leading exponent: perturb by `d0`, integrate
/// both trajectories with the full nonlinear flow, fit the slope of
/// log-distance against time before the separation saturates, and average
/// the slopes over `legs` restarts.
pub fn divergence_slope<F: VectorField + ?Sized>(
    field: &F,
    x0: &[f64],
    dt: f64,
    d0: f64,
    saturation: f64,
    legs: usize,
    seed: u64,
) -> Result<f64> {
    let d = field.dim();
    let mut rng = stream(seed, Stream::Directions);
    let mut x = x0.to_vec();
    let mut slopes = Vec::with_capacity(legs);
    for _ in 0..legs {
        let mut dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm(&dir);
        dir.iter_mut().for_each(|v| *v /= n);
        let mut y: Vec<f64> = x.iter().zip(&dir).map(|(xi, r)| xi + d0 * r).collect();
        let mut ts = Vec::new();
        let mut logd = Vec::new();
        let mut t = 0.0;
        loop {
            advance(field, &mut x, dt, Method::Rk4)?;
            advance(field, &mut y, dt, Method::Rk4)?;
            t += dt;
            let dist: f64 = x
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            if dist >= saturation || !dist.is_finite() {
                break;
            }
            ts.push(t);
            logd.push(dist.ln());
        }
        if ts.len() < 8 {
            return Err(Error::Numeric(
                "divergence fit window too short; lower d0 or raise saturation".into(),
            ));
        }
        let (_, slope, _) = linear_fit(&ts, &logd);
        slopes.push(slope);
    }
    Ok(slopes.iter().sum::<f64>() / slopes.len() as f64)
}
