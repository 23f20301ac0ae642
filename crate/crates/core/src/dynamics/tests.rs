use super::*;
use crate::linalg::{dist2, norm, Mat};
use proptest::prelude::*;

/// Zero vector field used by the external-system examples.
pub struct ZeroField(pub usize);

impl VectorField for ZeroField {
    fn dim(&self) -> usize {
        self.0
    }
    fn eval(&self, _x: &[f64], out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        Ok(())
    }
}

/// The limit cycle is exercised in its Hopf-normal-form variant: the
/// verbatim cubic escapes to infinity from generic starts, so only the
/// corrected variant has an attractor to sample.
fn all_specs() -> Vec<SystemSpec> {
    vec![
        SystemSpec::lorenz(),
        SystemSpec::double_pendulum(),
        SystemSpec::food_web(),
        SystemSpec::limit_cycle().with_hopf_normal_form(true),
    ]
}

/// Rows from the system's attractor (transient dropped), for oracle tests.
fn attractor_rows(spec: &SystemSpec, n: usize) -> Vec<Vec<f64>> {
    let x0 = spec.default_initial_state(11);
    let steps = 4 * n;
    let traj = integrate(spec, &x0, spec.default_dt, steps, Method::Rk4).unwrap();
    let skip = steps / 2;
    (0..n)
        .map(|i| traj.row(skip + i * 2).to_vec())
        .filter(|row| spec.kind != SystemKind::FoodWeb || row.iter().all(|&v| v > 1e-4))
        .collect()
}

#[test]
fn derivative_lorenz_hand_evaluated() {
    let spec = SystemSpec::lorenz();
    let d = derivative(&spec, &[1.0, 1.0, 1.0]).unwrap();
    assert_eq!(d[0], 0.0);
    assert_eq!(d[1], 26.0);
    assert!((d[2] - (1.0 - 8.0 / 3.0)).abs() < 1e-15);
}

#[test]
fn derivative_limit_cycle_origin_fixed_point() {
    let spec = SystemSpec::limit_cycle();
    assert_eq!(derivative(&spec, &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
}

#[test]
fn derivative_food_web_extinction_fixed_point() {
    let spec = SystemSpec::food_web();
    let d = derivative(&spec, &[0.0; 7]).unwrap();
    assert_eq!(d, vec![0.0; 7]);
}

#[test]
fn derivative_rejects_bad_input() {
    let spec = SystemSpec::lorenz();
    assert!(matches!(
        derivative(&spec, &[1.0, 2.0]),
        Err(Error::Argument(_))
    ));
    assert!(matches!(
        derivative(&spec, &[f64::NAN, 0.0, 0.0]),
        Err(Error::Numeric(_))
    ));
    let web = SystemSpec::food_web();
    assert!(matches!(
        derivative(&web, &[-0.1, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        Err(Error::Argument(_))
    ));
}

#[test]
fn jacobian_limit_cycle_at_origin() {
    let spec = SystemSpec::limit_cycle();
    let j = jacobian(&spec, &[0.0, 0.0]).unwrap();
    let expected = Mat::from_rows(&[vec![0.4, -1.0], vec![1.0, 0.4]]);
    assert!(j.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn jacobian_lorenz_at_origin() {
    let spec = SystemSpec::lorenz();
    let j = jacobian(&spec, &[0.0, 0.0, 0.0]).unwrap();
    let expected = Mat::from_rows(&[
        vec![-10.0, 10.0, 0.0],
        vec![28.0, -1.0, 0.0],
        vec![0.0, 0.0, -8.0 / 3.0],
    ]);
    assert!(j.max_abs_diff(&expected) < 1e-15);
}

/// Central-difference oracle: analytic Jacobians match finite differences of
/// `derivative` at attractor points for every built-in system.
#[test]
fn jacobian_matches_finite_differences_on_attractors() {
    for spec in all_specs() {
        for x in attractor_rows(&spec, 25) {
            let analytic = jacobian(&spec, &x).unwrap();
            let d = spec.dim;
            let mut fd = Mat::zeros(d, d);
            for j in 0..d {
                let h = 1e-6 * x[j].abs().max(1.0);
                let mut xp = x.clone();
                xp[j] += h;
                let fp = derivative(&spec, &xp).unwrap();
                xp[j] = x[j] - h;
                let fm = derivative(&spec, &xp).unwrap();
                for i in 0..d {
                    fd.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
                }
            }
            let diff = analytic.max_abs_diff(&fd);
            assert!(
                diff < 1e-4,
                "{}: jacobian mismatch {diff} at {x:?}",
                spec.kind.name()
            );
        }
    }
}

#[test]
fn integrate_zero_field_is_constant() {
    let traj = integrate(&ZeroField(2), &[2.0, 3.0], 0.1, 10, Method::Rk4).unwrap();
    assert_eq!(traj.len(), 11);
    for i in 0..11 {
        assert_eq!(traj.row(i), &[2.0, 3.0]);
    }
    let traj = integrate(&ZeroField(2), &[2.0, 3.0], 0.1, 10, Method::Dopri5).unwrap();
    for i in 0..11 {
        assert_eq!(traj.row(i), &[2.0, 3.0]);
    }
}

/// Solver cross-validation: rk4 and dopri5 agree over the pre-divergence
/// window of a chaotic run. The measured gap is rk4's global error at the
/// fixed 0.01 substep, chaotically amplified: 9.5e-4 through row 200 and
/// 1.92e-3 through row 250 (dopri5 itself sits within 3e-6 of a 0.0005-step
/// reference there).
#[test]
fn integrate_lorenz_solvers_agree_early() {
    let spec = SystemSpec::lorenz();
    let a = integrate(&spec, &[1.0, 1.0, 1.0], 0.04, 1000, Method::Rk4).unwrap();
    let b = integrate(&spec, &[1.0, 1.0, 1.0], 0.04, 1000, Method::Dopri5).unwrap();
    let mut max_200 = 0.0f64;
    let mut max_250 = 0.0f64;
    for i in 0..250 {
        let d = dist2(a.row(i), b.row(i)).sqrt();
        if i < 200 {
            max_200 = max_200.max(d);
        }
        max_250 = max_250.max(d);
    }
    assert!(max_200 < 1e-3, "solver disagreement {max_200} over 200 rows");
    assert!(max_250 < 2.5e-3, "solver disagreement {max_250} over 250 rows");
}

/// Period measured by a zero-crossing oracle; integrating one period from an
/// on-attractor point returns to it.
#[test]
fn integrate_limit_cycle_period_return() {
    let spec = SystemSpec::limit_cycle().with_hopf_normal_form(true);
    // land on the attractor first
    let start = integrate(&spec, &[1.0, 0.0], 0.5, 200, Method::Dopri5).unwrap();
    let x0 = start.row(200).to_vec();
    // fine sampling for crossing detection of y through 0 with x > 0
    let fine = integrate(&spec, &x0, 0.01, 4000, Method::Rk4).unwrap();
    let mut crossings = Vec::new();
    for i in 1..fine.len() {
        let (y0, y1) = (fine.row(i - 1)[1], fine.row(i)[1]);
        if y0 < 0.0 && y1 >= 0.0 && fine.row(i)[0] > 0.0 {
            let frac = -y0 / (y1 - y0);
            crossings.push((i as f64 - 1.0 + frac) * 0.01);
        }
    }
    assert!(crossings.len() >= 3, "not enough crossings");
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    let one_period = integrate(&spec, &x0, period, 1, Method::Dopri5).unwrap();
    let ret = dist2(one_period.row(1), &x0).sqrt();
    assert!(ret < 1e-2, "period {period}, return distance {ret}");
}

#[test]
fn integrate_detects_blowup() {
    // dx/dt = x^2 from 1 blows up at t = 1
    struct Quad;
    impl VectorField for Quad {
        fn dim(&self) -> usize {
            1
        }
        fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
            out[0] = x[0] * x[0];
            Ok(())
        }
    }
    let err = integrate(&Quad, &[1.0], 0.25, 10, Method::Rk4).unwrap_err();
    match err {
        Error::Divergence { step, .. } => assert!(step >= 3, "blew up too early: {step}"),
        other => panic!("expected divergence, got {other}"),
    }
}

/// One-step RK4 error drops by ~2^4 when the step halves.
#[test]
fn rk4_fourth_order_step_halving() {
    let spec = SystemSpec::lorenz();
    let x0 = vec![1.0, 1.0, 1.0];
    let h = 0.02;
    let reference = {
        let mut x = x0.clone();
        for _ in 0..64 {
            rk4_step(&spec, &mut x, h / 64.0).unwrap();
        }
        x
    };
    let coarse = {
        let mut x = x0.clone();
        rk4_step(&spec, &mut x, h).unwrap();
        x
    };
    let fine = {
        let mut x = x0.clone();
        rk4_step(&spec, &mut x, h / 2.0).unwrap();
        rk4_step(&spec, &mut x, h / 2.0).unwrap();
        x
    };
    let e_coarse = dist2(&coarse, &reference).sqrt();
    let e_fine = dist2(&fine, &reference).sqrt();
    let ratio = e_coarse / e_fine;
    assert!(
        (12.0..=20.0).contains(&ratio),
        "error ratio {ratio} outside [12, 20]"
    );
}

#[test]
fn flow_jacobian_zero_field_is_identity() {
    let j = flow_jacobian(&ZeroField(3), &[1.0, 2.0, 3.0], 0.5).unwrap();
    assert!(j.max_abs_diff(&Mat::identity(3)) < 1e-15);
}

/// First-order Taylor oracle: flow Jacobian ≈ I + J·Δt for small Δt. The
/// Δt per system keeps the quadratic remainder (≈ |J|²Δt²/2) below the
/// tolerance; Lorenz needs a smaller Δt because its Jacobian is large.
#[test]
fn flow_jacobian_taylor_oracle() {
    for (spec, delta_t) in [
        (SystemSpec::limit_cycle().with_hopf_normal_form(true), 1e-4),
        (SystemSpec::food_web(), 1e-4),
        (SystemSpec::double_pendulum(), 1e-4),
        (SystemSpec::lorenz(), 1e-5),
    ] {
        let x = attractor_rows(&spec, 3)[1].clone();
        let fj = flow_jacobian(&spec, &x, delta_t).unwrap();
        let j = jacobian(&spec, &x).unwrap();
        let d = spec.dim;
        let mut taylor = Mat::identity(d);
        for i in 0..d {
            for k in 0..d {
                let v = taylor.get(i, k) + j.get(i, k) * delta_t;
                taylor.set(i, k, v);
            }
        }
        let diff = fj.max_abs_diff(&taylor);
        assert!(diff < 1e-6, "{}: taylor gap {diff}", spec.kind.name());
    }
}

/// Finite-difference flow oracle on Lorenz at the sampling step.
#[test]
fn flow_jacobian_matches_flow_finite_differences() {
    let spec = SystemSpec::lorenz();
    let x = attractor_rows(&spec, 3)[0].clone();
    let dt = 0.04;
    let fj = flow_jacobian(&spec, &x, dt).unwrap();
    let mut fd = Mat::zeros(3, 3);
    for j in 0..3 {
        let h = 1e-6;
        let mut xp = x.clone();
        xp[j] += h;
        let p = integrate(&spec, &xp, dt, 1, Method::Rk4).unwrap();
        xp[j] = x[j] - h;
        let m = integrate(&spec, &xp, dt, 1, Method::Rk4).unwrap();
        for i in 0..3 {
            fd.set(i, j, (p.row(1)[i] - m.row(1)[i]) / (2.0 * h));
        }
    }
    let diff = fj.max_abs_diff(&fd);
    assert!(diff < 1e-4, "flow fd gap {diff}");
}

/// Cocycle property: J(Δ1+Δ2, x) = J(Δ2, x(Δ1)) · J(Δ1, x).
#[test]
fn flow_jacobian_cocycle() {
    let spec = SystemSpec::lorenz();
    let x = attractor_rows(&spec, 3)[2].clone();
    let (d1, d2) = (0.04, 0.06);
    let x1 = integrate(&spec, &x, d1, 1, Method::Rk4).unwrap().row(1).to_vec();
    let combined = flow_jacobian(&spec, &x, d1 + d2).unwrap();
    let composed = flow_jacobian(&spec, &x1, d2)
        .unwrap()
        .matmul(&flow_jacobian(&spec, &x, d1).unwrap());
    let mut diff = combined.clone();
    for i in 0..3 {
        for j in 0..3 {
            diff.set(i, j, combined.get(i, j) - composed.get(i, j));
        }
    }
    assert!(diff.op_norm() < 1e-6, "cocycle gap {}", diff.op_norm());
}

#[test]
fn lyapunov_zero_field_all_zero() {
    let exps = lyapunov_spectrum(&ZeroField(3), &[0.5, 0.5, 0.5], 0.1, 50, 5).unwrap();
    for e in exps {
        assert!(e.abs() < 1e-9);
    }
}

/// Attracting cycle: leading exponent near zero, second negative.
#[test]
fn lyapunov_limit_cycle_structure() {
    let spec = SystemSpec::limit_cycle().with_hopf_normal_form(true);
    let start = integrate(&spec, &[1.0, 0.0], 0.5, 100, Method::Rk4).unwrap();
    let exps =
        lyapunov_spectrum(&spec, start.row(100), 0.5, 1600, 100).unwrap();
    assert!(exps[0].abs() < 0.05, "leading exponent {}", exps[0]);
    assert!(exps[1] < -0.1, "second exponent {}", exps[1]);
}

#[test]
fn noise_zero_sigma_bitwise_and_deterministic() {
    let spec = SystemSpec::lorenz();
    let traj = integrate(&spec, &[1.0, 1.0, 1.0], 0.04, 50, Method::Rk4).unwrap();
    let same = add_observation_noise(&traj, 0.0, 9);
    assert_eq!(traj.states, same.states);
    let a = add_observation_noise(&traj, 0.2, 9);
    let b = add_observation_noise(&traj, 0.2, 9);
    assert_eq!(a.states, b.states);
    let c = add_observation_noise(&traj, 0.2, 10);
    assert_ne!(a.states, c.states);
}

/// Law-of-large-numbers oracle on the injected noise scale.
#[test]
fn noise_sample_std_matches_sigma() {
    let m = 20_000;
    let d = 5;
    let clean = Trajectory::new(Mat::zeros(m, d), 1.0);
    let noisy = add_observation_noise(&clean, 0.1, 123);
    let n = (m * d) as f64;
    let mean: f64 = noisy.states.data().iter().sum::<f64>() / n;
    let var: f64 = noisy
        .states
        .data()
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    let sd = var.sqrt();
    assert!((0.095..=0.105).contains(&sd), "sample sd {sd}");
}

#[test]
fn normalize_standard_data_is_identity() {
    // construct data with exact zero mean and unit population std
    let vals = vec![-1.0, 1.0, -1.0, 1.0, -1.0, 1.0];
    let traj = Trajectory::new(Mat::from_vec(6, 1, vals), 1.0);
    let normed = normalize(&traj).unwrap();
    for i in 0..6 {
        assert!((normed.row(i)[0] - traj.row(i)[0]).abs() < 1e-12);
    }
}

#[test]
fn normalize_constant_column_errors() {
    let mut m = Mat::zeros(10, 2);
    for i in 0..10 {
        m.set(i, 0, i as f64);
        m.set(i, 1, 3.5);
    }
    let traj = Trajectory::new(m, 1.0);
    match normalize(&traj) {
        Err(Error::DegenerateData { dim }) => assert_eq!(dim, 1),
        other => panic!("expected degenerate data, got {other:?}"),
    }
}

#[test]
fn normalize_statistics_recomputed() {
    let spec = SystemSpec::lorenz();
    let traj = integrate(&spec, &[1.0, 1.0, 1.0], 0.04, 400, Method::Rk4).unwrap();
    let normed = normalize(&traj).unwrap();
    let mu = normed.mean();
    let var = normed.variance();
    for j in 0..3 {
        assert!(mu[j].abs() < 1e-12, "mean {}", mu[j]);
        assert!((var[j].sqrt() - 1.0).abs() < 1e-12, "std {}", var[j].sqrt());
    }
    let back = denormalize(&normed);
    let mut max_d = 0.0f64;
    for i in 0..traj.len() {
        for j in 0..3 {
            max_d = max_d.max((back.row(i)[j] - traj.row(i)[j]).abs());
        }
    }
    assert!(max_d < 1e-12, "round trip error {max_d}");
}

#[test]
fn csv_round_trip_bitwise() {
    let spec = SystemSpec::lorenz();
    let traj = integrate(&spec, &[1.0, 1.0, 1.0], 0.04, 100, Method::Dopri5).unwrap();
    let text = traj.to_csv_string();
    let back = Trajectory::from_csv_string(&text).unwrap();
    assert_eq!(traj.states, back.states);
    assert_eq!(traj.dt, back.dt);
}

#[test]
fn csv_rejects_bad_rows() {
    let good = "t,x0\n0.0,1.0\n1.0,2.0\n";
    assert!(Trajectory::from_csv_string(good).is_ok());
    let nan = "t,x0\n0.0,1.0\n1.0,NaN\n";
    match Trajectory::from_csv_string(nan) {
        Err(Error::Ingestion { row, .. }) => assert_eq!(row, 2),
        other => panic!("expected ingestion error, got {other:?}"),
    }
    let ragged = "t,x0\n0.0,1.0\n1.0\n";
    assert!(matches!(
        Trajectory::from_csv_string(ragged),
        Err(Error::Ingestion { row: 2, .. })
    ));
    let nonuniform = "t,x0\n0.0,1.0\n1.0,2.0\n2.5,3.0\n";
    assert!(matches!(
        Trajectory::from_csv_string(nonuniform),
        Err(Error::Ingestion { row: 3, .. })
    ));
}

/// The cubic exactly as printed has no attractor: generic starts escape.
/// The Hopf-normal-form flag is what makes limit-cycle experiments run.
#[test]
fn limit_cycle_verbatim_variant_escapes() {
    let spec = SystemSpec::limit_cycle();
    let err = integrate(&spec, &[1.0, 0.0], 0.5, 400, Method::Rk4);
    assert!(matches!(err, Err(Error::Divergence { .. })));
}

#[test]
fn spec_validation() {
    assert!(SystemSpec::lorenz().validate().is_ok());
    assert!(SystemSpec::lorenz().with_default_dt(0.005).is_ok());
    assert!(SystemSpec::lorenz().with_default_dt(0.1).is_err());
    assert!(SystemSpec::food_web().validate().is_ok());
    assert!(SystemSpec::lorenz().with_params(vec![1.0]).is_err());
    let mut bad = SystemSpec::lorenz();
    bad.dim = 4;
    assert!(bad.validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    /// CSV serialization round-trips arbitrary finite states bitwise.
    #[test]
    fn prop_csv_round_trip(raw in proptest::collection::vec(-1e8f64..1e8, 4..40)) {
        let rows = raw.len() / 2;
        let traj = Trajectory::new(Mat::from_vec(rows, 2, raw[..rows * 2].to_vec()), 0.25);
        let back = Trajectory::from_csv_string(&traj.to_csv_string()).unwrap();
        prop_assert_eq!(traj.states, back.states);
    }

    /// Normalize/denormalize round-trips within 1e-12 whenever columns are
    /// non-degenerate.
    #[test]
    fn prop_normalize_round_trip(raw in proptest::collection::vec(-1e3f64..1e3, 8..60)) {
        let rows = raw.len() / 2;
        let traj = Trajectory::new(Mat::from_vec(rows, 2, raw[..rows * 2].to_vec()), 1.0);
        if let Ok(normed) = normalize(&traj) {
            let back = denormalize(&normed);
            for i in 0..rows {
                for j in 0..2 {
                    prop_assert!((back.row(i)[j] - traj.row(i)[j]).abs() < 1e-9 * traj.row(i)[j].abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn default_initial_states() {
    let web = SystemSpec::food_web();
    let x = web.default_initial_state(3);
    assert_eq!(x.len(), 7);
    assert!(x.iter().all(|&v| v >= 1e-6));
    assert_eq!(x, web.default_initial_state(3));
    assert_ne!(x, web.default_initial_state(4));
    assert!(norm(&x) > 1.0);
}
