//! Right-hand sides and analytic Jacobians of the built-in systems.

use crate::linalg::Mat;

// ---------------------------------------------------------------- lorenz

/// params: (σ, ρ, β)
pub fn lorenz_rhs(p: &[f64], x: &[f64], out: &mut [f64]) {
    let (sigma, rho, beta) = (p[0], p[1], p[2]);
    out[0] = sigma * (x[1] - x[0]);
    out[1] = x[0] * (rho - x[2]) - x[1];
    out[2] = x[0] * x[1] - beta * x[2];
}

pub fn lorenz_jacobian(p: &[f64], x: &[f64]) -> Mat {
    let (sigma, rho, beta) = (p[0], p[1], p[2]);
    Mat::from_rows(&[
        vec![-sigma, sigma, 0.0],
        vec![rho - x[2], -1.0, -x[0]],
        vec![x[1], x[0], -beta],
    ])
}

// ---------------------------------------------------------- limit cycle

/// params: (a, μ). The second equation's cubic term is `-x(x²+y²)` as
/// given; `hopf` switches it to the normal-form `-y(x²+y²)`.
pub fn limit_cycle_rhs(p: &[f64], hopf: bool, x: &[f64], out: &mut [f64]) {
    let (a, mu) = (p[0], p[1]);
    let r2 = x[0] * x[0] + x[1] * x[1];
    out[0] = a * (mu * x[0] - x[1] - x[0] * r2);
    let cubic = if hopf { x[1] } else { x[0] };
    out[1] = a * (x[0] + mu * x[1] - cubic * r2);
}

pub fn limit_cycle_jacobian(p: &[f64], hopf: bool, x: &[f64]) -> Mat {
    let (a, mu) = (p[0], p[1]);
    let (u, v) = (x[0], x[1]);
    let row0 = vec![a * (mu - 3.0 * u * u - v * v), a * (-1.0 - 2.0 * u * v)];
    let row1 = if hopf {
        vec![a * (1.0 - 2.0 * u * v), a * (mu - u * u - 3.0 * v * v)]
    } else {
        vec![a * (1.0 - 3.0 * u * u - v * v), a * (mu - 2.0 * u * v)]
    };
    Mat::from_rows(&[row0, row1])
}

// ------------------------------------------------------ double pendulum

/// params: (m1, m2, l1, l2, g); state (θ1, θ2, θ̇1, θ̇2). Point masses on
/// rigid massless rods.
pub fn double_pendulum_rhs(p: &[f64], x: &[f64], out: &mut [f64]) {
    let (m1, m2, l1, l2, g) = (p[0], p[1], p[2], p[3], p[4]);
    let (t1, t2, w1, w2) = (x[0], x[1], x[2], x[3]);
    let delta = t1 - t2;
    let (sd, cd) = delta.sin_cos();
    let den = 2.0 * m1 + m2 - m2 * (2.0 * delta).cos();
    let b = w2 * w2 * l2 + w1 * w1 * l1 * cd;
    let num1 = -g * (2.0 * m1 + m2) * t1.sin() - m2 * g * (t1 - 2.0 * t2).sin()
        - 2.0 * sd * m2 * b;
    let pterm = w1 * w1 * l1 * (m1 + m2) + g * (m1 + m2) * t1.cos() + w2 * w2 * l2 * m2 * cd;
    out[0] = w1;
    out[1] = w2;
    out[2] = num1 / (l1 * den);
    out[3] = 2.0 * sd * pterm / (l2 * den);
}

pub fn double_pendulum_jacobian(p: &[f64], x: &[f64]) -> Mat {
    let (m1, m2, l1, l2, g) = (p[0], p[1], p[2], p[3], p[4]);
    let (t1, t2, w1, w2) = (x[0], x[1], x[2], x[3]);
    let delta = t1 - t2;
    let (sd, cd) = delta.sin_cos();
    let den = 2.0 * m1 + m2 - m2 * (2.0 * delta).cos();
    let dden_dt1 = 2.0 * m2 * (2.0 * delta).sin();
    let dden_dt2 = -dden_dt1;

    // f3 = num1 / (l1 den)
    let b = w2 * w2 * l2 + w1 * w1 * l1 * cd;
    let num1 = -g * (2.0 * m1 + m2) * t1.sin() - m2 * g * (t1 - 2.0 * t2).sin()
        - 2.0 * sd * m2 * b;
    // common piece of ∂num1/∂θ: d(sd·b)/dθ1 = cd·b - sd²·w1²·l1 (and its negative for θ2)
    let sb = cd * b - sd * sd * w1 * w1 * l1;
    let dnum1_dt1 =
        -g * (2.0 * m1 + m2) * t1.cos() - m2 * g * (t1 - 2.0 * t2).cos() - 2.0 * m2 * sb;
    let dnum1_dt2 = 2.0 * m2 * g * (t1 - 2.0 * t2).cos() + 2.0 * m2 * sb;
    let dnum1_dw1 = -4.0 * m2 * l1 * w1 * sd * cd;
    let dnum1_dw2 = -4.0 * m2 * l2 * w2 * sd;
    let df3 = |dnum: f64, dden: f64| (dnum * den - num1 * dden) / (l1 * den * den);

    // f4 = 2 sd pterm / (l2 den)
    let pterm = w1 * w1 * l1 * (m1 + m2) + g * (m1 + m2) * t1.cos() + w2 * w2 * l2 * m2 * cd;
    let dp_dt1 = -g * (m1 + m2) * t1.sin() - w2 * w2 * l2 * m2 * sd;
    let dp_dt2 = w2 * w2 * l2 * m2 * sd;
    let dp_dw1 = 2.0 * w1 * l1 * (m1 + m2);
    let dp_dw2 = 2.0 * w2 * l2 * m2 * cd;
    let num2 = 2.0 * sd * pterm;
    let dnum2_dt1 = 2.0 * cd * pterm + 2.0 * sd * dp_dt1;
    let dnum2_dt2 = -2.0 * cd * pterm + 2.0 * sd * dp_dt2;
    let df4 = |dnum: f64, dden: f64| (dnum * den - num2 * dden) / (l2 * den * den);

    Mat::from_rows(&[
        vec![0.0, 0.0, 1.0, 0.0],
        vec![0.0, 0.0, 0.0, 1.0],
        vec![
            df3(dnum1_dt1, dden_dt1),
            df3(dnum1_dt2, dden_dt2),
            df3(dnum1_dw1, 0.0),
            df3(dnum1_dw2, 0.0),
        ],
        vec![
            df4(dnum2_dt1, dden_dt1),
            df4(dnum2_dt2, dden_dt2),
            df4(2.0 * sd * dp_dw1, 0.0),
            df4(2.0 * sd * dp_dw2, 0.0),
        ],
    ])
}

// --------------------------------------------------------------- food web

pub const FOOD_WEB_N: usize = 7;

/// Trophic links as (consumer, resource) with adjacency weight builder.
/// Weights: all 1 except (2,1) which carries ω and (4,3) which carries 1-ω.
const LINKS: [(usize, usize); 6] = [(1, 0), (2, 1), (2, 4), (4, 3), (5, 2), (6, 5)];

/// Free parameters, in layout order:
/// r[0..7], α00, α33, H over LINKS, q over LINKS, ω  — 22 in total.
pub const FOOD_WEB_PARAM_COUNT: usize = 7 + 2 + 6 + 6 + 1;

pub fn food_web_default_params() -> Vec<f64> {
    let mut p = vec![1.0, -0.15, -0.08, 1.0, -0.15, -0.01, -0.005]; // r
    p.extend_from_slice(&[1.0, 1.0]); // α00, α33
    p.extend_from_slice(&[2.89855, 7.35294, 7.35294, 2.89855, 8.0, 12.0]); // H
    p.extend_from_slice(&[1.38, 0.272, 0.272, 1.38, 0.1, 0.05]); // q
    p.push(0.2); // ω
    p
}

struct FoodWeb {
    r: [f64; 7],
    alpha00: f64,
    alpha33: f64,
    // per link: adjacency weight, handling time, attack rate
    w: [f64; 6],
    h: [f64; 6],
    q: [f64; 6],
}

impl FoodWeb {
    fn from_params(p: &[f64]) -> Self {
        let omega = p[21];
        let mut r = [0.0; 7];
        r.copy_from_slice(&p[0..7]);
        let mut h = [0.0; 6];
        h.copy_from_slice(&p[9..15]);
        let mut q = [0.0; 6];
        q.copy_from_slice(&p[15..21]);
        FoodWeb {
            r,
            alpha00: p[7],
            alpha33: p[8],
            w: [1.0, omega, 1.0, 1.0 - omega, 1.0, 1.0],
            h,
            q,
        }
    }

    /// Per-capita feeding rates F[link] and the saturation denominators.
    fn feeding(&self, n: &[f64]) -> ([f64; 6], [f64; 6]) {
        // prey field per consumer: d[i] = Σ_links(i,·) w·N_prey
        let mut d = [0.0; 7];
        for (l, &(cons, res)) in LINKS.iter().enumerate() {
            d[cons] += self.w[l] * n[res];
        }
        let mut f = [0.0; 6];
        let mut denom = [0.0; 6];
        for (l, &(cons, _)) in LINKS.iter().enumerate() {
            denom[l] = 1.0 + self.q[l] * self.h[l] * d[cons];
            f[l] = self.q[l] * self.w[l] / denom[l];
        }
        (f, denom)
    }

    /// Per-capita growth G_i = r_i - Σ_j N_j (α_ij - F_ij + F_ji):
    /// consumers gain from feeding, resources lose to their consumers.
    fn growth(&self, n: &[f64], f: &[f64; 6]) -> [f64; 7] {
        let mut g = self.r;
        g[0] -= self.alpha00 * n[0];
        g[3] -= self.alpha33 * n[3];
        for (l, &(cons, res)) in LINKS.iter().enumerate() {
            g[cons] += f[l] * n[res];
            g[res] -= f[l] * n[cons];
        }
        g
    }
}

pub fn food_web_rhs(p: &[f64], x: &[f64], out: &mut [f64]) {
    let web = FoodWeb::from_params(p);
    let (f, _) = web.feeding(x);
    let g = web.growth(x, &f);
    for i in 0..FOOD_WEB_N {
        out[i] = x[i] * g[i];
    }
}

pub fn food_web_jacobian(p: &[f64], x: &[f64]) -> Mat {
    let web = FoodWeb::from_params(p);
    let (f, denom) = web.feeding(x);
    let g = web.growth(x, &f);

    // dG[i][k] = ∂G_i/∂N_k, starting from the F-constant part.
    let mut dg = [[0.0; 7]; 7];
    dg[0][0] -= web.alpha00;
    dg[3][3] -= web.alpha33;
    for (l, &(cons, res)) in LINKS.iter().enumerate() {
        dg[cons][res] += f[l];
        dg[res][cons] -= f[l];
    }
    // ∂F_l/∂N_k = -F_l · qh_l · w(cons,k) / denom_l, nonzero only for k a
    // resource of the link's consumer.
    for (l, &(cons, res)) in LINKS.iter().enumerate() {
        let coef = f[l] * web.q[l] * web.h[l] / denom[l];
        for (l2, &(cons2, res2)) in LINKS.iter().enumerate() {
            if cons2 != cons {
                continue;
            }
            let k = res2;
            let dfl_dk = -coef * web.w[l2];
            // G_cons has +F_l·N_res, G_res has -F_l·N_cons.
            dg[cons][k] += dfl_dk * x[res];
            dg[res][k] -= dfl_dk * x[cons];
        }
    }

    let mut jac = Mat::zeros(7, 7);
    for i in 0..7 {
        for k in 0..7 {
            let mut v = x[i] * dg[i][k];
            if i == k {
                v += g[i];
            }
            jac.set(i, k, v);
        }
    }
    jac
}
