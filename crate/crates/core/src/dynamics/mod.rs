//! Built-in dynamical systems, integration, flow Jacobians, Lyapunov
//! spectra, observation noise, and normalization.

mod integrate;
mod lyapunov;
mod systems;
mod trajectory;

pub use integrate::{flow_jacobian, integrate, rk4_step, Method, RK4_H_MAX};
pub use lyapunov::{divergence_slope, lyapunov_spectrum};
pub use trajectory::{
    add_observation_noise, denormalize, normalize, write_atomic, NormStat, Trajectory,
    TrajectoryMeta,
};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::rng::{stream, Stream};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// A continuous-time vector field `dx/dt = f(x)`.
///
/// Implementations must be pure. The default `jacobian_at` is a central
/// difference of `eval` with step `1e-6 * max(1, |x_i|)` per coordinate;
/// built-in systems override it with the analytic Jacobian.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Writes `dx/dt` into `dxdt`. Inputs are assumed finite and of length
    /// `dim()`; public wrappers validate.
    fn eval(&self, x: &[f64], dxdt: &mut [f64]) -> Result<()>;

    fn jacobian_at(&self, x: &[f64]) -> Result<Mat> {
        let d = self.dim();
        let mut jac = Mat::zeros(d, d);
        let mut xp = x.to_vec();
        let mut fp = vec![0.0; d];
        let mut fm = vec![0.0; d];
        for j in 0..d {
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] = x[j] + h;
            self.eval(&xp, &mut fp)?;
            xp[j] = x[j] - h;
            self.eval(&xp, &mut fm)?;
            xp[j] = x[j];
            for i in 0..d {
                jac.set(i, j, (fp[i] - fm[i]) / (2.0 * h));
            }
        }
        Ok(jac)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Lorenz,
    DoublePendulum,
    FoodWeb,
    LimitCycle,
    External,
}

impl SystemKind {
    pub fn name(&self) -> &'static str {
        match self {
            SystemKind::Lorenz => "lorenz",
            SystemKind::DoublePendulum => "double_pendulum",
            SystemKind::FoodWeb => "food_web",
            SystemKind::LimitCycle => "limit_cycle",
            SystemKind::External => "external",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "lorenz" => Ok(SystemKind::Lorenz),
            "double_pendulum" => Ok(SystemKind::DoublePendulum),
            "food_web" => Ok(SystemKind::FoodWeb),
            "limit_cycle" => Ok(SystemKind::LimitCycle),
            "external" => Ok(SystemKind::External),
            other => Err(Error::Argument(format!("unknown system '{other}'"))),
        }
    }

    pub fn state_dim(&self) -> usize {
        match self {
            SystemKind::Lorenz => 3,
            SystemKind::DoublePendulum => 4,
            SystemKind::FoodWeb => 7,
            SystemKind::LimitCycle => 2,
            SystemKind::External => 0, // set per spec
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            SystemKind::Lorenz => 3,
            SystemKind::DoublePendulum => 5,
            SystemKind::FoodWeb => systems::FOOD_WEB_PARAM_COUNT,
            SystemKind::LimitCycle => 2,
            SystemKind::External => 0,
        }
    }
}

/// A named ODE system with its free-parameter vector and default sampling
/// timestep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub kind: SystemKind,
    pub params: Vec<f64>,
    pub dim: usize,
    pub default_dt: f64,
    /// Limit-cycle only: replace the second equation's cubic term `-x(x²+y²)`
    /// with the Hopf-normal-form `-y(x²+y²)`. Off by default.
    #[serde(default)]
    pub hopf_normal_form: bool,
}

impl SystemSpec {
    /// Lorenz system, σ=10, ρ=28, β=8/3. Default 0.04 sampling; 0.005 is the
    /// other supported timestep (`with_default_dt`).
    pub fn lorenz() -> Self {
        SystemSpec {
            kind: SystemKind::Lorenz,
            params: vec![10.0, 28.0, 8.0 / 3.0],
            dim: 3,
            default_dt: 0.04,
            hopf_normal_form: false,
        }
    }

    /// Point-mass double pendulum, params (m1, m2, l1, l2, g) = (1, 1, 1, 1, 9.81),
    /// state (θ1, θ2, θ̇1, θ̇2).
    pub fn double_pendulum() -> Self {
        SystemSpec {
            kind: SystemKind::DoublePendulum,
            params: vec![1.0, 1.0, 1.0, 1.0, 9.81],
            dim: 4,
            default_dt: 0.005,
            hopf_normal_form: false,
        }
    }

    /// Seven-species food web with type-II trophic interactions.
    pub fn food_web() -> Self {
        SystemSpec {
            kind: SystemKind::FoodWeb,
            params: systems::food_web_default_params(),
            dim: 7,
            default_dt: 2.0,
            hopf_normal_form: false,
        }
    }

    /// Planar limit cycle, params (a, μ) = (1.0, 0.4).
    pub fn limit_cycle() -> Self {
        SystemSpec {
            kind: SystemKind::LimitCycle,
            params: vec![1.0, 0.4],
            dim: 2,
            default_dt: 0.5,
            hopf_normal_form: false,
        }
    }

    /// Placeholder for user-supplied dynamics; carries only dimension and
    /// sampling metadata. Operations needing the vector field reject it.
    pub fn external(dim: usize, default_dt: f64) -> Self {
        SystemSpec {
            kind: SystemKind::External,
            params: vec![],
            dim,
            default_dt,
            hopf_normal_form: false,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        Ok(match SystemKind::parse(name)? {
            SystemKind::Lorenz => SystemSpec::lorenz(),
            SystemKind::DoublePendulum => SystemSpec::double_pendulum(),
            SystemKind::FoodWeb => SystemSpec::food_web(),
            SystemKind::LimitCycle => SystemSpec::limit_cycle(),
            SystemKind::External => SystemSpec::external(1, 1.0),
        })
    }

    /// Replaces the free-parameter vector, keeping kind/dim/dt.
    pub fn with_params(mut self, params: Vec<f64>) -> Result<Self> {
        if self.kind != SystemKind::External && params.len() != self.kind.param_count() {
            return Err(Error::Argument(format!(
                "{} takes {} parameters, got {}",
                self.kind.name(),
                self.kind.param_count(),
                params.len()
            )));
        }
        self.params = params;
        Ok(self)
    }

    pub fn with_default_dt(mut self, dt: f64) -> Result<Self> {
        self.default_dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_hopf_normal_form(mut self, on: bool) -> Self {
        self.hopf_normal_form = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind != SystemKind::External {
            if self.dim != self.kind.state_dim() {
                return Err(Error::Argument(format!(
                    "{} has state dimension {}, got {}",
                    self.kind.name(),
                    self.kind.state_dim(),
                    self.dim
                )));
            }
            if self.params.len() != self.kind.param_count() {
                return Err(Error::Argument(format!(
                    "{} takes {} parameters, got {}",
                    self.kind.name(),
                    self.kind.param_count(),
                    self.params.len()
                )));
            }
        }
        if self.dim == 0 {
            return Err(Error::Argument("state dimension must be positive".into()));
        }
        if !(self.default_dt > 0.0) {
            return Err(Error::Argument("default_dt must be positive".into()));
        }
        let dt_ok = match self.kind {
            SystemKind::Lorenz => self.default_dt == 0.005 || self.default_dt == 0.04,
            SystemKind::DoublePendulum => self.default_dt == 0.005,
            SystemKind::FoodWeb => self.default_dt == 2.0,
            SystemKind::LimitCycle => self.default_dt == 0.5,
            SystemKind::External => true,
        };
        if !dt_ok {
            return Err(Error::Argument(format!(
                "default_dt {} is not a supported sampling timestep for {}",
                self.default_dt,
                self.kind.name()
            )));
        }
        Ok(())
    }

    /// Canonical initial state used for data generation. The food web samples
    /// around the all-ones vector (std 0.1, clipped to ≥ 1e-6); the others
    /// are fixed points of convention, not of the dynamics.
    pub fn default_initial_state(&self, seed: u64) -> Vec<f64> {
        match self.kind {
            SystemKind::Lorenz => vec![1.0, 1.0, 1.0],
            SystemKind::DoublePendulum => vec![1.6, 1.6, 0.0, 0.0],
            SystemKind::LimitCycle => vec![1.0, 0.0],
            SystemKind::FoodWeb => {
                let mut rng = stream(seed, Stream::InitialState);
                let normal = Normal::new(1.0, 0.1).unwrap();
                (0..7)
                    .map(|_| f64::max(normal.sample(&mut rng), 1e-6))
                    .collect()
            }
            SystemKind::External => vec![0.0; self.dim],
        }
    }

    fn check_state(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::Argument(format!(
                "state has length {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !crate::linalg::all_finite(x) {
            return Err(Error::Numeric("non-finite state".into()));
        }
        if self.kind == SystemKind::FoodWeb && x.iter().any(|&n| n < 0.0) {
            return Err(Error::Argument(
                "food_web abundances must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

impl VectorField for SystemSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], dxdt: &mut [f64]) -> Result<()> {
        match self.kind {
            SystemKind::Lorenz => systems::lorenz_rhs(&self.params, x, dxdt),
            SystemKind::DoublePendulum => systems::double_pendulum_rhs(&self.params, x, dxdt),
            SystemKind::FoodWeb => systems::food_web_rhs(&self.params, x, dxdt),
            SystemKind::LimitCycle => {
                systems::limit_cycle_rhs(&self.params, self.hopf_normal_form, x, dxdt)
            }
            SystemKind::External => {
                return Err(Error::NoVectorField(self.kind.name().into()));
            }
        }
        Ok(())
    }

    fn jacobian_at(&self, x: &[f64]) -> Result<Mat> {
        Ok(match self.kind {
            SystemKind::Lorenz => systems::lorenz_jacobian(&self.params, x),
            SystemKind::DoublePendulum => systems::double_pendulum_jacobian(&self.params, x),
            SystemKind::FoodWeb => systems::food_web_jacobian(&self.params, x),
            SystemKind::LimitCycle => {
                systems::limit_cycle_jacobian(&self.params, self.hopf_normal_form, x)
            }
            SystemKind::External => {
                return Err(Error::NoVectorField(self.kind.name().into()));
            }
        })
    }
}

/// `dx/dt` of the system at `x`, with argument validation.
pub fn derivative(spec: &SystemSpec, x: &[f64]) -> Result<Vec<f64>> {
    spec.check_state(x)?;
    let mut out = vec![0.0; spec.dim];
    spec.eval(x, &mut out)?;
    Ok(out)
}

/// Jacobian of the vector field at `x`: analytic for the built-in systems,
/// central differences for external ones.
pub fn jacobian(spec: &SystemSpec, x: &[f64]) -> Result<Mat> {
    spec.check_state(x)?;
    spec.jacobian_at(x)
}

#[cfg(test)]
mod tests;
