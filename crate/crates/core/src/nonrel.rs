//! Non-relativistic quantum trajectories in one dimension, kept separate from
//! the relativistic dynamics so it can serve as an independent c → ∞ oracle.
//!
//! x(t, C) obeys m ẍ = −(1/x_C) ∂_C Q with γ = x_C².

use crate::ensemble::{LogWeightJet, SimConfig, SpatialGrid};
use crate::error::{Error, Result};
use crate::numerics::{rk4_advance, StencilPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct NonRelState {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl NonRelState {
    pub fn check(&self) -> Result<()> {
        if self.v.len() != self.x.len() {
            return Err(Error::LengthMismatch { expected: self.x.len(), found: self.v.len() });
        }
        for (what, arr) in [("x", &self.x), ("v", &self.v)] {
            if let Some(node) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what, node });
            }
        }
        if let Some(node) = self.x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::TrajectoryCrossing { node });
        }
        Ok(())
    }
}

/// Q and dQ/dC for positions `x` on `grid`.
pub fn nonrel_q(
    x: &[f64],
    jet: &LogWeightJet,
    grid: &SpatialGrid,
    plan: &StencilPlan,
    mass: f64,
    hbar: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if let Some(node) = x.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::TrajectoryCrossing { node });
    }
    let d: Vec<Vec<f64>> = (1..=4).map(|k| plan.derivative(x, grid, k)).collect::<Result<_>>()?;
    let k = hbar * hbar / (2.0 * mass);
    let n = x.len();
    let mut q = vec![0.0; n];
    let mut q_c = vec![0.0; n];
    for i in 0..n {
        let (x1, x2, x3, x4) = (d[0][i], d[1][i], d[2][i], d[3][i]);
        let (l1f, l2f, l3f) = (0.5 * jet.d1[i], 0.5 * jet.d2[i], 0.5 * jet.d3[i]);
        let r = x2 / x1;
        let l1 = l1f - 0.5 * r;
        let l2 = l2f - x3 / (2.0 * x1) + 0.5 * r * r;
        let l3 = l3f - x4 / (2.0 * x1) + 1.5 * x2 * x3 / (x1 * x1) - r * r * r;
        let s = l2 + l1 * l1 - r * l1;
        let s1 = l3 + 2.0 * l1 * l2 - ((x3 / x1 - r * r) * l1 + r * l2);
        q[i] = -k * s / x1;
        q_c[i] = -k * (s1 / x1 - x2 * s / (x1 * x1));
        if !(q[i].is_finite() && q_c[i].is_finite()) {
            return Err(Error::NonFinite { what: "Q", node: i });
        }
    }
    Ok((q, q_c))
}

/// Fixed inputs of the non-relativistic right-hand side.
#[derive(Debug, Clone)]
pub struct NonRelDynamics {
    pub grid: SpatialGrid,
    pub plan: StencilPlan,
    pub jet: LogWeightJet,
    pub mass: f64,
    pub hbar: f64,
}

impl NonRelDynamics {
    pub fn new(config: &SimConfig) -> Self {
        Self {
            grid: config.grid.clone(),
            plan: StencilPlan::new(config.stencil_order),
            jet: config.weight.jet(&config.grid),
            mass: config.mass,
            hbar: config.hbar,
        }
    }

    /// (dx/dt, dv/dt)
    pub fn rhs(&self, x: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (_, q_c) = nonrel_q(x, &self.jet, &self.grid, &self.plan, self.mass, self.hbar)?;
        let x_c = self.plan.derivative(x, &self.grid, 1)?;
        let accel = q_c.iter().zip(&x_c).map(|(qc, xc)| -qc / xc / self.mass).collect();
        Ok((v.to_vec(), accel))
    }

    pub fn step(&self, state: &NonRelState, dt: f64) -> Result<NonRelState> {
        let n = state.x.len();
        let y: Vec<f64> = [state.x.as_slice(), state.v.as_slice()].concat();
        let y1 = rk4_advance(&y, dt, |s| {
            let (dx, dv) = self.rhs(&s[..n], &s[n..])?;
            Ok([dx, dv].concat())
        })?;
        let next = NonRelState { t: state.t + dt, x: y1[..n].to_vec(), v: y1[n..].to_vec() };
        next.check()?;
        Ok(next)
    }
}

pub fn nonrel_rhs(state: &NonRelState, config: &SimConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    NonRelDynamics::new(config).rhs(&state.x, &state.v)
}

#[derive(Debug)]
pub struct NonRelFailure {
    pub partial: Vec<NonRelState>,
    pub error: Error,
}

impl std::fmt::Display for NonRelFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} snapshots kept)", self.error, self.partial.len())
    }
}

impl std::error::Error for NonRelFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Integrates from x = C, v = 0 with the configured dt and snapshot cadence.
pub fn nonrel_integrate(config: &SimConfig) -> std::result::Result<Vec<NonRelState>, NonRelFailure> {
    let mut out = Vec::new();
    let setup = config.validate().and_then(|_| {
        if config.boost != 0.0 {
            return Err(Error::config("init.boost", "the non-relativistic reference starts at rest"));
        }
        Ok((config.step_count()?, config.steps_per_snapshot()?))
    });
    let (steps, every) = match setup {
        Ok(v) => v,
        Err(error) => return Err(NonRelFailure { partial: out, error }),
    };
    let dynamics = NonRelDynamics::new(config);
    let n = config.grid.len();
    let mut state = NonRelState { t: 0.0, x: config.grid.nodes().to_vec(), v: vec![0.0; n] };
    out.push(state.clone());
    for k in 1..=steps {
        state = match dynamics.step(&state, config.dt) {
            Ok(s) => s,
            Err(e) => return Err(NonRelFailure { partial: out, error: e.at_time(state.t) }),
        };
        state.t = k as f64 * config.dt;
        if k % every == 0 || k == steps {
            out.push(state.clone());
        }
    }
    Ok(out)
}
