//! Quantum potential, quantum force, time dilation, the equation of motion
//! and its fixed-step integration.
//!
//! Evolution variable is the ensemble proper time T. Per node:
//!
//! ```text
//! d(ct)/dT = τ U⁰     dx/dT = τ U¹     dU^α/dT = τ f^α / m     τ = exp(−Q/mc²)
//! ```

use crate::ensemble::{EnsembleState, LogWeightJet, SimConfig, SpatialGrid, WeightFunction};
use crate::error::{Error, Result};
use crate::geometry::{fill_g01, slice_geometry, GeometryFields};
use crate::numerics::{rk4_advance, StencilPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumFields {
    pub q: Vec<f64>,
    pub q_c: Vec<f64>,
    /// Force components for x^α = (ct, x).
    pub f0: Vec<f64>,
    pub f1: Vec<f64>,
    pub tau_t: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dt_dt: Vec<f64>,
    pub dx_dt: Vec<f64>,
    pub du0_dt: Vec<f64>,
    pub du1_dt: Vec<f64>,
}

/// Q and dQ/dC from the γ derivatives and the ln f jet.
///
/// With L = ln f/2 − ln γ/4, Q = −(ħ²/2m) γ^{−1/2} (L'' + L'² − γ'L'/2γ).
pub fn compute_q(geom: &GeometryFields, jet: &LogWeightJet, mass: f64, hbar: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = geom.len();
    for arr in [&jet.d1, &jet.d2, &jet.d3] {
        if arr.len() != n {
            return Err(Error::LengthMismatch { expected: n, found: arr.len() });
        }
    }
    let k = hbar * hbar / (2.0 * mass);
    let [dg1, dg2, dg3] = &geom.gamma_derivs;
    let mut q = vec![0.0; n];
    let mut q_c = vec![0.0; n];
    for i in 0..n {
        let g = geom.gamma[i];
        let (g1, g2, g3) = (dg1[i] / g, dg2[i] / g, dg3[i] / g);
        let l1 = 0.5 * jet.d1[i] - 0.25 * g1;
        let l2 = 0.5 * jet.d2[i] - 0.25 * (g2 - g1 * g1);
        let l3 = 0.5 * jet.d3[i] - 0.25 * (g3 - 3.0 * g1 * g2 + 2.0 * g1 * g1 * g1);
        let s = l2 + l1 * l1 - 0.5 * g1 * l1;
        let s1 = l3 + 2.0 * l1 * l2 - 0.5 * ((g2 - g1 * g1) * l1 + g1 * l2);
        let root = g.sqrt();
        q[i] = -k * s / root;
        q_c[i] = -k * (s1 - 0.5 * g1 * s) / root;
        if !q[i].is_finite() {
            return Err(Error::NonFinite { what: "Q", node: i });
        }
        if !q_c[i].is_finite() {
            return Err(Error::NonFinite { what: "Q_C", node: i });
        }
    }
    Ok((q, q_c))
}

/// `compute_Q` for a closed-form weight.
pub fn compute_q_for_weight(
    geom: &GeometryFields,
    weight: &WeightFunction,
    grid: &SpatialGrid,
    mass: f64,
    hbar: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    compute_q(geom, &weight.jet(grid), mass, hbar)
}

/// f⁰ = −(c t_C/γ) Q_C, f¹ = −(x_C/γ) Q_C.
pub fn compute_force(geom: &GeometryFields, q_c: &[f64], c: f64) -> (Vec<f64>, Vec<f64>) {
    let f0 = (0..geom.len()).map(|i| -c * geom.t_c[i] / geom.gamma[i] * q_c[i]).collect();
    let f1 = (0..geom.len()).map(|i| -geom.x_c[i] / geom.gamma[i] * q_c[i]).collect();
    (f0, f1)
}

/// τ_T = exp(−Q/mc²)
pub fn tau_factor(q: &[f64], mass: f64, c: f64) -> Vec<f64> {
    let mc2 = mass * c * c;
    q.iter().map(|v| (-v / mc2).exp()).collect()
}

/// Everything the right-hand side needs that does not change during a run.
#[derive(Debug, Clone)]
pub struct Dynamics {
    pub grid: SpatialGrid,
    pub plan: StencilPlan,
    pub jet: LogWeightJet,
    pub mass: f64,
    pub hbar: f64,
    pub c: f64,
}

impl Dynamics {
    pub fn new(config: &SimConfig) -> Self {
        Self::with_jet(config, config.weight.jet(&config.grid))
    }

    /// Uses a tabulated ln f jet instead of the configured weight.
    pub fn with_jet(config: &SimConfig, jet: LogWeightJet) -> Self {
        Self {
            grid: config.grid.clone(),
            plan: StencilPlan::new(config.stencil_order),
            jet,
            mass: config.mass,
            hbar: config.hbar,
            c: config.c,
        }
    }

    /// Geometry (with g₀₁) and quantum fields of one slice.
    pub fn fields(&self, state: &EnsembleState) -> Result<(GeometryFields, QuantumFields)> {
        let mut geom = slice_geometry(state, &self.grid, &self.plan, self.c)?;
        let (q, q_c) = compute_q(&geom, &self.jet, self.mass, self.hbar)?;
        let tau_t = tau_factor(&q, self.mass, self.c);
        if let Some(node) = tau_t.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::NonPositiveTau { node, value: tau_t[node] });
        }
        fill_g01(&mut geom, state, &tau_t, self.c);
        let (f0, f1) = compute_force(&geom, &q_c, self.c);
        Ok((geom, QuantumFields { q, q_c, f0, f1, tau_t }))
    }

    pub fn rhs(&self, state: &EnsembleState) -> Result<StateDerivative> {
        let (_, qf) = self.fields(state).map_err(|e| e.at_time(state.tau_ensemble))?;
        let n = state.len();
        let mut d = StateDerivative {
            dt_dt: vec![0.0; n],
            dx_dt: vec![0.0; n],
            du0_dt: vec![0.0; n],
            du1_dt: vec![0.0; n],
        };
        for i in 0..n {
            let tau = qf.tau_t[i];
            d.dt_dt[i] = tau * state.u0[i] / self.c;
            d.dx_dt[i] = tau * state.u1[i];
            d.du0_dt[i] = tau * qf.f0[i] / self.mass;
            d.du1_dt[i] = tau * qf.f1[i] / self.mass;
        }
        Ok(d)
    }

    /// One RK4 step of size `dt`. The result must pass the structural
    /// invariants and be timelike; metric checks happen on the next evaluation.
    pub fn step(&self, state: &EnsembleState, dt: f64) -> Result<EnsembleState> {
        let n = state.len();
        let tau0 = state.tau_ensemble;
        let mut y = Vec::with_capacity(4 * n);
        for arr in [&state.t, &state.x, &state.u0, &state.u1] {
            y.extend_from_slice(arr);
        }
        let unpack = |v: &[f64], tau: f64| EnsembleState {
            tau_ensemble: tau,
            t: v[..n].to_vec(),
            x: v[n..2 * n].to_vec(),
            u0: v[2 * n..3 * n].to_vec(),
            u1: v[3 * n..].to_vec(),
        };
        let y1 = rk4_advance(&y, dt, |v| {
            let d = self.rhs(&unpack(v, tau0))?;
            Ok([d.dt_dt, d.dx_dt, d.du0_dt, d.du1_dt].concat())
        })
        .map_err(|e| e.at_time(tau0))?;
        let next = unpack(&y1, tau0 + dt);
        next.check_structure().and_then(|_| next.check_timelike()).map_err(|e| e.at_time(next.tau_ensemble))?;
        Ok(next)
    }
}

/// Right-hand side of the first-order system for `state` under `config`.
pub fn eom_rhs(state: &EnsembleState, config: &SimConfig) -> Result<StateDerivative> {
    Dynamics::new(config).rhs(state)
}

/// One RK4 step with the configured dt.
pub fn rk4_step(state: &EnsembleState, config: &SimConfig) -> Result<EnsembleState> {
    if !(config.dt > 0.0) {
        return Err(Error::config("time.dt", "must be > 0"));
    }
    Dynamics::new(config).step(state, config.dt)
}

/// Rest slice t = 0, x = C, U = (c, 0) for a Gaussian weight.
pub fn gaussian_initial_state(config: &SimConfig) -> Result<EnsembleState> {
    match config.weight {
        WeightFunction::Gaussian { .. } => Ok(rest_state(&config.grid, config.c)),
        _ => Err(Error::WrongWeightKind { expected: "gaussian" }),
    }
}

fn rest_state(grid: &SpatialGrid, c: f64) -> EnsembleState {
    let n = grid.len();
    EnsembleState { tau_ensemble: 0.0, t: vec![0.0; n], x: grid.nodes().to_vec(), u0: vec![c; n], u1: vec![0.0; n] }
}

/// Initial slice for any configured weight: the rest slice, boosted by
/// β₀ = `config.boost` when the weight is uniform.
pub fn initial_state(config: &SimConfig) -> Result<EnsembleState> {
    if config.boost == 0.0 {
        return Ok(rest_state(&config.grid, config.c));
    }
    if config.weight != WeightFunction::Uniform {
        return Err(Error::config("init.boost", "a boosted initial slice requires weight.kind = uniform"));
    }
    crate::analytic::AnalyticEnsemble::Inertial { beta0: config.boost }.sample(
        &config.grid,
        0.0,
        config.mass,
        config.hbar,
        config.c,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub state: EnsembleState,
    pub geometry: GeometryFields,
    pub quantum: QuantumFields,
}

impl Snapshot {
    pub fn tau(&self) -> f64 {
        self.state.tau_ensemble
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSeries {
    pub grid: SpatialGrid,
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSeries {
    /// Recomputes geometry and quantum fields for externally supplied states.
    pub fn from_states(states: Vec<EnsembleState>, dynamics: &Dynamics) -> Result<Self> {
        let snapshots = states
            .into_iter()
            .map(|state| {
                let (geometry, quantum) = dynamics.fields(&state).map_err(|e| e.at_time(state.tau_ensemble))?;
                Ok(Snapshot { state, geometry, quantum })
            })
            .collect::<Result<_>>()?;
        Ok(Self { grid: dynamics.grid.clone(), snapshots })
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.snapshots.iter().map(Snapshot::tau).collect()
    }
}

/// A run that stopped early; `partial` holds every snapshot taken before the failure.
#[derive(Debug)]
pub struct IntegrationFailure {
    pub partial: SnapshotSeries,
    pub error: Error,
}

impl std::fmt::Display for IntegrationFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} snapshots kept)", self.error, self.partial.len())
    }
}

impl std::error::Error for IntegrationFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Integrates from the configured initial slice to `t_final`.
pub fn integrate(config: &SimConfig) -> std::result::Result<SnapshotSeries, IntegrationFailure> {
    integrate_with(config, &Dynamics::new(config), None)
}

/// Integrates with explicit dynamics and, optionally, an explicit initial state.
pub fn integrate_with(
    config: &SimConfig,
    dynamics: &Dynamics,
    initial: Option<EnsembleState>,
) -> std::result::Result<SnapshotSeries, IntegrationFailure> {
    let mut series = SnapshotSeries { grid: config.grid.clone(), snapshots: Vec::new() };
    macro_rules! bail {
        ($e:expr) => {
            return Err(IntegrationFailure { partial: series, error: $e })
        };
    }
    if let Err(e) = config.validate() {
        bail!(e);
    }
    let (steps, every) = match (config.step_count(), config.steps_per_snapshot()) {
        (Ok(s), Ok(e)) => (s, e),
        (Err(e), _) | (_, Err(e)) => bail!(e),
    };
    let mut state = match initial.map_or_else(|| initial_state(config), Ok) {
        Ok(s) => s,
        Err(e) => bail!(e),
    };
    let tau_start = state.tau_ensemble;
    let record = |state: &EnsembleState, series: &mut SnapshotSeries| -> Result<()> {
        let (geometry, quantum) = dynamics.fields(state).map_err(|e| e.at_time(state.tau_ensemble))?;
        series.snapshots.push(Snapshot { state: state.clone(), geometry, quantum });
        Ok(())
    };
    if let Err(e) = record(&state, &mut series) {
        bail!(e);
    }
    for k in 1..=steps {
        state = match dynamics.step(&state, config.dt) {
            Ok(s) => s,
            Err(e) => bail!(e),
        };
        state.tau_ensemble = tau_start + k as f64 * config.dt;
        if k % every == 0 || k == steps {
            if let Err(e) = record(&state, &mut series) {
                bail!(e);
            }
        }
    }
    Ok(series)
}
