//! Grids, ensemble states, run configuration and the probability weight f(C).

use crate::error::{Error, Result};
use crate::numerics::StencilOrder;

/// Smallest grid that fits the widest one-sided stencil (4th derivative, order 4).
pub const MIN_POINTS: usize = 9;

/// Uniform grid of trajectory labels C.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    c_min: f64,
    c_max: f64,
    nodes: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(c_min: f64, c_max: f64, n_points: usize) -> Result<Self> {
        if !c_min.is_finite() || !c_max.is_finite() {
            return Err(Error::InvalidGrid(format!("non-finite bounds [{c_min}, {c_max}]")));
        }
        if c_max <= c_min {
            return Err(Error::InvalidGrid(format!("c_max = {c_max} must exceed c_min = {c_min}")));
        }
        if n_points < MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "{n_points} points is below the stencil minimum of {MIN_POINTS}"
            )));
        }
        // Weighted endpoints keep symmetric intervals exactly symmetric.
        let m = (n_points - 1) as f64;
        let nodes: Vec<f64> = (0..n_points).map(|i| (c_min * (m - i as f64) + c_max * i as f64) / m).collect();
        Ok(Self { c_min, c_max, nodes })
    }

    pub fn c_min(&self) -> f64 {
        self.c_min
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        (self.c_max - self.c_min) / (self.nodes.len() - 1) as f64
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Same interval with the spacing halved (2n - 1 points).
    pub fn refined(&self) -> Self {
        Self::new(self.c_min, self.c_max, 2 * self.len() - 1).expect("refining a valid grid")
    }

    pub(crate) fn check_len(&self, values: &[f64]) -> Result<()> {
        if values.len() != self.len() {
            return Err(Error::LengthMismatch { expected: self.len(), found: values.len() });
        }
        Ok(())
    }
}

/// `make_grid` under its operational name.
pub fn make_grid(c_min: f64, c_max: f64, n_points: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(c_min, c_max, n_points)
}

/// Probability weight per trajectory, unnormalized, given through ln f.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightFunction {
    /// ln f = -a C²
    Gaussian { a: f64 },
    /// ln f = -2 κ C
    Exponential { kappa: f64 },
    /// ln f = 0
    Uniform,
}

impl WeightFunction {
    pub fn name(&self) -> &'static str {
        match self {
            WeightFunction::Gaussian { .. } => "gaussian",
            WeightFunction::Exponential { .. } => "exponential",
            WeightFunction::Uniform => "uniform",
        }
    }

    pub fn log_f(&self, c: f64) -> f64 {
        match *self {
            WeightFunction::Gaussian { a } => -a * c * c,
            WeightFunction::Exponential { kappa } => -2.0 * kappa * c,
            WeightFunction::Uniform => 0.0,
        }
    }

    pub fn f(&self, c: f64) -> f64 {
        self.log_f(c).exp()
    }

    /// d ln f / dC
    pub fn dlog_f(&self, c: f64) -> f64 {
        match *self {
            WeightFunction::Gaussian { a } => -2.0 * a * c,
            WeightFunction::Exponential { kappa } => -2.0 * kappa,
            WeightFunction::Uniform => 0.0,
        }
    }

    pub fn d2log_f(&self, _c: f64) -> f64 {
        match *self {
            WeightFunction::Gaussian { a } => -2.0 * a,
            WeightFunction::Exponential { .. } | WeightFunction::Uniform => 0.0,
        }
    }

    pub fn d3log_f(&self, _c: f64) -> f64 {
        0.0
    }

    /// Derivatives of ln f sampled on the grid nodes.
    pub fn jet(&self, grid: &SpatialGrid) -> LogWeightJet {
        let nodes = grid.nodes();
        LogWeightJet {
            d1: nodes.iter().map(|&c| self.dlog_f(c)).collect(),
            d2: nodes.iter().map(|&c| self.d2log_f(c)).collect(),
            d3: nodes.iter().map(|&c| self.d3log_f(c)).collect(),
        }
    }
}

/// `weight_log_derivative` under its operational name.
pub fn weight_log_derivative(w: &WeightFunction, c: f64) -> f64 {
    w.dlog_f(c)
}

/// First three C-derivatives of ln f at each node. The value of ln f itself
/// never enters the dynamics, so no normalization constant is carried.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeightJet {
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
}

/// Trajectory ensemble on one simultaneity slice, T = `tau_ensemble`.
///
/// Components follow x^α = (ct, x); `t` is stored as coordinate time and
/// `u0 = d(ct)/dτ`, `u1 = dx/dτ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleState {
    pub tau_ensemble: f64,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
}

impl EnsembleState {
    /// Builds a state and checks the structural invariants: equal lengths,
    /// finite entries, U⁰ > 0 and strictly increasing x.
    pub fn new(tau_ensemble: f64, t: Vec<f64>, x: Vec<f64>, u0: Vec<f64>, u1: Vec<f64>) -> Result<Self> {
        let state = Self { tau_ensemble, t, x, u0, u1 };
        state.check_structure()?;
        Ok(state)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn check_structure(&self) -> Result<()> {
        let n = self.x.len();
        for arr in [&self.t, &self.u0, &self.u1] {
            if arr.len() != n {
                return Err(Error::LengthMismatch { expected: n, found: arr.len() });
            }
        }
        for (what, arr) in [("t", &self.t), ("x", &self.x), ("U0", &self.u0), ("U1", &self.u1)] {
            if let Some(node) = arr.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what, node });
            }
        }
        if let Some(node) = self.u0.iter().position(|&u| u <= 0.0) {
            return Err(Error::NotForwardInTime { node, value: self.u0[node] });
        }
        if let Some(node) = self.x.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::TrajectoryCrossing { node });
        }
        Ok(())
    }

    /// Largest |−(U⁰)² + (U¹)² + c²| / c² over the nodes.
    pub fn max_norm_violation(&self, c: f64) -> (f64, usize) {
        let mut worst = (0.0, 0);
        for (i, (&u0, &u1)) in self.u0.iter().zip(&self.u1).enumerate() {
            let v = (-u0 * u0 + u1 * u1 + c * c).abs() / (c * c);
            if v > worst.0 {
                worst = (v, i);
            }
        }
        worst
    }

    pub fn check_timelike(&self) -> Result<()> {
        for (node, (&u0, &u1)) in self.u0.iter().zip(&self.u1).enumerate() {
            let beta = u1.abs() / u0;
            if beta >= 1.0 {
                return Err(Error::Superluminal { node, beta });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub residual: f64,
    pub invariant: f64,
    /// Reference-trajectory check, relative to max |Q| on the slice.
    pub interp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { residual: 1e-5, invariant: 1e-8, interp: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mass: f64,
    pub hbar: f64,
    pub c: f64,
    pub weight: WeightFunction,
    pub grid: SpatialGrid,
    pub t_final: f64,
    pub dt: f64,
    /// Snapshot cadence in T.
    pub snapshot_every: f64,
    pub stencil_order: StencilOrder,
    pub tolerances: Tolerances,
    /// Boost β₀ of the initial slice (uniform weight only).
    pub boost: f64,
}

impl SimConfig {
    /// Defaults for everything except the physics that must be chosen.
    pub fn new(c: f64, weight: WeightFunction, grid: SpatialGrid, t_final: f64) -> Self {
        Self {
            mass: 1.0,
            hbar: 1.0,
            c,
            weight,
            grid,
            t_final,
            dt: 1e-3,
            snapshot_every: 1.0,
            stencil_order: StencilOrder::Fourth,
            tolerances: Tolerances::default(),
            boost: 0.0,
        }
    }

    /// m = ħ = 1, a = 1/2 Gaussian on C ∈ [−5, 5] with 25 nodes, T ∈ [0, 10].
    pub fn gaussian_baseline(c: f64) -> Self {
        let grid = SpatialGrid::new(-5.0, 5.0, 25).expect("baseline grid");
        Self::new(c, WeightFunction::Gaussian { a: 0.5 }, grid, 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("hbar", self.hbar),
            ("c", self.c),
            ("time.dt", self.dt),
            ("time.every", self.snapshot_every),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::config("time.final", format!("must be finite and >= 0, got {}", self.t_final)));
        }
        match self.weight {
            WeightFunction::Gaussian { a } if !(a.is_finite() && a > 0.0) => {
                return Err(Error::config("weight.a", format!("must be finite and > 0, got {a}")));
            }
            WeightFunction::Exponential { kappa } if !kappa.is_finite() => {
                return Err(Error::config("weight.kappa", "must be finite"));
            }
            _ => {}
        }
        for (key, v) in [
            ("tol.residual", self.tolerances.residual),
            ("tol.invariant", self.tolerances.invariant),
            ("tol.interp", self.tolerances.interp),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be finite and > 0, got {v}")));
            }
        }
        if !(self.boost.is_finite() && self.boost.abs() < 1.0) {
            return Err(Error::config("init.boost", format!("|beta0| must be < 1, got {}", self.boost)));
        }
        if self.boost != 0.0 && self.weight != WeightFunction::Uniform {
            return Err(Error::config("init.boost", "a boosted initial slice requires weight.kind = uniform"));
        }
        self.step_count()?;
        self.steps_per_snapshot()?;
        Ok(())
    }

    /// Number of fixed steps covering [0, t_final].
    pub fn step_count(&self) -> Result<usize> {
        whole_multiple(self.t_final, self.dt).ok_or_else(|| {
            Error::config("time.final", format!("{} is not a whole number of steps dt = {}", self.t_final, self.dt))
        })
    }

    pub fn steps_per_snapshot(&self) -> Result<usize> {
        match whole_multiple(self.snapshot_every, self.dt) {
            Some(k) if k > 0 => Ok(k),
            _ => Err(Error::config(
                "time.every",
                format!("{} is not a positive whole number of steps dt = {}", self.snapshot_every, self.dt),
            )),
        }
    }
}

fn whole_multiple(span: f64, step: f64) -> Option<usize> {
    let ratio = span / step;
    let k = ratio.round();
    ((ratio - k).abs() <= 1e-9 * ratio.max(1.0)).then_some(k as usize)
}
