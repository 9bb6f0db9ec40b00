//! Closed-form ensembles: boosted inertial motion, exponential decay at rest,
//! and the two hyperbolic families.

use crate::ensemble::{EnsembleState, LogWeightJet, SpatialGrid, WeightFunction};
use crate::error::{Error, Result};
use crate::numerics::StencilPlan;

/// One event of a trajectory: position and four-velocity, x^α = (ct, x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub x: f64,
    pub u0: f64,
    pub u1: f64,
}

pub fn eval_inertial(beta0: f64, tau: f64, c_label: f64, c: f64) -> Result<Event> {
    if !(beta0.abs() < 1.0) {
        return Err(Error::Domain { ensemble: "inertial", reason: format!("|beta0| = {} must be < 1", beta0.abs()) });
    }
    let lorentz = 1.0 / (1.0 - beta0 * beta0).sqrt();
    Ok(Event {
        t: lorentz * (tau + beta0 * c_label / c),
        x: lorentz * (c_label + beta0 * c * tau),
        u0: lorentz * c,
        u1: lorentz * beta0 * c,
    })
}

/// dt/dT for the exponential ensemble.
pub fn exponential_rate(kappa: f64, mass: f64, hbar: f64, c: f64) -> f64 {
    let r = hbar * kappa / (mass * c);
    (0.5 * r * r).exp()
}

pub fn eval_exponential(kappa: f64, tau: f64, c_label: f64, mass: f64, hbar: f64, c: f64) -> Event {
    Event { t: exponential_rate(kappa, mass, hbar, c) * tau, x: c_label, u0: c, u1: 0.0 }
}

pub fn eval_hyperbolic_gamma_one(b: f64, tau: f64, c_label: f64, c: f64) -> Result<Event> {
    if c_label == 0.0 {
        return Err(Error::Domain { ensemble: "hyperbolic-gamma-one", reason: "C = 0 is singular".into() });
    }
    let w = c * b * tau;
    Ok(Event { t: c_label / c * w.sinh(), x: c_label * w.cosh(), u0: c * w.cosh(), u1: c * w.sinh() })
}

pub fn eval_hyperbolic_gamma_t(a: f64, tau: f64, c_label: f64, c: f64) -> Result<Event> {
    if tau == 0.0 {
        return Err(Error::Domain { ensemble: "hyperbolic-gamma-t", reason: "T = 0 is a degenerate slice".into() });
    }
    let w = a * c_label;
    Ok(Event { t: tau * w.cosh(), x: c * tau * w.sinh(), u0: c * w.cosh(), u1: c * w.sinh() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticEnsemble {
    Inertial { beta0: f64 },
    Exponential { kappa: f64 },
    HyperbolicGammaOne { b: f64 },
    HyperbolicGammaT { a: f64 },
}

impl AnalyticEnsemble {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticEnsemble::Inertial { .. } => "inertial",
            AnalyticEnsemble::Exponential { .. } => "exponential",
            AnalyticEnsemble::HyperbolicGammaOne { .. } => "hyperbolic-gamma-one",
            AnalyticEnsemble::HyperbolicGammaT { .. } => "hyperbolic-gamma-t",
        }
    }

    /// Hyperbolic families are singular somewhere and never used as initial data.
    pub fn is_viable(&self) -> bool {
        matches!(self, AnalyticEnsemble::Inertial { .. } | AnalyticEnsemble::Exponential { .. })
    }

    /// Closed-form weight, where one exists.
    pub fn weight(&self) -> Option<WeightFunction> {
        match *self {
            AnalyticEnsemble::Inertial { .. } | AnalyticEnsemble::HyperbolicGammaT { .. } => Some(WeightFunction::Uniform),
            AnalyticEnsemble::Exponential { kappa } => Some(WeightFunction::Exponential { kappa }),
            AnalyticEnsemble::HyperbolicGammaOne { .. } => None,
        }
    }

    pub fn evaluate(&self, tau: f64, c_label: f64, mass: f64, hbar: f64, c: f64) -> Result<Event> {
        match *self {
            AnalyticEnsemble::Inertial { beta0 } => eval_inertial(beta0, tau, c_label, c),
            AnalyticEnsemble::Exponential { kappa } => Ok(eval_exponential(kappa, tau, c_label, mass, hbar, c)),
            AnalyticEnsemble::HyperbolicGammaOne { b } => eval_hyperbolic_gamma_one(b, tau, c_label, c),
            AnalyticEnsemble::HyperbolicGammaT { a } => eval_hyperbolic_gamma_t(a, tau, c_label, c),
        }
    }

    /// The slice at `tau` sampled on `grid`.
    pub fn sample(&self, grid: &SpatialGrid, tau: f64, mass: f64, hbar: f64, c: f64) -> Result<EnsembleState> {
        let n = grid.len();
        let mut s = EnsembleState {
            tau_ensemble: tau,
            t: Vec::with_capacity(n),
            x: Vec::with_capacity(n),
            u0: Vec::with_capacity(n),
            u1: Vec::with_capacity(n),
        };
        for &cc in grid.nodes() {
            let e = self.evaluate(tau, cc, mass, hbar, c)?;
            s.t.push(e.t);
            s.x.push(e.x);
            s.u0.push(e.u0);
            s.u1.push(e.u1);
        }
        s.check_structure()?;
        Ok(s)
    }
}

/// ln f jet for the γ = 1 hyperbolic family, whose weight solves
/// ψ'' = (2m²c²/ħ²) ln(BC) ψ with ψ = f^{1/2}.
///
/// The Riccati form u' = K ln(BC) − u², u = ψ'/ψ, is integrated from
/// u(c_min) = `u_start` with RK4 substeps; higher derivatives of u are taken
/// with the grid stencils so the jet never uses the closed-form Q.
pub fn hyperbolic_gamma_one_weight_jet(
    b: f64,
    grid: &SpatialGrid,
    plan: &StencilPlan,
    mass: f64,
    hbar: f64,
    c: f64,
    u_start: f64,
) -> Result<LogWeightJet> {
    if !(b * grid.c_min() > 0.0 && b * grid.c_max() > 0.0) {
        return Err(Error::Domain {
            ensemble: "hyperbolic-gamma-one",
            reason: format!("B*C must be positive on [{}, {}]", grid.c_min(), grid.c_max()),
        });
    }
    let k = 2.0 * (mass * c / hbar).powi(2);
    let rhs = |cc: f64, u: f64| k * (b * cc).ln() - u * u;
    const SUBSTEPS: usize = 400;
    let h = grid.spacing() / SUBSTEPS as f64;
    let mut u = vec![u_start];
    let mut cur = u_start;
    for &node in &grid.nodes()[..grid.len() - 1] {
        for j in 0..SUBSTEPS {
            let s = node + j as f64 * h;
            let k1 = rhs(s, cur);
            let k2 = rhs(s + 0.5 * h, cur + 0.5 * h * k1);
            let k3 = rhs(s + 0.5 * h, cur + 0.5 * h * k2);
            let k4 = rhs(s + h, cur + h * k3);
            cur += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        if !cur.is_finite() {
            return Err(Error::Domain { ensemble: "hyperbolic-gamma-one", reason: "weight ODE diverged".into() });
        }
        u.push(cur);
    }
    let du = plan.derivative(&u, grid, 1)?;
    let d2u = plan.derivative(&u, grid, 2)?;
    Ok(LogWeightJet {
        d1: u.iter().map(|v| 2.0 * v).collect(),
        d2: du.iter().map(|v| 2.0 * v).collect(),
        d3: d2u.iter().map(|v| 2.0 * v).collect(),
    })
}
