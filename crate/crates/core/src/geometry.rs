//! Metric of the natural-coordinate frame on one slice: Jacobian columns,
//! spatial metric γ with its C-derivatives, and the g₀₁ residual.

use crate::ensemble::{EnsembleState, SpatialGrid};
use crate::error::{Error, Result};
use crate::numerics::StencilPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryFields {
    pub t_c: Vec<f64>,
    pub x_c: Vec<f64>,
    /// γ = x_C² − c² t_C²
    pub gamma: Vec<f64>,
    /// dγ/dC, d²γ/dC², d³γ/dC³ from direct stencils on t and x.
    pub gamma_derivs: [Vec<f64>; 3],
    /// −c² t_T t_C + x_T x_C
    pub g01_residual: Vec<f64>,
}

impl GeometryFields {
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

/// Everything except the g₀₁ residual, which needs τ_T and therefore Q.
pub(crate) fn slice_geometry(state: &EnsembleState, grid: &SpatialGrid, plan: &StencilPlan, c: f64) -> Result<GeometryFields> {
    grid.check_len(&state.x)?;
    let td: Vec<Vec<f64>> = (1..=4).map(|k| plan.derivative(&state.t, grid, k)).collect::<Result<_>>()?;
    let xd: Vec<Vec<f64>> = (1..=4).map(|k| plan.derivative(&state.x, grid, k)).collect::<Result<_>>()?;
    let n = grid.len();
    let c2 = c * c;
    let mut gamma = vec![0.0; n];
    let mut g1 = vec![0.0; n];
    let mut g2 = vec![0.0; n];
    let mut g3 = vec![0.0; n];
    for i in 0..n {
        let (t1, t2, t3, t4) = (td[0][i], td[1][i], td[2][i], td[3][i]);
        let (x1, x2, x3, x4) = (xd[0][i], xd[1][i], xd[2][i], xd[3][i]);
        gamma[i] = x1 * x1 - c2 * t1 * t1;
        g1[i] = 2.0 * (x1 * x2 - c2 * t1 * t2);
        g2[i] = 2.0 * (x2 * x2 + x1 * x3 - c2 * (t2 * t2 + t1 * t3));
        g3[i] = 2.0 * (3.0 * x2 * x3 + x1 * x4 - c2 * (3.0 * t2 * t3 + t1 * t4));
    }
    for (node, &g) in gamma.iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFinite { what: "gamma", node });
        }
        if g <= 0.0 {
            return Err(Error::NonPositiveGamma { node, value: g });
        }
    }
    let mut it = td.into_iter();
    let t_c = it.next().expect("first derivative");
    let mut it = xd.into_iter();
    let x_c = it.next().expect("first derivative");
    Ok(GeometryFields { t_c, x_c, gamma, gamma_derivs: [g1, g2, g3], g01_residual: vec![0.0; n] })
}

pub(crate) fn fill_g01(geom: &mut GeometryFields, state: &EnsembleState, tau_t: &[f64], c: f64) {
    for i in 0..geom.len() {
        let t_t = tau_t[i] * state.u0[i] / c;
        let x_t = tau_t[i] * state.u1[i];
        geom.g01_residual[i] = -c * c * t_t * geom.t_c[i] + x_t * geom.x_c[i];
    }
}

/// Geometry of `state`; `tau_t` supplies dτ/dT for the g₀₁ residual.
pub fn compute_geometry(
    state: &EnsembleState,
    grid: &SpatialGrid,
    plan: &StencilPlan,
    c: f64,
    tau_t: &[f64],
) -> Result<GeometryFields> {
    grid.check_len(tau_t)?;
    let mut geom = slice_geometry(state, grid, plan, c)?;
    fill_g01(&mut geom, state, tau_t, c);
    Ok(geom)
}

/// g₀₀ = −τ_T² per node.
pub fn g00_from_tau(tau_t: &[f64]) -> Result<Vec<f64>> {
    tau_t
        .iter()
        .enumerate()
        .map(|(node, &v)| {
            if v > 0.0 && v.is_finite() {
                Ok(-v * v)
            } else {
                Err(Error::NonPositiveTau { node, value: v })
            }
        })
        .collect()
}
