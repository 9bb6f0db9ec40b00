//! Invariant checks, equation residuals and derived observables over a
//! snapshot series.

use std::fmt;

use crate::ensemble::{EnsembleState, SimConfig, SpatialGrid, WeightFunction};
use crate::error::{Error, Result};
use crate::geometry::GeometryFields;
use crate::numerics::{interpolate, StencilPlan};
use crate::quantum::{Snapshot, SnapshotSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub beta: Vec<f64>,
    pub rho_star: Vec<f64>,
    pub j0_natural: Vec<f64>,
}

/// β = |U¹|/U⁰, ρ* = f/√γ, j⁰ = c f.
pub fn derived_fields(state: &EnsembleState, geom: &GeometryFields, weight: &WeightFunction, grid: &SpatialGrid, c: f64) -> DerivedFields {
    let f: Vec<f64> = grid.nodes().iter().map(|&cc| weight.f(cc)).collect();
    DerivedFields {
        beta: state.u1.iter().zip(&state.u0).map(|(u1, u0)| u1.abs() / u0).collect(),
        rho_star: f.iter().zip(&geom.gamma).map(|(fv, g)| fv / g.sqrt()).collect(),
        j0_natural: f.iter().map(|fv| c * fv).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "true",
            Verdict::Fail => "false",
            Verdict::Skipped => "skipped",
        })
    }
}

/// Worst value of one monitored quantity over the series.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantRow {
    pub name: &'static str,
    pub max_violation: f64,
    pub tau_at_max: f64,
    pub c_at_max: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

impl InvariantRow {
    fn skipped(name: &'static str, tolerance: f64) -> Self {
        Self { name, max_violation: f64::NAN, tau_at_max: f64::NAN, c_at_max: f64::NAN, tolerance, verdict: Verdict::Skipped }
    }

    fn judged(name: &'static str, worst: Worst, tolerance: f64, strict: bool) -> Self {
        let ok = if strict { worst.value < tolerance } else { worst.value <= tolerance };
        Self {
            name,
            max_violation: worst.value,
            tau_at_max: worst.tau,
            c_at_max: worst.c_label,
            tolerance,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantReport {
    pub rows: Vec<InvariantRow>,
}

impl InvariantReport {
    /// No row failed. Skipped rows are listed but do not fail the report.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.verdict != Verdict::Fail)
    }

    pub fn row(&self, name: &str) -> Option<&InvariantRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("name\tmax_violation\tT_at_max\tC_at_max\ttolerance\tpass\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{:.6e}\t{}\t{}\t{:e}\t{}\n",
                r.name, r.max_violation, r.tau_at_max, r.c_at_max, r.tolerance, r.verdict
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Worst {
    pub value: f64,
    pub tau: f64,
    pub c_label: f64,
}

impl Worst {
    fn new() -> Self {
        Self { value: f64::NEG_INFINITY, tau: f64::NAN, c_label: f64::NAN }
    }

    fn offer(&mut self, value: f64, tau: f64, c_label: f64) {
        if value > self.value || value.is_nan() {
            *self = Self { value, tau, c_label };
        }
    }
}

fn scan(series: &SnapshotSeries, mut per_node: impl FnMut(&Snapshot, usize) -> f64) -> Worst {
    let mut worst = Worst::new();
    for snap in &series.snapshots {
        for (i, &cc) in series.grid.nodes().iter().enumerate() {
            worst.offer(per_node(snap, i), snap.tau(), cc);
        }
    }
    worst
}

/// |−(U⁰)² + (U¹)² + c²| / c²
pub fn norm_violation(series: &SnapshotSeries, c: f64) -> Worst {
    scan(series, |s, i| (-s.state.u0[i] * s.state.u0[i] + s.state.u1[i] * s.state.u1[i] + c * c).abs() / (c * c))
}

/// |−U⁰f⁰ + U¹f¹| / (c max|f| + ε), with max|f| taken over the slice.
pub fn orthogonality_violation(series: &SnapshotSeries, c: f64) -> Worst {
    let mut worst = Worst::new();
    for snap in &series.snapshots {
        let q = &snap.quantum;
        let fmax = q.f0.iter().chain(&q.f1).fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = c * fmax + f64::MIN_POSITIVE;
        for (i, &cc) in series.grid.nodes().iter().enumerate() {
            let dot = -snap.state.u0[i] * q.f0[i] + snap.state.u1[i] * q.f1[i];
            worst.offer(dot.abs() / scale, snap.tau(), cc);
        }
    }
    worst
}

pub fn g01_violation(series: &SnapshotSeries) -> Worst {
    scan(series, |s, i| s.geometry.g01_residual[i].abs())
}

/// Largest β = |U¹|/U⁰.
pub fn max_beta(series: &SnapshotSeries) -> Worst {
    scan(series, |s, i| s.state.u1[i].abs() / s.state.u0[i])
}

/// Largest −γ; negative when the slice is spacelike everywhere.
pub fn gamma_deficit(series: &SnapshotSeries) -> Worst {
    scan(series, |s, i| -s.geometry.gamma[i])
}

/// Residuals of the second-order equations
/// e^q ∂_T(e^q Y_T) + (Y_C/γ) Q_C/m = 0 for Y = t and Y = x, q = Q/mc².
#[derive(Debug, Clone, PartialEq)]
pub struct PdeResidual {
    pub taus: Vec<f64>,
    pub nodes: std::ops::Range<usize>,
    /// Indexed [snapshot][node] over `taus` and `nodes`.
    pub t_eq: Vec<Vec<f64>>,
    pub x_eq: Vec<Vec<f64>>,
    c_labels: Vec<f64>,
}

impl PdeResidual {
    /// Largest absolute residual across both equations.
    pub fn max_abs(&self) -> Worst {
        let mut worst = Worst::new();
        for (k, &tau) in self.taus.iter().enumerate() {
            for (j, i) in self.nodes.clone().enumerate() {
                worst.offer(self.t_eq[k][j].abs().max(self.x_eq[k][j].abs()), tau, self.c_labels[i]);
            }
        }
        worst
    }

    pub fn max_t(&self) -> f64 {
        self.t_eq.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_x(&self) -> f64 {
        self.x_eq.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Uniform spacing of the snapshot times, if any.
pub fn uniform_cadence(taus: &[f64]) -> Result<f64> {
    if taus.len() < 2 {
        return Err(Error::InsufficientSnapshots { needed: 2, found: taus.len() });
    }
    let step = (taus[taus.len() - 1] - taus[0]) / (taus.len() - 1) as f64;
    for w in taus.windows(2) {
        if ((w[1] - w[0]) - step).abs() > 1e-9 * step.abs().max(1e-300) {
            return Err(Error::NonUniformCadence(format!("spacing {} differs from {step}", w[1] - w[0])));
        }
    }
    Ok(step)
}

/// Residuals on every snapshot with two neighbours on each side and on the
/// nodes where all C-stencils are centred. T-derivatives are five-point
/// central differences over the stored snapshots.
pub fn pde_residual(series: &SnapshotSeries, config: &SimConfig) -> Result<PdeResidual> {
    let taus = series.taus();
    if taus.len() < 5 {
        return Err(Error::InsufficientSnapshots { needed: 5, found: taus.len() });
    }
    let dtau = uniform_cadence(&taus)?;
    let plan = StencilPlan::new(config.stencil_order);
    let nodes = plan.interior_range(series.grid.len());
    let mc2 = config.mass * config.c * config.c;
    let snaps = &series.snapshots;
    let d1 = |f: &dyn Fn(usize) -> f64, k: usize| (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) / (12.0 * dtau);
    let d2 = |f: &dyn Fn(usize) -> f64, k: usize| {
        (-f(k - 2) + 16.0 * f(k - 1) - 30.0 * f(k) + 16.0 * f(k + 1) - f(k + 2)) / (12.0 * dtau * dtau)
    };
    let mut out = PdeResidual {
        taus: Vec::new(),
        nodes: nodes.clone(),
        t_eq: Vec::new(),
        x_eq: Vec::new(),
        c_labels: series.grid.nodes().to_vec(),
    };
    for k in 2..snaps.len() - 2 {
        let mut rt = Vec::with_capacity(nodes.len());
        let mut rx = Vec::with_capacity(nodes.len());
        for i in nodes.clone() {
            let q = |j: usize| snaps[j].quantum.q[i] / mc2;
            let t = |j: usize| snaps[j].state.t[i];
            let x = |j: usize| snaps[j].state.x[i];
            let s = &snaps[k];
            let e2q = (2.0 * q(k)).exp();
            let q_t = d1(&q, k);
            let drive = s.quantum.q_c[i] / (s.geometry.gamma[i] * config.mass);
            rt.push(e2q * (d2(&t, k) + q_t * d1(&t, k)) + s.geometry.t_c[i] * drive);
            rx.push(e2q * (d2(&x, k) + q_t * d1(&x, k)) + s.geometry.x_c[i] * drive);
        }
        out.taus.push(taus[k]);
        out.t_eq.push(rt);
        out.x_eq.push(rx);
    }
    Ok(out)
}

/// Outcome of the slice-integral probability check.
#[derive(Debug, Clone, PartialEq)]
pub struct ConservationCheck {
    /// Largest relative deviation of ∫ρ* ds from ∫f dC over the snapshots.
    pub drift: f64,
    pub per_snapshot: Vec<f64>,
    /// Weight at a grid edge exceeds 1e-6 of its maximum.
    pub truncated: bool,
}

const GAUSS3: [(f64, f64); 3] = [
    (-0.774_596_669_241_483_4, 5.0 / 9.0),
    (0.0, 8.0 / 9.0),
    (0.774_596_669_241_483_4, 5.0 / 9.0),
];

/// Integrates ρ* over Minkowski arclength along each stored slice.
///
/// Each segment between neighbouring trajectories is the cubic Hermite curve
/// through their events with the stencil tangents; ln ρ* is interpolated
/// cubically. The reference is the same quadrature of f over C.
pub fn probability_conservation_check(series: &SnapshotSeries, weight: &WeightFunction, c: f64) -> Result<ConservationCheck> {
    let grid = &series.grid;
    let nodes = grid.nodes();
    let h = grid.spacing();
    let f_nodes: Vec<f64> = nodes.iter().map(|&cc| weight.f(cc)).collect();
    let f_max = f_nodes.iter().cloned().fold(0.0, f64::max);
    let truncated = f_nodes[0] > 1e-6 * f_max || f_nodes[nodes.len() - 1] > 1e-6 * f_max;

    let mut reference = 0.0;
    for seg in 0..nodes.len() - 1 {
        for (xi, w) in GAUSS3 {
            reference += 0.5 * h * w * weight.f(nodes[seg] + 0.5 * h * (1.0 + xi));
        }
    }

    let mut per_snapshot = Vec::with_capacity(series.len());
    for snap in &series.snapshots {
        let (s, g) = (&snap.state, &snap.geometry);
        let ln_rho: Vec<f64> = f_nodes.iter().zip(&g.gamma).map(|(fv, gv)| fv.ln() - 0.5 * gv.ln()).collect();
        let mut total = 0.0;
        for seg in 0..nodes.len() - 1 {
            for (xi, w) in GAUSS3 {
                let u = 0.5 * (1.0 + xi);
                let (h00, h10, h01, h11) = (6.0 * u * u - 6.0 * u, 3.0 * u * u - 4.0 * u + 1.0, -6.0 * u * u + 6.0 * u, 3.0 * u * u - 2.0 * u);
                let slope = |p: &[f64], m: &[f64]| (h00 * p[seg] + h10 * h * m[seg] + h01 * p[seg + 1] + h11 * h * m[seg + 1]) / h;
                let dt = slope(&s.t, &g.t_c);
                let dx = slope(&s.x, &g.x_c);
                let ds = (dx * dx - c * c * dt * dt).max(0.0).sqrt();
                let rho = interpolate(&ln_rho, grid, nodes[seg] + u * h)?.exp();
                total += 0.5 * h * w * rho * ds;
            }
        }
        per_snapshot.push((total - reference).abs() / reference);
    }
    let drift = per_snapshot.iter().cloned().fold(0.0, f64::max);
    Ok(ConservationCheck { drift, per_snapshot, truncated })
}

/// max |Q| / mc² over the series.
pub fn inertial_limit_metric(series: &SnapshotSeries, mass: f64, c: f64) -> f64 {
    let qmax = series.snapshots.iter().flat_map(|s| s.quantum.q.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    qmax / (mass * c * c)
}

/// |Q(±C_ref)| / max_C |Q| per snapshot, C_ref = 1/√a.
pub fn reference_trajectory_ratios(series: &SnapshotSeries, a: f64) -> Result<Vec<(f64, f64, f64)>> {
    let c_ref = 1.0 / a.sqrt();
    series
        .snapshots
        .iter()
        .map(|snap| {
            let q = &snap.quantum.q;
            let qmax = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let minus = interpolate(q, &series.grid, -c_ref)?.abs() / qmax;
            let plus = interpolate(q, &series.grid, c_ref)?.abs() / qmax;
            Ok((snap.tau(), minus, plus))
        })
        .collect()
}

/// Second central difference of γ at the node nearest `c_label`.
pub fn gamma_curvature(snapshot: &Snapshot, grid: &SpatialGrid, c_label: f64) -> Result<f64> {
    let h = grid.spacing();
    let i = ((c_label - grid.c_min()) / h).round();
    if !(i >= 1.0 && (i as usize) + 1 < grid.len()) {
        return Err(Error::OutOfRange { query: c_label, min: grid.c_min() + h, max: grid.c_max() - h });
    }
    let i = i as usize;
    let g = &snapshot.geometry.gamma;
    Ok((g[i + 1] - 2.0 * g[i] + g[i - 1]) / (h * h))
}

/// Every monitored invariant over `series`, judged against the configured tolerances.
pub fn invariant_report(series: &SnapshotSeries, config: &SimConfig) -> InvariantReport {
    let tol = config.tolerances;
    let mut rows = vec![
        InvariantRow::judged("four_velocity_norm", norm_violation(series, config.c), tol.invariant, false),
        InvariantRow::judged("force_orthogonality", orthogonality_violation(series, config.c), tol.invariant, false),
        InvariantRow::judged("g01_block_diagonality", g01_violation(series), tol.invariant, false),
        InvariantRow::judged("subluminality", max_beta(series), 1.0, true),
        InvariantRow::judged("gamma_positivity", gamma_deficit(series), 0.0, true),
    ];
    rows.push(match pde_residual(series, config) {
        Ok(r) => InvariantRow::judged("pde_residual", r.max_abs(), tol.residual, false),
        Err(_) => InvariantRow::skipped("pde_residual", tol.residual),
    });
    let reference = match config.weight {
        WeightFunction::Gaussian { a } => reference_trajectory_ratios(series, a).ok().map(|ratios| {
            let c_ref = 1.0 / a.sqrt();
            let mut worst = Worst::new();
            for (tau, minus, plus) in ratios {
                worst.offer(minus, tau, -c_ref);
                worst.offer(plus, tau, c_ref);
            }
            InvariantRow::judged("reference_trajectory_q", worst, tol.interp, false)
        }),
        _ => None,
    };
    rows.push(reference.unwrap_or_else(|| InvariantRow::skipped("reference_trajectory_q", tol.interp)));
    InvariantReport { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::AnalyticEnsemble;
    use crate::ensemble::make_grid;
    use crate::quantum::Dynamics;
    use approx::assert_abs_diff_eq;

    fn analytic_series(kind: AnalyticEnsemble, cfg: &SimConfig, taus: &[f64]) -> SnapshotSeries {
        let states = taus.iter().map(|&t| kind.sample(&cfg.grid, t, cfg.mass, cfg.hbar, cfg.c).unwrap()).collect();
        SnapshotSeries::from_states(states, &Dynamics::new(cfg)).unwrap()
    }

    #[test]
    fn derived_fields_on_rest_slice() {
        let cfg = SimConfig::gaussian_baseline(3.0);
        let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.0 }, &cfg, &[0.0]);
        let s = &series.snapshots[0];
        let d = derived_fields(&s.state, &s.geometry, &cfg.weight, &cfg.grid, cfg.c);
        assert!(d.beta.iter().all(|&b| b == 0.0));
        for (i, &cc) in cfg.grid.nodes().iter().enumerate() {
            assert_abs_diff_eq!(d.rho_star[i], cfg.weight.f(cc), epsilon = 1e-14);
            assert_abs_diff_eq!(d.j0_natural[i], 3.0 * cfg.weight.f(cc), epsilon = 1e-14);
        }
    }

    #[test]
    fn inertial_series_passes_everything() {
        let grid = make_grid(-5.0, 5.0, 25).unwrap();
        let cfg = SimConfig { boost: 0.4, ..SimConfig::new(2.0, WeightFunction::Uniform, grid, 1.0) };
        let taus: Vec<f64> = (0..11).map(|k| 0.1 * k as f64).collect();
        let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.4 }, &cfg, &taus);
        let report = invariant_report(&series, &cfg);
        assert!(report.passed(), "{}", report.to_tsv());
        assert!(pde_residual(&series, &cfg).unwrap().max_abs().value <= 1e-12);
        assert_eq!(report.row("reference_trajectory_q").unwrap().verdict, Verdict::Skipped);
        assert!(inertial_limit_metric(&series, 1.0, 2.0) <= 1e-12);
        let cons = probability_conservation_check(&series, &cfg.weight, cfg.c).unwrap();
        assert!(cons.drift <= 1e-10, "{}", cons.drift);
    }

    #[test]
    fn exponential_series_residual_and_conservation() {
        let grid = make_grid(-2.0, 2.0, 21).unwrap();
        let kappa = 0.8;
        let cfg = SimConfig::new(1.5, WeightFunction::Exponential { kappa }, grid, 1.0);
        let taus: Vec<f64> = (0..9).map(|k| 0.05 * k as f64).collect();
        let series = analytic_series(AnalyticEnsemble::Exponential { kappa }, &cfg, &taus);
        assert!(pde_residual(&series, &cfg).unwrap().max_abs().value <= 1e-10);
        let cons = probability_conservation_check(&series, &cfg.weight, cfg.c).unwrap();
        assert!(cons.drift <= 1e-10);
        assert!(cons.truncated);
    }

    #[test]
    fn residual_needs_five_uniform_snapshots() {
        let cfg = SimConfig::gaussian_baseline(3.0);
        let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.0 }, &cfg, &[0.0, 1.0, 2.0, 3.0]);
        assert!(matches!(pde_residual(&series, &cfg), Err(Error::InsufficientSnapshots { .. })));
        let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.0 }, &cfg, &[0.0, 1.0, 2.0, 3.0, 5.0]);
        assert!(matches!(pde_residual(&series, &cfg), Err(Error::NonUniformCadence(_))));
        let report = invariant_report(&series, &cfg);
        assert_eq!(report.row("pde_residual").unwrap().verdict, Verdict::Skipped);
        assert!(report.to_tsv().contains("pde_residual\tNaN"));
    }

    #[test]
    fn inertial_metric_for_gaussian_slice() {
        // On C ∈ [−5, 5] the largest |Q₀| = (a²C² − a)/2 sits at the edges: 2.875.
        for (c, expected) in [(100.0, 2.875 / 1e4), (3.0, 2.875 / 9.0)] {
            let cfg = SimConfig::gaussian_baseline(c);
            let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.0 }, &cfg, &[0.0]);
            assert_abs_diff_eq!(inertial_limit_metric(&series, 1.0, c), expected, epsilon = 1e-10);
        }
    }

    #[test]
    fn gaussian_initial_reference_zeros() {
        let cfg = SimConfig::gaussian_baseline(3.0);
        let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.0 }, &cfg, &[0.0]);
        let (_, minus, plus) = reference_trajectory_ratios(&series, 0.5).unwrap()[0];
        // Cubic interpolation of the parabola Q₀ is exact.
        assert!(minus < 1e-12 && plus < 1e-12);
    }
}
