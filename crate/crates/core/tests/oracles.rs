//! Cross-checks of the solvers against closed forms and independently coded formulas.

use rqt_core::analytic::{eval_exponential, AnalyticEnsemble};
use rqt_core::diagnostics::{inertial_limit_metric, pde_residual, probability_conservation_check};
use rqt_core::geometry::compute_geometry;
use rqt_core::nonrel::{nonrel_integrate, NonRelState};
use rqt_core::quantum::{compute_force, compute_q};
use rqt_core::{integrate, make_grid, Dynamics, EnsembleState, SimConfig, SnapshotSeries, StencilPlan, WeightFunction};

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |m, v| m.max(v.abs()))
}

fn analytic_series(ensemble: AnalyticEnsemble, config: &SimConfig, taus: &[f64]) -> SnapshotSeries {
    let states: Vec<EnsembleState> =
        taus.iter().map(|&tau| ensemble.sample(&config.grid, tau, config.mass, config.hbar, config.c).unwrap()).collect();
    SnapshotSeries::from_states(states, &Dynamics::new(config)).unwrap()
}

/// Fourth-order central difference of `g` at `c`.
fn fd1(g: &dyn Fn(f64) -> f64, c: f64, h: f64) -> f64 {
    (g(c - 2.0 * h) - 8.0 * g(c - h) + 8.0 * g(c + h) - g(c + 2.0 * h)) / (12.0 * h)
}

#[test]
fn curved_slice_potential_matches_nested_differences() {
    // A curved spacelike slice with a Gaussian weight; the oracle evaluates
    // Q = -(hbar^2/2m) gamma^{-1/2} R^{-1} (R'' - gamma' R' / 2 gamma),
    // R = f^{1/2} gamma^{-1/4}, by nested finite differences of closed forms.
    let (c, a, m, hbar) = (1.5, 0.5, 1.3, 0.9);
    let t_of = |cc: f64| 0.1 * (0.8 * cc).sin();
    let x_of = |cc: f64| cc + 0.05 * cc * cc * cc;
    let gamma = move |cc: f64| {
        let x1 = fd1(&x_of, cc, 1e-3);
        let t1 = fd1(&t_of, cc, 1e-3);
        x1 * x1 - c * c * t1 * t1
    };
    let r = move |cc: f64| (-a * cc * cc / 2.0).exp() * gamma(cc).powf(-0.25);
    let r1 = move |cc: f64| fd1(&r, cc, 1e-2);
    let r2 = move |cc: f64| fd1(&r1, cc, 1e-2);
    let g1 = move |cc: f64| fd1(&gamma, cc, 1e-2);
    let q_exact = move |cc: f64| {
        let k = hbar * hbar / (2.0 * m);
        -k / (gamma(cc).sqrt() * r(cc)) * (r2(cc) - 0.5 * g1(cc) / gamma(cc) * r1(cc))
    };

    let grid = make_grid(-2.0, 2.0, 161).unwrap();
    let plan = StencilPlan::default();
    let mut state = EnsembleState { tau_ensemble: 0.0, t: vec![], x: vec![], u0: vec![], u1: vec![] };
    for &cc in grid.nodes() {
        state.t.push(t_of(cc));
        state.x.push(x_of(cc));
        state.u0.push(c);
        state.u1.push(0.0);
    }
    let geom = compute_geometry(&state, &grid, &plan, c, &vec![1.0; grid.len()]).unwrap();
    let jet = WeightFunction::Gaussian { a }.jet(&grid);
    let (q, _) = compute_q(&geom, &jet, m, hbar).unwrap();
    for i in (10..151).step_by(7) {
        let cc = grid.nodes()[i];
        let exact = q_exact(cc);
        assert!((q[i] - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "C = {cc}: {} vs {exact}", q[i]);
    }
}

#[test]
fn gamma_one_force_law_at_the_rest_slice() {
    // At T = 0 the gamma = 1 family has x = C, so f^1 = mc^2 / C and f^0 = 0.
    let (b, c, m) = (1.0, 2.0, 1.0);
    let grid = make_grid(1.5, 4.0, 81).unwrap();
    let state = AnalyticEnsemble::HyperbolicGammaOne { b }.sample(&grid, 0.0, m, 1.0, c).unwrap();
    let geom = compute_geometry(&state, &grid, &StencilPlan::default(), c, &vec![1.0; 81]).unwrap();
    let q_c: Vec<f64> = grid.nodes().iter().map(|cc| -m * c * c / cc).collect();
    let (f0, f1) = compute_force(&geom, &q_c, c);
    for (i, &cc) in grid.nodes().iter().enumerate() {
        assert!(f0[i].abs() < 1e-12);
        assert!((f1[i] - m * c * c / cc).abs() < 1e-10 * m * c * c / cc, "C = {cc}");
    }
}

#[test]
fn analytic_inertial_series_has_no_residual() {
    let grid = make_grid(-5.0, 5.0, 25).unwrap();
    let config = SimConfig { boost: 0.4, snapshot_every: 0.5, ..SimConfig::new(2.0, WeightFunction::Uniform, grid, 5.0) };
    let taus: Vec<f64> = (0..11).map(|k| 0.5 * k as f64).collect();
    let series = analytic_series(AnalyticEnsemble::Inertial { beta0: 0.4 }, &config, &taus);
    let residual = pde_residual(&series, &config).unwrap();
    assert!(residual.max_abs().value <= 1e-12, "{}", residual.max_abs().value);
}

#[test]
fn analytic_exponential_series_is_rigid() {
    let grid = make_grid(-4.0, 4.0, 17).unwrap();
    let kappa = 0.7;
    let config = SimConfig::new(1.5, WeightFunction::Exponential { kappa }, grid, 4.0);
    let taus: Vec<f64> = (0..5).map(|k| k as f64).collect();
    let series = analytic_series(AnalyticEnsemble::Exponential { kappa }, &config, &taus);
    let residual = pde_residual(&series, &config).unwrap();
    assert!(residual.max_abs().value <= 1e-10, "{}", residual.max_abs().value);
    let drift = probability_conservation_check(&series, &config.weight, config.c).unwrap().drift;
    assert!(drift <= 1e-10, "{drift}");
    let e = eval_exponential(kappa, 2.0, 1.0, 1.0, 1.0, 1.5);
    assert_eq!(series.snapshots[2].state.t[12], e.t);
}

#[test]
fn gaussian_inertiality_measure_scales_as_inverse_c_squared() {
    // Largest |Q| on the initial slice sits at the grid edge: (1/2)(25/4 - 1/2).
    for c in [3.0, 100.0] {
        let config = SimConfig { t_final: 0.0, ..SimConfig::gaussian_baseline(c) };
        let series = integrate(&config).unwrap();
        let metric = inertial_limit_metric(&series, 1.0, c);
        assert!((metric - 2.875 / (c * c)).abs() <= 1e-9 / (c * c), "{metric}");
    }
}

fn nonrel_baseline() -> (SimConfig, Vec<NonRelState>) {
    let config = SimConfig::gaussian_baseline(1.0);
    let run = nonrel_integrate(&config).unwrap();
    (config, run)
}

#[test]
fn nonrel_gaussian_stays_gaussian() {
    let (config, run) = nonrel_baseline();
    let plan = StencilPlan::default();
    let mut previous = vec![1.0; config.grid.len()];
    for s in &run {
        let x_c = plan.derivative(&s.x, &config.grid, 1).unwrap();
        let gamma: Vec<f64> = x_c.iter().map(|v| v * v).collect();
        let lo = gamma.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = gamma.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = gamma.iter().sum::<f64>() / gamma.len() as f64;
        assert!(hi - lo <= 1e-3 * mean, "t = {}: spread {}", s.t, (hi - lo) / mean);
        for (now, before) in x_c.iter().zip(&previous) {
            assert!(*now >= 1.0 - 1e-12 && *now >= *before - 1e-12, "t = {}", s.t);
        }
        previous = x_c;
    }
}

#[test]
fn nonrel_density_integral_is_conserved() {
    let (config, run) = nonrel_baseline();
    let plan = StencilPlan::default();
    let f = |cc: f64| config.weight.f(cc);
    let integral = |s: &NonRelState| {
        let x_c = plan.derivative(&s.x, &config.grid, 1).unwrap();
        let rho: Vec<f64> = config.grid.nodes().iter().zip(&x_c).map(|(&cc, xc)| f(cc) / xc).collect();
        (1..rho.len()).map(|i| 0.5 * (rho[i] + rho[i - 1]) * (s.x[i] - s.x[i - 1])).sum::<f64>()
    };
    let start = integral(&run[0]);
    let drift = max_abs(run.iter().map(|s| integral(s) - start));
    assert!(drift <= 1e-6, "{drift}");
}

#[test]
fn nonrel_time_step_converges_at_fourth_order() {
    let final_x = |dt: f64| {
        let config = SimConfig { dt, snapshot_every: 2.0, t_final: 2.0, ..SimConfig::gaussian_baseline(1.0) };
        nonrel_integrate(&config).unwrap().pop().unwrap().x
    };
    let (a, b, c) = (final_x(0.08), final_x(0.04), final_x(0.02));
    let e1 = max_abs(a.iter().zip(&b).map(|(p, q)| p - q));
    let e2 = max_abs(b.iter().zip(&c).map(|(p, q)| p - q));
    let ratio = e1 / e2;
    assert!((ratio - 16.0).abs() <= 4.0, "{ratio}");
}

#[test]
fn boosted_rest_frames_agree_after_a_lorentz_transformation() {
    // Straight lines stay straight: integrated inertial ensemble equals the boost.
    let grid = make_grid(-8.0, 8.0, 9).unwrap();
    let config = SimConfig { boost: -0.3, ..SimConfig::new(2.0, WeightFunction::Uniform, grid, 3.0) };
    let series = integrate(&config).unwrap();
    let ensemble = AnalyticEnsemble::Inertial { beta0: -0.3 };
    for s in &series.snapshots {
        let exact = ensemble.sample(&config.grid, s.tau(), 1.0, 1.0, 2.0).unwrap();
        assert!(max_abs(s.state.x.iter().zip(&exact.x).map(|(p, q)| p - q)) < 1e-10);
        assert!(max_abs(s.state.t.iter().zip(&exact.t).map(|(p, q)| p - q)) < 1e-10);
    }
}
