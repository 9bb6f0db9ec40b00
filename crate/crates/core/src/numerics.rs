//! Finite-difference stencils on the label grid, cubic interpolation, and a
//! fixed-step RK4 driver shared by both solvers.
//!
//! Every C-derivative up to fourth order has its own stencil: a centered row
//! in the interior and one-sided rows of the same accuracy near each edge.
//! Weights come from Fornberg's recursion on integer offsets and are scaled
//! by 1/hᵏ when applied.

use crate::ensemble::SpatialGrid;
use crate::error::{Error, Result};

pub const MAX_DERIVATIVE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilOrder {
    Second,
    Fourth,
}

impl StencilOrder {
    pub fn accuracy(self) -> usize {
        match self {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }

    pub fn from_accuracy(p: usize) -> Option<Self> {
        match p {
            2 => Some(StencilOrder::Second),
            4 => Some(StencilOrder::Fourth),
            _ => None,
        }
    }
}

/// Finite-difference weights for the `m`-th derivative at `z` from samples at `xs`.
pub fn fornberg_weights(z: f64, xs: &[f64], m: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > m, "need more than {m} points for derivative order {m}");
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - z;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Weights for one derivative order.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeStencil {
    pub derivative: usize,
    /// Interior row covers offsets −half_width..=half_width.
    pub half_width: usize,
    pub interior: Vec<f64>,
    /// `left[i]` evaluates node i over nodes 0..edge_width.
    pub left: Vec<Vec<f64>>,
    /// `right[j]` evaluates node n−1−j over the last edge_width nodes.
    pub right: Vec<Vec<f64>>,
    pub edge_width: usize,
}

impl DerivativeStencil {
    fn build(derivative: usize, accuracy: usize) -> Self {
        let half_width = derivative.div_ceil(2) - 1 + accuracy / 2;
        let offsets: Vec<f64> = (0..=2 * half_width).map(|j| j as f64 - half_width as f64).collect();
        let mut interior = fornberg_weights(0.0, &offsets, derivative);
        // Exact (anti)symmetry so even fields give odd derivatives bitwise.
        let sign = if derivative % 2 == 1 { -1.0 } else { 1.0 };
        for j in 0..half_width {
            let avg = 0.5 * (interior[2 * half_width - j] + sign * interior[j]);
            interior[2 * half_width - j] = avg;
            interior[j] = sign * avg;
        }
        if derivative % 2 == 1 {
            interior[half_width] = 0.0;
        }

        let edge_width = accuracy + derivative;
        let positions: Vec<f64> = (0..edge_width).map(|j| j as f64).collect();
        let left = (0..half_width).map(|i| fornberg_weights(i as f64, &positions, derivative)).collect();
        let right = (0..half_width)
            .map(|j| fornberg_weights((edge_width - 1 - j) as f64, &positions, derivative))
            .collect();
        Self { derivative, half_width, interior, left, right, edge_width }
    }

    /// Smallest grid this stencil can be applied to.
    pub fn min_points(&self) -> usize {
        self.edge_width.max(2 * self.half_width + 1)
    }

    fn apply(&self, values: &[f64], h: f64) -> Vec<f64> {
        let n = values.len();
        let r = self.half_width;
        let w = self.edge_width;
        let scale = h.powi(self.derivative as i32);
        // Differences from the evaluation node: the weights' rounded sum never
        // multiplies the field's offset.
        let dot = |weights: &[f64], window: &[f64], centre: f64| -> f64 {
            weights.iter().zip(window).map(|(a, b)| a * (b - centre)).sum::<f64>() / scale
        };
        (0..n)
            .map(|i| {
                if i < r {
                    dot(&self.left[i], &values[..w], values[i])
                } else if i + r >= n {
                    dot(&self.right[n - 1 - i], &values[n - w..], values[i])
                } else {
                    dot(&self.interior, &values[i - r..=i + r], values[i])
                }
            })
            .collect()
    }

    /// True when node `i` of an `n`-point grid uses the centered row.
    pub fn is_interior(&self, i: usize, n: usize) -> bool {
        i >= self.half_width && i + self.half_width < n
    }
}

/// Stencils for derivative orders 1 through 4 at a fixed accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct StencilPlan {
    order: StencilOrder,
    stencils: Vec<DerivativeStencil>,
}

impl StencilPlan {
    pub fn new(order: StencilOrder) -> Self {
        let stencils = (1..=MAX_DERIVATIVE).map(|k| DerivativeStencil::build(k, order.accuracy())).collect();
        Self { order, stencils }
    }

    pub fn order(&self) -> StencilOrder {
        self.order
    }

    pub fn stencil(&self, derivative: usize) -> &DerivativeStencil {
        assert!((1..=MAX_DERIVATIVE).contains(&derivative), "derivative order {derivative} not supported");
        &self.stencils[derivative - 1]
    }

    /// `derivative`-th C-derivative of grid samples.
    pub fn derivative(&self, values: &[f64], grid: &SpatialGrid, derivative: usize) -> Result<Vec<f64>> {
        grid.check_len(values)?;
        let stencil = self.stencil(derivative);
        if values.len() < stencil.min_points() {
            return Err(Error::InvalidGrid(format!(
                "{} points cannot carry a {}-point stencil",
                values.len(),
                stencil.min_points()
            )));
        }
        Ok(stencil.apply(values, grid.spacing()))
    }

    /// Nodes where every derivative order uses its centered row.
    pub fn interior_range(&self, n: usize) -> std::ops::Range<usize> {
        let r = self.stencils.iter().map(|s| s.half_width).max().unwrap_or(0);
        r..n.saturating_sub(r)
    }
}

impl Default for StencilPlan {
    fn default() -> Self {
        Self::new(StencilOrder::Fourth)
    }
}

/// First C-derivative.
pub fn d_dc(values: &[f64], grid: &SpatialGrid, plan: &StencilPlan) -> Result<Vec<f64>> {
    plan.derivative(values, grid, 1)
}

/// Four-point Lagrange interpolation of grid samples at `c_query`.
pub fn interpolate(values: &[f64], grid: &SpatialGrid, c_query: f64) -> Result<f64> {
    grid.check_len(values)?;
    if !(c_query >= grid.c_min() && c_query <= grid.c_max()) {
        return Err(Error::OutOfRange { query: c_query, min: grid.c_min(), max: grid.c_max() });
    }
    let n = grid.len();
    let h = grid.spacing();
    let cell = (((c_query - grid.c_min()) / h).floor() as usize).min(n - 2);
    let start = cell.saturating_sub(1).min(n - 4);
    let xs = &grid.nodes()[start..start + 4];
    let ys = &values[start..start + 4];
    let mut acc = 0.0;
    for j in 0..4 {
        let mut basis = 1.0;
        for m in 0..4 {
            if m != j {
                basis *= (c_query - xs[m]) / (xs[j] - xs[m]);
            }
        }
        acc += basis * ys[j];
    }
    Ok(acc)
}

/// One classical RK4 step of an autonomous system y' = f(y).
pub fn rk4_advance<F>(y: &[f64], dt: f64, mut rhs: F) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect() };
    let k1 = rhs(y)?;
    let k2 = rhs(&axpy(0.5 * dt, &k1))?;
    let k3 = rhs(&axpy(0.5 * dt, &k2))?;
    let k4 = rhs(&axpy(dt, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::make_grid;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sample(grid: &SpatialGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid.nodes().iter().map(|&c| f(c)).collect()
    }

    #[test]
    fn classic_central_weights() {
        let plan = StencilPlan::new(StencilOrder::Fourth);
        let expected = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (w, e) in plan.stencil(1).interior.iter().zip(expected) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-15);
        }
        let expected = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (w, e) in plan.stencil(2).interior.iter().zip(expected) {
            assert_abs_diff_eq!(*w, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn rows_sum_to_zero() {
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let plan = StencilPlan::new(order);
            for k in 1..=MAX_DERIVATIVE {
                let s = plan.stencil(k);
                let rows = std::iter::once(&s.interior).chain(&s.left).chain(&s.right);
                for row in rows {
                    let sum: f64 = row.iter().sum();
                    let scale: f64 = row.iter().map(|w| w.abs()).sum();
                    assert!(sum.abs() <= 1e-13 * scale, "order {order:?} k={k}: {sum}");
                }
            }
        }
    }

    #[test]
    fn right_rows_mirror_left_rows() {
        let plan = StencilPlan::new(StencilOrder::Fourth);
        for k in 1..=MAX_DERIVATIVE {
            let s = plan.stencil(k);
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            for (l, r) in s.left.iter().zip(&s.right) {
                for (a, b) in l.iter().zip(r.iter().rev()) {
                    assert!((a - sign * b).abs() <= 1e-11 * a.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn derivative_of_identity_is_one() {
        let grid = make_grid(-5.0, 5.0, 25).unwrap();
        let d = d_dc(grid.nodes(), &grid, &StencilPlan::default()).unwrap();
        for v in d {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn quadratic_derivative_is_exact() {
        let grid = make_grid(-1.0, 1.0, 21).unwrap();
        let values = sample(&grid, |c| c * c);
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let d = d_dc(&values, &grid, &StencilPlan::new(order)).unwrap();
            // node 15 is C = 0.5
            assert_abs_diff_eq!(d[15], 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn polynomial_exactness_all_orders() {
        let grid = make_grid(-1.3, 2.1, 17).unwrap();
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let plan = StencilPlan::new(order);
            let p = order.accuracy();
            for k in 1..=MAX_DERIVATIVE {
                // Both centered and one-sided rows are exact through degree p + k - 1.
                for degree in 0..p + k {
                    let values = sample(&grid, |c| c.powi(degree as i32));
                    let d = plan.derivative(&values, &grid, k).unwrap();
                    for (i, &c) in grid.nodes().iter().enumerate() {
                        let exact = if degree < k {
                            0.0
                        } else {
                            let falling: f64 = (0..k).map(|j| (degree - j) as f64).product();
                            falling * c.powi((degree - k) as i32)
                        };
                        assert!(
                            (d[i] - exact).abs() <= 1e-7 * exact.abs().max(1.0),
                            "order {order:?} k={k} degree={degree} node {i}: {} vs {exact}",
                            d[i]
                        );
                    }
                }
            }
        }
    }

    fn max_sin_error(n: usize, order: StencilOrder, k: usize, phase: f64) -> f64 {
        let grid = make_grid(-PI, PI, n).unwrap();
        let values = sample(&grid, |c| (c + phase).sin());
        let d = StencilPlan::new(order).derivative(&values, &grid, k).unwrap();
        let exact = |c: f64| match k % 4 {
            1 => (c + phase).cos(),
            2 => -(c + phase).sin(),
            3 => -(c + phase).cos(),
            _ => (c + phase).sin(),
        };
        grid.nodes().iter().zip(&d).map(|(&c, v)| (v - exact(c)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn sin_first_derivative_converges_at_fourth_order() {
        let e1 = max_sin_error(81, StencilOrder::Fourth, 1, 0.0);
        let e2 = max_sin_error(161, StencilOrder::Fourth, 1, 0.0);
        let rate = (e1 / e2).log2();
        let h: f64 = 2.0 * PI / 80.0;
        assert!((rate - 4.0).abs() <= 0.2, "rate {rate}");
        assert!(e1 <= 0.5 * h.powi(4), "K = {}", e1 / h.powi(4));
    }

    #[test]
    fn higher_derivatives_converge_at_configured_order() {
        // A phase shift keeps the leading error terms from vanishing at the edges.
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            for k in 1..=MAX_DERIVATIVE {
                let e1 = max_sin_error(81, order, k, 0.4);
                let e2 = max_sin_error(161, order, k, 0.4);
                let rate = (e1 / e2).log2();
                let p = order.accuracy() as f64;
                assert!((rate - p).abs() <= 0.3, "order {order:?} k={k}: rate {rate}");
            }
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let grid = make_grid(0.0, 1.0, 11).unwrap();
        assert!(matches!(
            d_dc(&[1.0; 10], &grid, &StencilPlan::default()),
            Err(Error::LengthMismatch { expected: 11, found: 10 })
        ));
    }

    #[test]
    fn interpolation_examples() {
        let grid = make_grid(-5.0, 5.0, 25).unwrap();
        assert_abs_diff_eq!(interpolate(grid.nodes(), &grid, 1.2345).unwrap(), 1.2345, epsilon = 1e-14);

        let grid = make_grid(-2.0, 2.0, 41).unwrap();
        let cubes = sample(&grid, |c| c * c * c);
        assert_abs_diff_eq!(interpolate(&cubes, &grid, 0.5).unwrap(), 0.125, epsilon = 1e-14);

        let grid = make_grid(0.0, 1.0, 11).unwrap();
        let exps = sample(&grid, f64::exp);
        assert_abs_diff_eq!(interpolate(&exps, &grid, 0.55).unwrap(), 0.55f64.exp(), epsilon = 1e-5);
    }

    #[test]
    fn interpolation_out_of_range() {
        let grid = make_grid(0.0, 1.0, 11).unwrap();
        assert!(matches!(interpolate(grid.nodes(), &grid, 1.01), Err(Error::OutOfRange { .. })));
        assert!(interpolate(grid.nodes(), &grid, f64::NAN).is_err());
        assert_abs_diff_eq!(interpolate(grid.nodes(), &grid, 1.0).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn rk4_exact_on_cubic_time_dependence() {
        // y' = (u, 3v², ...) with v = t: y1 = t³ is integrated exactly.
        let mut y = vec![0.0, 0.0];
        for _ in 0..10 {
            y = rk4_advance(&y, 0.1, |s| Ok(vec![1.0, 3.0 * s[0] * s[0]])).unwrap();
        }
        assert_abs_diff_eq!(y[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(y[1], 1.0, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn interpolation_reproduces_cubics(
            a in -3.0f64..3.0, b in -3.0f64..3.0, c2 in -3.0f64..3.0, d in -3.0f64..3.0,
            q in -2.0f64..2.0,
        ) {
            let grid = make_grid(-2.0, 2.0, 13).unwrap();
            let p = |x: f64| a + b * x + c2 * x * x + d * x * x * x;
            let values = sample(&grid, p);
            let got = interpolate(&values, &grid, q).unwrap();
            prop_assert!((got - p(q)).abs() <= 1e-12 * (1.0 + p(q).abs()) * 10.0);
        }

        #[test]
        fn fourth_order_stencils_exact_on_quartics(
            coeffs in proptest::collection::vec(-2.0f64..2.0, 5),
            k in 1usize..=4,
        ) {
            let grid = make_grid(-1.0, 1.5, 15).unwrap();
            let p = |x: f64| coeffs.iter().rev().fold(0.0, |acc, co| acc * x + co);
            let dp = |x: f64| -> f64 {
                (k..5).map(|j| {
                    let falling: f64 = (0..k).map(|m| (j - m) as f64).product();
                    coeffs[j] * falling * x.powi((j - k) as i32)
                }).sum()
            };
            let values = sample(&grid, p);
            let d = StencilPlan::new(StencilOrder::Fourth).derivative(&values, &grid, k).unwrap();
            let plan = StencilPlan::new(StencilOrder::Fourth);
            for i in plan.interior_range(grid.len()) {
                let c = grid.nodes()[i];
                prop_assert!((d[i] - dp(c)).abs() <= 1e-8 * (1.0 + dp(c).abs()));
            }
        }
    }
}
