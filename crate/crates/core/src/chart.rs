//! Boundary-fitted charts `x1 = s`, `x2 = G(s) + t·H(s)` over a rectangle of
//! chart coordinates, and fields sampled on them.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{Curve, PointEval};
use crate::jet::Jet;
use crate::stencil::{fd_weights, LineStencil, NonuniformStencil};

/// `t_j = (e^{βτ_j} - 1)/(e^β - 1)` for uniform `τ_j`; uniform when `β = 0`.
pub fn stretched_nodes(n: usize, beta: f64) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let tau = j as f64 / (n - 1) as f64;
            if beta.abs() < 1e-12 {
                tau
            } else {
                (beta * tau).exp_m1() / beta.exp_m1()
            }
        })
        .collect()
}

/// Derivatives of the chart coordinate `t(x1, x2)` at a point.
#[derive(Clone, Copy, Debug)]
pub struct Metric {
    pub tx: f64,
    pub ty: f64,
    pub txx: f64,
    pub txy: f64,
    pub tyy: f64,
}

impl Metric {
    /// Coefficients of `Δ = ∂ss + a_st ∂st + a_tt ∂tt + b_t ∂t`.
    pub fn laplacian(&self) -> (f64, f64, f64) {
        (2.0 * self.tx, self.tx * self.tx + self.ty * self.ty, self.txx + self.tyy)
    }
}

#[derive(Clone, Debug)]
pub struct Chart {
    pub s0: f64,
    pub hs: f64,
    pub ns: usize,
    /// Increasing nodes in `[0, 1]`.
    pub t: Vec<f64>,
    lower: Arc<dyn Curve>,
    height: Arc<dyn Curve>,
}

impl Chart {
    pub fn new(s_range: (f64, f64), ns: usize, t: Vec<f64>, lower: Arc<dyn Curve>, height: Arc<dyn Curve>) -> Result<Self> {
        if ns < 5 || t.len() < 5 {
            return Err(Error::InvalidParameter("chart needs at least 5 nodes per axis".into()));
        }
        if t[0] != 0.0 || (t[t.len() - 1] - 1.0).abs() > 1e-14 || t.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidParameter("chart t nodes must increase from 0 to 1".into()));
        }
        let chart = Chart { s0: s_range.0, hs: (s_range.1 - s_range.0) / (ns - 1) as f64, ns, t, lower, height };
        for i in 0..ns {
            let h = chart.height.eval(chart.s(i));
            if !(h > 0.0) {
                return Err(Error::Solver(format!("degenerate chart: height {h:.3e} at s = {:.4}", chart.s(i))));
            }
        }
        Ok(chart)
    }

    pub fn nt(&self) -> usize {
        self.t.len()
    }

    #[inline]
    pub fn s(&self, i: usize) -> f64 {
        self.s0 + i as f64 * self.hs
    }

    pub fn s_max(&self) -> f64 {
        self.s(self.ns - 1)
    }

    /// `t` at index `j`, with ghost nodes mirrored about `t = 0` and `t = 1`.
    pub fn t_ext(&self, j: isize) -> f64 {
        let n = self.nt() as isize;
        if j < 0 {
            -self.t[(-j) as usize]
        } else if j >= n {
            2.0 - self.t[(2 * (n - 1) - j) as usize]
        } else {
            self.t[j as usize]
        }
    }

    pub fn lower(&self) -> &Arc<dyn Curve> {
        &self.lower
    }

    pub fn map(&self, s: f64, t: f64) -> (f64, f64) {
        (s, self.lower.eval(s) + t * self.height.eval(s))
    }

    /// `(∂x2/∂s, ∂x2/∂t)` at chart point `(s, t)`.
    pub fn dmap(&self, s: f64, t: f64) -> (f64, f64) {
        let g = self.lower.derivs(s);
        let h = self.height.derivs(s);
        (g[1] + t * h[1], h[0])
    }

    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        self.map(self.s(i), self.t[j])
    }

    pub fn inverse(&self, x1: f64, x2: f64) -> (f64, f64) {
        (x1, (x2 - self.lower.eval(x1)) / self.height.eval(x1))
    }

    /// Jet of `t(x1, x2)`.
    pub fn t_jet(&self, x1: f64, x2: f64) -> Jet {
        (Jet::var_y(x2) - self.lower.jet(x1)) / self.height.jet(x1)
    }

    pub fn metric(&self, s: f64, t: f64) -> Metric {
        let (x1, x2) = self.map(s, t);
        let j = self.t_jet(x1, x2);
        Metric { tx: j.deriv(1, 0), ty: j.deriv(0, 1), txx: j.deriv(2, 0), txy: j.deriv(1, 1), tyy: j.deriv(0, 2) }
    }

    /// Three-point weights for `∂t` and `∂tt` centred at node `j`, on the
    /// nodes `j-1, j, j+1` (ghosts included).
    pub fn t_weights(&self, j: isize) -> ([f64; 3], [f64; 3]) {
        let nodes = [self.t_ext(j - 1), self.t_ext(j), self.t_ext(j + 1)];
        let w = fd_weights(nodes[1], &nodes, 2);
        ([w[1][0], w[1][1], w[1][2]], [w[2][0], w[2][1], w[2][2]])
    }

    /// Nine-point weights of the chart Laplacian at node `(i, j)`, ghost
    /// indices included.
    pub fn laplacian_stencil(&self, i: isize, j: isize) -> Vec<((isize, isize), f64)> {
        let s = self.s0 + i as f64 * self.hs;
        let m = self.metric(s, self.t_ext(j));
        let (a_st, a_tt, b_t) = m.laplacian();
        let (w1, w2) = self.t_weights(j);
        let hs = self.hs;
        let mut out = Vec::with_capacity(9);
        out.push(((-1, 0), 1.0 / (hs * hs)));
        out.push(((1, 0), 1.0 / (hs * hs)));
        out.push(((0, 0), -2.0 / (hs * hs)));
        for (b, (&d1, &d2)) in w1.iter().zip(&w2).enumerate() {
            let db = b as isize - 1;
            out.push(((0, db), a_tt * d2 + b_t * d1));
            if a_st != 0.0 {
                out.push(((1, db), a_st * d1 / (2.0 * hs)));
                out.push(((-1, db), -a_st * d1 / (2.0 * hs)));
            }
        }
        out
    }

    /// Whether a physical point lies in the closed chart image.
    pub fn contains(&self, x1: f64, x2: f64) -> bool {
        let tol = 1e-9;
        if x1 < self.s0 - tol * self.hs || x1 > self.s_max() + tol * self.hs {
            return false;
        }
        let (_, t) = self.inverse(x1, x2);
        (-tol..=1.0 + tol).contains(&t)
    }
}

/// Samples on the nodes of a [`Chart`].
#[derive(Clone, Debug)]
pub struct ChartField {
    pub chart: Arc<Chart>,
    pub values: Array2<f64>,
}

impl ChartField {
    pub fn new(chart: Arc<Chart>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (chart.ns, chart.nt()) {
            return Err(Error::InvalidInput("chart field shape mismatch".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite chart field sample".into()));
        }
        Ok(ChartField { chart, values })
    }

    pub fn from_fn(chart: Arc<Chart>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let values = Array2::from_shape_fn((chart.ns, chart.nt()), |(i, j)| {
            let (x, y) = chart.point(i, j);
            f(x, y)
        });
        Self::new(chart, values)
    }

    /// Chart derivative `∂s^p ∂t^q` at the nodes, with stencils of the
    /// given width (centred where possible).
    pub fn chart_derivative(&self, p: usize, q: usize, width: usize) -> Array2<f64> {
        let mut out = self.values.clone();
        if p > 0 {
            let acc = width.saturating_sub(p).max(1);
            out = LineStencil::new(self.chart.ns, p, acc, self.chart.hs).apply(&out, 0);
        }
        if q > 0 {
            out = NonuniformStencil::new(&self.chart.t, q, width).apply(&out, 1);
        }
        out
    }

    /// Physical gradient `(∂x1, ∂x2)` at the nodes.
    pub fn gradient(&self, width: usize) -> (Array2<f64>, Array2<f64>) {
        let vs = self.chart_derivative(1, 0, width);
        let vt = self.chart_derivative(0, 1, width);
        let mut gx = vs.clone();
        let mut gy = vt.clone();
        for i in 0..self.chart.ns {
            for j in 0..self.chart.nt() {
                let m = self.chart.metric(self.chart.s(i), self.chart.t[j]);
                gx[[i, j]] = vs[[i, j]] + m.tx * vt[[i, j]];
                gy[[i, j]] = m.ty * vt[[i, j]];
            }
        }
        (gx, gy)
    }

    /// Cubic Lagrange interpolation in chart coordinates.
    pub fn interpolate_chart(&self, s: f64, t: f64) -> f64 {
        interpolate_chart_array(&self.chart, &self.values, s, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Cubic Lagrange interpolation of node values in chart coordinates.
pub fn interpolate_chart_array(chart: &Chart, values: &Array2<f64>, s: f64, t: f64) -> f64 {
    let (si, ws) = {
        let u = ((s - chart.s0) / chart.hs).clamp(0.0, (chart.ns - 1) as f64);
        let start = (u.floor() as isize - 1).clamp(0, chart.ns as isize - 4) as usize;
        let nodes: Vec<f64> = (0..4).map(|k| (start + k) as f64).collect();
        (start, fd_weights(u, &nodes, 0).swap_remove(0))
    };
    let (tj, wt) = {
        let t = t.clamp(0.0, 1.0);
        let k = chart.t.partition_point(|&v| v <= t).saturating_sub(1);
        let start = (k as isize - 1).clamp(0, chart.nt() as isize - 4) as usize;
        (start, fd_weights(t, &chart.t[start..start + 4], 0).swap_remove(0))
    };
    let mut acc = 0.0;
    for (a, wa) in ws.iter().enumerate() {
        let mut row = 0.0;
        for (b, wb) in wt.iter().enumerate() {
            row += wb * values[[si + a, tj + b]];
        }
        acc += wa * row;
    }
    acc
}

impl PointEval for ChartField {
    fn eval_at(&self, x: f64, y: f64) -> Result<f64> {
        if !self.chart.contains(x, y) {
            return Err(Error::Extrapolation(format!("point ({x:.6}, {y:.6}) outside the chart image")));
        }
        let (s, t) = self.chart.inverse(x, y);
        Ok(self.interpolate_chart(s, t))
    }

    fn spacing(&self) -> f64 {
        let min_t = self.chart.t.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        self.chart.hs.min(min_t * self.chart.height.eval(0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ConstantCurve, ExprCurve};
    use approx::assert_abs_diff_eq;

    fn chart() -> Arc<Chart> {
        let g = Arc::new(ExprCurve::parse("0.1*sin(x)*x^2", 1.0).unwrap());
        Arc::new(Chart::new((-1.0, 1.0), 41, stretched_nodes(31, 1.5), g, Arc::new(ConstantCurve(1.0))).unwrap())
    }

    #[test]
    fn inverse_and_metric() {
        let c = chart();
        let (x, y) = c.map(0.3, 0.4);
        let (s, t) = c.inverse(x, y);
        assert_abs_diff_eq!(s, 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(t, 0.4, epsilon = 1e-15);
        let m = c.metric(0.3, 0.4);
        let g1 = 0.1 * (0.3f64.cos() * 0.09 + 2.0 * 0.3 * 0.3f64.sin());
        assert_abs_diff_eq!(m.tx, -g1, epsilon = 1e-14);
        assert_abs_diff_eq!(m.ty, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gradient_and_interpolation_of_smooth_field() {
        let c = chart();
        let f = |x: f64, y: f64| (x + 0.5 * y).sin() * (1.0 + y);
        let v = ChartField::from_fn(c.clone(), f).unwrap();
        let (gx, gy) = v.gradient(5);
        let (x, y) = c.point(17, 9);
        let fx = (x + 0.5 * y).cos() * (1.0 + y);
        let fy = 0.5 * (x + 0.5 * y).cos() * (1.0 + y) + (x + 0.5 * y).sin();
        assert_abs_diff_eq!(gx[[17, 9]], fx, epsilon = 1e-5);
        assert_abs_diff_eq!(gy[[17, 9]], fy, epsilon = 1e-5);
        let (x, y) = c.map(0.123, 0.456);
        assert_abs_diff_eq!(v.eval_at(x, y).unwrap(), f(x, y), epsilon = 1e-5);
        assert!(v.eval_at(0.0, -0.5).is_err());
    }

    #[test]
    fn ghost_nodes_mirror() {
        let c = chart();
        assert_eq!(c.t_ext(-1), -c.t[1]);
        assert_abs_diff_eq!(c.t_ext(c.nt() as isize), 2.0 - c.t[c.nt() - 2], epsilon = 1e-15);
    }
}
