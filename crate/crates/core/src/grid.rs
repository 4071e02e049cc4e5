//! Structured grids and grid-sampled scalar fields.

use std::fmt;
use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::expr::{Expr, Scalar};
use crate::jet::Jet;
use crate::stencil::{fd_weights, LineStencil};

/// Default accuracy order of derivative stencils.
pub const STENCIL_ACCURACY: usize = 4;

/// Uniform tensor grid; node `(i, j)` sits at `(x0 + i hx, y0 + j hy)`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Grid {
    pub x0: f64,
    pub y0: f64,
    pub hx: f64,
    pub hy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(x_range: (f64, f64), y_range: (f64, f64), nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 2, "grid needs at least two nodes per axis");
        Grid {
            x0: x_range.0,
            y0: y_range.0,
            hx: (x_range.1 - x_range.0) / (nx - 1) as f64,
            hy: (y_range.1 - y_range.0) / (ny - 1) as f64,
            nx,
            ny,
        }
    }

    /// The half-plane rectangle `[-1, 1] × [0, 1]` with `n` nodes per unit length.
    pub fn upper_rectangle(n: usize) -> Self {
        Grid::new((-1.0, 1.0), (0.0, 1.0), 2 * n - 1, n)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.hx
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.hy
    }

    pub fn x_max(&self) -> f64 {
        self.x(self.nx - 1)
    }

    pub fn y_max(&self) -> f64 {
        self.y(self.ny - 1)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let tx = 1e-9 * self.hx;
        let ty = 1e-9 * self.hy;
        x >= self.x0 - tx && x <= self.x_max() + tx && y >= self.y0 - ty && y <= self.y_max() + ty
    }

    /// Index of the node closest to `y` along the y axis.
    pub fn nearest_j(&self, y: f64) -> usize {
        (((y - self.y0) / self.hy).round().max(0.0) as usize).min(self.ny - 1)
    }

    pub fn nearest_i(&self, x: f64) -> usize {
        (((x - self.x0) / self.hx).round().max(0.0) as usize).min(self.nx - 1)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((self.nx, self.ny), |(i, j)| f(self.x(i), self.y(j)))
    }

    /// The same box with every spacing halved.
    pub fn refined(&self) -> Grid {
        Grid { hx: self.hx / 2.0, hy: self.hy / 2.0, nx: 2 * self.nx - 1, ny: 2 * self.ny - 1, ..*self }
    }
}

/// A function known in closed form, with exact partial derivatives.
pub trait AnalyticField: Send + Sync + fmt::Debug {
    fn jet(&self, x: f64, y: f64) -> Jet;

    fn value(&self, x: f64, y: f64) -> f64 {
        self.jet(x, y).value()
    }
}

impl AnalyticField for Expr {
    fn jet(&self, x: f64, y: f64) -> Jet {
        Expr::jet(self, x, y)
    }

    fn value(&self, x: f64, y: f64) -> f64 {
        self.eval(x, y)
    }
}

/// Wraps a generic closure `f(x, y)` evaluable on any [`Scalar`].
pub struct ClosureField<F> {
    name: &'static str,
    f: F,
}

impl<F> ClosureField<F>
where
    F: Fn(Jet, Jet) -> Jet + Send + Sync,
{
    pub fn new(name: &'static str, f: F) -> Self {
        ClosureField { name, f }
    }
}

impl<F> fmt::Debug for ClosureField<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ClosureField({})", self.name)
    }
}

impl<F> AnalyticField for ClosureField<F>
where
    F: Fn(Jet, Jet) -> Jet + Send + Sync,
{
    fn jet(&self, x: f64, y: f64) -> Jet {
        (self.f)(Jet::var_x(x), Jet::var_y(y))
    }
}

/// Evaluate a generic formula on jets; convenience for building closure fields.
pub fn analytic<F>(name: &'static str, f: F) -> Arc<dyn AnalyticField>
where
    F: Fn(Jet, Jet) -> Jet + Send + Sync + 'static,
{
    Arc::new(ClosureField::new(name, f))
}

/// Grid samples of a scalar function with derivative access.
///
/// When the field was built from a closed form, derivative queries return the
/// exact values at the nodes; otherwise they use stencils of
/// [`STENCIL_ACCURACY`] order, one-sided next to the grid boundary.
#[derive(Clone)]
pub struct ScalarField {
    grid: Grid,
    values: Array2<f64>,
    analytic: Option<Arc<dyn AnalyticField>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField").field("grid", &self.grid).field("analytic", &self.analytic).finish_non_exhaustive()
    }
}

impl ScalarField {
    pub fn from_values(grid: Grid, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (grid.nx, grid.ny) {
            return Err(Error::InvalidInput(format!("value array {:?} does not match grid {}x{}", values.dim(), grid.nx, grid.ny)));
        }
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite sample at node ({i}, {j})")));
        }
        Ok(ScalarField { grid, values, analytic: None })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_values(grid, grid.sample(f))
    }

    pub fn from_analytic(grid: Grid, field: Arc<dyn AnalyticField>) -> Result<Self> {
        let values = grid.sample(|x, y| field.value(x, y));
        let mut out = Self::from_values(grid, values)?;
        out.analytic = Some(field);
        Ok(out)
    }

    pub fn from_expr(grid: Grid, expr: &Expr) -> Result<Self> {
        Self::from_analytic(grid, Arc::new(expr.clone()))
    }

    pub fn zeros(grid: Grid) -> Self {
        ScalarField { grid, values: Array2::zeros((grid.nx, grid.ny)), analytic: None }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn analytic(&self) -> Option<&Arc<dyn AnalyticField>> {
        self.analytic.as_ref()
    }

    pub fn is_analytic(&self) -> bool {
        self.analytic.is_some()
    }

    /// Drop the closed form so every query goes through the grid samples.
    pub fn sampled(&self) -> ScalarField {
        ScalarField { grid: self.grid, values: self.values.clone(), analytic: None }
    }

    pub fn scaled(&self, s: f64) -> ScalarField {
        ScalarField { grid: self.grid, values: &self.values * s, analytic: None }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Partial derivative `∂x^p ∂y^q` at every node.
    pub fn derivative(&self, p: usize, q: usize) -> Array2<f64> {
        self.derivatives(&[(p, q)]).pop().unwrap()
    }

    /// Several partial derivatives at once.
    pub fn derivatives(&self, orders: &[(usize, usize)]) -> Vec<Array2<f64>> {
        if let Some(a) = &self.analytic {
            let mut out: Vec<Array2<f64>> = orders.iter().map(|_| Array2::zeros(self.values.raw_dim())).collect();
            for i in 0..self.grid.nx {
                for j in 0..self.grid.ny {
                    let jet = a.jet(self.grid.x(i), self.grid.y(j));
                    for (k, &(p, q)) in orders.iter().enumerate() {
                        out[k][[i, j]] = jet.deriv(p, q);
                    }
                }
            }
            return out;
        }
        orders.iter().map(|&(p, q)| stencil_derivative(&self.grid, &self.values, p, q)).collect()
    }

    /// A derivative sampled as a new (stencil-only) field.
    pub fn derivative_field(&self, p: usize, q: usize) -> ScalarField {
        ScalarField { grid: self.grid, values: self.derivative(p, q), analytic: None }
    }

    pub fn laplacian(&self) -> Array2<f64> {
        let d = self.derivatives(&[(2, 0), (0, 2)]);
        &d[0] + &d[1]
    }

    /// Tensor-cubic interpolation (exact evaluation for closed-form fields).
    pub fn interpolate(&self, x: f64, y: f64) -> Result<f64> {
        if !self.grid.contains(x, y) {
            return Err(Error::Extrapolation(format!(
                "point ({x:.6}, {y:.6}) outside [{:.6}, {:.6}] x [{:.6}, {:.6}]",
                self.grid.x0,
                self.grid.x_max(),
                self.grid.y0,
                self.grid.y_max()
            )));
        }
        if let Some(a) = &self.analytic {
            return Ok(a.value(x, y));
        }
        Ok(interpolate_array(&self.grid, &self.values, x, y))
    }
}

/// `∂x^p ∂y^q` of grid samples by line stencils.
pub fn stencil_derivative(grid: &Grid, values: &Array2<f64>, p: usize, q: usize) -> Array2<f64> {
    let mut out = values.clone();
    if p > 0 {
        out = LineStencil::new(grid.nx, p, STENCIL_ACCURACY, grid.hx).apply(&out, 0);
    }
    if q > 0 {
        out = LineStencil::new(grid.ny, q, STENCIL_ACCURACY, grid.hy).apply(&out, 1);
    }
    out
}

const INTERP_POINTS: usize = 4;

fn lagrange_window(t: f64, n: usize) -> (usize, [f64; INTERP_POINTS]) {
    let base = t.floor() as isize - (INTERP_POINTS as isize / 2 - 1);
    let start = base.clamp(0, n as isize - INTERP_POINTS as isize) as usize;
    let nodes: Vec<f64> = (0..INTERP_POINTS).map(|k| (start + k) as f64).collect();
    let w = fd_weights(t, &nodes, 0);
    (start, std::array::from_fn(|k| w[0][k]))
}

/// Tensor Lagrange interpolation of degree three on the 4×4 nearest nodes.
pub fn interpolate_array(grid: &Grid, values: &Array2<f64>, x: f64, y: f64) -> f64 {
    let tx = ((x - grid.x0) / grid.hx).clamp(0.0, (grid.nx - 1) as f64);
    let ty = ((y - grid.y0) / grid.hy).clamp(0.0, (grid.ny - 1) as f64);
    let (si, wx) = lagrange_window(tx, grid.nx);
    let (sj, wy) = lagrange_window(ty, grid.ny);
    let mut acc = 0.0;
    for (a, wa) in wx.iter().enumerate() {
        let mut row = 0.0;
        for (b, wb) in wy.iter().enumerate() {
            row += wb * values[[si + a, sj + b]];
        }
        acc += wa * row;
    }
    acc
}

/// Composite trapezoid rule over the whole grid.
pub fn trapezoid(grid: &Grid, values: &Array2<f64>) -> f64 {
    let mut acc = 0.0;
    for ((i, j), v) in values.indexed_iter() {
        let wx = if i == 0 || i == grid.nx - 1 { 0.5 } else { 1.0 };
        let wy = if j == 0 || j == grid.ny - 1 { 0.5 } else { 1.0 };
        acc += wx * wy * v;
    }
    acc * grid.hx * grid.hy
}

/// Generic evaluation helper used by tests and scenario builders.
pub fn eval_on<T: Scalar>(expr: &Expr, x: T, y: T) -> T {
    expr.eval_generic(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn stencil_and_exact_derivatives_agree() {
        let grid = Grid::new((-1.0, 1.0), (0.0, 1.0), 81, 41);
        let e = Expr::parse("exp(x)*sin(2*y)").unwrap();
        let exact = ScalarField::from_expr(grid, &e).unwrap();
        let sampled = exact.sampled();
        for &(p, q) in &[(1, 0), (0, 1), (1, 1), (2, 0), (0, 3), (2, 2)] {
            let a = exact.derivative(p, q);
            let b = sampled.derivative(p, q);
            let err = (&a - &b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err < 5e-3, "derivative ({p},{q}) error {err}");
        }
    }

    #[test]
    fn interpolation_reproduces_cubics() {
        let grid = Grid::new((0.0, 1.0), (0.0, 2.0), 11, 21);
        let f = |x: f64, y: f64| 1.0 + x * x * x - 2.0 * x * y * y + y * y * y;
        let field = ScalarField::from_fn(grid, f).unwrap();
        for &(x, y) in &[(0.03, 0.07), (0.55, 1.23), (0.99, 1.999), (1.0, 0.0)] {
            assert_abs_diff_eq!(field.interpolate(x, y).unwrap(), f(x, y), epsilon = 1e-12);
        }
        assert!(matches!(field.interpolate(1.5, 0.0), Err(Error::Extrapolation(_))));
    }

    #[test]
    fn rejects_non_finite_samples() {
        let grid = Grid::new((0.0, 1.0), (0.0, 1.0), 3, 3);
        let mut v = Array2::zeros((3, 3));
        v[[1, 2]] = f64::NAN;
        assert!(ScalarField::from_values(grid, v).is_err());
    }
}
