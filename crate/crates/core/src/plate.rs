//! Kirchhoff–Love plate coefficients and a clamped fourth-order solver.
//!
//! The operator `L v = div div( B(1-ν) ∇²v + Bν Δv I )` is discretised as
//! `Δ(B Δv) + C : ∇²v` with `C = ∇²P - ΔP·I`, `P = B(1-ν)`, which is the same
//! operator after expanding the divergences.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{Chart, ChartField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::Curve;
use crate::grid::{AnalyticField, Grid, ScalarField};
use crate::jet::Jet;
use crate::sparse::{SolveStats, TripletBuilder};

/// Lamé moduli in closed form, thickness and the structural constants.
#[derive(Clone, Debug)]
pub struct PlateMaterial {
    pub lambda: Expr,
    pub mu: Expr,
    pub thickness: f64,
    pub alpha0: f64,
    pub gamma0: f64,
    pub lambda0: f64,
}

/// Pointwise derived quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coefficients {
    pub e: f64,
    pub nu: f64,
    pub b: f64,
    /// `ã = -2∇B/B`.
    pub atilde: [f64; 2],
    /// `q̃₂(v) = c11 v_xx + 2 c12 v_xy + c22 v_yy`.
    pub q2: [f64; 3],
    /// `C = ∇²P - ΔP·I` as `(C11, C12, C22)`.
    pub c: [f64; 3],
}

impl PlateMaterial {
    pub fn constant(lambda: f64, mu: f64, thickness: f64) -> Self {
        let c = |v: f64| Expr::parse(&format!("{v:e}")).expect("numeric literal");
        PlateMaterial {
            lambda: c(lambda),
            mu: c(mu),
            thickness,
            alpha0: mu.min(1.0) * 0.5,
            gamma0: (2.0 * mu + 3.0 * lambda).min(1.0) * 0.5,
            lambda0: 10.0 * (lambda.abs() + mu.abs()).max(1.0),
        }
    }

    /// Jets of `B`, `P = B(1-ν)`, `Q = Bν` and the scalars `E`, `ν`.
    fn jets(&self, x: f64, y: f64) -> (Jet, Jet, Jet, f64, f64) {
        let l = self.lambda.jet(x, y);
        let m = self.mu.jet(x, y);
        let one = Jet::constant(1.0);
        let e = m * (m.scale(2.0) + l.scale(3.0)) / (m + l);
        let nu = l / (m + l).scale(2.0);
        let b = e.scale(self.thickness.powi(3) / 12.0) / (one - nu * nu);
        let p = b * (one - nu);
        let q = b * nu;
        (b, p, q, e.value(), nu.value())
    }

    /// Checks the convexity conditions at `(x, y)`.
    pub fn check_at(&self, x: f64, y: f64) -> std::result::Result<(), String> {
        let l = self.lambda.eval(x, y);
        let m = self.mu.eval(x, y);
        if !l.is_finite() || !m.is_finite() {
            return Err("non-finite Lamé modulus".into());
        }
        if m < self.alpha0 || !(self.alpha0 > 0.0) {
            return Err(format!("μ = {m} below α0 = {}", self.alpha0));
        }
        if 2.0 * m + 3.0 * l < self.gamma0 || !(self.gamma0 > 0.0) {
            return Err(format!("2μ + 3λ = {} below γ0 = {}", 2.0 * m + 3.0 * l, self.gamma0));
        }
        let nu = l / (2.0 * (m + l));
        if !(nu > -1.0 && nu <= 0.5) {
            return Err(format!("ν = {nu} outside (-1, 1/2]"));
        }
        Ok(())
    }

    pub fn coefficients(&self, x: f64, y: f64) -> Coefficients {
        let (b, p, q, e, nu) = self.jets(x, y);
        let bv = b.value();
        let lap_q = q.deriv(2, 0) + q.deriv(0, 2);
        let lap_p = p.deriv(2, 0) + p.deriv(0, 2);
        Coefficients {
            e,
            nu,
            b: bv,
            atilde: [-2.0 * b.deriv(1, 0) / bv, -2.0 * b.deriv(0, 1) / bv],
            q2: [-(p.deriv(2, 0) + lap_q) / bv, -p.deriv(1, 1) / bv, -(p.deriv(0, 2) + lap_q) / bv],
            c: [p.deriv(2, 0) - lap_p, p.deriv(1, 1), p.deriv(0, 2) - lap_p],
        }
    }

    /// `Σ_{|α|≤4} sup |∂^α λ|` and the same for `μ`, over the given points.
    pub fn c4_norms(&self, points: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
        let mut out = (0.0f64, 0.0f64);
        let sums =
            |j: Jet| -> Vec<f64> { (0..=4).flat_map(|d| (0..=d).map(move |q| (d - q, q))).map(|(p, q)| j.deriv(p, q).abs()).collect() };
        let mut sup_l = [0.0f64; 15];
        let mut sup_m = [0.0f64; 15];
        for (x, y) in points {
            for (s, v) in sup_l.iter_mut().zip(sums(self.lambda.jet(x, y))) {
                *s = s.max(v);
            }
            for (s, v) in sup_m.iter_mut().zip(sums(self.mu.jet(x, y))) {
                *s = s.max(v);
            }
        }
        out.0 = sup_l.iter().sum();
        out.1 = sup_m.iter().sum();
        out
    }
}

/// Derived coefficient fields on a grid.
#[derive(Clone, Debug)]
pub struct DerivedFields {
    pub grid: Grid,
    pub e: Array2<f64>,
    pub nu: Array2<f64>,
    pub b: Array2<f64>,
    pub atilde: [Array2<f64>; 2],
    pub q2: [Array2<f64>; 3],
    pub c4_lambda: f64,
    pub c4_mu: f64,
}

/// `E, ν, B, ã, q̃₂` at every node, after checking convexity node by node.
pub fn derive_coefficients(material: &PlateMaterial, grid: &Grid) -> Result<DerivedFields> {
    if !(material.thickness > 0.0) {
        return Err(Error::InvalidInput(format!("thickness {} must be positive", material.thickness)));
    }
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            material.check_at(grid.x(i), grid.y(j)).map_err(|reason| Error::InvalidMaterial { ix: i, iy: j, reason })?;
        }
    }
    let pts = (0..grid.nx).flat_map(|i| (0..grid.ny).map(move |j| (grid.x(i), grid.y(j))));
    let (c4_lambda, c4_mu) = material.c4_norms(pts);
    if c4_lambda > material.lambda0 || c4_mu > material.lambda0 {
        return Err(Error::InvalidInput(format!("C^4 norms of λ ({c4_lambda:.4}) or μ ({c4_mu:.4}) exceed Λ0 = {}", material.lambda0)));
    }
    let shape = (grid.nx, grid.ny);
    let coeffs: Vec<Coefficients> =
        (0..grid.len()).into_par_iter().map(|k| material.coefficients(grid.x(k / grid.ny), grid.y(k % grid.ny))).collect();
    let field = |f: &dyn Fn(&Coefficients) -> f64| Array2::from_shape_fn(shape, |(i, j)| f(&coeffs[i * grid.ny + j]));
    Ok(DerivedFields {
        grid: *grid,
        e: field(&|c| c.e),
        nu: field(&|c| c.nu),
        b: field(&|c| c.b),
        atilde: [field(&|c| c.atilde[0]), field(&|c| c.atilde[1])],
        q2: [field(&|c| c.q2[0]), field(&|c| c.q2[1]), field(&|c| c.q2[2])],
        c4_lambda,
        c4_mu,
    })
}

/// Outcome of [`solve_plate`].
#[derive(Clone, Debug)]
pub struct PlateSolution {
    pub field: ChartField,
    pub stats: SolveStats,
    pub traces: ClampedTraces,
}

/// Clamped-boundary diagnostics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClampedTraces {
    /// `max |v|` on the clamped side.
    pub value: f64,
    /// `max |∂v/∂n|` by the centred ghost difference the scheme enforces.
    pub normal: f64,
    /// `max |∂v/∂n|` by a one-sided second-order difference of the solution.
    pub normal_one_sided: f64,
}

#[derive(Clone, Copy, Debug)]
enum Node {
    Unknown(usize),
    Known(f64),
}

/// Affine value `x[k] + c` (or `c`) of a node, ghosts resolved.
#[derive(Clone, Copy, Debug)]
struct Affine {
    unknown: Option<usize>,
    constant: f64,
}

struct Assembly<'a> {
    chart: &'a Chart,
    nodes: Array2<Node>,
    outer: &'a dyn AnalyticField,
}

impl Assembly<'_> {
    /// Chart derivative `(∂s V, ∂t V)` of the outer data at chart point `(s, t)`.
    fn data_derivs(&self, s: f64, t: f64) -> (f64, f64) {
        let (x, y) = self.chart.map(s, t);
        let j = self.outer.jet(x, y);
        let (dyds, dydt) = self.chart.dmap(s, t);
        let (vx, vy) = (j.deriv(1, 0), j.deriv(0, 1));
        (vx + vy * dyds, vy * dydt)
    }

    fn resolve(&self, i: isize, j: isize) -> Affine {
        let (ns, nt) = (self.chart.ns as isize, self.chart.nt() as isize);
        if i < 0 || i >= ns {
            let (mirror, side) = if i < 0 { (-i, 0) } else { (2 * (ns - 1) - i, ns - 1) };
            let s_side = self.chart.s(side as usize);
            let (vs, _) = self.data_derivs(s_side, self.chart.t_ext(j));
            let dist = 2.0 * self.chart.hs * (i - side).signum() as f64;
            let inner = self.resolve(mirror, j);
            return Affine { unknown: inner.unknown, constant: inner.constant + dist * vs };
        }
        if j < 0 {
            // Clamped: centred ∂t v = 0.
            return self.resolve(i, -j);
        }
        if j >= nt {
            let mirror = 2 * (nt - 1) - j;
            let (_, vt) = self.data_derivs(self.chart.s(i as usize), 1.0);
            let dist = self.chart.t_ext(j) - self.chart.t_ext(mirror);
            let inner = self.resolve(i, mirror);
            return Affine { unknown: inner.unknown, constant: inner.constant + dist * vt };
        }
        match self.nodes[[i as usize, j as usize]] {
            Node::Unknown(k) => Affine { unknown: Some(k), constant: 0.0 },
            Node::Known(v) => Affine { unknown: None, constant: v },
        }
    }

    /// Nine-point weights of `C : ∇²_x` at node `(i, j)`.
    fn hessian_stencil(&self, i: isize, j: isize, c: [f64; 3]) -> Vec<((isize, isize), f64)> {
        let s = self.chart.s0 + i as f64 * self.chart.hs;
        let m = self.chart.metric(s, self.chart.t_ext(j));
        // v_11 = v_ss + 2tx v_st + tx² v_tt + txx v_t, v_12 = ty v_st + tx ty v_tt + txy v_t,
        // v_22 = ty² v_tt + tyy v_t.
        let k_ss = c[0];
        let k_st = 2.0 * c[0] * m.tx + 2.0 * c[1] * m.ty;
        let k_tt = c[0] * m.tx * m.tx + 2.0 * c[1] * m.tx * m.ty + c[2] * m.ty * m.ty;
        let k_t = c[0] * m.txx + 2.0 * c[1] * m.txy + c[2] * m.tyy;
        let (w1, w2) = self.chart.t_weights(j);
        let hs = self.chart.hs;
        let mut out = Vec::with_capacity(9);
        out.push(((-1, 0), k_ss / (hs * hs)));
        out.push(((1, 0), k_ss / (hs * hs)));
        out.push(((0, 0), -2.0 * k_ss / (hs * hs)));
        for (b, (&d1, &d2)) in w1.iter().zip(&w2).enumerate() {
            let db = b as isize - 1;
            out.push(((0, db), k_tt * d2 + k_t * d1));
            out.push(((1, db), k_st * d1 / (2.0 * hs)));
            out.push(((-1, db), -k_st * d1 / (2.0 * hs)));
        }
        out
    }
}

/// Solve `L v = f` on a chart with `v = ∂v/∂n = 0` on the lower side
/// (`t = 0`) and `v`, `∂v/∂n` taken from `outer` on the other three sides.
pub fn solve_plate(
    chart: &Arc<Chart>,
    material: &PlateMaterial,
    outer: &dyn AnalyticField,
    forcing: Option<&dyn AnalyticField>,
) -> Result<PlateSolution> {
    let (ns, nt) = (chart.ns, chart.nt());
    for i in 0..ns {
        for j in 0..nt {
            let (x, y) = chart.point(i, j);
            material.check_at(x, y).map_err(|reason| Error::InvalidMaterial { ix: i, iy: j, reason })?;
        }
    }
    let mut count = 0;
    let nodes = Array2::from_shape_fn((ns, nt), |(i, j)| {
        if j == 0 {
            Node::Known(0.0)
        } else if i == 0 || i == ns - 1 || j == nt - 1 {
            let (x, y) = chart.point(i, j);
            Node::Known(outer.value(x, y))
        } else {
            // Column-major numbering within the interior.
            let k = (i - 1) * (nt - 2) + (j - 1);
            count = count.max(k + 1);
            Node::Unknown(k)
        }
    });
    let asm = Assembly { chart, nodes, outer };
    let n = (ns - 2) * (nt - 2);
    debug_assert_eq!(n, count);

    // Laplacian stencils and stiffness at every node; composite stencils reuse them.
    let lap: Vec<Vec<((isize, isize), f64)>> =
        (0..ns * nt).into_par_iter().map(|k| chart.laplacian_stencil((k / nt) as isize, (k % nt) as isize)).collect();
    let stiffness: Vec<f64> = (0..ns * nt)
        .into_par_iter()
        .map(|k| {
            let (x, y) = chart.point(k / nt, k % nt);
            material.coefficients(x, y).b
        })
        .collect();

    type Row = (Vec<(usize, usize, f64)>, f64);
    let rows: Vec<Row> = (1..ns - 1)
        .into_par_iter()
        .flat_map_iter(|i| {
            let (asm, lap, stiffness) = (&asm, &lap, &stiffness);
            (1..nt - 1).map(move |j| {
                let (i, j) = (i as isize, j as isize);
                let row = (i as usize - 1) * (nt - 2) + (j as usize - 1);
                let mut acc: Vec<(usize, f64)> = Vec::with_capacity(96);
                let mut rhs = 0.0;
                let add = |ii: isize, jj: isize, w: f64, acc: &mut Vec<(usize, f64)>, rhs: &mut f64| {
                    let a = asm.resolve(ii, jj);
                    if let Some(k) = a.unknown {
                        acc.push((k, w));
                    }
                    *rhs -= w * a.constant;
                };
                for &((di, dj), wq) in &lap[i as usize * nt + j as usize] {
                    let (qi, qj) = (i + di, j + dj);
                    let q = qi as usize * nt + qj as usize;
                    let b = stiffness[q];
                    for &((ei, ej), wr) in &lap[q] {
                        add(qi + ei, qj + ej, wq * b * wr, &mut acc, &mut rhs);
                    }
                }
                let (x, y) = chart.point(i as usize, j as usize);
                let c = material.coefficients(x, y).c;
                if c.iter().any(|v| *v != 0.0) {
                    for ((di, dj), w) in asm.hessian_stencil(i, j, c) {
                        add(i + di, j + dj, w, &mut acc, &mut rhs);
                    }
                }
                if let Some(f) = forcing {
                    let (x, y) = chart.point(i as usize, j as usize);
                    rhs += f.value(x, y);
                }
                acc.sort_unstable_by_key(|e| e.0);
                let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(acc.len());
                for (k, w) in acc {
                    match merged.last_mut() {
                        Some(last) if last.1 == k => last.2 += w,
                        _ => merged.push((row, k, w)),
                    }
                }
                (merged, rhs)
            })
        })
        .collect();

    let mut t = TripletBuilder::new(n);
    let mut b = vec![0.0; n];
    for (k, (entries, rhs)) in rows.into_iter().enumerate() {
        b[k] = rhs;
        for (r, c, w) in entries {
            t.add(r, c, w);
        }
    }
    let (x, stats) = t.build()?.solve(&b)?;

    let values = Array2::from_shape_fn((ns, nt), |(i, j)| match asm.nodes[[i, j]] {
        Node::Unknown(k) => x[k],
        Node::Known(v) => v,
    });
    let field = ChartField::new(chart.clone(), values)?;
    let traces = clamped_traces(&field);
    Ok(PlateSolution { field, stats, traces })
}

fn clamped_traces(v: &ChartField) -> ClampedTraces {
    let c = &v.chart;
    let (t1, t2) = (c.t[1], c.t[2]);
    let mut out = ClampedTraces { value: 0.0, normal: 0.0, normal_one_sided: 0.0 };
    for i in 0..c.ns {
        let (v0, v1, v2) = (v.values[[i, 0]], v.values[[i, 1]], v.values[[i, 2]]);
        out.value = out.value.max(v0.abs());
        // The scheme's ghost is v(-t1) = v(t1), so the centred difference is
        // identically that of the ghost relation.
        let ghost = v1;
        out.normal = out.normal.max(((v1 - ghost) / (2.0 * t1)).abs());
        let w = crate::stencil::fd_weights(0.0, &[0.0, t1, t2], 1);
        let d = w[1][0] * v0 + w[1][1] * v1 + w[1][2] * v2;
        let m = c.metric(c.s(i), 0.0);
        out.normal_one_sided = out.normal_one_sided.max((d * m.tx.hypot(m.ty)).abs());
    }
    out
}

/// The chart of the rectangle `[-1, 1] × [0, 1]` with `(2n-1) × n` nodes.
pub fn flat_chart(n: usize) -> Result<Arc<Chart>> {
    use crate::geometry::ConstantCurve;
    Chart::new((-1.0, 1.0), 2 * n - 1, crate::chart::stretched_nodes(n, 0.0), Arc::new(ConstantCurve(0.0)), Arc::new(ConstantCurve(1.0)))
        .map(Arc::new)
}

/// [`solve_plate`] on `[-1, 1] × [0, 1]`, returned on [`Grid::upper_rectangle`].
pub fn solve_plate_flat(
    n: usize,
    material: &PlateMaterial,
    outer: &dyn AnalyticField,
    forcing: Option<&dyn AnalyticField>,
) -> Result<(ScalarField, SolveStats, ClampedTraces)> {
    let chart = flat_chart(n)?;
    let sol = solve_plate(&chart, material, outer, forcing)?;
    let field = ScalarField::from_values(Grid::upper_rectangle(n), sol.field.values)?;
    Ok((field, sol.stats, sol.traces))
}

/// Margin of [`graph_chart`] beyond `r0`, so that `B_{r0} ∩ Ω` is interior.
pub const GRAPH_CHART_MARGIN: f64 = 1.25;

/// The chart of `{g(x1) < x2 < g(x1) + 1.25 r0, |x1| < 1.25 r0}` with `(2n-1) × n` nodes.
pub fn graph_chart(g: Arc<dyn Curve>, r0: f64, n: usize) -> Result<Arc<Chart>> {
    use crate::geometry::ConstantCurve;
    let w = GRAPH_CHART_MARGIN * r0;
    Chart::new((-w, w), 2 * n - 1, crate::chart::stretched_nodes(n, 0.0), g, Arc::new(ConstantCurve(w))).map(Arc::new)
}

/// Outer data `(x2 - g(x1))² (1 + x1/(2r0)) / r0²`, compatible with the clamped
/// condition at the corners where the outer sides meet the graph.
#[derive(Clone, Debug)]
pub struct GraphClampedData {
    pub g: Arc<dyn Curve>,
    pub r0: f64,
}

impl AnalyticField for GraphClampedData {
    fn jet(&self, x: f64, y: f64) -> Jet {
        let d = Jet::var_y(y) - self.g.jet(x);
        (d * d * (Jet::constant(1.0) + Jet::var_x(x).scale(0.5 / self.r0))).scale(1.0 / (self.r0 * self.r0))
    }
}

/// Pointwise residual of `Δ²v - ã·∇Δv - q̃₂(v)` on the nodes at least
/// `margin` away from the grid edge (zero in the excluded band).
#[derive(Clone, Debug)]
pub struct NondivResidual {
    pub field: Array2<f64>,
    pub margin: usize,
    pub max_interior: f64,
}

const NONDIV_ORDERS: [(usize, usize); 9] = [(4, 0), (2, 2), (0, 4), (3, 0), (1, 2), (2, 1), (0, 3), (2, 0), (1, 1)];

pub fn residual_nondiv(v: &ScalarField, material: &PlateMaterial) -> Result<NondivResidual> {
    let grid = *v.grid();
    let mut orders = NONDIV_ORDERS.to_vec();
    orders.push((0, 2));
    let d = v.derivatives(&orders);
    let margin = if v.is_analytic() { 0 } else { 2 };
    if grid.nx <= 2 * margin || grid.ny <= 2 * margin {
        return Err(Error::InvalidInput("grid too small for fourth derivatives".into()));
    }
    let mut out = Array2::zeros((grid.nx, grid.ny));
    let mut max_interior = 0.0f64;
    for i in margin..grid.nx - margin {
        for j in margin..grid.ny - margin {
            let c = material.coefficients(grid.x(i), grid.y(j));
            let bil = d[0][[i, j]] + 2.0 * d[1][[i, j]] + d[2][[i, j]];
            let glx = d[3][[i, j]] + d[4][[i, j]];
            let gly = d[5][[i, j]] + d[6][[i, j]];
            let q2 = c.q2[0] * d[7][[i, j]] + 2.0 * c.q2[1] * d[8][[i, j]] + c.q2[2] * d[9][[i, j]];
            let r = bil - (c.atilde[0] * glx + c.atilde[1] * gly) - q2;
            out[[i, j]] = r;
            max_interior = max_interior.max(r.abs());
        }
    }
    Ok(NondivResidual { field: out, margin, max_interior })
}

/// `div div(P ∇²v + Q Δv I)` by nested stencils on the sampled field.
pub fn residual_divdiv(v: &ScalarField, material: &PlateMaterial) -> Array2<f64> {
    let grid = *v.grid();
    let s = v.sampled();
    let (vxx, vxy, vyy) = (s.derivative(2, 0), s.derivative(1, 1), s.derivative(0, 2));
    let mut m11 = Array2::zeros((grid.nx, grid.ny));
    let mut m12 = m11.clone();
    let mut m22 = m11.clone();
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let c = material.coefficients(grid.x(i), grid.y(j));
            let (p, q) = (c.b * (1.0 - c.nu), c.b * c.nu);
            let lap = vxx[[i, j]] + vyy[[i, j]];
            m11[[i, j]] = p * vxx[[i, j]] + q * lap;
            m12[[i, j]] = p * vxy[[i, j]];
            m22[[i, j]] = p * vyy[[i, j]] + q * lap;
        }
    }
    let d = |a: Array2<f64>, p, q| crate::grid::stencil_derivative(&grid, &a, p, q);
    d(m11, 2, 0) + d(m12, 1, 1) * 2.0 + d(m22, 0, 2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::analytic;
    use approx::assert_relative_eq;

    #[test]
    fn coefficient_examples() {
        let c = PlateMaterial::constant(1.0, 1.0, 1.0).coefficients(0.3, 0.2);
        assert_relative_eq!(c.nu, 0.25, max_relative = 1e-15);
        assert_relative_eq!(c.e, 2.5, max_relative = 1e-15);
        assert_relative_eq!(c.b, 2.0 / 9.0, max_relative = 1e-15);
        assert_eq!(c.atilde, [0.0, 0.0]);
        assert_eq!(c.q2, [0.0, 0.0, 0.0]);
        let c = PlateMaterial::constant(0.0, 1.0, 1.0).coefficients(0.0, 0.0);
        assert_eq!((c.nu, c.e), (0.0, 2.0));
        assert_relative_eq!(c.b, 1.0 / 6.0, max_relative = 1e-15);
    }

    #[test]
    fn convexity_violation_names_node() {
        let mut m = PlateMaterial::constant(1.0, 1.0, 1.0);
        m.mu = Expr::parse("1 - 2*x").unwrap();
        let grid = Grid::new((0.0, 1.0), (0.0, 1.0), 5, 5);
        match derive_coefficients(&m, &grid) {
            Err(Error::InvalidMaterial { ix, .. }) => assert_eq!(ix, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn variable_stiffness_gives_gradient_term() {
        let mut m = PlateMaterial::constant(1.0, 1.0, 1.0);
        m.mu = Expr::parse("1 + 0.2*x").unwrap();
        let c = m.coefficients(0.1, 0.0);
        assert!(c.atilde[0] < 0.0 && c.atilde[1] == 0.0);
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let m = PlateMaterial::constant(1.0, 1.0, 1.0);
        let zero = analytic("0", |_, _| Jet::constant(0.0));
        let (v, _, _) = solve_plate_flat(9, &m, zero.as_ref(), None).unwrap();
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn quadratic_is_reproduced() {
        let m = PlateMaterial::constant(1.0, 1.0, 1.0);
        let y2 = analytic("y^2", |_, y| y * y);
        let (v, stats, traces) = solve_plate_flat(17, &m, y2.as_ref(), None).unwrap();
        let err = v.values().indexed_iter().fold(0.0f64, |e, ((_, j), val)| e.max((val - v.grid().y(j).powi(2)).abs()));
        assert!(err < 1e-11, "{err}");
        assert!(stats.relative_residual < 1e-12);
        assert!(traces.value == 0.0 && traces.normal == 0.0);
    }

    #[test]
    fn nondiv_residual_of_cubic_vanishes() {
        let m = PlateMaterial::constant(1.0, 1.0, 1.0);
        let grid = Grid::upper_rectangle(33);
        let v = ScalarField::from_analytic(grid, analytic("y^3", |_, y| y * y * y)).unwrap();
        assert!(residual_nondiv(&v, &m).unwrap().max_interior < 1e-12);
    }
}
