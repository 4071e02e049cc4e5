//! Boundary flattening by a conformal map.
//!
//! `k` is harmonic on `Ω̃ = {(x1, x2): |x1| < 2r0, g̃(x1) < x2 < 2M0r0}`
//! with `k = 0` on the graph, `k = 1` on top and `∂k/∂x1 = 0` on the sides;
//! `h` is a conjugate of `-k`. With `Ψ = h + i k` and the homothety
//! `Θ(ξ) = (2√2/c0)(ξ1 - ξ̄1, ξ2)`, the flattening map is `Φ = (Θ∘Ψ)⁻¹`.

use std::f64::consts::SQRT_2;
use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::chart::{interpolate_chart_array, stretched_nodes, Chart, ChartField};
use crate::error::{Error, Result};
use crate::geometry::{extend_boundary, BoundaryGraph, Curve, ExtendedGraph, PointEval, CURVE_DERIVS};
use crate::grid::{Grid, ScalarField};
use crate::plate::PlateMaterial;
use crate::quadrature::gauss_legendre;
use crate::sparse::{SolveStats, TripletBuilder};
use crate::stencil::fd_weights;

/// Stretching of the `t` nodes towards the curved bottom.
pub const STRETCH: f64 = 3.0;
/// Stencil width for gradients of `k` and `h`.
pub const GRADIENT_WIDTH: usize = 5;
pub const NEWTON_TOL: f64 = 1e-12;
pub const NEWTON_MAX_ITER: usize = 50;
/// Relative slack on certified inequalities, which hold with equality for flat boundaries.
pub const CERT_RTOL: f64 = 1e-6;

/// `2M0r0 - g̃`, the height of the flattening domain over `x1`.
#[derive(Debug)]
struct Gap {
    top: f64,
    lower: Arc<dyn Curve>,
}

impl Curve for Gap {
    fn derivs(&self, x: f64) -> [f64; CURVE_DERIVS] {
        let mut d = self.lower.derivs(x);
        d.iter_mut().for_each(|v| *v = -*v);
        d[0] += self.top;
        d
    }
}

/// The chart of `Ω̃`: `n` stretched rows and the spacing `r0/(n-1)` along `x1`.
pub fn flattening_chart(gtilde: &ExtendedGraph, n: usize) -> Result<Arc<Chart>> {
    let (r0, m0) = (gtilde.parent.r0, gtilde.parent.m0);
    let lower: Arc<dyn Curve> = Arc::new(gtilde.clone());
    let height = Arc::new(Gap { top: 2.0 * m0 * r0, lower: lower.clone() });
    Ok(Arc::new(Chart::new((-2.0 * r0, 2.0 * r0), 4 * (n - 1) + 1, stretched_nodes(n, STRETCH), lower, height)?))
}

#[derive(Clone, Debug)]
pub struct Flattening {
    pub k: ChartField,
    pub stats: SolveStats,
    /// `max |Δ_h k|` over interior nodes, scaled by `r0²`.
    pub harmonic_residual: f64,
    /// Extremes of `k` over interior nodes.
    pub k_range: (f64, f64),
}

/// Solve the mixed problem for `k` by second-order differences on the chart.
pub fn solve_flattening_bvp(gtilde: &ExtendedGraph, n: usize) -> Result<Flattening> {
    let chart = flattening_chart(gtilde, n)?;
    let (ns, nt) = (chart.ns, chart.nt());
    let m = nt - 2;
    let index = |i: usize, j: usize| i * m + (j - 1);
    // Lateral ghosts mirror (Neumann); the bottom and top rows are known.
    let fold = |i: isize| -> usize {
        if i < 0 {
            (-i) as usize
        } else if i >= ns as isize {
            (2 * (ns as isize - 1) - i) as usize
        } else {
            i as usize
        }
    };
    type Row = (usize, Vec<(usize, f64)>, f64);
    let rows: Vec<Row> = (0..ns)
        .into_par_iter()
        .flat_map_iter(|i| {
            let chart = &chart;
            (1..nt - 1).map(move |j| {
                let mut entries = Vec::with_capacity(9);
                let mut rhs = 0.0;
                for ((di, dj), w) in chart.laplacian_stencil(i as isize, j as isize) {
                    let (ii, jj) = (fold(i as isize + di), (j as isize + dj) as usize);
                    if jj == 0 {
                        continue;
                    } else if jj == nt - 1 {
                        rhs -= w;
                    } else {
                        entries.push((index(ii, jj), w));
                    }
                }
                (index(i, j), entries, rhs)
            })
        })
        .collect();
    let mut t = TripletBuilder::new(ns * m);
    let mut b = vec![0.0; ns * m];
    for (row, entries, rhs) in rows {
        b[row] = rhs;
        for (c, w) in entries {
            t.add(row, c, w);
        }
    }
    let (x, stats) = t.build()?.solve(&b)?;
    let values = Array2::from_shape_fn((ns, nt), |(i, j)| {
        if j == 0 {
            0.0
        } else if j == nt - 1 {
            1.0
        } else {
            x[index(i, j)]
        }
    });
    let k = ChartField::new(chart.clone(), values)?;

    let r0 = gtilde.parent.r0;
    let mut residual = 0.0f64;
    let mut range = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..ns {
        for j in 1..nt - 1 {
            let lap: f64 = chart
                .laplacian_stencil(i as isize, j as isize)
                .into_iter()
                .map(|((di, dj), w)| w * k.values[[fold(i as isize + di), (j as isize + dj) as usize]])
                .sum();
            residual = residual.max(lap.abs() * r0 * r0);
            let v = k.values[[i, j]];
            range = (range.0.min(v), range.1.max(v));
        }
    }
    if !(range.0 > 0.0 && range.1 < 1.0) {
        return Err(Error::Certification(format!("interior k leaves (0, 1): range [{:.3e}, {:.6}]", range.0, range.1)));
    }
    Ok(Flattening { k, stats, harmonic_residual: residual, k_range: range })
}

/// Cumulative integral of samples at increasing nodes, exact for piecewise cubics.
pub fn cumulative_integral(nodes: &[f64], f: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let mut out = vec![0.0; n];
    for k in 0..n - 1 {
        let start = (k as isize - 1).clamp(0, n as isize - 4) as usize;
        let window = &nodes[start..start + 4];
        let mut acc = 0.0;
        for (x, w) in gauss_legendre(2, nodes[k], nodes[k + 1]) {
            let l = fd_weights(x, window, 0).swap_remove(0);
            acc += w * l.iter().zip(&f[start..start + 4]).map(|(a, b)| a * b).sum::<f64>();
        }
        out[k + 1] = out[k] + acc;
    }
    out
}

#[derive(Clone, Debug)]
pub struct Conjugate {
    pub h: ChartField,
    /// `h` at the lower corners `(∓2r0, g̃(∓2r0))`; `a = 0` by the anchor.
    pub a: f64,
    pub b: f64,
    /// `|∮ dh|` around the chart boundary, relative to `b - a`.
    pub loop_closure: f64,
    /// `max |h - a|` on the left side and `max |h - b|` on the right, relative to `b - a`.
    pub lateral_variation: f64,
}

/// Physical gradient of `k` at the chart nodes.
fn grad(k: &ChartField) -> [Array2<f64>; 2] {
    let (gx, gy) = k.gradient(GRADIENT_WIDTH);
    [gx, gy]
}

/// Integrate `dh = k_x2 dx1 - k_x1 dx2` from `(-2r0, g̃(-2r0))`, along the
/// bottom and then up each column.
pub fn harmonic_conjugate(k: &ChartField, closure_tol: f64) -> Result<Conjugate> {
    let chart = k.chart.clone();
    let (ns, nt) = (chart.ns, chart.nt());
    let [kx, ky] = grad(k);
    let s_nodes: Vec<f64> = (0..ns).map(|i| chart.s(i)).collect();
    // dh/ds and dh/dt along chart lines.
    let ds = |j: usize| -> Vec<f64> {
        (0..ns)
            .map(|i| {
                let (dyds, _) = chart.dmap(chart.s(i), chart.t[j]);
                ky[[i, j]] - kx[[i, j]] * dyds
            })
            .collect()
    };
    let dt = |i: usize| -> Vec<f64> {
        (0..nt)
            .map(|j| {
                let (_, dydt) = chart.dmap(chart.s(i), chart.t[j]);
                -kx[[i, j]] * dydt
            })
            .collect()
    };
    let bottom = cumulative_integral(&s_nodes, &ds(0));
    let mut h = Array2::zeros((ns, nt));
    for i in 0..ns {
        let col = cumulative_integral(&chart.t, &dt(i));
        for j in 0..nt {
            h[[i, j]] = bottom[i] + col[j];
        }
    }
    let (a, b) = (0.0, bottom[ns - 1]);
    if !(b > a) {
        return Err(Error::Certification(format!("conjugate endpoints a = {a}, b = {b} are not increasing")));
    }
    let top = cumulative_integral(&s_nodes, &ds(nt - 1));
    let left = cumulative_integral(&chart.t, &dt(0));
    let right = cumulative_integral(&chart.t, &dt(ns - 1));
    let closure = (bottom[ns - 1] + right[nt - 1] - top[ns - 1] - left[nt - 1]).abs() / (b - a);
    let lateral = (0..nt).map(|j| (h[[0, j]] - a).abs().max((h[[ns - 1, j]] - b).abs())).fold(0.0, f64::max) / (b - a);
    if closure > closure_tol {
        return Err(Error::NonExact { residual: closure, tol: closure_tol });
    }
    Ok(Conjugate { h: ChartField::new(chart, h)?, a, b, loop_closure: closure, lateral_variation: lateral })
}

/// Half-width of the core region `|x1| ≤ CORE·r0`, which contains `Φ([-1, 1] × [0, 1])`.
pub const CORE: f64 = 0.75;

/// `max|∂1h - ∂2k| + max|∂2h + ∂1k|` over chart nodes with `|x1| ≤ half_width`, scaled by `r0`.
pub fn cauchy_riemann_residual(k: &ChartField, h: &ChartField, r0: f64, half_width: f64) -> f64 {
    let [kx, ky] = grad(k);
    let [hx, hy] = grad(h);
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    for ((i, j), v) in hx.indexed_iter() {
        if k.chart.s(i).abs() <= half_width * (1.0 + 1e-12) {
            m1 = m1.max((v - ky[[i, j]]).abs());
            m2 = m2.max((hy[[i, j]] + kx[[i, j]]).abs());
        }
    }
    (m1 + m2) * r0
}

/// Certified bounds of a [`ConformalMap`], evaluated on a probe grid.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MapCertificate {
    pub probes: usize,
    pub harmonic_residual: f64,
    pub k_range: (f64, f64),
    /// Cauchy–Riemann residual over the core region.
    pub cr_residual: f64,
    /// The same over all of `Ω̃`, where the cutoff of the extension is steep.
    pub cr_residual_global: f64,
    pub loop_closure: f64,
    pub lateral_variation: f64,
    pub b_minus_a: f64,
    /// Extremes of the Frobenius norm `|DΦ|` over the probes.
    pub grad_phi: (f64, f64),
    pub grad_phi_inv: (f64, f64),
    /// `max |Φ(y)|/|y|`.
    pub stima_phi: f64,
    /// `max |y|/|Φ(y)|`.
    pub stima_phi_inv: f64,
    pub origin: f64,
    pub round_trip: f64,
    pub det_min: f64,
    pub boundary_monotone: bool,
    /// `max |x2 - g(x1)|` over `Φ([-1, 1] × {0})`.
    pub boundary_image: f64,
    pub failures: Vec<String>,
}

impl MapCertificate {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ConformalMap {
    pub r0: f64,
    pub m0: f64,
    pub graph: BoundaryGraph,
    pub k_field: ChartField,
    /// The conjugate `h`.
    pub h_conj: ChartField,
    grad_k: Arc<[Array2<f64>; 2]>,
    pub a: f64,
    pub b: f64,
    pub xi1_bar: f64,
    pub c0: f64,
    pub c0_upper: f64,
    /// `K = (4C0/c0)(M0 + 1 + √(M0² + 1))`.
    pub k_constant: f64,
    pub certificate: MapCertificate,
}

type Mat2 = [[f64; 2]; 2];

fn inv2(m: Mat2) -> Option<Mat2> {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    if det.abs() < 1e-300 || !det.is_finite() {
        return None;
    }
    Some([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]])
}

fn frob(m: Mat2) -> f64 {
    (m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2)).sqrt()
}

impl ConformalMap {
    pub fn chart(&self) -> &Arc<Chart> {
        &self.k_field.chart
    }

    fn chart_coords(&self, x1: f64, x2: f64) -> Result<(f64, f64)> {
        let c = self.chart();
        if !c.contains(x1, x2) {
            return Err(Error::Extrapolation(format!("point ({x1:.6}, {x2:.6}) outside the flattening domain")));
        }
        Ok(c.inverse(x1, x2))
    }

    /// `Ψ(x) = (h, k)`.
    pub fn psi(&self, x1: f64, x2: f64) -> Result<[f64; 2]> {
        let (s, t) = self.chart_coords(x1, x2)?;
        Ok([self.h_conj.interpolate_chart(s, t), self.k_field.interpolate_chart(s, t)])
    }

    /// Interpolated `∇k`.
    pub fn grad_k(&self, x1: f64, x2: f64) -> Result<[f64; 2]> {
        let (s, t) = self.chart_coords(x1, x2)?;
        let c = self.chart();
        Ok([interpolate_chart_array(c, &self.grad_k[0], s, t), interpolate_chart_array(c, &self.grad_k[1], s, t)])
    }

    fn scale(&self) -> f64 {
        2.0 * SQRT_2 / self.c0
    }

    /// `Φ⁻¹ = Θ∘Ψ`.
    pub fn phi_inv(&self, x1: f64, x2: f64) -> Result<[f64; 2]> {
        let [h, k] = self.psi(x1, x2)?;
        Ok([self.scale() * (h - self.xi1_bar), self.scale() * k])
    }

    /// `DΦ⁻¹` at `x`, from `∇k` and the Cauchy–Riemann relations.
    pub fn dphi_inv(&self, x1: f64, x2: f64) -> Result<Mat2> {
        let [kx, ky] = self.grad_k(x1, x2)?;
        let c = self.scale();
        Ok([[c * ky, -c * kx], [c * kx, c * ky]])
    }

    /// `Φ(y)` by damped Newton iteration in chart coordinates, seeded by the
    /// affine approximation at the origin. Iterates are projected onto the
    /// chart, so boundary preimages land exactly on the graph.
    pub fn phi(&self, y: [f64; 2]) -> Result<[f64; 2]> {
        let chart = self.chart().clone();
        let project = |p: [f64; 2]| [p[0].clamp(chart.s0, chart.s_max()), p[1].clamp(0.0, 1.0)];
        let d0 = self.dphi_inv(0.0, 0.0)?;
        let seed = inv2(d0).ok_or_else(|| Error::NonInjective("singular differential at the origin".into()))?;
        let x0 = [seed[0][0] * y[0] + seed[0][1] * y[1], seed[1][0] * y[0] + seed[1][1] * y[1]];
        let (s0, t0) = chart.inverse(x0[0], x0[1]);
        let mut p = project([s0, t0]);
        let resid = |p: [f64; 2]| -> [f64; 2] {
            let f = [self.h_conj.interpolate_chart(p[0], p[1]), self.k_field.interpolate_chart(p[0], p[1])];
            [self.scale() * (f[0] - self.xi1_bar) - y[0], self.scale() * f[1] - y[1]]
        };
        let tol = NEWTON_TOL * (1.0 + y[0].hypot(y[1]));
        let mut r = resid(p);
        for _ in 0..NEWTON_MAX_ITER {
            let rn = r[0].hypot(r[1]);
            if rn <= tol {
                return Ok(chart.map(p[0], p[1]).into());
            }
            let (x1, x2) = chart.map(p[0], p[1]);
            let d = self.dphi_inv(x1, x2)?;
            let (dyds, dydt) = chart.dmap(p[0], p[1]);
            // Chain rule through x = (s, G + tH).
            let jac = [[d[0][0] + d[0][1] * dyds, d[0][1] * dydt], [d[1][0] + d[1][1] * dyds, d[1][1] * dydt]];
            let j = inv2(jac).ok_or_else(|| Error::NonInjective(format!("singular differential at ({x1:.6}, {x2:.6})")))?;
            let dp = [-(j[0][0] * r[0] + j[0][1] * r[1]), -(j[1][0] * r[0] + j[1][1] * r[1])];
            let mut step = 1.0;
            loop {
                let cand = project([p[0] + step * dp[0], p[1] + step * dp[1]]);
                let rc = resid(cand);
                if rc[0].hypot(rc[1]) < rn {
                    p = cand;
                    r = rc;
                    break;
                }
                step *= 0.5;
                if step < 1e-8 {
                    return Err(Error::NonInjective(format!(
                        "Newton inversion stalled at y = ({:.6}, {:.6}), residual {rn:.3e}",
                        y[0], y[1]
                    )));
                }
            }
        }
        let rn = r[0].hypot(r[1]);
        if rn <= tol {
            Ok(chart.map(p[0], p[1]).into())
        } else {
            Err(Error::NonInjective(format!("Newton inversion did not converge at y = ({:.6}, {:.6}), residual {rn:.3e}", y[0], y[1])))
        }
    }

    /// `Φ(y)` and `DΦ(y)`.
    pub fn dphi(&self, y: [f64; 2]) -> Result<([f64; 2], Mat2)> {
        let x = self.phi(y)?;
        let d = inv2(self.dphi_inv(x[0], x[1])?).ok_or_else(|| Error::NonInjective("singular differential".into()))?;
        Ok((x, d))
    }

    /// `|∇φ|⁻²`, with `|∇φ|` the conformal factor of `Φ`, at `x = Φ(y)`.
    pub fn inverse_factor_at(&self, x: [f64; 2]) -> Result<f64> {
        let [kx, ky] = self.grad_k(x[0], x[1])?;
        Ok((self.scale() * kx.hypot(ky)).powi(2))
    }

    fn certify(&mut self, flat: &Flattening, conj: &Conjugate, probe_n: usize) -> Result<()> {
        let r0 = self.r0;
        let mut cert = MapCertificate {
            harmonic_residual: flat.harmonic_residual,
            k_range: flat.k_range,
            cr_residual: cauchy_riemann_residual(&self.k_field, &self.h_conj, r0, CORE * r0),
            cr_residual_global: cauchy_riemann_residual(&self.k_field, &self.h_conj, r0, 2.0 * r0),
            loop_closure: conj.loop_closure,
            lateral_variation: conj.lateral_variation,
            b_minus_a: self.b - self.a,
            ..Default::default()
        };
        let grid = Grid::upper_rectangle(probe_n);
        let ys: Vec<[f64; 2]> = (0..grid.nx).flat_map(|i| (0..grid.ny).map(move |j| [grid.x(i), grid.y(j)])).collect();
        cert.probes = ys.len();
        let results: Vec<([f64; 2], [f64; 2], Mat2, f64)> = ys
            .par_iter()
            .map(|&y| {
                let (x, d) = self.dphi(y)?;
                let back = self.phi_inv(x[0], x[1])?;
                Ok((y, x, d, (back[0] - y[0]).hypot(back[1] - y[1])))
            })
            .collect::<Result<_>>()?;
        cert.grad_phi = (f64::INFINITY, 0.0);
        cert.grad_phi_inv = (f64::INFINITY, 0.0);
        cert.det_min = f64::INFINITY;
        for (y, x, d, rt) in &results {
            let n = frob(*d);
            let ni = frob(inv2(*d).unwrap());
            cert.grad_phi = (cert.grad_phi.0.min(n), cert.grad_phi.1.max(n));
            cert.grad_phi_inv = (cert.grad_phi_inv.0.min(ni), cert.grad_phi_inv.1.max(ni));
            cert.det_min = cert.det_min.min(d[0][0] * d[1][1] - d[0][1] * d[1][0]);
            cert.round_trip = cert.round_trip.max(*rt);
            let (ny, nx) = (y[0].hypot(y[1]), x[0].hypot(x[1]));
            if ny > 0.0 {
                cert.stima_phi = cert.stima_phi.max(nx / ny);
                cert.stima_phi_inv = cert.stima_phi_inv.max(ny / nx);
            } else {
                cert.origin = nx;
            }
            if y[1] == 0.0 {
                cert.boundary_image = cert.boundary_image.max((x[1] - self.graph.g.eval(x[0])).abs());
            }
        }
        cert.boundary_monotone = self.h_conj.values.column(0).windows(2).into_iter().all(|w| w[1] > w[0]);

        let (c0, cu, k) = (self.c0, self.c0_upper, self.k_constant);
        let lo = 1.0 - CERT_RTOL;
        let hi = 1.0 + CERT_RTOL;
        let mut check = |ok: bool, what: String| {
            if !ok {
                cert.failures.push(what);
            }
        };
        let ba = self.b - self.a;
        check(
            ba >= 4.0 * c0 * lo && ba <= 4.0 * cu * hi,
            format!("b - a = {ba:.6} outside [4c0, 4C0] = [{:.6}, {:.6}]", 4.0 * c0, 4.0 * cu),
        );
        let (g0, g1) = cert.grad_phi;
        check(
            g0 >= c0 * r0 / (2.0 * cu) * lo && g1 <= r0 / 2.0 * hi,
            format!("|DΦ| in [{g0:.6}, {g1:.6}] outside [{:.6}, {:.6}]", c0 * r0 / (2.0 * cu), r0 / 2.0),
        );
        let (i0, i1) = cert.grad_phi_inv;
        check(
            i0 >= 4.0 / r0 * lo && i1 <= 4.0 * cu / (c0 * r0) * hi,
            format!("|DΦ⁻¹| in [{i0:.6}, {i1:.6}] outside [{:.6}, {:.6}]", 4.0 / r0, 4.0 * cu / (c0 * r0)),
        );
        check(cert.stima_phi <= r0 / 2.0 * hi, format!("|Φ(y)|/|y| reaches {:.6} > r0/2", cert.stima_phi));
        check(cert.stima_phi_inv <= k / r0 * hi, format!("|Φ⁻¹(x)|/|x| reaches {:.6} > K/r0", cert.stima_phi_inv));
        check(cert.origin <= 1e-10 * r0, format!("|Φ(0, 0)| = {:.3e}", cert.origin));
        check(cert.round_trip <= 1e-8, format!("round trip error {:.3e}", cert.round_trip));
        check(cert.det_min > 0.0, format!("det DΦ reaches {:.3e}", cert.det_min));
        check(cert.boundary_monotone, "h is not increasing along the graph".into());
        self.certificate = cert;
        Ok(())
    }

    /// `Φ(y1, 0)` at the given abscissae.
    pub fn boundary_trace(&self, ys: &[f64]) -> Result<Vec<[f64; 2]>> {
        ys.par_iter().map(|&y| self.phi([y, 0.0])).collect()
    }
}

/// Build `Φ` from `k` and its conjugate and certify it on a `(2p-1) × p` probe grid.
pub fn assemble_conformal_map(flat: &Flattening, conj: &Conjugate, gtilde: &ExtendedGraph, probe_n: usize) -> Result<ConformalMap> {
    let (r0, m0) = (gtilde.parent.r0, gtilde.parent.m0);
    if !(conj.b > conj.a) {
        return Err(Error::Precondition(format!("need b > a, got a = {}, b = {}", conj.a, conj.b)));
    }
    let grad_k = grad(&flat.k);
    let norms = grad_k[0].iter().zip(grad_k[1].iter()).map(|(a, b)| a.hypot(*b) * r0);
    let (c0, c0_upper) = norms.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(c0 > 0.0) {
        return Err(Error::Certification(format!("min r0|∇k| = {c0:.3e} is not positive")));
    }
    let k_constant = 4.0 * c0_upper / c0 * (m0 + 1.0 + (m0 * m0 + 1.0).sqrt());
    if !(k_constant > 8.0) {
        return Err(Error::Certification(format!("K = {k_constant:.6} is not above 8")));
    }
    let mut map = ConformalMap {
        r0,
        m0,
        graph: gtilde.parent.clone(),
        k_field: flat.k.clone(),
        h_conj: conj.h.clone(),
        grad_k: Arc::new(grad_k),
        a: conj.a,
        b: conj.b,
        xi1_bar: 0.0,
        c0,
        c0_upper,
        k_constant,
        certificate: MapCertificate::default(),
    };
    map.xi1_bar = map.psi(0.0, 0.0)?[0];
    map.certify(flat, conj, probe_n)?;
    Ok(map)
}

/// Options for [`flatten`].
#[derive(Clone, Copy, Debug)]
pub struct FlattenOptions {
    pub mesh: usize,
    pub probes: usize,
    pub closure_tol: f64,
}

impl Default for FlattenOptions {
    fn default() -> Self {
        FlattenOptions { mesh: 129, probes: 33, closure_tol: 5e-3 }
    }
}

/// Extension, potential, conjugate and map in one call.
pub fn flatten(graph: &BoundaryGraph, opts: FlattenOptions) -> Result<ConformalMap> {
    let ext = extend_boundary(graph)?;
    let flat = solve_flattening_bvp(&ext, opts.mesh)?;
    let conj = harmonic_conjugate(&flat.k, opts.closure_tol)?;
    assemble_conformal_map(&flat, &conj, &ext, opts.probes)
}

/// A solution and its coefficients pulled back to `[-1, 1] × [0, 1]`.
#[derive(Clone, Debug)]
pub struct Pullback {
    pub u: ScalarField,
    /// Third-order coefficient `a` of `Δ²u - a·∇Δu + ...`.
    pub a_vec: [ScalarField; 2],
    /// Coefficients `(c11, c12, c22)` of the second-order part.
    pub c_coeffs: [ScalarField; 3],
    /// `|∇φ|⁻²` on the grid.
    pub inverse_factor: ScalarField,
    /// `max(‖a‖∞, ‖c‖∞)`.
    pub m1: f64,
}

/// `u = v∘Φ` with the coefficients of the pulled-back operator.
///
/// With `m = |∇φ|⁻²` and `F = Φ⁻¹`, the equation `Δ²v - ã·∇Δv - q̃₂(v) = f/B` becomes
/// `Δ²u - a·∇Δu - c:∇²u + (first order) = (f/B)∘Φ / m²` where
/// `a = (DF ã - 2∇m)/m` and `c = DF Q DFᵀ/m² + ((DF ã·∇m)/m² - Δm/m) I`.
pub fn pullback(v: &dyn PointEval, map: &ConformalMap, material: &PlateMaterial, n: usize) -> Result<Pullback> {
    let grid = Grid::upper_rectangle(n);
    struct Node {
        u: f64,
        m: f64,
        df: Mat2,
        atilde: [f64; 2],
        q: [f64; 3],
    }
    let nodes: Vec<Node> = (0..grid.nx * grid.ny)
        .into_par_iter()
        .map(|k| {
            let y = [grid.x(k / grid.ny), grid.y(k % grid.ny)];
            let x = map.phi(y)?;
            let u = v.eval_at(x[0], x[1])?;
            let coeffs = material.coefficients(x[0], x[1]);
            Ok(Node { u, m: map.inverse_factor_at(x)?, df: map.dphi_inv(x[0], x[1])?, atilde: coeffs.atilde, q: coeffs.q2 })
        })
        .collect::<Result<_>>()?;
    let at = |f: &dyn Fn(&Node) -> f64| Array2::from_shape_fn((grid.nx, grid.ny), |(i, j)| f(&nodes[i * grid.ny + j]));
    let u = ScalarField::from_values(grid, at(&|n| n.u))?;
    let mfield = ScalarField::from_values(grid, at(&|n| n.m))?;
    let d = mfield.derivatives(&[(1, 0), (0, 1), (2, 0), (0, 2)]);
    let mut a = [Array2::zeros((grid.nx, grid.ny)), Array2::zeros((grid.nx, grid.ny))];
    let mut c = [Array2::zeros((grid.nx, grid.ny)), Array2::zeros((grid.nx, grid.ny)), Array2::zeros((grid.nx, grid.ny))];
    for i in 0..grid.nx {
        for j in 0..grid.ny {
            let n = &nodes[i * grid.ny + j];
            let (f, m) = (n.df, n.m);
            let fa = [f[0][0] * n.atilde[0] + f[0][1] * n.atilde[1], f[1][0] * n.atilde[0] + f[1][1] * n.atilde[1]];
            let gm = [d[0][[i, j]], d[1][[i, j]]];
            a[0][[i, j]] = (fa[0] - 2.0 * gm[0]) / m;
            a[1][[i, j]] = (fa[1] - 2.0 * gm[1]) / m;
            let q = [[n.q[0], n.q[1]], [n.q[1], n.q[2]]];
            let fq = |r: usize, s: usize| -> f64 { (0..2).map(|p| (0..2).map(|l| f[r][p] * q[p][l] * f[s][l]).sum::<f64>()).sum() };
            let iso = (fa[0] * gm[0] + fa[1] * gm[1]) / (m * m) - (d[2][[i, j]] + d[3][[i, j]]) / m;
            c[0][[i, j]] = fq(0, 0) / (m * m) + iso;
            c[1][[i, j]] = fq(0, 1) / (m * m);
            c[2][[i, j]] = fq(1, 1) / (m * m) + iso;
        }
    }
    let sup = |x: &Array2<f64>| x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let m1 = a.iter().chain(c.iter()).map(sup).fold(0.0, f64::max);
    let [a0, a1] = a;
    let [c0, c1, c2] = c;
    Ok(Pullback {
        u,
        a_vec: [ScalarField::from_values(grid, a0)?, ScalarField::from_values(grid, a1)?],
        c_coeffs: [ScalarField::from_values(grid, c0)?, ScalarField::from_values(grid, c1)?, ScalarField::from_values(grid, c2)?],
        inverse_factor: mfield,
        m1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ExactField;
    use crate::grid::analytic;
    use approx::assert_abs_diff_eq;

    #[test]
    fn flat_boundary_gives_affine_map() {
        let (r0, m0) = (1.0, 2.0);
        let graph = BoundaryGraph::flat(r0, m0);
        let ext = extend_boundary(&graph).unwrap();
        let flat = solve_flattening_bvp(&ext, 33).unwrap();
        for ((i, j), k) in flat.k.values.indexed_iter() {
            let (_, x2) = flat.k.chart.point(i, j);
            assert_abs_diff_eq!(*k, x2 / (2.0 * m0 * r0), epsilon = 1e-12);
        }
        let conj = harmonic_conjugate(&flat.k, 1e-10).unwrap();
        for ((i, _), h) in conj.h.values.indexed_iter() {
            let x1 = conj.h.chart.s(i);
            assert_abs_diff_eq!(*h, (x1 + 2.0 * r0) / (2.0 * m0 * r0), epsilon = 1e-12);
        }
        let map = assemble_conformal_map(&flat, &conj, &ext, 9).unwrap();
        assert!(map.certificate.passed(), "{:?}", map.certificate.failures);
        assert!(map.k_constant > 8.0);
        assert!(map.certificate.cr_residual < 1e-10);
        let x = map.phi([0.5, 0.25]).unwrap();
        let s = r0 / (2.0 * SQRT_2);
        assert_abs_diff_eq!(x[0], 0.5 * s, epsilon = 1e-10);
        assert_abs_diff_eq!(x[1], 0.25 * s, epsilon = 1e-10);
    }

    #[test]
    fn cumulative_integral_is_exact_for_cubics() {
        let nodes = stretched_nodes(17, 2.0);
        let f: Vec<f64> = nodes.iter().map(|x| 1.0 - 2.0 * x + 3.0 * x * x * x).collect();
        let out = cumulative_integral(&nodes, &f);
        for (x, v) in nodes.iter().zip(out) {
            assert_abs_diff_eq!(v, x - x * x + 0.75 * x.powi(4), epsilon = 1e-14);
        }
    }

    #[test]
    fn pullback_of_flat_map() {
        let map = flatten(&BoundaryGraph::flat(1.0, 2.0), FlattenOptions { mesh: 33, probes: 5, closure_tol: 1e-10 }).unwrap();
        let v = ExactField { field: analytic("x2-y2", |x, y| x * x - y * y), spacing: 0.01 };
        let p = pullback(&v, &map, &PlateMaterial::constant(1.0, 1.0, 1.0), 17).unwrap();
        assert!(p.m1 < 1e-9, "{}", p.m1);
        let lap = p.u.laplacian();
        assert!(lap.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn curved_boundary_is_certified() {
        let graph = BoundaryGraph::from_expr("0.05*r0*(x/r0)^2*cos(x/r0)", 1.0, 6.0, 1.0).unwrap();
        let map = flatten(&graph, FlattenOptions { mesh: 65, probes: 9, closure_tol: 1e-2 }).unwrap();
        let c = &map.certificate;
        assert!(c.passed(), "{:?}", c.failures);
        assert!(c.k_range.0 > 0.0 && c.k_range.1 < 1.0);
        assert!(c.boundary_image < 1e-8);
    }
}
