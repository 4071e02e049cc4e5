//! Carleman weights, radial cutoffs and the weighted inequalities used by
//! the three-spheres argument.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{region_norm, smooth_step, PointEval, Region};
use crate::grid::{trapezoid, AnalyticField, Grid, ScalarField};
use crate::jet::Jet;
use crate::quadrature::adaptive_gauss;

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("ε = {epsilon} not in (0, 1)")))
    }
}

/// `φ(s) = s·exp(-∫₀ˢ dt/(t^{1-ε}(1+t^ε))) = s(1+s^ε)^{-1/ε}`.
pub fn weight_phi(s: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("φ needs s ≥ 0, got {s}")));
    }
    Ok(s * (1.0 + s.powf(epsilon)).powf(-1.0 / epsilon))
}

/// `φ(s)` by adaptive quadrature; `t = σ^{1/ε}` turns the integrand into `1/(ε(1+σ))` on `[0, s^ε]`.
pub fn weight_phi_quadrature(s: f64, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if s < 0.0 {
        return Err(Error::InvalidParameter(format!("φ needs s ≥ 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let integral = adaptive_gauss(&|sigma: f64| 1.0 / (epsilon * (1.0 + sigma)), 0.0, s.powf(epsilon), 1e-14);
    Ok(s * (-integral).exp())
}

/// `ρ(x, y) = φ(|(x, y)|)`.
pub fn weight_rho(x: f64, y: f64, epsilon: f64) -> Result<f64> {
    weight_phi(x.hypot(y), epsilon)
}

/// Parameters of the Carleman estimate. `τ̄` and `R̃0` are not given in closed
/// form, so they are configuration.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CarlemanWeight {
    pub epsilon: f64,
    pub tau_bar: f64,
    pub r_tilde0: f64,
}

impl CarlemanWeight {
    pub fn new(epsilon: f64, tau_bar: f64, r_tilde0: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        if !(tau_bar >= 1.0) || !(r_tilde0 > 0.0 && r_tilde0 <= 1.0) {
            return Err(Error::InvalidParameter(format!("need τ̄ ≥ 1 and R̃0 in (0, 1], got {tau_bar}, {r_tilde0}")));
        }
        Ok(CarlemanWeight { epsilon, tau_bar, r_tilde0 })
    }

    pub fn phi(&self, s: f64) -> f64 {
        s * (1.0 + s.powf(self.epsilon)).powf(-1.0 / self.epsilon)
    }

    pub fn rho(&self, x: f64, y: f64) -> f64 {
        self.phi(x.hypot(y))
    }
}

impl Default for CarlemanWeight {
    fn default() -> Self {
        CarlemanWeight { epsilon: 0.5, tau_bar: 3.0, r_tilde0: 1.0 }
    }
}

/// Radial cutoff: 0 on `(0, r/4) ∪ (2R0/3, 1)`, 1 on `[r/2, R0/2]`, smooth steps between.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Cutoff {
    pub r: f64,
    pub r0: f64,
}

/// Derivative bounds `max |η^(k)| r^k` on the inner ramp and `max |η^(k)| R0^k` on the outer.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CutoffBounds {
    pub inner: [f64; 5],
    pub outer: [f64; 5],
}

impl Cutoff {
    pub fn new(r: f64, r0: f64) -> Result<Self> {
        if !(r > 0.0 && r < r0 / 2.0 && r0 < 1.0) {
            return Err(Error::InvalidParameter(format!("need 0 < r < R0/2 < R0 < 1, got r = {r}, R0 = {r0}")));
        }
        Ok(Cutoff { r, r0 })
    }

    /// `η` along a radius, as a jet in the variable carried by `t`.
    pub fn eta_jet(&self, t: Jet) -> Jet {
        let v = t.value();
        let (r, r0) = (self.r, self.r0);
        if v <= r / 4.0 || v >= 2.0 * r0 / 3.0 {
            Jet::constant(0.0)
        } else if v < r / 2.0 {
            smooth_step((t - Jet::constant(r / 4.0)).scale(4.0 / r))
        } else if v <= r0 / 2.0 {
            Jet::constant(1.0)
        } else {
            Jet::constant(1.0) - smooth_step((t - Jet::constant(r0 / 2.0)).scale(6.0 / r0))
        }
    }

    pub fn eta(&self, t: f64) -> f64 {
        self.eta_jet(Jet::constant(t)).value()
    }

    /// `η, η', ..., η''''` at `t`.
    pub fn eta_derivs(&self, t: f64) -> [f64; 5] {
        let j = self.eta_jet(Jet::var_x(t));
        std::array::from_fn(|k| j.deriv(k, 0))
    }

    pub fn bounds(&self, samples: usize) -> CutoffBounds {
        let sweep = |lo: f64, hi: f64, scale: f64| -> [f64; 5] {
            let mut out = [0.0f64; 5];
            for i in 0..=samples {
                let t = lo + (hi - lo) * i as f64 / samples as f64;
                let d = self.eta_derivs(t);
                for k in 0..5 {
                    out[k] = out[k].max(d[k].abs() * scale.powi(k as i32));
                }
            }
            out
        };
        CutoffBounds { inner: sweep(self.r / 4.0, self.r / 2.0, self.r), outer: sweep(self.r0 / 2.0, 2.0 * self.r0 / 3.0, self.r0) }
    }
}

/// `ξ(x, y) = η(|(x, y)|)`.
impl AnalyticField for Cutoff {
    fn jet(&self, x: f64, y: f64) -> Jet {
        let (jx, jy) = (Jet::var_x(x), Jet::var_y(y));
        if x.hypot(y) <= self.r / 4.0 {
            return Jet::constant(0.0);
        }
        self.eta_jet((jx * jx + jy * jy).sqrt())
    }
}

/// Angular factor of an [`AnnularBump`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Angular {
    Radial,
    /// `1 + a·cos θ`.
    Tilted(f64),
    /// `sin θ`.
    Odd,
    /// `cos 2θ`.
    Quadrupole,
}

/// `exp(1 - 1/(1 - ((|x| - c)/w)²))` times an angular factor, supported in `c - w ≤ |x| ≤ c + w`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AnnularBump {
    pub center: f64,
    pub half_width: f64,
    pub angular: Angular,
}

impl AnalyticField for AnnularBump {
    fn jet(&self, x: f64, y: f64) -> Jet {
        let rad = x.hypot(y);
        if (rad - self.center).abs() >= self.half_width {
            return Jet::constant(0.0);
        }
        let (jx, jy) = (Jet::var_x(x), Jet::var_y(y));
        let r = (jx * jx + jy * jy).sqrt();
        let z = (r - Jet::constant(self.center)).scale(1.0 / self.half_width);
        let one = Jet::constant(1.0);
        let bump = (one - (one - z * z).recip()).exp();
        let ang = match self.angular {
            Angular::Radial => one,
            Angular::Tilted(a) => one + (jx / r).scale(a),
            Angular::Odd => jy / r,
            Angular::Quadrupole => (jx * jx - jy * jy) / (r * r),
        };
        bump * ang
    }
}

/// The five annular bumps of the Carleman battery.
pub fn bump_battery() -> Vec<AnnularBump> {
    vec![
        AnnularBump { center: 0.25, half_width: 0.05, angular: Angular::Radial },
        AnnularBump { center: 0.5, half_width: 0.1, angular: Angular::Radial },
        AnnularBump { center: 0.3, half_width: 0.08, angular: Angular::Tilted(0.5) },
        AnnularBump { center: 0.4, half_width: 0.15, angular: Angular::Odd },
        AnnularBump { center: 0.6, half_width: 0.2, angular: Angular::Quadrupole },
    ]
}

/// One Carleman evaluation.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CarlemanSample {
    pub tau: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// `rhs = 0` while `lhs > 0`.
    pub violation: bool,
}

/// Integrands of the Carleman inequality, precomputed for a τ sweep.
#[derive(Clone, Debug)]
pub struct CarlemanIntegrands {
    grid: Grid,
    ln_rho: Vec<f64>,
    /// `|DᵏU|²` (Frobenius) for k = 0..=3 and `(Δ²U)²`, per node.
    terms: [Vec<f64>; 5],
    epsilon: f64,
}

impl CarlemanIntegrands {
    /// Derivatives of `u` (exact for closed-form fields, stencils otherwise)
    /// and a support check against the origin and `∂B_{R̃0}`.
    pub fn new(u: &ScalarField, weight: &CarlemanWeight) -> Result<Self> {
        let g = *u.grid();
        let scale = u.max_abs();
        let h = g.hx.max(g.hy);
        let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
        for ((i, j), v) in u.values().indexed_iter() {
            if v.abs() > 1e-14 * scale {
                let r = g.x(i).hypot(g.y(j));
                rmin = rmin.min(r);
                rmax = rmax.max(r);
            }
        }
        if scale > 0.0 && rmin <= 2.0 * h {
            return Err(Error::InvalidSupport(format!("support reaches the origin (r = {rmin:.4})")));
        }
        if scale > 0.0 && rmax >= weight.r_tilde0 - 2.0 * h {
            return Err(Error::InvalidSupport(format!("support reaches ∂B_R̃0 (r = {rmax:.4}, R̃0 = {})", weight.r_tilde0)));
        }
        if scale > 0.0 && (g.x0 > -weight.r_tilde0 || g.x_max() < weight.r_tilde0 || g.y0 > -weight.r_tilde0 || g.y_max() < weight.r_tilde0)
        {
            return Err(Error::InvalidSupport("grid does not cover B_R̃0".into()));
        }
        const ORDERS: [(usize, usize); 14] =
            [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3), (4, 0), (2, 2), (0, 4), (0, 0), (0, 0)];
        let d = u.derivatives(&ORDERS[..12]);
        let n = g.nx * g.ny;
        let mut terms: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
        let mut ln_rho = vec![f64::NEG_INFINITY; n];
        for i in 0..g.nx {
            for j in 0..g.ny {
                let k = i * g.ny + j;
                let at = |m: usize| d[m][[i, j]];
                terms[0][k] = u.values()[[i, j]].powi(2);
                terms[1][k] = at(0).powi(2) + at(1).powi(2);
                terms[2][k] = at(2).powi(2) + 2.0 * at(3).powi(2) + at(4).powi(2);
                terms[3][k] = at(5).powi(2) + 3.0 * at(6).powi(2) + 3.0 * at(7).powi(2) + at(8).powi(2);
                terms[4][k] = (at(9) + 2.0 * at(10) + at(11)).powi(2);
                let r = g.x(i).hypot(g.y(j));
                if r > 0.0 {
                    ln_rho[k] = weight.rho(g.x(i), g.y(j)).ln();
                }
            }
        }
        Ok(CarlemanIntegrands { grid: g, ln_rho, terms, epsilon: weight.epsilon })
    }

    fn weighted(&self, term: usize, power: f64) -> f64 {
        let g = &self.grid;
        let vals = ndarray::Array2::from_shape_fn((g.nx, g.ny), |(i, j)| {
            let k = i * g.ny + j;
            let t = self.terms[term][k];
            if t == 0.0 {
                0.0
            } else {
                t * (power * self.ln_rho[k]).exp()
            }
        });
        trapezoid(g, &vals)
    }

    /// `Σₖ τ^{6-2k} ∫ρ^{2k+ε-2-2τ}|DᵏU|²` against `∫ρ^{6-ε-2τ}(Δ²U)²`.
    pub fn sample(&self, tau: f64) -> CarlemanSample {
        let eps = self.epsilon;
        let lhs: f64 = (0..4).map(|k| tau.powi(6 - 2 * k as i32) * self.weighted(k, 2.0 * k as f64 + eps - 2.0 - 2.0 * tau)).sum();
        let rhs = self.weighted(4, 6.0 - eps - 2.0 * tau);
        let (ratio, violation) = if rhs > 0.0 {
            (lhs / rhs, false)
        } else if lhs > 0.0 {
            (f64::INFINITY, true)
        } else {
            (0.0, false)
        };
        CarlemanSample { tau, lhs, rhs, ratio, violation }
    }
}

/// One Carleman ratio.
pub fn carleman_ratio(u: &ScalarField, tau: f64, weight: &CarlemanWeight) -> Result<CarlemanSample> {
    Ok(CarlemanIntegrands::new(u, weight)?.sample(tau))
}

/// Ratios over a τ sweep.
pub fn carleman_sweep(u: &ScalarField, taus: &[f64], weight: &CarlemanWeight) -> Result<Vec<CarlemanSample>> {
    let it = CarlemanIntegrands::new(u, weight)?;
    Ok(taus.par_iter().map(|&t| it.sample(t)).collect())
}

/// `n` equispaced values in `[lo, hi]`.
pub fn tau_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// The disc grid `[-1, 1]²` with `n × n` nodes used for Carleman sweeps.
pub fn disc_grid(n: usize) -> Grid {
    Grid::new((-1.0, 1.0), (-1.0, 1.0), n, n)
}

/// `∫₀^T (f/t)² / (4∫₀^T f'²)` for the piecewise-linear interpolant of `f`;
/// both integrals are exact on each cell.
pub fn hardy_ratio(nodes: &[f64], values: &[f64]) -> Result<f64> {
    if nodes.len() != values.len() || nodes.len() < 2 {
        return Err(Error::InvalidInput("hardy_ratio needs matching node and value arrays".into()));
    }
    if nodes[0] != 0.0 || nodes.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("nodes must start at 0 and increase".into()));
    }
    if values[0] != 0.0 {
        return Err(Error::Precondition(format!("f(0) = {} must vanish", values[0])));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..nodes.len() - 1 {
        let (t0, t1) = (nodes[k], nodes[k + 1]);
        let b = (values[k + 1] - values[k]) / (t1 - t0);
        let a = values[k] - b * t0;
        den += b * b * (t1 - t0);
        num += if t0 == 0.0 { b * b * t1 } else { a * a * (1.0 / t0 - 1.0 / t1) + 2.0 * a * b * (t1 / t0).ln() + b * b * (t1 - t0) };
    }
    if den == 0.0 {
        return if num == 0.0 { Ok(0.0) } else { Err(Error::Degenerate("zero derivative with nonzero f".into())) };
    }
    Ok(num / (4.0 * den))
}

/// `0` followed by `n` geometric nodes from `t_min` to `t_max`.
pub fn geometric_mesh(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    let q = (t_max / t_min).ln() / (n - 1) as f64;
    std::iter::once(0.0).chain((0..n).map(|k| t_min * (q * k as f64).exp())).collect()
}

/// [`hardy_ratio`] of a function sampled on a geometric mesh.
pub fn hardy_ratio_fn(f: impl Fn(f64) -> f64, t_min: f64, t_max: f64, n: usize) -> Result<f64> {
    let nodes = geometric_mesh(t_min, t_max, n);
    let values: Vec<f64> = nodes.iter().map(|&t| f(t)).collect();
    hardy_ratio(&nodes, &values)
}

/// Upper end and node count of the Hardy meshes; nodes start at 1e-300.
pub const HARDY_T_MAX: f64 = 1e6;
pub const HARDY_NODES: usize = 20000;

/// `min(t, 1)^{1/2+δ}`, whose Hardy ratio on the half-line is `1/(1+2δ)`.
pub fn hardy_extremal(delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must be positive")));
    }
    hardy_ratio_fn(|t| t.min(1.0).powf(0.5 + delta), 1e-300, HARDY_T_MAX, HARDY_NODES)
}

/// Hardy ratios of twenty functions vanishing at the origin.
pub fn hardy_battery() -> Result<Vec<(&'static str, f64)>> {
    type Named = (&'static str, fn(f64) -> f64);
    let fs: [Named; 20] = [
        ("t^0.6 e^-t", |t| t.powf(0.6) * (-t).exp()),
        ("t^0.75 e^-t", |t| t.powf(0.75) * (-t).exp()),
        ("t e^-t", |t| t * (-t).exp()),
        ("t^1.5 e^-t", |t| t.powf(1.5) * (-t).exp()),
        ("t^2 e^-t", |t| t * t * (-t).exp()),
        ("t^3 e^-t", |t| t.powi(3) * (-t).exp()),
        ("min(t,1)", |t| t.min(1.0)),
        ("t/(1+t)", |t| t / (1.0 + t)),
        ("t/(1+t)^2", |t| t / (1.0 + t).powi(2)),
        ("t e^-t^2", |t| t * (-t * t).exp()),
        ("sin t e^-t", |t| t.sin() * (-t).exp()),
        ("(1-e^-t) e^-t", |t| -(-t).exp_m1() * (-t).exp()),
        ("atan t/(1+t)", |t| t.atan() / (1.0 + t)),
        ("t^2/(1+t^3)", |t| t * t / (1.0 + t.powi(3))),
        ("log(1+t) e^-t/2", |t| t.ln_1p() * (-0.5 * t).exp()),
        ("t^0.6/(1+t)", |t| t.powf(0.6) / (1.0 + t)),
        ("tanh t/(1+t^2)", |t| t.tanh() / (1.0 + t * t)),
        ("max(t(2-t),0)", |t| (t * (2.0 - t)).max(0.0)),
        ("sin^2 t e^-t", |t| t.sin().powi(2) * (-t).exp()),
        ("min(t,1)^0.6", |t| t.min(1.0).powf(0.6)),
    ];
    fs.iter().map(|(name, f)| Ok((*name, hardy_ratio_fn(f, 1e-300, HARDY_T_MAX, HARDY_NODES)?))).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `‖Dᵏv‖_{L²(B_s⁺)}`, with the Frobenius contraction of the derivative tensor.
pub fn derivative_norm(v: &ScalarField, k: usize, s: f64) -> Result<f64> {
    let mut acc = 0.0;
    for p in 0..=k {
        acc += binomial(k, p)
            * match v.analytic() {
                Some(f) => region_norm(&ExactDerivative { field: f.clone(), p, q: k - p, grid: *v.grid() }, s, &Region::HalfDisc)?,
                None => region_norm(&v.derivative_field(p, k - p), s, &Region::HalfDisc)?,
            };
    }
    Ok(acc.sqrt())
}

struct ExactDerivative {
    field: Arc<dyn AnalyticField>,
    p: usize,
    q: usize,
    grid: Grid,
}

impl PointEval for ExactDerivative {
    fn eval_at(&self, x: f64, y: f64) -> Result<f64> {
        if !self.grid.contains(x, y) {
            return Err(Error::Extrapolation(format!("point ({x:.6}, {y:.6}) outside the grid")));
        }
        Ok(self.field.jet(x, y).deriv(self.p, self.q))
    }

    fn spacing(&self) -> f64 {
        self.grid.hx.min(self.grid.hy)
    }
}

/// `max_ε r^j‖Dʲv‖ / (ε rᵐ‖Dᵐv‖ + ε^{-j/(m-j)}‖v‖)` over `B_r⁺`.
pub fn interpolation_check(v: &ScalarField, r: f64, m: usize, j: usize, eps_grid: &[f64]) -> Result<f64> {
    if !(0 < j && j < m) {
        return Err(Error::InvalidParameter(format!("need 0 < j < m, got j = {j}, m = {m}")));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidParameter("ε grid must be positive".into()));
    }
    let n0 = derivative_norm(v, 0, r)?;
    if n0 == 0.0 {
        return Ok(0.0);
    }
    let nj = r.powi(j as i32) * derivative_norm(v, j, r)?;
    let nm = r.powi(m as i32) * derivative_norm(v, m, r)?;
    let expo = j as f64 / (m - j) as f64;
    Ok(eps_grid.iter().map(|&e| nj / (e * nm + e.powf(-expo) * n0)).fold(0.0, f64::max))
}

/// Default ε grid: 40 log-spaced values in `[1e-3, 1]`.
pub fn default_eps_grid() -> Vec<f64> {
    (0..40).map(|k| 10f64.powf(-3.0 + 3.0 * k as f64 / 39.0)).collect()
}

/// `C_h = r^h ‖Dʰu‖_{L²(B_{r/2}⁺)} / ‖u‖_{L²(B_r⁺)}` for h = 1..=4.
pub fn caccioppoli_check(u: &ScalarField, r: f64) -> Result<[f64; 4]> {
    let base = derivative_norm(u, 0, r)?;
    if base == 0.0 {
        return Err(Error::Degenerate("‖u‖ vanishes on B_r⁺".into()));
    }
    let mut out = [0.0; 4];
    for h in 1..=4 {
        out[h - 1] = r.powi(h as i32) * derivative_norm(u, h, r / 2.0)? / base;
    }
    Ok(out)
}

/// Per-order spread `max/min` of Caccioppoli constants across radii.
/// Constants below `floor` times the largest constant of the set count as
/// zero; an order that is zero at every radius has spread 1.
pub fn caccioppoli_spread(sets: &[[f64; 4]], floor: f64) -> [f64; 4] {
    let top = sets.iter().flat_map(|s| s.iter()).fold(0.0f64, |m, v| m.max(*v));
    std::array::from_fn(|h| {
        let vals: Vec<f64> = sets.iter().map(|s| if s[h] <= floor * top { 0.0 } else { s[h] }).collect();
        let (lo, hi) = vals.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
        if hi == 0.0 {
            1.0
        } else if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    })
}

/// Closed-form field shortcut for tests and batteries.
pub fn sample_bump(bump: AnnularBump, n: usize, analytic: bool) -> Result<ScalarField> {
    let f: Arc<dyn AnalyticField> = Arc::new(bump);
    let s = ScalarField::from_analytic(disc_grid(n), f)?;
    Ok(if analytic { s } else { s.sampled() })
}
