//! Reflection of clamped solutions across `{y = 0}`.
//!
//! For `u` on the upper half and `y < 0`,
//! `w(x, y) = -[u(x,-y) + 2y u_y(x,-y) + y² Δu(x,-y)]`, and sources extend by
//! `F₁(x, y) = -[5F(x,-y) - 6y F_y(x,-y) + y² ΔF(x,-y)]`. Lower-half fields
//! live on the mirror image of the upper grid so every lower node has an
//! upper partner.

use ndarray::{s, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{trapezoid, AnalyticField, Grid, ScalarField};
use crate::jet::Jet;
use crate::stencil::fd_weights;

/// Mirror `y ↦ -y` of an upper grid starting at `y = 0`.
pub fn lower_grid(upper: &Grid) -> Grid {
    Grid { y0: -upper.y_max(), ..*upper }
}

/// The grid `[x] × [-Y, Y]` holding merged fields.
pub fn merged_grid(upper: &Grid) -> Grid {
    Grid { y0: -upper.y_max(), ny: 2 * upper.ny - 1, ..*upper }
}

/// A solution and its reflection, with optional sources.
#[derive(Clone, Debug)]
pub struct ReflectedPair {
    pub u: ScalarField,
    pub w: ScalarField,
    pub ubar: ScalarField,
    pub f: Option<ScalarField>,
    pub fbar: Option<ScalarField>,
}

fn check_upper(u: &ScalarField) -> Result<()> {
    if u.grid().y0.abs() > 1e-14 {
        return Err(Error::InvalidInput(format!("field must start at y = 0, starts at {}", u.grid().y0)));
    }
    if u.grid().ny < 6 {
        return Err(Error::InvalidInput("need at least 6 rows for trace stencils".into()));
    }
    Ok(())
}

fn merge(upper: &ScalarField, lower: &Array2<f64>) -> Result<ScalarField> {
    let g = upper.grid();
    let mut m = Array2::zeros((g.nx, 2 * g.ny - 1));
    m.slice_mut(s![.., ..g.ny - 1]).assign(&lower.slice(s![.., ..g.ny - 1]));
    m.slice_mut(s![.., g.ny - 1..]).assign(upper.values());
    ScalarField::from_values(merged_grid(g), m)
}

/// Largest `|u(x, 0)|` and `|u_y(x, 0)|`.
pub fn clamped_trace(u: &ScalarField) -> (f64, f64) {
    let uy = u.derivative(0, 1);
    let row = |a: &Array2<f64>| a.column(0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (row(u.values()), row(&uy))
}

/// Reflect `u` into the lower half. Fails if the clamped traces of `u`
/// exceed `trace_tol`.
pub fn reflect_solution(u: &ScalarField, trace_tol: f64) -> Result<ReflectedPair> {
    check_upper(u)?;
    let (t0, t1) = clamped_trace(u);
    if t0 > trace_tol || t1 > trace_tol {
        return Err(Error::Precondition(format!(
            "u is not clamped: max|u(x,0)| = {t0:.3e}, max|u_y(x,0)| = {t1:.3e}, tolerance {trace_tol:.3e}"
        )));
    }
    let g = *u.grid();
    let d = u.derivatives(&[(0, 1), (2, 0), (0, 2)]);
    let w = Array2::from_shape_fn((g.nx, g.ny), |(i, j)| {
        let jm = g.ny - 1 - j;
        let y = g.y(jm);
        -(u.values()[[i, jm]] - 2.0 * y * d[0][[i, jm]] + y * y * (d[1][[i, jm]] + d[2][[i, jm]]))
    });
    let ubar = merge(u, &w)?;
    Ok(ReflectedPair { u: u.clone(), w: ScalarField::from_values(lower_grid(&g), w)?, ubar, f: None, fbar: None })
}

/// `F₁` on the lower grid and the merged source.
pub fn extend_source(f: &ScalarField) -> Result<(ScalarField, ScalarField)> {
    check_upper(f)?;
    let g = *f.grid();
    let d = f.derivatives(&[(0, 1), (2, 0), (0, 2)]);
    let f1 = Array2::from_shape_fn((g.nx, g.ny), |(i, j)| {
        let jm = g.ny - 1 - j;
        let y = g.y(jm);
        -(5.0 * f.values()[[i, jm]] + 6.0 * y * d[0][[i, jm]] + y * y * (d[1][[i, jm]] + d[2][[i, jm]]))
    });
    let fbar = merge(f, &f1)?;
    Ok((ScalarField::from_values(lower_grid(&g), f1)?, fbar))
}

impl ReflectedPair {
    pub fn with_source(mut self, f: &ScalarField) -> Result<Self> {
        let (_, fbar) = extend_source(f)?;
        self.f = Some(f.clone());
        self.fbar = Some(fbar);
        Ok(self)
    }
}

/// Maxima over `x` of the trace identities at `y = 0`.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct TraceReport {
    /// `w(x, 0)`.
    pub w: f64,
    /// `w_y(x, 0)`.
    pub w_y: f64,
    /// `Δw(x, 0) - Δu(x, 0)`.
    pub lap_jump: f64,
    /// `Δw_y(x, 0) - Δu_y(x, 0)`.
    pub lap_y_jump: f64,
    /// `w_yx(x, 0) + u_yx(x, 0)`.
    pub n1: f64,
    /// `-w_yy(x, 0) + u_yy(x, 0)`.
    pub n2: f64,
    /// `u_xx(x, 0)`.
    pub n3: f64,
}

impl TraceReport {
    pub fn max(&self) -> f64 {
        [self.w, self.w_y, self.lap_jump, self.lap_y_jump, self.n1, self.n2, self.n3].into_iter().fold(0.0, f64::max)
    }
}

const TRACE_ORDERS: [(usize, usize); 8] = [(0, 0), (0, 1), (2, 0), (0, 2), (2, 1), (0, 3), (1, 1), (1, 0)];

/// Trace identities of a reflected pair, from one-sided stencils on each side.
pub fn trace_report(pair: &ReflectedPair) -> TraceReport {
    let du = pair.u.derivatives(&TRACE_ORDERS);
    let dw = pair.w.derivatives(&TRACE_ORDERS);
    let top = pair.w.grid().ny - 1;
    let mut r = TraceReport::default();
    for i in 0..pair.u.grid().nx {
        let u = |k: usize| du[k][[i, 0]];
        let w = |k: usize| dw[k][[i, top]];
        r.w = r.w.max(w(0).abs());
        r.w_y = r.w_y.max(w(1).abs());
        r.lap_jump = r.lap_jump.max((w(2) + w(3) - u(2) - u(3)).abs());
        r.lap_y_jump = r.lap_y_jump.max((w(4) + w(5) - u(4) - u(5)).abs());
        r.n1 = r.n1.max((w(6) + u(6)).abs());
        r.n2 = r.n2.max((-w(3) + u(3)).abs());
        r.n3 = r.n3.max(u(2).abs());
    }
    r
}

/// The singular part `H` on the lower grid and the numerator maxima at `y = 0`.
///
/// `a` is given on the upper grid and reflected evenly. Within `|y| < 2h`
/// the quotients `N/y` are replaced by `(N(y) - N(0))/y`, and by a one-sided
/// derivative of `N` at `y = 0`.
pub fn singular_part(pair: &ReflectedPair, a: [&ScalarField; 2], trace_tol: f64) -> Result<(ScalarField, [f64; 3])> {
    let g = *pair.u.grid();
    if a.iter().any(|f| f.grid() != &g) {
        return Err(Error::InvalidInput("coefficient fields must share the upper grid".into()));
    }
    let du = pair.u.derivatives(&[(1, 1), (0, 2), (2, 0)]);
    let dw = pair.w.derivatives(&[(1, 1), (0, 2)]);
    let (nx, ny) = (g.nx, g.ny);
    // Numerators on the lower grid, row j at y = -y(ny-1-j).
    let mut num = [Array2::zeros((nx, ny)), Array2::zeros((nx, ny)), Array2::zeros((nx, ny))];
    for i in 0..nx {
        for j in 0..ny {
            let jm = ny - 1 - j;
            num[0][[i, j]] = dw[0][[i, j]] + du[0][[i, jm]];
            num[1][[i, j]] = -dw[1][[i, j]] + du[1][[i, jm]];
            num[2][[i, j]] = du[2][[i, jm]];
        }
    }
    let at_zero: [f64; 3] = std::array::from_fn(|k| num[k].column(ny - 1).iter().fold(0.0f64, |m, v| m.max(v.abs())));
    if at_zero.iter().any(|v| *v > trace_tol) {
        return Err(Error::TraceIdentity(format!(
            "numerators at y = 0 are {:.3e}, {:.3e}, {:.3e} (tolerance {trace_tol:.3e})",
            at_zero[0], at_zero[1], at_zero[2]
        )));
    }
    let h = g.hy;
    let w0 = fd_weights(0.0, &[0.0, -h, -2.0 * h], 1).swap_remove(1);
    let quotient = |k: usize, i: usize, j: usize| -> f64 {
        let y = -g.y(ny - 1 - j);
        let n = &num[k];
        if j == ny - 1 {
            w0[0] * n[[i, ny - 1]] + w0[1] * n[[i, ny - 2]] + w0[2] * n[[i, ny - 3]]
        } else if y.abs() < 2.0 * h * (1.0 - 1e-9) {
            (n[[i, j]] - n[[i, ny - 1]]) / y
        } else {
            n[[i, j]] / y
        }
    };
    let hv = Array2::from_shape_fn((nx, ny), |(i, j)| {
        let jm = ny - 1 - j;
        let (a1, a2) = (a[0].values()[[i, jm]], a[1].values()[[i, jm]]);
        6.0 * a1 * quotient(0, i, j) + 6.0 * a2 * quotient(1, i, j) - 12.0 * a2 * quotient(2, i, j)
    });
    Ok((ScalarField::from_values(lower_grid(&g), hv)?, at_zero))
}

/// A smooth bump `exp(1 - 1/(1 - ρ²))`, `ρ = |x - c|/radius`, as a test function.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestBump {
    pub center: (f64, f64),
    pub radius: f64,
}

impl AnalyticField for TestBump {
    fn jet(&self, x: f64, y: f64) -> Jet {
        let dx = Jet::var_x(x - self.center.0).scale(1.0 / self.radius);
        let dy = Jet::var_y(y - self.center.1).scale(1.0 / self.radius);
        let r2 = dx * dx + dy * dy;
        if r2.value() >= 1.0 {
            return Jet::constant(0.0);
        }
        let one = Jet::constant(1.0);
        (one - (one - r2).recip()).exp()
    }
}

/// `max_k |∫ Δū Δφ_k - ∫ F̄ φ_k| / ‖Δφ_k‖` over compactly supported tests.
pub fn verify_weak_form(ubar: &ScalarField, fbar: Option<&ScalarField>, tests: &[TestBump]) -> Result<f64> {
    let g = *ubar.grid();
    if let Some(f) = fbar {
        if f.grid() != &g {
            return Err(Error::InvalidInput("source must share the merged grid".into()));
        }
    }
    let lap_u = ubar.laplacian();
    let mut worst = 0.0f64;
    for t in tests {
        if !(t.radius > 0.0) || t.center.0.hypot(t.center.1) + t.radius >= 1.0 {
            return Err(Error::InvalidInput(format!("test support {t:?} touches the unit circle")));
        }
        let mut a = Array2::zeros((g.nx, g.ny));
        let mut b = Array2::zeros((g.nx, g.ny));
        let mut n = Array2::zeros((g.nx, g.ny));
        for i in 0..g.nx {
            for j in 0..g.ny {
                let jet = t.jet(g.x(i), g.y(j));
                let lap_phi = jet.deriv(2, 0) + jet.deriv(0, 2);
                a[[i, j]] = lap_u[[i, j]] * lap_phi;
                if let Some(f) = fbar {
                    b[[i, j]] = f.values()[[i, j]] * jet.value();
                }
                n[[i, j]] = lap_phi * lap_phi;
            }
        }
        let norm = trapezoid(&g, &n).sqrt();
        let r = (trapezoid(&g, &a) - trapezoid(&g, &b)).abs() / norm;
        worst = worst.max(r);
    }
    Ok(worst)
}

/// A fixed battery of bumps straddling `y = 0`.
pub fn default_tests() -> Vec<TestBump> {
    vec![
        TestBump { center: (0.0, 0.0), radius: 0.5 },
        TestBump { center: (0.2, -0.1), radius: 0.4 },
        TestBump { center: (-0.3, 0.15), radius: 0.35 },
        TestBump { center: (0.1, 0.3), radius: 0.45 },
        TestBump { center: (-0.1, -0.25), radius: 0.5 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::analytic;

    fn field(f: std::sync::Arc<dyn AnalyticField>) -> ScalarField {
        ScalarField::from_analytic(Grid::upper_rectangle(33), f).unwrap()
    }

    #[test]
    fn monomials_are_fixed_points() {
        for (k, u) in [analytic("y2", |_, y| y * y), analytic("y3", |_, y| y * y * y)].into_iter().enumerate() {
            let p = reflect_solution(&field(u), 1e-14).unwrap();
            let g = *p.w.grid();
            for ((i, j), w) in p.w.values().indexed_iter() {
                let y = g.y(j);
                let _ = i;
                let expect = if k == 0 { y * y } else { y * y * y };
                assert!((w - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn zero_and_unclamped_inputs() {
        let p = reflect_solution(&field(analytic("0", |_, _| Jet::constant(0.0))), 0.0).unwrap();
        assert_eq!(p.ubar.max_abs(), 0.0);
        assert!(matches!(reflect_solution(&field(analytic("y", |_, y| y)), 1e-8), Err(Error::Precondition(_))));
    }

    #[test]
    fn source_extension_examples() {
        let (f1, _) = extend_source(&field(analytic("1", |_, _| Jet::constant(1.0)))).unwrap();
        assert!(f1.values().iter().all(|v| (*v + 5.0).abs() < 1e-15));
        let (f1, _) = extend_source(&field(analytic("y", |_, y| y))).unwrap();
        for ((_, j), v) in f1.values().indexed_iter() {
            assert!((v - 11.0 * f1.grid().y(j)).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_part_of_quadratic_vanishes() {
        let p = reflect_solution(&field(analytic("y2", |_, y| y * y)), 1e-14).unwrap();
        let g = *p.u.grid();
        let a1 = ScalarField::from_fn(g, |x, y| 1.0 + x * y).unwrap();
        let a2 = ScalarField::from_fn(g, |x, _| x.cos()).unwrap();
        let (h, n) = singular_part(&p, [&a1, &a2], 1e-10).unwrap();
        assert!(h.max_abs() < 1e-8, "{}", h.max_abs());
        assert!(n.iter().all(|v| *v < 1e-10));
    }

    #[test]
    fn weak_form_of_quadratic() {
        let p = reflect_solution(&field(analytic("y2", |_, y| y * y)), 1e-14).unwrap();
        let r = verify_weak_form(&p.ubar, None, &default_tests()).unwrap();
        let fine = reflect_solution(&ScalarField::from_analytic(Grid::upper_rectangle(129), analytic("y2", |_, y| y * y)).unwrap(), 1e-14)
            .unwrap();
        let r2 = verify_weak_form(&fine.ubar, None, &default_tests()).unwrap();
        assert!(r2 < 1e-5 && r2 < r / 100.0, "{r} {r2}");
        let bad = [TestBump { center: (0.6, 0.0), radius: 0.5 }];
        assert!(verify_weak_form(&p.ubar, None, &bad).is_err());
    }
}
