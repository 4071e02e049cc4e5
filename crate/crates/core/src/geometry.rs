//! Boundary graphs `x2 = g(x1)`, their Hölder norms and smooth extension,
//! and squared L² norms over half-discs, discs and `Ω ∩ B_s`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use faer::prelude::*;
use faer::Mat;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{AnalyticField, ScalarField};
use crate::jet::{Jet, JET_ORDER};
use crate::quadrature::{clipped_cells, polar_annulus};

/// Number of derivatives (0..=6) carried by every curve.
pub const CURVE_DERIVS: usize = JET_ORDER + 1;

/// A smooth function of one variable with derivatives up to order six.
pub trait Curve: Send + Sync + fmt::Debug {
    fn derivs(&self, x: f64) -> [f64; CURVE_DERIVS];

    fn eval(&self, x: f64) -> f64 {
        self.derivs(x)[0]
    }

    /// Taylor jet in `x` at `x`, for composition with bivariate jets.
    fn jet(&self, x: f64) -> Jet {
        Jet::from_x_derivs(&self.derivs(x))
    }
}

/// A curve given by an expression in `x`.
#[derive(Clone, Debug)]
pub struct ExprCurve(pub Expr);

impl ExprCurve {
    pub fn parse(src: &str, r0: f64) -> Result<Self> {
        let mut consts = BTreeMap::new();
        consts.insert("r0".to_string(), r0);
        let e = Expr::parse_with(src, &consts)?;
        if e.depends_on_y() {
            return Err(Error::InvalidInput(format!("boundary expression '{src}' must depend on x only")));
        }
        Ok(ExprCurve(e))
    }
}

impl Curve for ExprCurve {
    fn derivs(&self, x: f64) -> [f64; CURVE_DERIVS] {
        self.0.derivs_1d(x)
    }

    fn eval(&self, x: f64) -> f64 {
        self.0.eval(x, 0.0)
    }
}

/// A constant function.
#[derive(Clone, Copy, Debug)]
pub struct ConstantCurve(pub f64);

impl Curve for ConstantCurve {
    fn derivs(&self, _x: f64) -> [f64; CURVE_DERIVS] {
        let mut d = [0.0; CURVE_DERIVS];
        d[0] = self.0;
        d
    }
}

/// Chebyshev interpolant of samples at Chebyshev points on `[-r0, r0]`.
#[derive(Clone, Debug)]
pub struct ChebyshevCurve {
    half_width: f64,
    /// Coefficients of the series and of its first six derivatives in the
    /// scaled variable `u = x / r0`.
    coeffs: Vec<Vec<f64>>,
}

impl ChebyshevCurve {
    pub fn from_samples(r0: f64, samples: &[(f64, f64)]) -> Result<Self> {
        let n = samples.len();
        if n < 8 {
            return Err(Error::InvalidInput(format!("need at least 8 Chebyshev samples, got {n}")));
        }
        for &(x, g) in samples {
            if !x.is_finite() || !g.is_finite() || x.abs() > r0 * (1.0 + 1e-12) {
                return Err(Error::InvalidInput(format!("sample ({x}, {g}) outside [-r0, r0] or non-finite")));
            }
        }
        let mut xs: Vec<f64> = samples.iter().map(|s| s.0 / r0).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let first_kind = (0..n).map(|k| -(PI * (k as f64 + 0.5) / n as f64).cos());
        let second_kind = (0..n).map(|k| -(PI * k as f64 / (n - 1) as f64).cos());
        let near = |it: &mut dyn Iterator<Item = f64>| it.zip(&xs).all(|(a, b)| (a - b).abs() < 1e-9);
        if !near(&mut first_kind.clone()) && !near(&mut second_kind.clone()) {
            return Err(Error::InvalidInput("samples are not at Chebyshev points of either kind".into()));
        }
        let a = Mat::<f64>::from_fn(n, n, |i, k| (k as f64 * (samples[i].0 / r0).clamp(-1.0, 1.0).acos()).cos());
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| samples[i].1);
        let c = a.partial_piv_lu().solve(&rhs);
        let mut c0: Vec<f64> = (0..n).map(|k| c[(k, 0)]).collect();
        // Drop the roundoff plateau; its noise is amplified by each derivative.
        let scale = c0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let keep = c0.iter().rposition(|v| v.abs() > 64.0 * f64::EPSILON * scale).map_or(1, |k| k + 1);
        c0.truncate(keep);
        let mut coeffs = vec![c0];
        for _ in 1..CURVE_DERIVS {
            let prev = coeffs.last().unwrap();
            coeffs.push(chebyshev_derivative(prev));
        }
        Ok(ChebyshevCurve { half_width: r0, coeffs })
    }

    /// Parse `x,g` lines (a header line and `#` comments are skipped).
    pub fn from_csv(r0: f64, text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::InvalidInput(format!("line {}: expected 'x,g'", ln + 1)));
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(g)) => samples.push((x, g)),
                _ if samples.is_empty() && ln == 0 => continue,
                _ => return Err(Error::InvalidInput(format!("line {}: cannot parse '{line}'", ln + 1))),
            }
        }
        Self::from_samples(r0, &samples)
    }
}

fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    // c'_{k} = c'_{k+2} + 2(k+1) c_{k+1}, with the k = 0 term halved.
    let n = c.len();
    let mut out = vec![0.0; n];
    for k in (0..n.saturating_sub(1)).rev() {
        let above = if k + 2 < n { out[k + 2] } else { 0.0 };
        out[k] = above + 2.0 * (k + 1) as f64 * c[k + 1];
    }
    out[0] *= 0.5;
    out
}

fn clenshaw(c: &[f64], u: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * u * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    u * b1 - b2 + c[0]
}

impl Curve for ChebyshevCurve {
    fn derivs(&self, x: f64) -> [f64; CURVE_DERIVS] {
        let u = x / self.half_width;
        std::array::from_fn(|k| clenshaw(&self.coeffs[k], u) / self.half_width.powi(k as i32))
    }
}

/// Norm `Σ_{i≤k} r0^i sup|f^(i)| + r0^{k+α} |f^(k)|_α` on `[lo, hi]`.
///
/// Suprema are taken over `samples + 1` equispaced points; the Hölder
/// seminorm over pairs at power-of-two index offsets.
pub fn holder_norm(f: &dyn Curve, lo: f64, hi: f64, r0: f64, k: usize, alpha: f64, samples: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!("Hölder exponent {alpha} not in (0, 1]")));
    }
    if k >= CURVE_DERIVS {
        return Err(Error::InvalidParameter(format!("derivative order {k} above {}", CURVE_DERIVS - 1)));
    }
    let n = samples.max(2);
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let d: Vec<[f64; CURVE_DERIVS]> = xs.iter().map(|&x| f.derivs(x)).collect();
    if let Some((i, _)) = d.iter().enumerate().find(|(_, v)| v[..=k].iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidInput(format!("non-finite derivative sample at x = {}", xs[i])));
    }
    let mut norm = 0.0;
    for i in 0..=k {
        let sup = d.iter().fold(0.0f64, |m, v| m.max(v[i].abs()));
        norm += r0.powi(i as i32) * sup;
    }
    let mut semi = 0.0f64;
    let mut step = 1;
    while step <= n {
        for a in 0..=(n - step) {
            let b = a + step;
            let q = (d[b][k] - d[a][k]).abs() / (xs[b] - xs[a]).powf(alpha);
            semi = semi.max(q);
        }
        step *= 2;
    }
    Ok(norm + r0.powf(k as f64 + alpha) * semi)
}

/// Default sampling density for Hölder norms.
pub const HOLDER_SAMPLES: usize = 4096;

/// A boundary `x2 = g(x1)` over `[-r0, r0]` of class `C^{6,α}` with constants `r0, M0`.
#[derive(Clone, Debug)]
pub struct BoundaryGraph {
    pub r0: f64,
    pub m0: f64,
    pub alpha: f64,
    pub g: Arc<dyn Curve>,
    /// Computed `‖g‖_{C^{6,α}([-r0, r0])}`.
    pub norm: f64,
}

impl BoundaryGraph {
    pub fn new(g: Arc<dyn Curve>, r0: f64, m0: f64, alpha: f64) -> Result<Self> {
        if !(r0 > 0.0) || !(m0 > 0.0) {
            return Err(Error::InvalidInput(format!("r0 = {r0} and M0 = {m0} must be positive")));
        }
        let d0 = g.derivs(0.0);
        if d0[0].abs() > 1e-9 * r0 || d0[1].abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("g(0) = {:.3e}, g'(0) = {:.3e}; both must vanish", d0[0], d0[1])));
        }
        let norm = holder_norm(g.as_ref(), -r0, r0, r0, 6, alpha, HOLDER_SAMPLES)?;
        if norm > m0 * r0 * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!("C^(6,α) norm {norm:.6} exceeds M0·r0 = {:.6}", m0 * r0)));
        }
        Ok(BoundaryGraph { r0, m0, alpha, g, norm })
    }

    pub fn from_expr(src: &str, r0: f64, m0: f64, alpha: f64) -> Result<Self> {
        Self::new(Arc::new(ExprCurve::parse(src, r0)?), r0, m0, alpha)
    }

    pub fn flat(r0: f64, m0: f64) -> Self {
        BoundaryGraph { r0, m0, alpha: 1.0, g: Arc::new(ConstantCurve(0.0)), norm: 0.0 }
    }
}

/// `ψ(t) = e^{-1/t}` for `t > 0`, zero otherwise.
fn psi(t: Jet) -> Jet {
    if t.value() <= 0.0 {
        Jet::constant(0.0)
    } else {
        (-t.recip()).exp()
    }
}

/// C^∞ step: 0 for `t ≤ 0`, 1 for `t ≥ 1`, `ψ(t)/(ψ(t)+ψ(1-t))` between.
pub fn smooth_step(t: Jet) -> Jet {
    let v = t.value();
    if v <= 0.0 {
        Jet::constant(0.0)
    } else if v >= 1.0 {
        Jet::constant(1.0)
    } else {
        let a = psi(t);
        let b = psi(Jet::constant(1.0) - t);
        a / (a + b)
    }
}

/// The extension `g̃` of a boundary graph to `[-2r0, 2r0]`.
#[derive(Clone, Debug)]
pub struct ExtendedGraph {
    pub parent: BoundaryGraph,
    /// Taylor coefficients of order six at `-r0` and `r0`.
    taylor: [[f64; CURVE_DERIVS]; 2],
    /// Computed `C^{6,α}` norm of `g̃` on `[-2r0, 2r0]`, weighted by `r0`.
    pub norm_bound: f64,
}

/// Extend `g` by `χ·P6^±` outside `[-r0, r0]`, where `P6^±` are the order-six
/// Taylor polynomials at `±r0` and `χ` steps from 1 at `r0` to 0 at `3r0/2`.
pub fn extend_boundary(graph: &BoundaryGraph) -> Result<ExtendedGraph> {
    let r0 = graph.r0;
    let d0 = graph.g.derivs(0.0);
    if d0[0].abs() > 1e-9 * r0 || d0[1].abs() > 1e-9 {
        return Err(Error::InvalidInput("boundary graph does not satisfy g(0) = g'(0) = 0".into()));
    }
    let taylor = [graph.g.derivs(-r0), graph.g.derivs(r0)];
    let mut ext = ExtendedGraph { parent: graph.clone(), taylor, norm_bound: 0.0 };
    ext.norm_bound = holder_norm(&ext, -2.0 * r0, 2.0 * r0, r0, 6, graph.alpha, 2 * HOLDER_SAMPLES)?;
    let top = ext.max_abs();
    if top > 2.0 * graph.m0 * r0 {
        return Err(Error::Certification(format!("|g̃| reaches {top:.4e} > 2·M0·r0")));
    }
    Ok(ext)
}

impl ExtendedGraph {
    pub fn r0(&self) -> f64 {
        self.parent.r0
    }

    /// Empirical constant `C` in `‖g̃‖ ≤ C·M0·r0`.
    pub fn empirical_constant(&self) -> f64 {
        self.norm_bound / (self.parent.m0 * self.parent.r0)
    }

    pub fn max_abs(&self) -> f64 {
        let r0 = self.r0();
        (0..=4000).map(|i| self.eval(-2.0 * r0 + 4.0 * r0 * i as f64 / 4000.0).abs()).fold(0.0, f64::max)
    }

    fn outer_jet(&self, x: f64) -> Jet {
        let r0 = self.r0();
        let side = if x > 0.0 { 1 } else { 0 };
        let centre = if x > 0.0 { r0 } else { -r0 };
        let dx = Jet::var_x(x - centre);
        let mut p = Jet::constant(0.0);
        let mut power = Jet::constant(1.0);
        let mut fact = 1.0;
        for (k, dk) in self.taylor[side].iter().enumerate() {
            if k > 0 {
                power = power * dx;
                fact *= k as f64;
            }
            p = p + power.scale(dk / fact);
        }
        let dist = Jet::var_x(x).abs() - Jet::constant(r0);
        let chi = Jet::constant(1.0) - smooth_step(dist.scale(2.0 / r0));
        chi * p
    }
}

impl Curve for ExtendedGraph {
    fn derivs(&self, x: f64) -> [f64; CURVE_DERIVS] {
        let r0 = self.r0();
        if x.abs() <= r0 {
            self.parent.g.derivs(x)
        } else if x.abs() >= 1.5 * r0 {
            [0.0; CURVE_DERIVS]
        } else {
            self.outer_jet(x).x_derivs()
        }
    }
}

/// Regions of integration for [`region_norm`].
#[derive(Clone, Debug)]
pub enum Region {
    /// `B_s⁺ = B_s ∩ {y > 0}`.
    HalfDisc,
    /// `B_s`.
    Disc,
    /// `B_s ∩ {x2 > g(x1)}`.
    Domain(Arc<dyn Curve>),
}

/// A field that can be evaluated at arbitrary points of its extent.
pub trait PointEval: Sync {
    fn eval_at(&self, x: f64, y: f64) -> Result<f64>;
    /// Typical node spacing, used to size quadrature rules.
    fn spacing(&self) -> f64;
}

/// A closed-form field, exact at every point.
#[derive(Clone, Debug)]
pub struct ExactField {
    pub field: Arc<dyn AnalyticField>,
    pub spacing: f64,
}

impl PointEval for ExactField {
    fn eval_at(&self, x: f64, y: f64) -> Result<f64> {
        Ok(self.field.value(x, y))
    }

    fn spacing(&self) -> f64 {
        self.spacing
    }
}

impl PointEval for ScalarField {
    fn eval_at(&self, x: f64, y: f64) -> Result<f64> {
        self.interpolate(x, y)
    }

    fn spacing(&self) -> f64 {
        self.grid().hx.min(self.grid().hy)
    }
}

fn polar_nodes(s: f64, h: f64) -> (usize, usize) {
    let nr = ((2.0 * s / h).ceil() as usize).clamp(16, 512);
    (nr, 2 * nr)
}

/// `σ_s = ∫ u²` over the region of radius `s`.
///
/// Discs and half-discs use a polar Gauss–Legendre product rule; `Ω ∩ B_s`
/// uses the clipped-cell rule at the field's spacing.
pub fn region_norm(u: &dyn PointEval, s: f64, region: &Region) -> Result<f64> {
    Ok(*sigma_profile(u, &[s], region)?.last().unwrap())
}

/// `σ_s` for increasing radii. Disc rules accumulate annuli so the profile
/// is nondecreasing by construction.
pub fn sigma_profile(u: &dyn PointEval, radii: &[f64], region: &Region) -> Result<Vec<f64>> {
    if radii.windows(2).any(|w| w[1] <= w[0]) || radii.first().is_some_and(|&r| r < 0.0) {
        return Err(Error::InvalidParameter("radii must be nonnegative and strictly increasing".into()));
    }
    let h = u.spacing();
    let err: std::cell::Cell<Option<Error>> = std::cell::Cell::new(None);
    let sq = |x: f64, y: f64| match u.eval_at(x, y) {
        Ok(v) => v * v,
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    let mut out = Vec::with_capacity(radii.len());
    match region {
        Region::HalfDisc | Region::Disc => {
            let theta = if matches!(region, Region::HalfDisc) { (0.0, PI) } else { (-PI, PI) };
            let mut acc = 0.0;
            let mut prev = 0.0;
            for &s in radii {
                let (nr, nt) = polar_nodes(s - prev, h);
                let nt = nt.max(polar_nodes(s, h).1);
                acc += polar_annulus(sq, (prev, s), theta, nr, nt);
                prev = s;
                out.push(acc);
            }
        }
        Region::Domain(g) => {
            for &s in radii {
                let n = ((2.0 * s / h).ceil() as usize).max(8);
                // Vertices below the graph are projected onto it; only cut edges use them.
                let v = clipped_cells(|x, y| sq(x, y.max(g.eval(x))), |x, y| (x.hypot(y) - s).max(g.eval(x) - y), (-s, s), (-s, s), n, n);
                out.push(v);
            }
        }
    }
    if let Some(e) = err.take() {
        return Err(Error::OutOfRange(format!("region exceeds field extent: {e}")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{analytic, Grid};
    use approx::assert_relative_eq;

    fn curve(src: &str) -> Arc<dyn Curve> {
        Arc::new(ExprCurve::parse(src, 1.0).unwrap())
    }

    #[test]
    fn holder_norm_examples() {
        assert_eq!(holder_norm(&ConstantCurve(0.0), -1.0, 1.0, 1.0, 6, 0.5, 256).unwrap(), 0.0);
        let v = holder_norm(curve("x^2").as_ref(), -1.0, 1.0, 1.0, 6, 1.0, 256).unwrap();
        assert_relative_eq!(v, 5.0, max_relative = 1e-12);
        let v = holder_norm(curve("x").as_ref(), -1.0, 1.0, 1.0, 1, 1.0, 256).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn holder_norm_is_homogeneous() {
        let a = holder_norm(curve("sin(x)*x^2").as_ref(), -1.0, 1.0, 1.0, 6, 0.7, 512).unwrap();
        let b = holder_norm(curve("-3.5*sin(x)*x^2").as_ref(), -1.0, 1.0, 1.0, 6, 0.7, 512).unwrap();
        assert_relative_eq!(b, 3.5 * a, max_relative = 1e-12);
    }

    #[test]
    fn chebyshev_curve_matches_source() {
        let r0 = 0.5;
        let g = |x: f64| 0.1 * r0 * (x / r0).sin() * (x / r0).powi(2);
        let n = 64;
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let x = -r0 * (PI * (k as f64 + 0.5) / n as f64).cos();
                (x, g(x))
            })
            .collect();
        let csv: String = samples.iter().map(|(x, y)| format!("{x:.17e},{y:.17e}\n")).collect();
        let c = ChebyshevCurve::from_csv(r0, &format!("x,g\n{csv}")).unwrap();
        let e = ExprCurve::parse("0.1*r0*sin(x/r0)*(x/r0)^2", r0).unwrap();
        for x in [-0.5, -0.31, 0.0, 0.2, 0.49] {
            let (a, b) = (c.derivs(x), e.derivs(x));
            for k in 0..CURVE_DERIVS {
                assert!((a[k] - b[k]).abs() < 1e-7 * (1.0 + b[k].abs()), "x={x} k={k}: {} vs {}", a[k], b[k]);
            }
        }
        assert!(ChebyshevCurve::from_samples(r0, &samples[..20].iter().map(|&(x, y)| (x * 0.9, y)).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn boundary_graph_invariants() {
        assert!(BoundaryGraph::from_expr("x", 1.0, 10.0, 1.0).is_err());
        assert!(BoundaryGraph::from_expr("1 + x^2", 1.0, 10.0, 1.0).is_err());
        assert!(BoundaryGraph::from_expr("x^2", 1.0, 4.0, 1.0).is_err());
        assert!(BoundaryGraph::from_expr("x^2", 1.0, 5.5, 1.0).is_ok());
    }

    #[test]
    fn extension_of_quadratic() {
        let g = BoundaryGraph::from_expr("0.1*x^2", 1.0, 1.0, 1.0).unwrap();
        let e = extend_boundary(&g).unwrap();
        for x in [-1.4, -1.2, 1.05, 1.3, 1.49] {
            let chi = 1.0 - smooth_step(Jet::constant(2.0 * (f64::abs(x) - 1.0))).value();
            assert_relative_eq!(e.eval(x), chi * 0.1 * x * x, max_relative = 1e-13);
        }
        for x in [1.5, 1.7, 2.0, -1.6, -2.0] {
            assert_eq!(e.derivs(x), [0.0; CURVE_DERIVS]);
        }
        for x in [-1.0, -0.3, 0.0, 0.77, 1.0] {
            assert_eq!(e.eval(x), g.g.eval(x));
        }
    }

    #[test]
    fn extension_is_smooth_at_junction() {
        let g = BoundaryGraph::from_expr("0.1*sin(x)*x^2", 1.0, 12.0, 1.0).unwrap();
        let e = extend_boundary(&g).unwrap();
        let (a, b) = (e.derivs(1.0), e.derivs(1.0 + 1e-9));
        for k in 0..CURVE_DERIVS - 1 {
            assert!((a[k] - b[k]).abs() < 1e-6, "order {k}: {} vs {}", a[k], b[k]);
        }
        assert!(e.empirical_constant().is_finite());
        assert!(extend_boundary(&BoundaryGraph::flat(1.0, 1.0)).unwrap().max_abs() == 0.0);
    }

    #[test]
    fn half_disc_norms_match_closed_forms() {
        let grid = Grid::new((-1.0, 1.0), (0.0, 1.0), 65, 33);
        let one = ScalarField::from_analytic(grid, analytic("one", |_, _| Jet::constant(1.0))).unwrap();
        let y2 = ScalarField::from_analytic(grid, analytic("y2", |_, y| y * y)).unwrap();
        let y3 = ScalarField::from_analytic(grid, analytic("y3", |_, y| y * y * y)).unwrap();
        let s = 0.8;
        assert_relative_eq!(region_norm(&one, s, &Region::HalfDisc).unwrap(), PI * s * s / 2.0, max_relative = 1e-13);
        assert_relative_eq!(region_norm(&y2, s, &Region::HalfDisc).unwrap(), PI * s.powi(6) / 16.0, max_relative = 1e-13);
        assert_relative_eq!(region_norm(&y3, s, &Region::HalfDisc).unwrap(), 5.0 * PI * s.powi(8) / 128.0, max_relative = 1e-13);
        assert!(matches!(region_norm(&y2, 1.2, &Region::HalfDisc), Err(Error::OutOfRange(_))));
        assert!(matches!(region_norm(&y2, 0.5, &Region::Disc), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn sampled_field_norms_converge() {
        let exact = PI * 0.5f64.powi(6) / 16.0;
        let err = |n: usize| {
            let grid = Grid::upper_rectangle(n);
            let f = ScalarField::from_fn(grid, |_, y| y * y * (1.0 + 0.0 * y)).unwrap();
            (region_norm(&f, 0.5, &Region::Domain(Arc::new(ConstantCurve(0.0)))).unwrap() - exact).abs()
        };
        let (e1, e2, e3) = (err(33), err(65), err(129));
        assert!((e1 / e2).log2() >= 1.8 && (e2 / e3).log2() >= 1.8, "{e1} {e2} {e3}");
    }
}
