//! Three-spheres inequalities at the boundary (flat and curved) and the
//! quantitative strong unique continuation bound.

use serde::Serialize;

use crate::conformal::ConformalMap;
use crate::error::{Error, Result};
use crate::geometry::{sigma_profile, PointEval, Region};

/// `Ĉ` exponents tried when fitting the empirical constant.
pub const C_EXP_GRID: [f64; 5] = [0.0, 1.0, 2.0, 4.0, 8.0];

/// Radii used for the vanishing-order fit.
pub const FIT_POINTS: usize = 10;

/// Settings shared by the three-spheres verifiers.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct ThreeSpheresConfig {
    pub epsilon: f64,
    pub c_exp_grid: Vec<f64>,
    /// Largest accepted `C_emp`.
    pub ceiling: f64,
    /// `τ̄` separating the two cases of the balancing argument.
    pub tau_bar: f64,
}

impl Default for ThreeSpheresConfig {
    fn default() -> Self {
        ThreeSpheresConfig { epsilon: 0.5, c_exp_grid: C_EXP_GRID.to_vec(), ceiling: 1.0, tau_bar: 3.0 }
    }
}

/// `σ_s` over a list of radii with the exponents derived from them.
#[derive(Clone, Debug, Serialize)]
pub struct NormProfile {
    pub radii: Vec<f64>,
    pub sigma: Vec<f64>,
    pub epsilon: f64,
    pub theta_tilde: f64,
    pub tau_star: Option<f64>,
    pub c_emp: f64,
}

/// `θ̃ = log((R0/2)/R) / log((R0/2)/(r/4))`.
pub fn theta_tilde(r: f64, big_r: f64, r0: f64) -> Result<f64> {
    check_radii(r, big_r, r0)?;
    Ok(((r0 / 2.0) / big_r).ln() / ((r0 / 2.0) / (r / 4.0)).ln())
}

fn check_radii(r: f64, big_r: f64, r0: f64) -> Result<()> {
    if !(r > 0.0 && r < big_r && big_r < r0 / 2.0 && r0 < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < r < R < R0/2 < R0 < 1, got r = {r}, R = {big_r}, R0 = {r0}")));
    }
    Ok(())
}

/// `τ*` with `2 + ε + 2τ* = log(σ_{R0}/σ_r) / log((R0/2)/(r/4))`.
pub fn optimal_tau(sigma_r: f64, sigma_r0: f64, r: f64, r0: f64, epsilon: f64) -> Result<f64> {
    if sigma_r <= 0.0 {
        return Err(Error::Degenerate(format!("σ_r = {sigma_r}: the inequality is vacuous")));
    }
    if sigma_r0 < sigma_r {
        return Err(Error::InvalidInput(format!("σ_R0 = {sigma_r0} < σ_r = {sigma_r}")));
    }
    if !(r / 4.0 < r0 / 2.0) {
        return Err(Error::InvalidParameter(format!("need r/4 < R0/2, got r = {r}, R0 = {r0}")));
    }
    Ok(0.5 * ((sigma_r0 / sigma_r).ln() / ((r0 / 2.0) / (r / 4.0)).ln() - 2.0 - epsilon))
}

/// The two sides balanced by `τ*`: `((r/4)/R)^{-2-ε-2τ} σ_r` and `((R0/2)/R)^{-2-ε-2τ} σ_{R0}`.
pub fn balanced_terms(tau: f64, sigma_r: f64, sigma_r0: f64, r: f64, big_r: f64, r0: f64, epsilon: f64) -> (f64, f64) {
    let p = -2.0 - epsilon - 2.0 * tau;
    (((r / 4.0) / big_r).powf(p) * sigma_r, ((r0 / 2.0) / big_r).powf(p) * sigma_r0)
}

/// Which branch of the balancing argument applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum TauCase {
    /// `τ* ≥ τ̄`: choose `τ = τ*`.
    Balanced,
    /// `τ* < τ̄`: `σ_{R0}` is controlled by `σ_r`.
    Small,
    /// `σ_r = 0`.
    Vacuous,
}

/// Flat three-spheres check at one radius triple.
#[derive(Clone, Debug, Serialize)]
pub struct FlatReport {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    #[serde(rename = "R0")]
    pub r0: f64,
    pub epsilon: f64,
    /// `σ_r, σ_R, σ_{R0}`.
    pub sigma: [f64; 3],
    pub theta_tilde: f64,
    pub tau_star: Option<f64>,
    pub tau_case: TauCase,
    pub c_emp: f64,
    /// Exponent of `(R0/2R)` that minimises `C_emp`.
    pub c_exp: f64,
    pub ceiling: f64,
    pub pass: bool,
}

impl FlatReport {
    pub fn profile(&self) -> NormProfile {
        NormProfile {
            radii: vec![self.r, self.big_r, self.r0],
            sigma: self.sigma.to_vec(),
            epsilon: self.epsilon,
            theta_tilde: self.theta_tilde,
            tau_star: self.tau_star,
            c_emp: self.c_emp,
        }
    }
}

/// `C_emp = R^{2ε}σ_R / ((R0/2R)^Ĉ σ_r^θ̃ σ_{R0}^{1-θ̃})`, minimised over `Ĉ`.
pub fn empirical_constant(sigma: [f64; 3], r: f64, big_r: f64, r0: f64, epsilon: f64, grid: &[f64]) -> Result<(f64, f64)> {
    let th = theta_tilde(r, big_r, r0)?;
    let lhs = big_r.powf(2.0 * epsilon) * sigma[1];
    if lhs == 0.0 {
        return Ok((0.0, grid.first().copied().unwrap_or(0.0)));
    }
    let base = sigma[0].powf(th) * sigma[2].powf(1.0 - th);
    if base == 0.0 {
        return Ok((f64::INFINITY, grid.first().copied().unwrap_or(0.0)));
    }
    let best = grid
        .iter()
        .map(|&c| (lhs / ((r0 / (2.0 * big_r)).powf(c) * base), c))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or_else(|| Error::InvalidParameter("empty exponent grid".into()))?;
    Ok(best)
}

/// Checks that `u` vanishes on `{y = 0}` inside `B_{R0}`, relative to its size there.
fn check_clamped(u: &dyn PointEval, r0: f64) -> Result<()> {
    let mut edge = 0.0f64;
    let mut inner = 0.0f64;
    for i in 0..=32 {
        let x = r0 * (-1.0 + i as f64 / 16.0) * 0.999;
        edge = edge.max(u.eval_at(x, 0.0)?.abs());
        for j in 1..=8 {
            let y = r0 * j as f64 / 8.0 * 0.999;
            if x.hypot(y) < r0 {
                inner = inner.max(u.eval_at(x, y)?.abs());
            }
        }
    }
    if edge > 1e-8 * inner.max(f64::MIN_POSITIVE) && edge > 1e-300 {
        return Err(Error::Precondition(format!("u is not clamped on y = 0: max |u| = {edge:.3e} against {inner:.3e} inside")));
    }
    Ok(())
}

/// Three-spheres inequality for the flat boundary at radii `r < R < R0/2`.
pub fn three_spheres_flat(u: &dyn PointEval, r: f64, big_r: f64, r0: f64, cfg: &ThreeSpheresConfig) -> Result<FlatReport> {
    check_radii(r, big_r, r0)?;
    check_clamped(u, r0)?;
    let s = sigma_profile(u, &[r, big_r, r0], &Region::HalfDisc)?;
    flat_report([s[0], s[1], s[2]], r, big_r, r0, cfg)
}

/// [`three_spheres_flat`] from precomputed norms.
pub fn flat_report(sigma: [f64; 3], r: f64, big_r: f64, r0: f64, cfg: &ThreeSpheresConfig) -> Result<FlatReport> {
    let theta_tilde = theta_tilde(r, big_r, r0)?;
    let (c_emp, c_exp) = empirical_constant(sigma, r, big_r, r0, cfg.epsilon, &cfg.c_exp_grid)?;
    let (tau_star, tau_case) = match optimal_tau(sigma[0], sigma[2], r, r0, cfg.epsilon) {
        Ok(t) if t >= cfg.tau_bar => (Some(t), TauCase::Balanced),
        Ok(t) => (Some(t), TauCase::Small),
        Err(Error::Degenerate(_)) => (None, TauCase::Vacuous),
        Err(e) => return Err(e),
    };
    Ok(FlatReport {
        r,
        big_r,
        r0,
        epsilon: cfg.epsilon,
        sigma,
        theta_tilde,
        tau_star,
        tau_case,
        c_emp,
        c_exp,
        ceiling: cfg.ceiling,
        pass: c_emp.is_finite() && c_emp <= cfg.ceiling,
    })
}

/// `u = v∘Φ` evaluated pointwise through the conformal map.
pub struct PulledBack<'a> {
    pub v: &'a dyn PointEval,
    pub map: &'a ConformalMap,
    pub spacing: f64,
}

impl PointEval for PulledBack<'_> {
    fn eval_at(&self, y1: f64, y2: f64) -> Result<f64> {
        let x = self.map.phi([y1, y2])?;
        self.v.eval_at(x[0], x[1])
    }

    fn spacing(&self) -> f64 {
        self.spacing
    }
}

/// Curved three-spheres check, reduced to the flat one through the map.
#[derive(Clone, Debug, Serialize)]
pub struct CurvedReport {
    pub r1: f64,
    pub r2: f64,
    pub r0: f64,
    /// Flat radius `R0` of the half-disc the map is applied on.
    pub big_r0: f64,
    pub k_constant: f64,
    /// Realised `c = R0/(2K)`.
    pub c: f64,
    pub theta: f64,
    pub theta_tilde: f64,
    /// `σ` of `v` over `B_s ∩ Ω` at `r1, r2, r0`.
    pub sigma_v: [f64; 3],
    /// Smallest `C` with `σ_{r2} ≤ C (r0/r2)^Ĉ σ_{r1}^θ σ_{r0}^{1-θ}` over the exponent grid.
    pub c_emp_v: f64,
    pub flat: FlatReport,
    pub pass: bool,
}

/// Three-spheres inequality at a curved boundary for `r1 < r2 < c r0`,
/// `c = R0/(2K)`. The flat check runs on `u = v∘Φ` at `r = 2r1/r0`, `R = K r2/r0`.
pub fn three_spheres_curved(
    v: &dyn PointEval,
    map: &ConformalMap,
    r1: f64,
    r2: f64,
    big_r0: f64,
    spacing: f64,
    cfg: &ThreeSpheresConfig,
) -> Result<CurvedReport> {
    if !map.certificate.passed() {
        return Err(Error::Precondition(format!("conformal map not certified: {:?}", map.certificate.failures)));
    }
    let (r0, k) = (map.r0, map.k_constant);
    let c = big_r0 / (2.0 * k);
    if !(0.0 < r1 && r1 < r2) {
        return Err(Error::InvalidParameter(format!("need 0 < r1 < r2, got {r1}, {r2}")));
    }
    if r2 >= c * r0 {
        return Err(Error::OutOfRange(format!("r2 = {r2} not below c·r0 = {:.6e} (c = R0/(2K), K = {k:.4})", c * r0)));
    }
    let (r, big_r) = (2.0 * r1 / r0, k * r2 / r0);
    let u = PulledBack { v, map, spacing };
    let flat = three_spheres_flat(&u, r, big_r, big_r0, cfg)?;
    let theta = ((big_r0 * r0) / (2.0 * k * r2)).ln() / (r0 / r1).ln();
    let s = sigma_profile(v, &[r1, r2, r0], &Region::Domain(map.graph.g.clone()))?;
    let sigma_v = [s[0], s[1], s[2]];
    let c_emp_v = if sigma_v[1] == 0.0 {
        0.0
    } else {
        let base = sigma_v[0].powf(theta) * sigma_v[2].powf(1.0 - theta);
        cfg.c_exp_grid.iter().map(|&e| sigma_v[1] / ((r0 / r2).powf(e) * base)).fold(f64::INFINITY, f64::min)
    };
    let theta_tilde = flat.theta_tilde;
    let pass = flat.pass && theta_tilde >= theta;
    Ok(CurvedReport { r1, r2, r0, big_r0, k_constant: k, c, theta, theta_tilde, sigma_v, c_emp_v, flat, pass })
}

/// Quantitative strong unique continuation check.
#[derive(Clone, Debug, Serialize)]
pub struct SucpReport {
    pub r1: f64,
    pub r2: f64,
    pub r0: f64,
    pub c: f64,
    pub big_c: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub exponent: f64,
    /// `σ_{r1}`, `σ_{r2}`, `σ_{r0}`.
    pub sigma: [f64; 3],
    /// `(r1/r0)^exponent σ_{r0}`.
    pub bound: f64,
    /// `σ_{r1} ≥ bound` and `A > 0`.
    pub pass: bool,
    pub profile_radii: Vec<f64>,
    pub profile_sigma: Vec<f64>,
    pub vanishing_order: Option<f64>,
}

/// `σ_{r1} ≥ (r1/r0)^{log A / log(r2/(c r0))} σ_{r0}` with
/// `A = (1/C)(r2/r0)^C σ_{r2}/σ_{r0}`. `c` and `C` are the constants of the
/// three-spheres inequality; `C` is raised to 1 if smaller.
pub fn sucp_lower_bound(
    v: &dyn PointEval,
    region: &Region,
    radii: [f64; 3],
    c: f64,
    big_c: f64,
    profile_points: usize,
) -> Result<SucpReport> {
    let [r1, r2, r0] = radii;
    if !(0.0 < r1 && r1 < r2 && r2 < c * r0 && c < 1.0) {
        return Err(Error::InvalidParameter(format!("need 0 < r1 < r2 < c·r0 with c < 1, got {r1}, {r2}, {r0}, c = {c}")));
    }
    let big_c = big_c.max(1.0);
    let profile_radii = geometric_radii(r1, r0, profile_points.max(FIT_POINTS));
    let mut all: Vec<f64> = profile_radii.iter().copied().chain([r2]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    let s = sigma_profile(v, &all, region)?;
    let at = |r: f64| s[all.iter().position(|&q| q == r).unwrap()];
    let sigma = [at(r1), at(r2), at(r0)];
    if sigma[2] <= 0.0 {
        return Err(Error::NotApplicable("σ_{r0} = 0".into()));
    }
    let a = (r2 / r0).powf(big_c) * sigma[1] / (big_c * sigma[2]);
    if !(a < 1.0) {
        return Err(Error::Certification(format!("A = {a} is not below 1")));
    }
    let exponent = a.ln() / (r2 / (c * r0)).ln();
    let bound = (r1 / r0).powf(exponent) * sigma[2];
    let profile_sigma: Vec<f64> = profile_radii.iter().map(|&r| at(r)).collect();
    let vanishing_order = vanishing_order(&profile_radii, &profile_sigma).ok();
    Ok(SucpReport {
        r1,
        r2,
        r0,
        c,
        big_c,
        a,
        exponent,
        sigma,
        bound,
        // `σ_{r2} = 0` with `σ_{r0} > 0` is vanishing of infinite order.
        pass: a > 0.0 && sigma[0] >= bound,
        profile_radii,
        profile_sigma,
        vanishing_order,
    })
}

/// `n` log-spaced radii from `lo` to `hi`.
pub fn geometric_radii(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let q = (hi / lo).ln() / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|k| lo * (q * k as f64).exp()).collect();
    v[0] = lo;
    v[n - 1] = hi;
    v
}

/// Least-squares slope of `log σ` against `log s` over the smallest [`FIT_POINTS`] radii.
pub fn vanishing_order(radii: &[f64], sigma: &[f64]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = radii.iter().zip(sigma).take(FIT_POINTS).map(|(r, s)| (r.ln(), s.ln())).collect();
    if pts.len() < 2 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Degenerate("vanishing-order fit needs positive σ at two or more radii".into()));
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Flat reports over every admissible pair from `rs × big_rs`.
pub fn radius_sweep(u: &dyn PointEval, rs: &[f64], big_rs: &[f64], r0: f64, cfg: &ThreeSpheresConfig) -> Result<Vec<FlatReport>> {
    let mut all: Vec<f64> = rs.iter().chain(big_rs).copied().chain([r0]).collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    check_clamped(u, r0)?;
    let s = sigma_profile(u, &all, &Region::HalfDisc)?;
    let at = |r: f64| s[all.iter().position(|&q| q == r).unwrap()];
    let mut out = Vec::new();
    for &r in rs {
        for &big_r in big_rs {
            if r < big_r {
                out.push(flat_report([at(r), at(big_r), at(r0)], r, big_r, r0, cfg)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ExactField;
    use crate::grid::analytic;
    use crate::jet::Jet;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn y2() -> ExactField {
        ExactField { field: analytic("y2", |_, y| y * y), spacing: 1.0 / 64.0 }
    }

    #[test]
    fn theta_tilde_log_identity() {
        assert_eq!(theta_tilde(0.05, 0.1, 0.4).unwrap(), 2f64.ln() / 16f64.ln());
        assert!((theta_tilde(0.05, 0.1, 0.4).unwrap() - 0.25).abs() < 1e-15);
        assert!(theta_tilde(0.1, 0.05, 0.4).is_err());
        assert!(theta_tilde(0.05, 0.25, 0.4).is_err());
    }

    #[test]
    fn tau_star_examples() {
        assert_eq!(optimal_tau(2.0, 2.0, 0.05, 0.4, 0.5).unwrap(), -1.25);
        let s = |r: f64| PI * r.powi(6) / 16.0;
        let t = optimal_tau(s(0.05), s(0.4), 0.05, 0.4, 0.5).unwrap();
        assert!((t - 1.0).abs() < 1e-12, "{t}");
        let (a, b) = balanced_terms(t, s(0.05), s(0.4), 0.05, 0.1, 0.4, 0.5);
        assert_relative_eq!(a, b, max_relative = 1e-12);
        assert!(matches!(optimal_tau(0.0, 1.0, 0.05, 0.4, 0.5), Err(Error::Degenerate(_))));
    }

    #[test]
    fn flat_quadratic() {
        let cfg = ThreeSpheresConfig::default();
        let rep = three_spheres_flat(&y2(), 0.05, 0.1, 0.4, &cfg).unwrap();
        for (s, r) in rep.sigma.iter().zip([0.05f64, 0.1, 0.4]) {
            assert_relative_eq!(*s, PI * r.powi(6) / 16.0, max_relative = 1e-10);
        }
        assert!(rep.pass && rep.c_emp > 0.0);
        let scaled = ExactField { field: analytic("3y2", |_, y| (y * y).scale(-3.0)), spacing: 1.0 / 64.0 };
        let rep3 = three_spheres_flat(&scaled, 0.05, 0.1, 0.4, &cfg).unwrap();
        assert_relative_eq!(rep.c_emp, rep3.c_emp, max_relative = 1e-10);
        let zero = ExactField { field: analytic("0", |_, _| Jet::constant(0.0)), spacing: 1.0 / 64.0 };
        let z = three_spheres_flat(&zero, 0.05, 0.1, 0.4, &cfg).unwrap();
        assert_eq!(z.c_emp, 0.0);
        assert_eq!(z.tau_case, TauCase::Vacuous);
        let not_clamped = ExactField { field: analytic("1+y", |_, y| Jet::constant(1.0) + y), spacing: 1.0 / 64.0 };
        assert!(matches!(three_spheres_flat(&not_clamped, 0.05, 0.1, 0.4, &cfg), Err(Error::Precondition(_))));
    }

    #[test]
    fn sucp_quadratic_and_negative_control() {
        let rep = sucp_lower_bound(&y2(), &Region::HalfDisc, [0.01, 0.1, 0.4], 0.5, 8.0, 20).unwrap();
        assert!(rep.pass && rep.a < 1.0);
        assert!((rep.vanishing_order.unwrap() - 6.0).abs() < 1e-6);
        let flat = ExactField {
            field: analytic("exp(-1/s)", |x, y| {
                let s = (x * x + y * y).sqrt();
                (-s.recip()).exp()
            }),
            spacing: 1.0 / 64.0,
        };
        let neg = sucp_lower_bound(&flat, &Region::HalfDisc, [0.01, 0.1, 0.4], 0.5, 8.0, 20).unwrap();
        assert!(!neg.pass, "{:?}", neg);
    }
}
