//! Quadrature rules: Gauss–Legendre on intervals, polar products on discs
//! and half-discs, and a clipped-cell rule for regions given by a level set.

use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;

/// Gauss–Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = GaussLegendre::new(NonZeroUsize::new(n).expect("at least one node"));
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    rule.as_node_weight_pairs().iter().map(|&(x, w)| (mid + half * x, half * w)).collect()
}

/// Composite Gauss–Legendre with `panels` equal panels of `n` nodes.
pub fn composite_gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let base = gauss_legendre(n, -1.0, 1.0);
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for &(x, w) in &base {
            acc += 0.5 * h * w * f(lo + 0.5 * h * (x + 1.0));
        }
    }
    acc
}

/// Adaptive Gauss–Legendre: panels are bisected until a 10-point and a
/// 20-point rule agree to `tol` (absolute, scaled by panel share).
pub fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let lo = gauss_legendre(10, -1.0, 1.0);
    let hi = gauss_legendre(20, -1.0, 1.0);
    adaptive_rec(f, a, b, tol, &lo, &hi, 0)
}

fn adaptive_rec(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, lo: &[(f64, f64)], hi: &[(f64, f64)], depth: usize) -> f64 {
    let apply = |rule: &[(f64, f64)]| {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        rule.iter().map(|&(x, w)| half * w * f(mid + half * x)).sum::<f64>()
    };
    let coarse = apply(lo);
    let fine = apply(hi);
    if (fine - coarse).abs() <= tol || depth >= 40 {
        return fine;
    }
    let m = 0.5 * (a + b);
    adaptive_rec(f, a, m, 0.5 * tol, lo, hi, depth + 1) + adaptive_rec(f, m, b, 0.5 * tol, lo, hi, depth + 1)
}

/// Polar tensor rule over the sector `0 ≤ r ≤ s`, `θ0 ≤ θ ≤ θ1`, centred at
/// the origin: `nr` radial and `nt` angular Gauss–Legendre nodes per panel.
pub fn polar_sector(f: impl Fn(f64, f64) -> f64, s: f64, theta: (f64, f64), nr: usize, nt: usize) -> f64 {
    polar_annulus(f, (0.0, s), theta, nr, nt)
}

/// Polar tensor rule over the annular sector `r0 ≤ r ≤ r1`.
pub fn polar_annulus(f: impl Fn(f64, f64) -> f64, radii: (f64, f64), theta: (f64, f64), nr: usize, nt: usize) -> f64 {
    if radii.1 <= radii.0 {
        return 0.0;
    }
    let rr = gauss_legendre(nr, radii.0, radii.1);
    let tt = gauss_legendre(nt, theta.0, theta.1);
    let trig: Vec<(f64, f64, f64)> = tt.iter().map(|&(t, w)| (t.cos(), t.sin(), w)).collect();
    let mut acc = 0.0;
    for &(r, wr) in &rr {
        let mut ring = 0.0;
        for &(c, s, wt) in &trig {
            ring += wt * f(r * c, r * s);
        }
        acc += wr * r * ring;
    }
    acc
}

/// Clipped-cell rule: integrates `f` over `{ level < 0 }` inside the box
/// `[x0, x1] × [y0, y1]` split into `nx × ny` cells.
///
/// Each cell is cut into two triangles; the level set and `f` are replaced
/// by their linear interpolants on each triangle, the triangle is clipped to
/// the negative side and the linear `f` is integrated exactly over the
/// clipped polygon. The rule is second order for smooth data.
pub fn clipped_cells(
    f: impl Fn(f64, f64) -> f64,
    level: impl Fn(f64, f64) -> f64,
    bx: (f64, f64),
    by: (f64, f64),
    nx: usize,
    ny: usize,
) -> f64 {
    let hx = (bx.1 - bx.0) / nx as f64;
    let hy = (by.1 - by.0) / ny as f64;
    let node = |i: usize, j: usize| {
        let x = bx.0 + i as f64 * hx;
        let y = by.0 + j as f64 * hy;
        [x, y, f(x, y), level(x, y)]
    };
    let mut prev: Vec<[f64; 4]> = (0..=nx).map(|i| node(i, 0)).collect();
    let mut acc = 0.0;
    for j in 0..ny {
        let next: Vec<[f64; 4]> = (0..=nx).map(|i| node(i, j + 1)).collect();
        for i in 0..nx {
            let (a, b, c, d) = (prev[i], prev[i + 1], next[i + 1], next[i]);
            acc += clipped_triangle(&[a, b, c]) + clipped_triangle(&[a, c, d]);
        }
        prev = next;
    }
    acc
}

/// Integral of the linear interpolant of `f` over the part of a triangle
/// where the linear interpolant of the level set is negative.
fn clipped_triangle(v: &[[f64; 4]; 3]) -> f64 {
    let inside = v.iter().filter(|p| p[3] < 0.0).count();
    if inside == 0 {
        return 0.0;
    }
    let mut poly: Vec<[f64; 3]> = Vec::with_capacity(4);
    for k in 0..3 {
        let p = v[k];
        let q = v[(k + 1) % 3];
        if p[3] < 0.0 {
            poly.push([p[0], p[1], p[2]]);
        }
        if (p[3] < 0.0) != (q[3] < 0.0) {
            let t = p[3] / (p[3] - q[3]);
            poly.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]), p[2] + t * (q[2] - p[2])]);
        }
    }
    // Fan triangulation; a linear function integrates to area times the
    // vertex mean on each triangle.
    let mut acc = 0.0;
    for k in 1..poly.len() - 1 {
        let (a, b, c) = (poly[0], poly[k], poly[k + 1]);
        let area = 0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
        acc += area * (a[2] + b[2] + c[2]) / 3.0;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let q = gauss_legendre(5, 0.0, 2.0);
        let v: f64 = q.iter().map(|(x, w)| w * x.powi(9)).sum();
        assert_relative_eq!(v, 2f64.powi(10) / 10.0, max_relative = 1e-14);
    }

    #[test]
    fn half_disc_moments() {
        let s = 0.7;
        let area = polar_sector(|_, _| 1.0, s, (0.0, PI), 4, 4);
        assert_relative_eq!(area, PI * s * s / 2.0, max_relative = 1e-14);
        let y4 = polar_sector(|_, y| y.powi(4), s, (0.0, PI), 8, 16);
        assert_relative_eq!(y4, PI * s.powi(6) / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn adaptive_matches_closed_form() {
        let v = adaptive_gauss(&|t: f64| 1.0 / (1.0 + t), 0.0, 3.0, 1e-14);
        assert_relative_eq!(v, 4f64.ln(), max_relative = 1e-14);
    }

    #[test]
    fn clipped_rule_is_second_order() {
        let exact = PI / 16.0;
        let err = |n: usize| {
            let v = clipped_cells(|_, y| y.powi(4), |x, y| (x * x + y * y).sqrt() - 1.0, (-1.0, 1.0), (0.0, 1.0), 2 * n, n);
            (v - exact).abs()
        };
        let (e1, e2) = (err(32), err(64));
        assert!((e1 / e2).log2() > 1.8, "{e1} {e2}");
    }
}
