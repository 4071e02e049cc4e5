//! Truncated bivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a smooth function of two
//! variables around a point, up to total degree [`JET_ORDER`]. Arithmetic and
//! the elementary functions propagate all coefficients exactly, so evaluating
//! an expression on seeded jets yields every partial derivative up to order
//! six without finite differences.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Highest total derivative order carried by a [`Jet`].
pub const JET_ORDER: usize = 6;
const LEN: usize = (JET_ORDER + 1) * (JET_ORDER + 2) / 2;

const fn slot(p: usize, q: usize) -> usize {
    // Graded ordering: all terms of total degree d precede degree d + 1.
    let d = p + q;
    d * (d + 1) / 2 + q
}

const FACT: [f64; JET_ORDER + 1] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];

/// Taylor coefficients `c[p, q]` of `dx^p dy^q`, total degree at most six.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; LEN],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Jet { c }
    }

    /// The coordinate function `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut j = Jet::constant(x0);
        j.c[slot(1, 0)] = 1.0;
        j
    }

    /// The coordinate function `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut j = Jet::constant(y0);
        j.c[slot(0, 1)] = 1.0;
        j
    }

    /// Univariate Taylor expansion in `x` from the derivatives `f^(k)(x0)`.
    pub fn from_x_derivs(d: &[f64; JET_ORDER + 1]) -> Self {
        let mut c = [0.0; LEN];
        for (k, dk) in d.iter().enumerate() {
            c[slot(k, 0)] = dk / FACT[k];
        }
        Jet { c }
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// Jet of `∂x^p ∂y^q f`. Coefficients above total degree `6 - p - q`
    /// are lost and come back as zero.
    pub fn differentiate(&self, p: usize, q: usize) -> Jet {
        let mut c = [0.0; LEN];
        if p + q > JET_ORDER {
            return Jet { c };
        }
        for d in 0..=(JET_ORDER - p - q) {
            for b in 0..=d {
                let a = d - b;
                let mut f = self.c[slot(a + p, b + q)];
                f *= FACT[a + p] / FACT[a] * FACT[b + q] / FACT[b];
                c[slot(a, b)] = f;
            }
        }
        Jet { c }
    }

    /// Jet of `(x, y) ↦ f(x, -y)` from the jet of `f` at the mirrored point.
    pub fn reflect_y(&self) -> Jet {
        let mut out = *self;
        for d in 0..=JET_ORDER {
            for q in (1..=d).step_by(2) {
                out.c[slot(d - q, q)] = -out.c[slot(d - q, q)];
            }
        }
        out
    }

    /// Raw Taylor coefficient of `dx^p dy^q`.
    pub fn coeff(&self, p: usize, q: usize) -> f64 {
        if p + q > JET_ORDER {
            return 0.0;
        }
        self.c[slot(p, q)]
    }

    /// Partial derivative `∂x^p ∂y^q` at the expansion point.
    pub fn deriv(&self, p: usize, q: usize) -> f64 {
        if p + q > JET_ORDER {
            return f64::NAN;
        }
        self.c[slot(p, q)] * FACT[p] * FACT[q]
    }

    /// Univariate derivatives `d^k/dx^k`, k = 0..=6.
    pub fn x_derivs(&self) -> [f64; JET_ORDER + 1] {
        std::array::from_fn(|k| self.deriv(k, 0))
    }

    fn nilpotent(&self) -> Jet {
        let mut d = *self;
        d.c[0] = 0.0;
        d
    }

    /// `Σ_k t[k] δ^k` where `δ` is the non-constant part of `self`.
    fn compose(&self, taylor: &[f64; JET_ORDER + 1]) -> Jet {
        let delta = self.nilpotent();
        let mut out = Jet::constant(taylor[0]);
        let mut power = Jet::constant(1.0);
        for t in taylor.iter().skip(1) {
            power = power * delta;
            if *t != 0.0 {
                for (o, p) in out.c.iter_mut().zip(power.c.iter()) {
                    *o += t * p;
                }
            }
        }
        out
    }

    pub fn scale(mut self, s: f64) -> Jet {
        self.c.iter_mut().for_each(|v| *v *= s);
        self
    }

    pub fn recip(&self) -> Jet {
        let a = self.c[0];
        let mut t = [0.0; JET_ORDER + 1];
        let mut p = 1.0 / a;
        for (k, tk) in t.iter_mut().enumerate() {
            *tk = if k % 2 == 0 { p } else { -p };
            p /= a;
        }
        self.compose(&t)
    }

    pub fn exp(&self) -> Jet {
        let e = self.c[0].exp();
        self.compose(&std::array::from_fn(|k| e / FACT[k]))
    }

    pub fn ln(&self) -> Jet {
        let a = self.c[0];
        let mut t = [0.0; JET_ORDER + 1];
        t[0] = a.ln();
        for (k, tk) in t.iter_mut().enumerate().skip(1) {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            *tk = sign / (k as f64 * a.powi(k as i32));
        }
        self.compose(&t)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [s, c, -s, -c];
        self.compose(&std::array::from_fn(|k| cyc[k % 4] / FACT[k]))
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.c[0].sin_cos();
        let cyc = [c, -s, -c, s];
        self.compose(&std::array::from_fn(|k| cyc[k % 4] / FACT[k]))
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose(&std::array::from_fn(|k| if k % 2 == 0 { s } else { c } / FACT[k]))
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.c[0].sinh(), self.c[0].cosh());
        self.compose(&std::array::from_fn(|k| if k % 2 == 0 { c } else { s } / FACT[k]))
    }

    pub fn tanh(&self) -> Jet {
        self.sinh() / self.cosh()
    }

    pub fn atan(&self) -> Jet {
        // atan' = 1 / (1 + x^2); integrate the jet of the derivative term by term
        // along the one-dimensional direction of δ.
        let a = self.c[0];
        let mut t = [0.0; JET_ORDER + 1];
        t[0] = a.atan();
        // Taylor coefficients of 1/(1+(a+s)^2) in s, then integrate.
        let s = Jet::var_x(0.0);
        let inner = (Jet::constant(a) + s) * (Jet::constant(a) + s) + Jet::constant(1.0);
        let d = inner.recip();
        for (k, tk) in t.iter_mut().enumerate().skip(1) {
            *tk = d.coeff(k - 1, 0) / k as f64;
        }
        self.compose(&t)
    }

    /// Real power with a positive base.
    pub fn powf(&self, p: f64) -> Jet {
        let a = self.c[0];
        let mut t = [0.0; JET_ORDER + 1];
        let mut binom = 1.0;
        for (k, tk) in t.iter_mut().enumerate() {
            *tk = binom * a.powf(p - k as f64);
            binom *= (p - k as f64) / (k as f64 + 1.0);
        }
        self.compose(&t)
    }

    pub fn powi(&self, n: i32) -> Jet {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let mut out = Jet::constant(1.0);
        for _ in 0..n {
            out = out * *self;
        }
        out
    }

    pub fn sqrt(&self) -> Jet {
        self.powf(0.5)
    }

    pub fn abs(&self) -> Jet {
        if self.c[0] < 0.0 {
            -*self
        } else {
            *self
        }
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        self.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        self.c.iter_mut().zip(rhs.c.iter()).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = [0.0; LEN];
        for d1 in 0..=JET_ORDER {
            for q1 in 0..=d1 {
                let a = self.c[slot(d1 - q1, q1)];
                if a == 0.0 {
                    continue;
                }
                for d2 in 0..=(JET_ORDER - d1) {
                    for q2 in 0..=d2 {
                        let p = d1 - q1 + d2 - q2;
                        out[slot(p, q1 + q2)] += a * rhs.c[slot(d2 - q2, q2)];
                    }
                }
            }
        }
        Jet { c: out }
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Jet) -> Jet {
        self * rhs.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn product_rule_on_polynomial() {
        let x = Jet::var_x(0.5);
        let y = Jet::var_y(-0.25);
        // f = x^3 y^2
        let f = x * x * x * y * y;
        assert_relative_eq!(f.deriv(0, 0), 0.125 * 0.0625);
        assert_relative_eq!(f.deriv(3, 2), 12.0);
        assert_relative_eq!(f.deriv(2, 1), 6.0 * 0.5 * 2.0 * -0.25);
        assert_eq!(f.deriv(4, 0), 0.0);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let x = Jet::var_x(0.3);
        let e = x.exp();
        for k in 0..=JET_ORDER {
            assert_relative_eq!(e.deriv(k, 0), 0.3f64.exp(), max_relative = 1e-13);
        }
        let s = x.sin();
        assert_relative_eq!(s.deriv(5, 0), 0.3f64.cos(), max_relative = 1e-13);
        let l = x.ln();
        // d^4 ln x = -6 / x^4
        assert_relative_eq!(l.deriv(4, 0), -6.0 / 0.3f64.powi(4), max_relative = 1e-12);
        let r = x.powf(2.5);
        // d^3 x^2.5 = 2.5 * 1.5 * 0.5 x^-0.5
        assert_relative_eq!(r.deriv(3, 0), 1.875 / 0.3f64.sqrt(), max_relative = 1e-12);
        let a = x.atan();
        // d/dx atan = 1/(1+x^2); second derivative -2x/(1+x^2)^2
        assert_relative_eq!(a.deriv(1, 0), 1.0 / 1.09, max_relative = 1e-13);
        assert_relative_eq!(a.deriv(2, 0), -0.6 / (1.09 * 1.09), max_relative = 1e-12);
    }

    #[test]
    fn differentiation_and_reflection() {
        let x = Jet::var_x(0.4);
        let y = Jet::var_y(0.7);
        let f = (x * y.powi(3)).sin();
        let fy = f.differentiate(0, 1);
        assert_relative_eq!(fy.deriv(1, 1), f.deriv(1, 2), max_relative = 1e-13);
        assert_relative_eq!(f.differentiate(2, 1).value(), f.deriv(2, 1), max_relative = 1e-13);
        let g = Jet::var_x(0.4) * Jet::var_y(-0.7).powi(3);
        let r = g.reflect_y();
        // r(x, y) = x (-y)^3 expanded at y = 0.7.
        assert_relative_eq!(r.value(), -0.4 * 0.343, max_relative = 1e-14);
        assert_relative_eq!(r.deriv(0, 1), -0.4 * 3.0 * 0.49, max_relative = 1e-14);
        assert_relative_eq!(r.deriv(1, 2), -6.0 * 0.7, max_relative = 1e-14);
    }

    #[test]
    fn quotient_and_mixed_partials() {
        let x = Jet::var_x(1.0);
        let y = Jet::var_y(2.0);
        let f = x / (x + y);
        // ∂x f = y/(x+y)^2, ∂y f = -x/(x+y)^2, ∂xy f = (x - y)/(x+y)^3
        assert_relative_eq!(f.deriv(1, 0), 2.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(f.deriv(0, 1), -1.0 / 9.0, max_relative = 1e-14);
        assert_relative_eq!(f.deriv(1, 1), -1.0 / 27.0, max_relative = 1e-14);
    }
}
