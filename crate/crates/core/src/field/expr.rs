//! Closed-form scalar expressions used by the analytic field catalog.
//!
//! An expression is a finite sum of separable terms
//! `c * f_x(x) * f_y(y) * f_z(z)` where every one-dimensional factor has
//! the form `s^p * exp(a s) * cos(b s + q pi/2)`. The family is closed under
//! differentiation and multiplication, so catalog fields carry exact
//! derivatives of every order.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Vector3;

/// `s^pow * exp(rate s) * cos(freq s + quarter pi/2)`, normalised so that
/// `freq >= 0`, `quarter` is 0 or 1, and `quarter = 0` whenever `freq = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Factor {
    pub pow: u32,
    pub rate: f64,
    pub freq: f64,
    pub quarter: u8,
}

impl Factor {
    pub const ONE: Factor = Factor { pow: 0, rate: 0.0, freq: 0.0, quarter: 0 };

    pub fn monomial(pow: u32) -> Self {
        Factor { pow, ..Factor::ONE }
    }

    pub fn exp(rate: f64) -> Self {
        Factor { rate, ..Factor::ONE }
    }

    pub fn cos(freq: f64) -> Self {
        Factor { freq, ..Factor::ONE }
    }

    /// `sin(b s) = -cos(b s + pi/2)`; the sign goes into the coefficient.
    fn sin_parts(freq: f64) -> (f64, Self) {
        (-1.0, Factor { freq, quarter: 1, ..Factor::ONE })
    }

    /// Normalise; returns the sign/scale to fold into the coefficient, or
    /// `None` when the factor vanishes identically.
    fn normalized(mut self, mut quarter: i32) -> Option<(f64, Factor)> {
        let mut sign = 1.0;
        if self.freq < 0.0 {
            self.freq = -self.freq;
            quarter = -quarter;
        }
        quarter = quarter.rem_euclid(4);
        if quarter >= 2 {
            sign = -sign;
            quarter -= 2;
        }
        if self.freq == 0.0 {
            if quarter == 1 {
                return None;
            }
            quarter = 0;
        }
        self.quarter = quarter as u8;
        Some((sign, self))
    }

    pub fn eval(&self, s: f64) -> f64 {
        let mut v = match self.pow {
            0 => 1.0,
            p => s.powi(p as i32),
        };
        if self.rate != 0.0 {
            v *= (self.rate * s).exp();
        }
        if self.freq != 0.0 {
            let arg = self.freq * s;
            v *= if self.quarter == 0 { arg.cos() } else { -arg.sin() };
        }
        v
    }

    /// Derivative as a list of (scale, factor) pairs.
    fn derivative(&self) -> Vec<(f64, Factor)> {
        let mut out = Vec::with_capacity(3);
        if self.pow > 0 {
            out.push((f64::from(self.pow), Factor { pow: self.pow - 1, ..*self }));
        }
        if self.rate != 0.0 {
            out.push((self.rate, *self));
        }
        if self.freq != 0.0 {
            if let Some((s, f)) = (*self).normalized(i32::from(self.quarter) + 1) {
                out.push((self.freq * s, f));
            }
        }
        out
    }

    fn product(&self, other: &Factor) -> Vec<(f64, Factor)> {
        let base = Factor {
            pow: self.pow + other.pow,
            rate: self.rate + other.rate,
            freq: 0.0,
            quarter: 0,
        };
        if self.freq == 0.0 || other.freq == 0.0 {
            let (freq, quarter) = if self.freq == 0.0 {
                (other.freq, other.quarter)
            } else {
                (self.freq, self.quarter)
            };
            return Factor { freq, ..base }
                .normalized(i32::from(quarter))
                .into_iter()
                .collect();
        }
        // cos A cos B = (cos(A - B) + cos(A + B)) / 2
        let qa = i32::from(self.quarter);
        let qb = i32::from(other.quarter);
        let mut out = Vec::with_capacity(2);
        for (freq, quarter) in [(self.freq - other.freq, qa - qb), (self.freq + other.freq, qa + qb)] {
            if let Some((s, f)) = (Factor { freq, ..base }).normalized(quarter) {
                out.push((0.5 * s, f));
            }
        }
        out
    }

    fn same_shape(&self, other: &Factor) -> bool {
        self.pow == other.pow
            && self.rate.to_bits() == other.rate.to_bits()
            && self.freq.to_bits() == other.freq.to_bits()
            && self.quarter == other.quarter
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: [Factor; 3],
}

impl Term {
    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.coef * self.factors[0].eval(x.x) * self.factors[1].eval(x.y) * self.factors[2].eval(x.z)
    }

    fn same_shape(&self, other: &Term) -> bool {
        (0..3).all(|d| self.factors[d].same_shape(&other.factors[d]))
    }
}

/// A sum of separable terms.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    pub fn zero() -> Self {
        Expr { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        Expr::from_term(c, [Factor::ONE; 3])
    }

    pub fn from_term(coef: f64, factors: [Factor; 3]) -> Self {
        let mut e = Expr::zero();
        e.push(Term { coef, factors });
        e
    }

    /// The coordinate `x_axis`.
    pub fn coord(axis: usize) -> Self {
        let mut f = [Factor::ONE; 3];
        f[axis] = Factor::monomial(1);
        Expr::from_term(1.0, f)
    }

    /// `x^i y^j z^k`.
    pub fn monomial(powers: [u32; 3]) -> Self {
        Expr::from_term(1.0, powers.map(Factor::monomial))
    }

    /// `cos(freq * x_axis)`.
    pub fn cos(axis: usize, freq: f64) -> Self {
        let mut f = [Factor::ONE; 3];
        match Factor::cos(freq).normalized(0) {
            Some((s, fac)) => {
                f[axis] = fac;
                Expr::from_term(s, f)
            }
            None => Expr::zero(),
        }
    }

    /// `sin(freq * x_axis)`.
    pub fn sin(axis: usize, freq: f64) -> Self {
        let (s0, fac) = Factor::sin_parts(freq);
        let mut f = [Factor::ONE; 3];
        match fac.normalized(1) {
            Some((s, fac)) => {
                f[axis] = fac;
                Expr::from_term(s0 * s, f)
            }
            None => Expr::zero(),
        }
    }

    /// `exp(rate * x_axis)`.
    pub fn exp(axis: usize, rate: f64) -> Self {
        let mut f = [Factor::ONE; 3];
        f[axis] = Factor::exp(rate);
        Expr::from_term(1.0, f)
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    fn push(&mut self, term: Term) {
        if term.coef == 0.0 {
            return;
        }
        if let Some(pos) = self.terms.iter().position(|t| t.same_shape(&term)) {
            let c = self.terms[pos].coef + term.coef;
            if c == 0.0 {
                self.terms.swap_remove(pos);
            } else {
                self.terms[pos].coef = c;
            }
        } else {
            self.terms.push(term);
        }
    }

    pub fn eval(&self, x: &Vector3<f64>) -> f64 {
        self.terms.iter().map(|t| t.eval(x)).sum()
    }

    pub fn scale(&self, c: f64) -> Expr {
        if c == 0.0 {
            return Expr::zero();
        }
        Expr { terms: self.terms.iter().map(|t| Term { coef: t.coef * c, ..*t }).collect() }
    }

    /// Partial derivative along `axis`.
    pub fn diff(&self, axis: usize) -> Expr {
        let mut out = Expr::zero();
        for t in &self.terms {
            for (s, f) in t.factors[axis].derivative() {
                let mut factors = t.factors;
                factors[axis] = f;
                out.push(Term { coef: t.coef * s, factors });
            }
        }
        out
    }

    /// Mixed partial `d^alpha` for a multi-index `alpha`.
    pub fn diff_multi(&self, alpha: [usize; 3]) -> Expr {
        let mut out = self.clone();
        for (axis, &k) in alpha.iter().enumerate() {
            for _ in 0..k {
                out = out.diff(axis);
            }
        }
        out
    }

    pub fn gradient(&self) -> [Expr; 3] {
        [self.diff(0), self.diff(1), self.diff(2)]
    }

    /// Largest total polynomial degree over all terms.
    pub fn max_poly_degree(&self) -> u32 {
        self.terms.iter().map(|t| t.factors.iter().map(|f| f.pow).sum()).max().unwrap_or(0)
    }
}

impl Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        let mut out = self.clone();
        for t in &rhs.terms {
            out.push(*t);
        }
        out
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        &self + &rhs
    }
}

impl Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        self + &rhs.scale(-1.0)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        &self - &rhs
    }
}

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self.scale(-1.0)
    }
}

impl Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        let mut out = Expr::zero();
        for a in &self.terms {
            for b in &rhs.terms {
                let px = a.factors[0].product(&b.factors[0]);
                let py = a.factors[1].product(&b.factors[1]);
                let pz = a.factors[2].product(&b.factors[2]);
                for (sx, fx) in &px {
                    for (sy, fy) in &py {
                        for (sz, fz) in &pz {
                            out.push(Term { coef: a.coef * b.coef * sx * sy * sz, factors: [*fx, *fy, *fz] });
                        }
                    }
                }
            }
        }
        out
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        &self * &rhs
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        const VARS: [&str; 3] = ["x", "y", "z"];
        for (i, t) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, " + ")?;
            }
            write!(f, "{}", t.coef)?;
            for (d, fac) in t.factors.iter().enumerate() {
                let v = VARS[d];
                if fac.pow > 0 {
                    write!(f, "*{v}^{}", fac.pow)?;
                }
                if fac.rate != 0.0 {
                    write!(f, "*exp({}{v})", fac.rate)?;
                }
                if fac.freq != 0.0 {
                    if fac.quarter == 0 {
                        write!(f, "*cos({}{v})", fac.freq)?;
                    } else {
                        write!(f, "*(-sin({}{v}))", fac.freq)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Angle offset in radians of a quarter-turn index; exposed for tests.
pub fn quarter_angle(q: u8) -> f64 {
    f64::from(q) * FRAC_PI_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(x: f64, y: f64, z: f64) -> Vector3<f64> {
        Vector3::new(x, y, z)
    }

    #[test]
    fn trig_derivatives() {
        let s = Expr::sin(2, 1.0);
        let c = Expr::cos(2, 1.0);
        let x = p(0.1, 0.2, 0.7);
        assert!((s.eval(&x) - 0.7f64.sin()).abs() < 1e-16);
        assert!((s.diff(2).eval(&x) - 0.7f64.cos()).abs() < 1e-16);
        assert!((c.diff(2).eval(&x) + 0.7f64.sin()).abs() < 1e-16);
        // d^2/dz^2 sin z = -sin z exactly, merged into one term
        let dd = s.diff(2).diff(2);
        assert_eq!(dd.terms().len(), 1);
        assert_eq!((&dd + &s), Expr::zero());
    }

    #[test]
    fn products_of_trig_factors() {
        // sin^2 + cos^2 = 1 exactly
        let s = Expr::sin(0, 3.0);
        let c = Expr::cos(0, 3.0);
        let one = &(&s * &s) + &(&c * &c);
        assert_eq!(one, Expr::constant(1.0));
    }

    #[test]
    fn polynomial_algebra() {
        let r2 = &(&Expr::monomial([2, 0, 0]) + &Expr::monomial([0, 2, 0])) + &Expr::monomial([0, 0, 2]);
        let g = r2.gradient();
        let x = p(0.3, -0.4, 0.5);
        assert_eq!(g[0].eval(&x), 0.6);
        assert_eq!(g[2].eval(&x), 1.0);
        assert_eq!(r2.max_poly_degree(), 2);
        let sq = &r2 * &r2;
        assert!((sq.eval(&x) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn vanishing_constant_sine_is_dropped() {
        assert!(Expr::sin(1, 0.0).is_zero());
        assert_eq!(Expr::cos(1, 0.0), Expr::constant(1.0));
    }

    proptest! {
        #[test]
        fn derivative_matches_finite_difference(
            pow in 0u32..4, rate in -1.0f64..1.0, freq in -3.0f64..3.0, q in 0i32..4,
            s in -1.0f64..1.0,
        ) {
            if let Some((sign, f)) = (Factor { pow, rate, freq, quarter: 0 }).normalized(q) {
                let e = Expr::from_term(sign, [f, Factor::ONE, Factor::ONE]);
                let h = 1e-5;
                let fd = (e.eval(&p(s + h, 0.0, 0.0)) - e.eval(&p(s - h, 0.0, 0.0))) / (2.0 * h);
                let exact = e.diff(0).eval(&p(s, 0.0, 0.0));
                prop_assert!((fd - exact).abs() < 1e-7 * (1.0 + exact.abs()));
                // the normalised factor evaluates to the raw definition
                let raw = s.powi(pow as i32) * (rate * s).exp()
                    * (freq * s + quarter_angle(q.rem_euclid(4) as u8)).cos();
                prop_assert!((e.eval(&p(s, 0.0, 0.0)) - raw).abs() < 1e-12);
            }
        }

        #[test]
        fn product_rule_holds(a in -2.0f64..2.0, b in -2.0f64..2.0, s in -1.0f64..1.0) {
            let f = &Expr::cos(2, a) + &Expr::monomial([0, 0, 2]);
            let g = &Expr::sin(2, b) * &Expr::exp(2, 0.5);
            let lhs = (&f * &g).diff(2);
            let rhs = &(&f.diff(2) * &g) + &(&f * &g.diff(2));
            let x = p(0.0, 0.0, s);
            prop_assert!((lhs.eval(&x) - rhs.eval(&x)).abs() < 1e-12);
        }
    }
}
