//! Second-order forward-mode jets.
//!
//! A [`Jet2`] carries a value together with its first and second derivative
//! with respect to the radial variable `t`. Arithmetic propagates both
//! derivatives with the product and chain rules, so evaluating an expression
//! on the seed `Jet2::variable(t)` yields `(f(t), f'(t), f''(t))` exactly up to
//! rounding.

use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jet2 {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Jet2 {
    pub const fn new(v: f64, d1: f64, d2: f64) -> Self {
        Self { v, d1, d2 }
    }

    pub const fn constant(v: f64) -> Self {
        Self::new(v, 0.0, 0.0)
    }

    /// The independent variable seeded at `t`.
    pub const fn variable(t: f64) -> Self {
        Self::new(t, 1.0, 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.d1.is_finite() && self.d2.is_finite()
    }

    /// Applies a scalar function given its value and first two derivatives at `self.v`.
    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        Self {
            v: f0,
            d1: f1 * self.d1,
            d2: f2 * self.d1 * self.d1 + f1 * self.d2,
        }
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    /// Natural log; the caller is responsible for `self.v > 0`.
    pub fn ln(self) -> Self {
        let inv = 1.0 / self.v;
        self.chain(self.v.ln(), inv, -inv * inv)
    }

    /// Square root; the caller is responsible for `self.v > 0`.
    pub fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        self.chain(s, 0.5 / s, -0.25 / (s * self.v))
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tanh(self) -> Self {
        let th = self.v.tanh();
        // sech² through cosh keeps relative precision once tanh rounds to ±1.
        let sech = 1.0 / self.v.cosh();
        let s2 = sech * sech;
        self.chain(th, s2, -2.0 * s2 * th)
    }

    pub fn atan(self) -> Self {
        let q = 1.0 / (1.0 + self.v * self.v);
        self.chain(self.v.atan(), q, -2.0 * self.v * q * q)
    }

    /// `self^p` for a constant exponent.
    pub fn powf(self, p: f64) -> Self {
        if p == 0.0 {
            return Self::constant(1.0);
        }
        if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
            let n = p as i32;
            let f0 = self.v.powi(n);
            let f1 = p * self.v.powi(n - 1);
            let f2 = if n == 1 {
                0.0
            } else {
                p * (p - 1.0) * self.v.powi(n - 2)
            };
            return self.chain(f0, f1, f2);
        }
        let f0 = self.v.powf(p);
        let f1 = p * self.v.powf(p - 1.0);
        let f2 = p * (p - 1.0) * self.v.powf(p - 2.0);
        self.chain(f0, f1, f2)
    }
}

impl Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)
    }
}

impl Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2::new(self.v - o.v, self.d1 - o.d1, self.d2 - o.d2)
    }
}

impl Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2::new(
            self.v * o.v,
            self.d1 * o.v + self.v * o.d1,
            self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2,
        )
    }
}

impl Div for Jet2 {
    type Output = Jet2;
    fn div(self, o: Jet2) -> Jet2 {
        let q = self.v / o.v;
        let d1 = (self.d1 - q * o.d1) / o.v;
        let d2 = (self.d2 - 2.0 * d1 * o.d1 - q * o.d2) / o.v;
        Jet2::new(q, d1, d2)
    }
}

impl Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        Jet2::new(-self.v, -self.d1, -self.d2)
    }
}
