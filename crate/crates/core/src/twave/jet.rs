//! Truncated Taylor series to third order, for exact derivatives of the
//! closed-form profile relation.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// `v[0] + v[1] h + v[2] h^2 + v[3] h^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; 4]);

impl Jet {
    pub fn constant(c: f64) -> Self {
        Jet([c, 0.0, 0.0, 0.0])
    }

    /// The independent variable at `x`.
    #[cfg(test)]
    pub fn variable(x: f64) -> Self {
        Jet([x, 1.0, 0.0, 0.0])
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// `k`-th derivative.
    pub fn derivative(&self, k: usize) -> f64 {
        const FACT: [f64; 4] = [1.0, 1.0, 2.0, 6.0];
        self.0[k] * FACT[k]
    }

    pub fn scale(self, c: f64) -> Self {
        Jet(self.0.map(|v| v * c))
    }

    pub fn sqrt(self) -> Self {
        let a = self.0;
        let mut r = [0.0; 4];
        r[0] = a[0].sqrt();
        for k in 1..4 {
            let cross: f64 = (1..k).map(|j| r[j] * r[k - j]).sum();
            r[k] = (a[k] - cross) / (2.0 * r[0]);
        }
        Jet(r)
    }

    pub fn ln(self) -> Self {
        let a = self.0;
        let mut r = [0.0; 4];
        r[0] = a[0].ln();
        for k in 1..4 {
            let cross: f64 = (1..k).map(|j| j as f64 * r[j] * a[k - j]).sum();
            r[k] = (a[k] - cross / k as f64) / a[0];
        }
        Jet(r)
    }

    pub fn asinh(self) -> Self {
        (self + (self * self + Jet::constant(1.0)).sqrt()).ln()
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        Jet([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2], self.0[3] + o.0[3]])
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
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
    fn mul(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        let mut r = [0.0; 4];
        for k in 0..4 {
            r[k] = (0..=k).map(|j| a[j] * b[k - j]).sum();
        }
        Jet(r)
    }
}

impl Div for Jet {
    type Output = Jet;
    fn div(self, o: Jet) -> Jet {
        let (a, b) = (self.0, o.0);
        let mut r = [0.0; 4];
        for k in 0..4 {
            let cross: f64 = (0..k).map(|j| r[j] * b[k - j]).sum();
            r[k] = (a[k] - cross) / b[0];
        }
        Jet(r)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, c: f64) -> Jet {
        self + Jet::constant(c)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self - Jet::constant(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_a_composite() {
        // f(x) = ln(x + sqrt(x^2 + 1)) / x at x = 0.7
        let x = Jet::variable(0.7);
        let f = x.asinh() / x;
        let h = 1e-3;
        let g = |t: f64| t.asinh() / t;
        let d1 = (g(0.7 + h) - g(0.7 - h)) / (2.0 * h);
        let d2 = (g(0.7 + h) - 2.0 * g(0.7) + g(0.7 - h)) / (h * h);
        let d3 = (g(0.7 + 2.0 * h) - 2.0 * g(0.7 + h) + 2.0 * g(0.7 - h) - g(0.7 - 2.0 * h)) / (2.0 * h * h * h);
        assert!((f.derivative(1) - d1).abs() < 1e-6);
        assert!((f.derivative(2) - d2).abs() < 1e-5);
        assert!((f.derivative(3) - d3).abs() < 1e-3);
    }

    #[test]
    fn sqrt_squares_back() {
        let x = Jet::variable(2.0);
        let s = (x * x + 1.0).sqrt();
        let back = s * s;
        let expected = x * x + 1.0;
        for k in 0..4 {
            assert!((back.0[k] - expected.0[k]).abs() < 1e-14);
        }
    }
}
