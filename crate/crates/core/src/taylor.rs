//! Truncated Taylor series arithmetic.
//!
//! A [`Taylor`] value stores normalized coefficients `c_j = f^{(j)}(x0) / j!`
//! of a function around a point. Arithmetic on these jets gives exact
//! derivatives of composite closed-form functions without symbolic algebra.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq)]
pub struct Taylor(pub Vec<Complex64>);

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

impl Taylor {
    pub fn zero(order: usize) -> Self {
        Taylor(vec![Complex64::new(0.0, 0.0); order + 1])
    }

    pub fn constant(value: Complex64, order: usize) -> Self {
        let mut t = Self::zero(order);
        t.0[0] = value;
        t
    }

    /// The identity function expanded at `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut t = Self::constant(Complex64::new(x0, 0.0), order);
        if order >= 1 {
            t.0[1] = Complex64::new(1.0, 0.0);
        }
        t
    }

    pub fn from_derivatives(derivs: &[Complex64]) -> Self {
        Taylor(
            derivs
                .iter()
                .enumerate()
                .map(|(j, d)| d / factorial(j))
                .collect(),
        )
    }

    pub fn order(&self) -> usize {
        self.0.len() - 1
    }

    pub fn value(&self) -> Complex64 {
        self.0[0]
    }

    /// `f^{(j)}(x0)` for `j = 0..=order`.
    pub fn derivatives(&self) -> Vec<Complex64> {
        self.0
            .iter()
            .enumerate()
            .map(|(j, c)| c * factorial(j))
            .collect()
    }

    pub fn derivative(&self, j: usize) -> Complex64 {
        self.0[j] * factorial(j)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Taylor(self.0[..=order.min(self.order())].to_vec())
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Taylor(self.0.iter().map(|c| c * s).collect())
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Taylor(self.0.iter().map(|c| c * s).collect())
    }

    /// Coefficients of `x -> f(alpha * x)` given the expansion of `f` at `alpha * x0`.
    pub fn chain_linear(&self, alpha: f64) -> Self {
        let mut p = 1.0;
        Taylor(
            self.0
                .iter()
                .map(|c| {
                    let out = c * p;
                    p *= alpha;
                    out
                })
                .collect(),
        )
    }

    /// Expansion of `f'` (one order lower).
    pub fn differentiate(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        Taylor((1..self.0.len()).map(|j| self.0[j] * j as f64).collect())
    }

    /// Expansion of `f` shifted by `k` derivative orders, padded to `order`.
    pub fn shift_derivative(&self, k: usize, order: usize) -> Self {
        let mut t = self.clone();
        for _ in 0..k {
            t = t.differentiate();
        }
        let mut out = Self::zero(order);
        for (j, c) in t.0.iter().enumerate().take(order + 1) {
            out.0[j] = *c;
        }
        out
    }

    pub fn recip(&self) -> Self {
        let n = self.0.len();
        let a0 = self.0[0];
        let inv = Complex64::new(1.0, 0.0) / a0;
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        b[0] = inv;
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.0[j] * b[k - j];
            }
            b[k] = -s * inv;
        }
        Taylor(b)
    }

    pub fn exp(&self) -> Self {
        let n = self.0.len();
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[0] = self.0[0].exp();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.0[j] * e[k - j] * j as f64;
            }
            e[k] = s / k as f64;
        }
        Taylor(e)
    }

    pub fn ln(&self) -> Self {
        let n = self.0.len();
        let a0 = self.0[0];
        let mut l = vec![Complex64::new(0.0, 0.0); n];
        l[0] = a0.ln();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..k {
                s += l[j] * self.0[k - j] * j as f64;
            }
            l[k] = (self.0[k] - s / k as f64) / a0;
        }
        Taylor(l)
    }

    /// `f^p`, requires a nonzero constant term.
    pub fn powf(&self, p: f64) -> Self {
        self.ln().scale_re(p).exp()
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut out = Self::constant(Complex64::new(1.0, 0.0), self.order());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn sin(&self) -> Self {
        let i = Complex64::new(0.0, 1.0);
        let a = self.scale(i).exp();
        let b = self.scale(-i).exp();
        (&a - &b).scale(Complex64::new(0.0, -0.5))
    }

    pub fn cos(&self) -> Self {
        let i = Complex64::new(0.0, 1.0);
        let a = self.scale(i).exp();
        let b = self.scale(-i).exp();
        (&a + &b).scale_re(0.5)
    }

    /// Evaluates the truncated series at offset `h` from the expansion point.
    pub fn eval_offset(&self, h: f64) -> Complex64 {
        self.0
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * h + c)
    }

    /// Polynomial with the given ascending coefficients, expanded at `x0`.
    pub fn polynomial(coeffs: &[Complex64], x0: f64, order: usize) -> Self {
        let x = Self::variable(x0, order);
        let mut out = Self::zero(order);
        for c in coeffs.iter().rev() {
            out = &(&out * &x) + &Self::constant(*c, order);
        }
        out
    }
}

impl<'a> Add<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn add(self, rhs: &Taylor) -> Taylor {
        let n = self.0.len().min(rhs.0.len());
        Taylor((0..n).map(|j| self.0[j] + rhs.0[j]).collect())
    }
}

impl<'a> Sub<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn sub(self, rhs: &Taylor) -> Taylor {
        let n = self.0.len().min(rhs.0.len());
        Taylor((0..n).map(|j| self.0[j] - rhs.0[j]).collect())
    }
}

impl<'a> Mul<&'a Taylor> for &'a Taylor {
    type Output = Taylor;
    fn mul(self, rhs: &Taylor) -> Taylor {
        let n = self.0.len().min(rhs.0.len());
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for (i, a) in self.0.iter().enumerate().take(n) {
            if *a == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in rhs.0.iter().enumerate().take(n - i) {
                out[i + j] += a * b;
            }
        }
        Taylor(out)
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        Taylor(self.0.into_iter().map(|c| -c).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn exp_of_variable_gives_exp_derivatives() {
        let t = Taylor::variable(0.3, 6).exp();
        for d in t.derivatives() {
            assert!((d - c(0.3f64.exp())).norm() < 1e-14);
        }
    }

    #[test]
    fn recip_and_ln_agree_with_closed_forms() {
        // 1 / (1 + x^2) at x0 = 0.5: derivative 1 is -2x/(1+x^2)^2
        let x = Taylor::variable(0.5, 4);
        let one = Taylor::constant(c(1.0), 4);
        let r = (&one + &(&x * &x)).recip();
        assert!((r.derivative(1) - c(-1.0 / (1.25 * 1.25))).norm() < 1e-14);
        let l = x.ln();
        // d^3/dx^3 ln x = 2 / x^3
        assert!((l.derivative(3) - c(2.0 / 0.125)).norm() < 1e-12);
    }

    #[test]
    fn sin_cos_derivatives_cycle() {
        let s = Taylor::variable(1.1, 5).sin();
        let expected = [1.1f64.sin(), 1.1f64.cos(), -1.1f64.sin(), -1.1f64.cos()];
        for (j, e) in expected.iter().enumerate() {
            assert!((s.derivative(j) - c(*e)).norm() < 1e-13);
        }
    }

    #[test]
    fn powf_matches_power_rule() {
        let x = Taylor::variable(2.0, 3);
        let p = x.powf(-1.5);
        assert!((p.derivative(1) - c(-1.5 * 2f64.powf(-2.5))).norm() < 1e-14);
        assert!((p.derivative(2) - c(-1.5 * -2.5 * 2f64.powf(-3.5))).norm() < 1e-14);
    }
}
