//! Polynomial-times-gaussian functions `P(x) exp(q0 + q1 x + q2 x^2)`.
//!
//! This class is closed under products, differentiation and the Fourier
//! transform, which makes it the closed-form test-function catalog.

use crate::error::{Error, Result};
use crate::taylor::Taylor;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussPoly {
    /// Ascending polynomial coefficients.
    pub poly: Vec<Complex64>,
    /// Exponent coefficients `[q0, q1, q2]`, with `Re q2 < 0`.
    pub q: [Complex64; 3],
}

fn poly_mul(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_derivative(a: &[Complex64]) -> Vec<Complex64> {
    a.iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| c * j as f64)
        .collect()
}

fn poly_add(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|j| a.get(j).copied().unwrap_or(ZERO) + b.get(j).copied().unwrap_or(ZERO))
        .collect()
}

pub(crate) fn poly_eval(a: &[Complex64], x: Complex64) -> Complex64 {
    a.iter().rev().fold(ZERO, |acc, c| acc * x + c)
}

impl GaussPoly {
    pub fn new(poly: Vec<Complex64>, q: [Complex64; 3]) -> Result<Self> {
        if !(q[2].re < 0.0) {
            return Err(Error::InvalidExpr(format!(
                "gaussian exponent needs Re q2 < 0, got {}",
                q[2]
            )));
        }
        if poly
            .iter()
            .chain(q.iter())
            .any(|c| !c.re.is_finite() || !c.im.is_finite())
        {
            return Err(Error::InvalidExpr("non-finite coefficient".into()));
        }
        Ok(GaussPoly { poly, q })
    }

    /// `exp(-(x - c)^2 / w^2)`.
    pub fn gaussian(center: f64, width: f64) -> Self {
        let a = 1.0 / (width * width);
        GaussPoly {
            poly: vec![Complex64::new(1.0, 0.0)],
            q: [
                Complex64::new(-a * center * center, 0.0),
                Complex64::new(2.0 * a * center, 0.0),
                Complex64::new(-a, 0.0),
            ],
        }
    }

    pub fn with_poly(mut self, poly: Vec<Complex64>) -> Self {
        self.poly = poly_mul(&self.poly, &poly);
        self
    }

    pub fn with_real_poly(self, poly: &[f64]) -> Self {
        self.with_poly(poly.iter().map(|c| Complex64::new(*c, 0.0)).collect())
    }

    /// Multiplies by `exp(i k x)`.
    pub fn modulate(mut self, k: f64) -> Self {
        self.q[1] += Complex64::new(0.0, k);
        self
    }

    pub fn scale(mut self, s: Complex64) -> Self {
        for c in self.poly.iter_mut() {
            *c *= s;
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.poly.iter().all(|c| *c == ZERO)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        let xc = Complex64::new(x, 0.0);
        poly_eval(&self.poly, xc) * (self.q[0] + self.q[1] * x + self.q[2] * x * x).exp()
    }

    pub fn taylor(&self, x: f64, order: usize) -> Taylor {
        let e = Taylor::polynomial(&self.q, x, order).exp();
        &Taylor::polynomial(&self.poly, x, order) * &e
    }

    pub fn derivative(&self) -> Self {
        let dq = [self.q[1], self.q[2] * 2.0];
        GaussPoly {
            poly: poly_add(&poly_derivative(&self.poly), &poly_mul(&self.poly, &dq)),
            q: self.q,
        }
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |acc, _| acc.derivative())
    }

    pub fn mul(&self, other: &GaussPoly) -> GaussPoly {
        GaussPoly {
            poly: poly_mul(&self.poly, &other.poly),
            q: [
                self.q[0] + other.q[0],
                self.q[1] + other.q[1],
                self.q[2] + other.q[2],
            ],
        }
    }

    pub fn mul_poly(&self, p: &[Complex64]) -> GaussPoly {
        GaussPoly {
            poly: poly_mul(&self.poly, p),
            q: self.q,
        }
    }

    /// Fourier transform `xi -> int exp(-i x xi) f(x) dx`, again of this class.
    pub fn fourier(&self) -> GaussPoly {
        let [q0, q1, q2] = self.q;
        let pi = Complex64::new(std::f64::consts::PI, 0.0);
        let c = (pi / (-q2)).sqrt();
        let big_q = [
            q0 - q1 * q1 / (q2 * 4.0),
            Complex64::new(0.0, 1.0) * q1 / (q2 * 2.0),
            1.0 / (q2 * 4.0),
        ];
        let dq = [big_q[1], big_q[2] * 2.0];
        let i = Complex64::new(0.0, 1.0);
        let mut r = vec![c];
        let mut poly = vec![ZERO];
        for (j, p) in self.poly.iter().enumerate() {
            if j > 0 {
                r = poly_add(&poly_derivative(&r), &poly_mul(&r, &dq))
                    .into_iter()
                    .map(|z| z * i)
                    .collect();
            }
            poly = poly_add(&poly, &r.iter().map(|z| z * p).collect::<Vec<_>>());
        }
        GaussPoly { poly, q: big_q }
    }

    pub fn integral(&self) -> Complex64 {
        self.fourier().eval(0.0)
    }

    fn envelope(&self, x: f64, weight: f64) -> f64 {
        let p: f64 = self
            .poly
            .iter()
            .enumerate()
            .map(|(j, c)| c.norm() * x.abs().powi(j as i32))
            .sum();
        let re_q = self.q[0].re + self.q[1].re * x + self.q[2].re * x * x;
        p * (1.0 + x * x).powf(0.5 * weight) * re_q.exp()
    }

    /// Radius beyond which `<x>^weight |f|` stays below `tol` times its peak.
    pub fn decay_radius(&self, weight: f64, tol: f64) -> f64 {
        let vertex = -self.q[1].re / (2.0 * self.q[2].re);
        let step = 0.125;
        let mut peak = 0.0f64;
        let mut r = vertex.abs() + step;
        let mut k = 0usize;
        loop {
            let lo = self.envelope(vertex - k as f64 * step, weight);
            let hi = self.envelope(vertex + k as f64 * step, weight);
            peak = peak.max(lo).max(hi);
            let x = k as f64 * step;
            let slope_ok = self.q[2].re * x * x.abs() < -(weight + self.poly.len() as f64 + 1.0);
            if peak > 0.0 && lo.max(hi) < tol * peak && slope_ok {
                r = r.max(vertex.abs() + x);
                break;
            }
            if peak == 0.0 && k > 8 {
                break;
            }
            k += 1;
            if k > 100_000 {
                r = vertex.abs() + x;
                break;
            }
        }
        r
    }
}

/// Version tag of [`test_family`].
pub const TEST_FAMILY_VERSION: &str = "tf-v1";

/// Fixed ten-member family of Schwartz test functions.
pub fn test_family() -> Vec<GaussPoly> {
    vec![
        GaussPoly::gaussian(0.0, 1.0),
        GaussPoly::gaussian(1.0, 2f64.sqrt()),
        GaussPoly::gaussian(0.0, 2f64.sqrt()).with_real_poly(&[0.0, 1.0]),
        GaussPoly::gaussian(0.0, 2f64.sqrt()).modulate(2.0),
        GaussPoly::gaussian(0.0, 1.0).with_real_poly(&[1.0, 0.0, -2.0]),
        GaussPoly::gaussian(-2.0, 1.0).modulate(-1.0),
        GaussPoly::gaussian(0.0, 8f64.sqrt()),
        GaussPoly::gaussian(0.0, 3f64.sqrt()).with_real_poly(&[0.0, 0.0, 1.0]),
        GaussPoly::gaussian(0.0, 0.5),
        GaussPoly::gaussian(0.5, 2f64.sqrt())
            .with_real_poly(&[0.0, -1.0, 0.0, 1.0])
            .modulate(0.5),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn sample() -> GaussPoly {
        GaussPoly::gaussian(0.3, 1.2)
            .with_poly(vec![c(1.0), Complex64::new(0.5, -0.2), c(-0.7)])
            .modulate(1.5)
    }

    #[test]
    fn fourier_matches_quadrature() {
        let f = sample();
        let fh = f.fourier();
        for xi in [-2.0, 0.0, 0.7, 3.1] {
            let (v, _) = integrate(
                |x| f.eval(x) * Complex64::new(0.0, -x * xi).exp(),
                -20.0,
                20.0,
                &[],
                QuadOptions::new(1e-14, 1e-13),
            )
            .unwrap();
            assert!(
                (v - fh.eval(xi)).norm() < 1e-11,
                "xi={xi} {v} {}",
                fh.eval(xi)
            );
        }
    }

    #[test]
    fn derivative_matches_taylor() {
        let f = sample();
        let t = f.taylor(0.4, 3);
        let d = f.nth_derivative(3).eval(0.4);
        assert!((t.derivative(3) - d).norm() < 1e-12);
        assert!((t.value() - f.eval(0.4)).norm() < 1e-14);
    }

    #[test]
    fn gaussian_integral() {
        let g = GaussPoly::gaussian(0.0, 1.0);
        assert!((g.integral() - c(std::f64::consts::PI.sqrt())).norm() < 1e-14);
    }

    #[test]
    fn decay_radius_bounds_tail() {
        let f = GaussPoly::gaussian(1.0, 1.0).with_real_poly(&[0.0, 0.0, 1.0]);
        let r = f.decay_radius(3.0, 1e-14);
        let peak = (0..400)
            .map(|k| f.eval(-5.0 + k as f64 * 0.025).norm())
            .fold(0.0, f64::max);
        for x in [r, r + 1.0, -r, -r - 2.0] {
            assert!(f.eval(x).norm() * (1.0 + x * x).powf(1.5) < 1e-13 * peak);
        }
        assert!(r < 12.0);
    }

    #[test]
    fn rejects_growing_exponent() {
        assert!(GaussPoly::new(vec![c(1.0)], [c(0.0), c(0.0), c(0.1)]).is_err());
    }
}
