//! Kernels `psi`, cutoffs `phi` and the smooth step they are built from.

use super::flat_table::FlatTable;
use crate::error::Result;
use crate::taylor::Taylor;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const FLAT_EDGE: f64 = 1.0 / 700.0;

fn f_exp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// `s(t) = f(t) / (f(t) + f(1 - t))` with `f(t) = exp(-1/t)` for `t > 0`.
/// Equal to 0 for `t <= 0` and 1 for `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = f_exp(t);
        let b = f_exp(1.0 - t);
        a / (a + b)
    }
}

/// Jet of `s(w(x))` given the jet of `w`.
pub fn smooth_step_jet(w: &Taylor) -> Taylor {
    let order = w.order();
    let w0 = w.value().re;
    if w0 <= FLAT_EDGE {
        return Taylor::zero(order);
    }
    if w0 >= 1.0 - FLAT_EDGE {
        return Taylor::constant(Complex64::new(1.0, 0.0), order);
    }
    let one = Taylor::constant(Complex64::new(1.0, 0.0), order);
    let fa = (-w.recip()).exp();
    let fb = (-(&one - w).recip()).exp();
    &fa * &(&fa + &fb).recip()
}

/// Even bump equal to 1 on `[-1, 1]`, supported in `[-2, 2]`.
pub fn flat_bump(t: f64) -> f64 {
    smooth_step(2.0 - t.abs())
}

/// `1 - flat_bump(t)` without cancellation.
pub fn flat_bump_complement(t: f64) -> f64 {
    smooth_step(t.abs() - 1.0)
}

fn folded_jet(t: f64, order: usize, offset: f64, sign: f64) -> Taylor {
    // jet of s(offset + sign * |x|) at x = t
    let x = Taylor::variable(t, order);
    let ax = if t >= 0.0 { x } else { -x };
    let c = Taylor::constant(Complex64::new(offset, 0.0), order);
    smooth_step_jet(&(&c + &ax.scale_re(sign)))
}

pub fn flat_bump_jet(t: f64, order: usize) -> Taylor {
    if t.abs() <= 1.0 {
        return Taylor::constant(Complex64::new(1.0, 0.0), order);
    }
    folded_jet(t, order, 2.0, -1.0)
}

pub fn flat_bump_complement_jet(t: f64, order: usize) -> Taylor {
    if t.abs() <= 1.0 {
        return Taylor::zero(order);
    }
    folded_jet(t, order, -1.0, 1.0)
}

/// Convolution kernel `psi` with unit mass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `pi^{-1/2} exp(-y^2)`, Fourier transform `exp(-xi^2/4)`.
    Gaussian,
    /// Inverse Fourier transform of the flat bump.
    Flat,
}

/// Cutoff `phi` with `phi(0) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// `exp(-x^2)`.
    Gaussian,
    /// The flat bump.
    Flat,
}

fn double_factorial_odd(k: usize) -> f64 {
    // (2k - 1)!!
    (1..=k).fold(1.0, |acc, i| acc * (2 * i - 1) as f64)
}

impl KernelKind {
    /// Jet of `psi` at `y`.
    pub fn jet(self, y: f64, order: usize) -> Result<Taylor> {
        match self {
            KernelKind::Gaussian => {
                let v = Taylor::variable(y, order);
                Ok((-(&v * &v)).exp().scale_re(1.0 / PI.sqrt()))
            }
            KernelKind::Flat => FlatTable::global()?.psi_jet(y, order),
        }
    }

    pub fn value(self, y: f64) -> Result<f64> {
        match self {
            KernelKind::Gaussian => Ok((-y * y).exp() / PI.sqrt()),
            KernelKind::Flat => Ok(FlatTable::global()?.psi_jet(y, 0)?.value().re),
        }
    }

    /// Jet of the primitive `Psi(y) = int_{-inf}^y psi`.
    pub fn primitive_jet(self, y: f64, order: usize) -> Result<Taylor> {
        match self {
            KernelKind::Gaussian => {
                let mut t = if order > 0 {
                    let inner = self.jet(y, order - 1)?;
                    let mut c = vec![Complex64::new(0.0, 0.0); order + 1];
                    for (j, v) in inner.0.iter().enumerate() {
                        c[j + 1] = v / (j + 1) as f64;
                    }
                    Taylor(c)
                } else {
                    Taylor::zero(0)
                };
                t.0[0] = Complex64::new(0.5 * statrs::function::erf::erfc(-y), 0.0);
                Ok(t)
            }
            KernelKind::Flat => FlatTable::global()?.primitive_jet(y, order),
        }
    }

    /// Fourier transform of `psi`, real and even.
    pub fn fourier(self, xi: f64) -> f64 {
        match self {
            KernelKind::Gaussian => (-0.25 * xi * xi).exp(),
            KernelKind::Flat => flat_bump(xi),
        }
    }

    /// `1 - fourier(xi)` without cancellation.
    pub fn fourier_complement(self, xi: f64) -> f64 {
        match self {
            KernelKind::Gaussian => -(-0.25 * xi * xi).exp_m1(),
            KernelKind::Flat => flat_bump_complement(xi),
        }
    }

    /// Jet of the Fourier transform at `xi`.
    pub fn fourier_jet(self, xi: f64, order: usize) -> Taylor {
        match self {
            KernelKind::Gaussian => {
                let v = Taylor::variable(xi, order);
                (&v * &v).scale_re(-0.25).exp()
            }
            KernelKind::Flat => flat_bump_jet(xi, order),
        }
    }

    /// Support of the Fourier transform, if compact.
    pub fn band(self) -> Option<f64> {
        match self {
            KernelKind::Gaussian => None,
            KernelKind::Flat => Some(2.0),
        }
    }

    /// Radius outside which `psi` and its derivatives are treated as zero.
    pub fn support_radius(self) -> f64 {
        match self {
            KernelKind::Gaussian => 7.0,
            KernelKind::Flat => super::flat_table::TABLE_RADIUS,
        }
    }

    /// Exact moment `int y^j psi(y) dy`.
    pub fn moment(self, j: usize) -> f64 {
        match self {
            KernelKind::Gaussian => {
                if j % 2 == 1 {
                    0.0
                } else {
                    double_factorial_odd(j / 2) / 2f64.powi((j / 2) as i32)
                }
            }
            KernelKind::Flat => {
                if j == 0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl CutoffKind {
    pub fn value(self, t: f64) -> f64 {
        match self {
            CutoffKind::Gaussian => (-t * t).exp(),
            CutoffKind::Flat => flat_bump(t),
        }
    }

    pub fn jet(self, t: f64, order: usize) -> Taylor {
        match self {
            CutoffKind::Gaussian => {
                let v = Taylor::variable(t, order);
                (-(&v * &v)).exp()
            }
            CutoffKind::Flat => flat_bump_jet(t, order),
        }
    }

    /// Jet of `1 - phi`.
    pub fn complement_jet(self, t: f64, order: usize) -> Taylor {
        match self {
            CutoffKind::Gaussian => {
                let mut j = -self.jet(t, order);
                j.0[0] = Complex64::new(-(-t * t).exp_m1(), 0.0);
                j
            }
            CutoffKind::Flat => flat_bump_complement_jet(t, order),
        }
    }

    /// Radius outside which `phi` is zero (or below double precision).
    pub fn support_radius(self) -> f64 {
        match self {
            CutoffKind::Gaussian => 27.3,
            CutoffKind::Flat => 2.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_step_symmetry() {
        for t in [0.1, 0.3, 0.5, 0.77] {
            assert!((smooth_step(t) + smooth_step(1.0 - t) - 1.0).abs() < 1e-15);
        }
        assert_eq!(smooth_step(-0.2), 0.0);
        assert_eq!(smooth_step(1.2), 1.0);
    }

    #[test]
    fn bump_jet_matches_finite_differences() {
        let h = 1e-5;
        for t in [1.3, -1.6, 1.9] {
            let j = flat_bump_jet(t, 2);
            let fd = (flat_bump(t + h) - flat_bump(t - h)) / (2.0 * h);
            assert!((j.derivative(1).re - fd).abs() < 1e-8, "t={t}");
            assert!((j.value().re - flat_bump(t)).abs() < 1e-15);
            let c = flat_bump_complement_jet(t, 2);
            assert!((c.derivative(1).re + fd).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_primitive_is_half_at_zero() {
        let p = KernelKind::Gaussian.primitive_jet(0.0, 2).unwrap();
        assert!((p.value().re - 0.5).abs() < 1e-15);
        assert!((p.derivative(1).re - 1.0 / PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(KernelKind::Gaussian.moment(2), 0.5);
        assert_eq!(KernelKind::Gaussian.moment(4), 0.75);
        assert_eq!(KernelKind::Gaussian.moment(3), 0.0);
    }
}
