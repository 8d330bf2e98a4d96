//! Pointwise-evaluable smooth functions with exact derivatives.

use crate::dist_catalog::CatalogSmooth;
use crate::error::{Error, Result};
use crate::gausspoly::GaussPoly;
use crate::grid_field::{Field, Grid};
use crate::mollifier::{CutoffKind, KernelKind};
use crate::quad::{integrate, integrate_vec, QuadOptions};
use crate::taylor::Taylor;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default highest derivative order a regularized function must provide.
pub const DEFAULT_MAX_ORDER: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum SmoothFunction {
    Zero,
    Constant(Complex64),
    Polynomial(Vec<Complex64>),
    Catalog(CatalogSmooth),
    GaussPoly(GaussPoly),
    /// `x^x_power <x>^exponent`.
    Bracket {
        x_power: u32,
        exponent: f64,
    },
    /// `width^{-1-order} psi^{(order)}((x - center) / width)`.
    KernelDerivative {
        kernel: KernelKind,
        order: u32,
        center: f64,
        width: f64,
    },
    /// `Psi((x - center) / width)` with `Psi' = psi`.
    KernelPrimitive {
        kernel: KernelKind,
        center: f64,
        width: f64,
    },
    /// `psi_width * func`.
    MollifiedCatalog {
        func: CatalogSmooth,
        kernel: KernelKind,
        width: f64,
    },
    /// `phi(scale x)`.
    Cutoff {
        cutoff: CutoffKind,
        scale: f64,
    },
    Scaled(Complex64, Box<SmoothFunction>),
    Sum(Vec<SmoothFunction>),
    Product(Box<SmoothFunction>, Box<SmoothFunction>),
    Derivative(u32, Box<SmoothFunction>),
}

/// A region where a function varies on a short scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feature {
    pub center: f64,
    pub width: f64,
}

fn conv_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-12,
        max_intervals: 50_000,
    }
}

impl SmoothFunction {
    pub fn constant(c: f64) -> Self {
        SmoothFunction::Constant(Complex64::new(c, 0.0))
    }

    pub fn scaled(self, s: Complex64) -> Self {
        SmoothFunction::Scaled(s, Box::new(self))
    }

    pub fn times(self, other: SmoothFunction) -> Self {
        SmoothFunction::Product(Box::new(self), Box::new(other))
    }

    pub fn plus(self, other: SmoothFunction) -> Self {
        SmoothFunction::Sum(vec![self, other])
    }

    pub fn derivative(self, order: u32) -> Self {
        if order == 0 {
            self
        } else {
            SmoothFunction::Derivative(order, Box::new(self))
        }
    }

    /// `<x>^s`.
    pub fn bracket(s: f64) -> Self {
        SmoothFunction::Bracket {
            x_power: 0,
            exponent: s,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SmoothFunction::Zero => true,
            SmoothFunction::Constant(c) => *c == ZERO,
            SmoothFunction::Polynomial(p) => p.iter().all(|c| *c == ZERO),
            SmoothFunction::Scaled(s, f) => *s == ZERO || f.is_zero(),
            SmoothFunction::Sum(t) => t.iter().all(|f| f.is_zero()),
            SmoothFunction::Product(a, b) => a.is_zero() || b.is_zero(),
            SmoothFunction::Derivative(_, f) => f.is_zero(),
            _ => false,
        }
    }

    /// Jet of the function at `x` up to `order`.
    pub fn taylor(&self, x: f64, order: usize) -> Result<Taylor> {
        Ok(match self {
            SmoothFunction::Zero => Taylor::zero(order),
            SmoothFunction::Constant(c) => Taylor::constant(*c, order),
            SmoothFunction::Polynomial(p) => Taylor::polynomial(p, x, order),
            SmoothFunction::Catalog(c) => c.taylor(x, order),
            SmoothFunction::GaussPoly(g) => g.taylor(x, order),
            SmoothFunction::Bracket { x_power, exponent } => {
                let v = Taylor::variable(x, order);
                let one = Taylor::constant(Complex64::new(1.0, 0.0), order);
                let b = (&one + &(&v * &v)).powf(0.5 * exponent);
                if *x_power == 0 {
                    b
                } else {
                    &v.powi(*x_power) * &b
                }
            }
            SmoothFunction::KernelDerivative {
                kernel,
                order: k,
                center,
                width,
            } => {
                let y = (x - center) / width;
                if y.abs() > kernel.support_radius() {
                    return Ok(Taylor::zero(order));
                }
                let k = *k as usize;
                kernel
                    .jet(y, order + k)?
                    .shift_derivative(k, order)
                    .chain_linear(1.0 / width)
                    .scale_re(width.powi(-1 - k as i32))
            }
            SmoothFunction::KernelPrimitive {
                kernel,
                center,
                width,
            } => kernel
                .primitive_jet((x - center) / width, order)?
                .chain_linear(1.0 / width),
            SmoothFunction::MollifiedCatalog {
                func,
                kernel,
                width,
            } => Taylor::from_derivatives(&mollified_derivatives(func, *kernel, *width, x, order)?),
            SmoothFunction::Cutoff { cutoff, scale } => {
                cutoff.jet(scale * x, order).chain_linear(*scale)
            }
            SmoothFunction::Scaled(s, f) => f.taylor(x, order)?.scale(*s),
            SmoothFunction::Sum(terms) => {
                let mut acc = Taylor::zero(order);
                for t in terms {
                    acc = &acc + &t.taylor(x, order)?;
                }
                acc
            }
            SmoothFunction::Product(a, b) => {
                let ja = a.taylor(x, order)?;
                if ja.0.iter().all(|c| *c == ZERO) {
                    return Ok(Taylor::zero(order));
                }
                &ja * &b.taylor(x, order)?
            }
            SmoothFunction::Derivative(k, f) => {
                let k = *k as usize;
                f.taylor(x, order + k)?.shift_derivative(k, order)
            }
        })
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        Ok(self.taylor(x, 0)?.value())
    }

    /// `f^{(j)}(x)` for `j = 0..=order`.
    pub fn derivatives(&self, x: f64, order: usize) -> Result<Vec<Complex64>> {
        Ok(self.taylor(x, order)?.derivatives())
    }

    pub fn sample(&self, grid: Grid) -> Result<Field> {
        self.sample_derivative(grid, 0)
    }

    /// Samples `f^{(order)}` at the grid nodes.
    pub fn sample_derivative(&self, grid: Grid, order: usize) -> Result<Field> {
        let values = (0..grid.points)
            .into_par_iter()
            .map(|i| Ok(self.taylor(grid.node(i), order)?.derivative(order)))
            .collect::<Result<Vec<_>>>()?;
        Field::new(grid, values)
    }

    /// Short-scale regions, used to place quadrature breakpoints and probes.
    pub fn features(&self) -> Vec<Feature> {
        let mut out = Vec::new();
        self.collect_features(&mut out);
        out
    }

    fn collect_features(&self, out: &mut Vec<Feature>) {
        match self {
            SmoothFunction::Catalog(c) => out.push(Feature {
                center: c.center(),
                width: c.width(),
            }),
            SmoothFunction::GaussPoly(g) => out.push(Feature {
                center: -g.q[1].re / (2.0 * g.q[2].re),
                width: (-1.0 / g.q[2].re).sqrt(),
            }),
            SmoothFunction::KernelDerivative { center, width, .. }
            | SmoothFunction::KernelPrimitive { center, width, .. } => out.push(Feature {
                center: *center,
                width: *width,
            }),
            SmoothFunction::MollifiedCatalog { func, width, .. } => {
                out.push(Feature {
                    center: func.center(),
                    width: func.width().min(*width),
                });
            }
            SmoothFunction::Cutoff { scale, .. } => {
                let r = 1.0 / scale;
                out.push(Feature {
                    center: r,
                    width: r,
                });
                out.push(Feature {
                    center: -r,
                    width: r,
                });
            }
            SmoothFunction::Scaled(_, f) | SmoothFunction::Derivative(_, f) => {
                f.collect_features(out)
            }
            SmoothFunction::Sum(t) => t.iter().for_each(|f| f.collect_features(out)),
            SmoothFunction::Product(a, b) => {
                a.collect_features(out);
                b.collect_features(out);
            }
            _ => {}
        }
    }

    /// Radius outside which the function is negligible, if it decays.
    pub fn extent(&self) -> Option<f64> {
        match self {
            SmoothFunction::Zero => Some(0.0),
            SmoothFunction::Constant(c) if *c == ZERO => Some(0.0),
            SmoothFunction::Catalog(c) => c.decay_radius(1e-17),
            SmoothFunction::GaussPoly(g) => Some(g.decay_radius(0.0, 1e-17)),
            SmoothFunction::KernelDerivative {
                kernel,
                center,
                width,
                ..
            } => Some(center.abs() + width * kernel.support_radius()),
            SmoothFunction::MollifiedCatalog {
                func,
                kernel,
                width,
            } => func
                .decay_radius(1e-17)
                .map(|r| r + width * kernel.support_radius()),
            SmoothFunction::Cutoff { cutoff, scale } => Some(cutoff.support_radius() / scale),
            SmoothFunction::Scaled(_, f) | SmoothFunction::Derivative(_, f) => f.extent(),
            SmoothFunction::Sum(t) => t
                .iter()
                .map(|f| f.extent())
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.into_iter().fold(0.0, f64::max)),
            SmoothFunction::Product(a, b) => match (a.extent(), b.extent()) {
                (Some(x), Some(y)) => Some(x.min(y)),
                (Some(x), None) | (None, Some(x)) => Some(x),
                (None, None) => None,
            },
            _ => None,
        }
    }

    /// `int f h` against a closed-form test function.
    pub fn pair_closed(&self, h: &GaussPoly) -> Result<Complex64> {
        let mut r = h.decay_radius(0.0, 1e-17);
        if let Some(e) = self.extent() {
            r = r.min(e.max(1e-12));
        }
        let mut bp = Vec::new();
        for f in self.features() {
            for s in [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0] {
                let p = f.center + s * f.width;
                if p > -r && p < r {
                    bp.push(p);
                }
            }
        }
        let (v, _) = integrate(
            |x| self.value(x).unwrap_or(Complex64::new(f64::NAN, 0.0)) * h.eval(x),
            -r,
            r,
            &bp,
            QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-12,
                max_intervals: 20_000,
            },
        )?;
        if !v.re.is_finite() || !v.im.is_finite() {
            return Err(Error::Quadrature {
                estimated: f64::INFINITY,
                tolerance: 1e-12,
            });
        }
        Ok(v)
    }
}

/// Derivatives of `psi_w * u` at `x` for a catalog member `u`.
fn mollified_derivatives(
    func: &CatalogSmooth,
    kernel: KernelKind,
    width: f64,
    x: f64,
    order: usize,
) -> Result<Vec<Complex64>> {
    let dim = order + 1;
    match kernel {
        KernelKind::Gaussian => {
            // int psi(y) u^{(j)}(x - w y) dy over the numerical support of psi
            let r = kernel.support_radius();
            let yc = (x - func.center()) / width;
            let s = func.width() / width;
            let bp: Vec<f64> = [-3.0, -1.0, 0.0, 1.0, 3.0]
                .iter()
                .map(|k| yc + k * s)
                .filter(|p| p.abs() < r)
                .collect();
            let res = integrate_vec(
                |y, out: &mut [Complex64]| {
                    let psi = (-y * y).exp() / PI.sqrt();
                    let jet = func.taylor(x - width * y, order);
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = jet.derivative(j) * psi;
                    }
                },
                dim,
                -r,
                r,
                &bp,
                conv_opts(),
            )?;
            Ok(res.value)
        }
        KernelKind::Flat => {
            // (1/2pi) int (i xi)^j chi(w xi) u_hat(xi) e^{i x xi} dxi over the band
            let band = (2.0 / width).min(func.fourier_cutoff());
            let mut bp: Vec<f64> = func
                .fourier_breakpoints()
                .into_iter()
                .chain([-1.0 / width, 1.0 / width])
                .filter(|p| p.abs() < band)
                .collect();
            let segs = ((x.abs() * band / PI).ceil() as usize).clamp(1, 8000);
            for i in 1..segs {
                bp.push(-band + 2.0 * band * i as f64 / segs as f64);
            }
            let res = integrate_vec(
                |xi, out: &mut [Complex64]| {
                    let base = func.fourier(xi)
                        * kernel.fourier(width * xi)
                        * Complex64::new(0.0, x * xi).exp()
                        / (2.0 * PI);
                    let ixi = Complex64::new(0.0, xi);
                    let mut p = base;
                    for o in out.iter_mut() {
                        *o = p;
                        p *= ixi;
                    }
                },
                dim,
                -band,
                band,
                &bp,
                conv_opts(),
            )?;
            Ok(res.value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_catalog::{CatalogName, DistributionExpr};

    #[test]
    fn derivative_and_product_rules() {
        let g = SmoothFunction::Catalog(CatalogSmooth::gaussian(0.0, 1.0));
        let x2 = SmoothFunction::Polynomial(vec![ZERO, ZERO, Complex64::new(1.0, 0.0)]);
        let f = g.clone().times(x2).derivative(1);
        // d/dx x^2 e^{-x^2} = (2x - 2x^3) e^{-x^2}
        for x in [-1.2f64, 0.4, 2.0] {
            let expected = (2.0 * x - 2.0 * x * x * x) * (-x * x).exp();
            assert!((f.value(x).unwrap().re - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn mollified_delta_is_scaled_kernel() {
        let eps = 0.25;
        for kernel in [KernelKind::Gaussian, KernelKind::Flat] {
            let f = DistributionExpr::delta(0.0)
                .convolve_mollifier(kernel, eps)
                .unwrap();
            for x in [0.0, 0.1, -0.7] {
                let expected = kernel.value(x / eps).unwrap() / eps;
                assert!((f.value(x).unwrap().re - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn constant_is_preserved() {
        for kernel in [KernelKind::Gaussian, KernelKind::Flat] {
            let f = DistributionExpr::constant(1.0)
                .convolve_mollifier(kernel, 0.3)
                .unwrap();
            assert!((f.value(2.5).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn mollified_heaviside_is_half_at_jump() {
        for kernel in [KernelKind::Gaussian, KernelKind::Flat] {
            let f = DistributionExpr::heaviside(0.0)
                .convolve_mollifier(kernel, 0.1)
                .unwrap();
            assert!((f.value(0.0).unwrap().re - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn mollified_gaussian_matches_closed_form() {
        // psi_w * exp(-x^2) with the gaussian kernel is (1+w^2)^{-1/2} exp(-x^2/(1+w^2))
        let w = 0.4;
        let s = 1.0 + w * w;
        let c = CatalogSmooth::gaussian(0.0, 1.0);
        for kernel in [KernelKind::Gaussian, KernelKind::Flat] {
            let f = SmoothFunction::MollifiedCatalog {
                func: c.clone(),
                kernel,
                width: w,
            };
            for x in [0.0f64, 0.8, -2.5, 6.0] {
                let v = f.taylor(x, 1).unwrap();
                if kernel == KernelKind::Gaussian {
                    let exact = (-x * x / s).exp() / s.sqrt();
                    assert!((v.value().re - exact).abs() < 1e-13, "x={x}");
                    let dexact = -2.0 * x / s * exact;
                    assert!((v.derivative(1).re - dexact).abs() < 1e-13);
                }
            }
        }
        // the flat kernel reproduces content below 1/w, error ~ exp(-1/(4 w^2))
        let f = SmoothFunction::MollifiedCatalog {
            func: c,
            kernel: KernelKind::Flat,
            width: 0.1,
        };
        for x in [0.0f64, 0.8, -2.5, 6.0] {
            assert!((f.value(x).unwrap().re - (-x * x).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn flat_mollified_lorentzian_odd_matches_real_space() {
        let c = CatalogSmooth::new(CatalogName::LorentzianOdd, vec![0.0, 1.0]).unwrap();
        let w = 0.5;
        let f = SmoothFunction::MollifiedCatalog {
            func: c.clone(),
            kernel: KernelKind::Flat,
            width: w,
        };
        let x = 0.7;
        let (direct, _) = integrate(
            |y| KernelKind::Flat.value(y).unwrap() * c.value(x - w * y),
            -600.0,
            600.0,
            &(-300..=300).map(|k| 2.0 * k as f64).collect::<Vec<_>>(),
            QuadOptions::new(1e-14, 1e-12),
        )
        .unwrap();
        assert!(
            (f.value(x).unwrap() - direct).norm() < 1e-9,
            "{} vs {direct}",
            f.value(x).unwrap()
        );
    }

    #[test]
    fn bracket_power() {
        let f = SmoothFunction::Bracket {
            x_power: 1,
            exponent: -2.0,
        };
        assert!((f.value(2.0).unwrap().re - 2.0 / 5.0).abs() < 1e-15);
    }
}
