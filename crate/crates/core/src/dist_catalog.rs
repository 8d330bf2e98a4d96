//! Closed catalog of tempered distributions on the real line.

use crate::error::{Error, Result};
use crate::gausspoly::{poly_eval, GaussPoly};
use crate::grid_field::{fourier, Field, DECAY_THRESHOLD};
use crate::mollifier::KernelKind;
use crate::quad::{integrate, QuadOptions};
use crate::smooth::SmoothFunction;
use crate::taylor::Taylor;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative size below which Fourier transforms and tails are dropped.
const TAIL: f64 = 1e-17;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CatalogName {
    /// `exp(-(x-c)^2/w^2)`, params `[c, w]`.
    Gaussian,
    /// `sech((x-c)/w)`, params `[c, w]`.
    Sech,
    /// `exp(-(x-c)^2/w^2) sin(k (x-c))`, params `[c, w, k]`.
    SinePack,
    /// `w^2 / ((x-c)^2 + w^2)`, params `[c, w]`.
    Lorentzian,
    /// `w (x-c) / ((x-c)^2 + w^2)`, params `[c, w]`.
    LorentzianOdd,
}

impl CatalogName {
    pub fn param_count(self) -> usize {
        match self {
            CatalogName::SinePack => 3,
            _ => 2,
        }
    }

    pub fn is_schwartz(self) -> bool {
        matches!(
            self,
            CatalogName::Gaussian | CatalogName::Sech | CatalogName::SinePack
        )
    }
}

/// Smooth catalog member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSmooth {
    pub name: CatalogName,
    pub params: Vec<f64>,
}

impl CatalogSmooth {
    pub fn new(name: CatalogName, params: Vec<f64>) -> Result<Self> {
        let c = CatalogSmooth { name, params };
        c.validate()?;
        Ok(c)
    }

    pub fn gaussian(center: f64, width: f64) -> Self {
        CatalogSmooth {
            name: CatalogName::Gaussian,
            params: vec![center, width],
        }
    }

    pub fn sech(center: f64, width: f64) -> Self {
        CatalogSmooth {
            name: CatalogName::Sech,
            params: vec![center, width],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != self.name.param_count() {
            return Err(Error::InvalidExpr(format!(
                "{:?} takes {} params, got {}",
                self.name,
                self.name.param_count(),
                self.params.len()
            )));
        }
        if self.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidExpr("non-finite catalog parameter".into()));
        }
        if !(self.params[1] > 0.0) {
            return Err(Error::InvalidExpr(format!(
                "width must be positive, got {}",
                self.params[1]
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        self.params[0]
    }

    pub fn width(&self) -> f64 {
        self.params[1]
    }

    pub fn shifted(&self, a: f64) -> Self {
        let mut c = self.clone();
        c.params[0] += a;
        c
    }

    /// Jet at `x`.
    pub fn taylor(&self, x: f64, order: usize) -> Taylor {
        let (c, w) = (self.center(), self.width());
        let z0 = (x - c) / w;
        let z = Taylor::variable(z0, order);
        let one = Taylor::constant(Complex64::new(1.0, 0.0), order);
        let jet = match self.name {
            CatalogName::Gaussian => (-(&z * &z)).exp(),
            CatalogName::Sech => {
                let s = if z0 >= 0.0 { -z } else { z };
                let e = s.exp();
                let e2 = s.scale_re(2.0).exp();
                (&e * &(&one + &e2).recip()).scale_re(2.0)
            }
            CatalogName::SinePack => {
                let k = self.params[2];
                &(-(&z * &z)).exp() * &z.scale_re(k * w).sin()
            }
            CatalogName::Lorentzian => (&one + &(&z * &z)).recip(),
            CatalogName::LorentzianOdd => &z * &(&one + &(&z * &z)).recip(),
        };
        jet.chain_linear(1.0 / w)
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let (c, w) = (self.center(), self.width());
        let z = (x - c) / w;
        let v = match self.name {
            CatalogName::Gaussian => (-z * z).exp(),
            CatalogName::Sech => {
                let e = (-z.abs()).exp();
                2.0 * e / (1.0 + e * e)
            }
            CatalogName::SinePack => (-z * z).exp() * (self.params[2] * (x - c)).sin(),
            CatalogName::Lorentzian => 1.0 / (1.0 + z * z),
            CatalogName::LorentzianOdd => z / (1.0 + z * z),
        };
        Complex64::new(v, 0.0)
    }

    /// `int exp(-i x xi) u(x) dx`.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let (c, w) = (self.center(), self.width());
        let shift = Complex64::new(0.0, -c * xi).exp();
        let g = |s: f64| w * PI.sqrt() * (-0.25 * w * w * s * s).exp();
        let core = match self.name {
            CatalogName::Gaussian => Complex64::new(g(xi), 0.0),
            CatalogName::Sech => {
                let a = 0.5 * PI * w * xi.abs();
                let e = (-a).exp();
                Complex64::new(PI * w * 2.0 * e / (1.0 + e * e), 0.0)
            }
            CatalogName::SinePack => {
                let k = self.params[2];
                Complex64::new(0.0, -0.5) * (g(xi - k) - g(xi + k))
            }
            CatalogName::Lorentzian => Complex64::new(PI * w * (-w * xi.abs()).exp(), 0.0),
            CatalogName::LorentzianOdd => {
                Complex64::new(0.0, -PI * w * xi.signum() * (-w * xi.abs()).exp())
            }
        };
        if xi == 0.0 && self.name == CatalogName::LorentzianOdd {
            return ZERO;
        }
        core * shift
    }

    /// Frequency beyond which the transform is negligible.
    pub fn fourier_cutoff(&self) -> f64 {
        let w = self.width();
        let l = -TAIL.ln();
        match self.name {
            CatalogName::Gaussian => 2.0 * l.sqrt() / w,
            CatalogName::Sech => 2.0 * (l + 2f64.ln()) / (PI * w),
            CatalogName::SinePack => self.params[2].abs() + 2.0 * l.sqrt() / w,
            CatalogName::Lorentzian | CatalogName::LorentzianOdd => l / w,
        }
    }

    /// Points where the transform is not smooth or changes scale.
    pub fn fourier_breakpoints(&self) -> Vec<f64> {
        match self.name {
            CatalogName::SinePack => {
                let k = self.params[2].abs();
                vec![-k, 0.0, k]
            }
            _ => vec![0.0],
        }
    }

    /// Radius outside which `|u| < tol` (None for slowly decaying members).
    pub fn decay_radius(&self, tol: f64) -> Option<f64> {
        let (c, w) = (self.center(), self.width());
        let l = -tol.ln();
        match self.name {
            CatalogName::Gaussian | CatalogName::SinePack => Some(c.abs() + w * l.max(0.0).sqrt()),
            CatalogName::Sech => Some(c.abs() + w * (l + 2f64.ln()).max(0.0)),
            _ => None,
        }
    }
}

/// Symbolic tempered distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionExpr {
    DiracDelta {
        center: f64,
        #[serde(default)]
        order: u32,
    },
    Heaviside {
        center: f64,
    },
    Polynomial {
        #[serde(with = "crate::cplx::vec")]
        coefficients: Vec<Complex64>,
    },
    CatalogSmooth {
        name: CatalogName,
        params: Vec<f64>,
    },
    Scaled {
        #[serde(with = "crate::cplx")]
        scalar: Complex64,
        inner: Box<DistributionExpr>,
    },
    Sum {
        terms: Vec<DistributionExpr>,
    },
}

/// Maximum nesting depth accepted by [`DistributionExpr::validate`].
pub const MAX_DEPTH: usize = 32;

/// Highest derivative order of a delta accepted in the catalog.
pub const MAX_DELTA_ORDER: u32 = 8;

impl DistributionExpr {
    pub fn delta(center: f64) -> Self {
        DistributionExpr::DiracDelta { center, order: 0 }
    }

    pub fn delta_derivative(center: f64, order: u32) -> Self {
        DistributionExpr::DiracDelta { center, order }
    }

    pub fn heaviside(center: f64) -> Self {
        DistributionExpr::Heaviside { center }
    }

    pub fn constant(c: f64) -> Self {
        DistributionExpr::Polynomial {
            coefficients: vec![Complex64::new(c, 0.0)],
        }
    }

    pub fn polynomial(coefficients: &[f64]) -> Self {
        DistributionExpr::Polynomial {
            coefficients: coefficients
                .iter()
                .map(|c| Complex64::new(*c, 0.0))
                .collect(),
        }
    }

    pub fn catalog(c: CatalogSmooth) -> Self {
        DistributionExpr::CatalogSmooth {
            name: c.name,
            params: c.params,
        }
    }

    pub fn scaled(self, scalar: Complex64) -> Self {
        DistributionExpr::Scaled {
            scalar,
            inner: Box::new(self),
        }
    }

    pub fn sum(terms: Vec<DistributionExpr>) -> Self {
        DistributionExpr::Sum { terms }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_depth(0)
    }

    fn validate_depth(&self, depth: usize) -> Result<()> {
        if depth > MAX_DEPTH {
            return Err(Error::InvalidExpr(format!(
                "nesting deeper than {MAX_DEPTH}"
            )));
        }
        match self {
            DistributionExpr::DiracDelta { center, order } => {
                if !center.is_finite() {
                    return Err(Error::InvalidExpr("non-finite delta center".into()));
                }
                if *order > MAX_DELTA_ORDER {
                    return Err(Error::DerivativeOrder {
                        requested: *order as usize,
                        max: MAX_DELTA_ORDER as usize,
                    });
                }
                Ok(())
            }
            DistributionExpr::Heaviside { center } => {
                if center.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidExpr("non-finite Heaviside center".into()))
                }
            }
            DistributionExpr::Polynomial { coefficients } => {
                if coefficients.is_empty() {
                    return Err(Error::InvalidExpr(
                        "polynomial needs at least one coefficient".into(),
                    ));
                }
                if coefficients
                    .iter()
                    .any(|c| !c.re.is_finite() || !c.im.is_finite())
                {
                    return Err(Error::InvalidExpr(
                        "non-finite polynomial coefficient".into(),
                    ));
                }
                Ok(())
            }
            DistributionExpr::CatalogSmooth { name, params } => CatalogSmooth {
                name: *name,
                params: params.clone(),
            }
            .validate(),
            DistributionExpr::Scaled { scalar, inner } => {
                if *scalar == ZERO || !scalar.re.is_finite() || !scalar.im.is_finite() {
                    return Err(Error::InvalidExpr(
                        "scalar must be finite and nonzero".into(),
                    ));
                }
                inner.validate_depth(depth + 1)
            }
            DistributionExpr::Sum { terms } => {
                if terms.len() < 2 {
                    return Err(Error::InvalidExpr("sum needs at least two terms".into()));
                }
                terms.iter().try_for_each(|t| t.validate_depth(depth + 1))
            }
        }
    }

    /// Order `N` used in the growth estimates: `k` for the k-th derivative of
    /// delta, `0` for Heaviside and smooth members, the degree for polynomials.
    pub fn order(&self) -> u32 {
        match self {
            DistributionExpr::DiracDelta { order, .. } => *order,
            DistributionExpr::Heaviside { .. } | DistributionExpr::CatalogSmooth { .. } => 0,
            DistributionExpr::Polynomial { coefficients } => {
                coefficients.iter().rposition(|c| *c != ZERO).unwrap_or(0) as u32
            }
            DistributionExpr::Scaled { inner, .. } => inner.order(),
            DistributionExpr::Sum { terms } => terms.iter().map(|t| t.order()).max().unwrap_or(0),
        }
    }

    /// True for members that are not locally integrable functions.
    pub fn is_singular(&self) -> bool {
        match self {
            DistributionExpr::DiracDelta { .. } => true,
            DistributionExpr::Scaled { inner, .. } => inner.is_singular(),
            DistributionExpr::Sum { terms } => terms.iter().any(|t| t.is_singular()),
            _ => false,
        }
    }

    /// True when every component is a Schwartz catalog function.
    pub fn is_schwartz(&self) -> bool {
        match self {
            DistributionExpr::CatalogSmooth { name, .. } => name.is_schwartz(),
            DistributionExpr::Scaled { inner, .. } => inner.is_schwartz(),
            DistributionExpr::Sum { terms } => terms.iter().all(|t| t.is_schwartz()),
            _ => false,
        }
    }

    /// Translate by `a`: `u(x - a)`.
    pub fn translated(&self, a: f64) -> Self {
        match self {
            DistributionExpr::DiracDelta { center, order } => DistributionExpr::DiracDelta {
                center: center + a,
                order: *order,
            },
            DistributionExpr::Heaviside { center } => {
                DistributionExpr::Heaviside { center: center + a }
            }
            DistributionExpr::Polynomial { coefficients } => {
                // expand P(x - a)
                let n = coefficients.len();
                let mut out = vec![ZERO; n];
                for (j, c) in coefficients.iter().enumerate() {
                    let mut binom = 1.0;
                    for i in 0..=j {
                        out[i] += c * binom * (-a).powi((j - i) as i32);
                        binom = binom * (j - i) as f64 / (i + 1) as f64;
                    }
                }
                DistributionExpr::Polynomial { coefficients: out }
            }
            DistributionExpr::CatalogSmooth { name, params } => {
                let mut p = params.clone();
                p[0] += a;
                DistributionExpr::CatalogSmooth {
                    name: *name,
                    params: p,
                }
            }
            DistributionExpr::Scaled { scalar, inner } => DistributionExpr::Scaled {
                scalar: *scalar,
                inner: Box::new(inner.translated(a)),
            },
            DistributionExpr::Sum { terms } => DistributionExpr::Sum {
                terms: terms.iter().map(|t| t.translated(a)).collect(),
            },
        }
    }

    /// `<u, h>`.
    pub fn pair(&self, h: &TestFunction) -> Result<Complex64> {
        if let TestFunction::Sampled(f) = h {
            let ratio = f.boundary_decay();
            if ratio > DECAY_THRESHOLD {
                return Err(Error::DomainTruncation {
                    ratio,
                    threshold: DECAY_THRESHOLD,
                });
            }
        }
        self.pair_unchecked(h)
    }

    fn pair_unchecked(&self, h: &TestFunction) -> Result<Complex64> {
        match self {
            DistributionExpr::DiracDelta { center, order } => {
                let d = h.derivative_at(*center, *order as usize)?;
                Ok(if order % 2 == 1 { -d } else { d })
            }
            DistributionExpr::Heaviside { center } => h.integral_from(*center),
            DistributionExpr::Polynomial { coefficients } => match h {
                TestFunction::Closed(g) => Ok(g.mul_poly(coefficients).integral()),
                TestFunction::Sampled(f) => Ok(riemann(f, |x| {
                    poly_eval(coefficients, Complex64::new(x, 0.0))
                })),
            },
            DistributionExpr::CatalogSmooth { name, params } => {
                let c = CatalogSmooth {
                    name: *name,
                    params: params.clone(),
                };
                match h {
                    TestFunction::Closed(g) => {
                        let r = g.decay_radius(0.0, 1e-17);
                        let bp = [c.center()];
                        let (v, _) =
                            integrate(|x| c.value(x) * g.eval(x), -r, r, &bp, pair_opts())?;
                        Ok(v)
                    }
                    TestFunction::Sampled(f) => Ok(riemann(f, |x| c.value(x))),
                }
            }
            DistributionExpr::Scaled { scalar, inner } => Ok(scalar * inner.pair_unchecked(h)?),
            DistributionExpr::Sum { terms } => terms
                .iter()
                .map(|t| t.pair_unchecked(h))
                .sum::<Result<Complex64>>(),
        }
    }

    /// `psi_eps * u` as a smooth function.
    pub fn convolve_mollifier(&self, kernel: KernelKind, eps: f64) -> Result<SmoothFunction> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::InvalidExpr(format!(
                "eps must lie in (0, 1], got {eps}"
            )));
        }
        self.convolve_with_width(kernel, eps)
    }

    /// As [`convolve_mollifier`](Self::convolve_mollifier) without the `eps <= 1` restriction.
    pub fn convolve_with_width(&self, kernel: KernelKind, width: f64) -> Result<SmoothFunction> {
        self.validate()?;
        Ok(self.convolve_inner(kernel, width))
    }

    fn convolve_inner(&self, kernel: KernelKind, width: f64) -> SmoothFunction {
        match self {
            DistributionExpr::DiracDelta { center, order } => SmoothFunction::KernelDerivative {
                kernel,
                order: *order,
                center: *center,
                width,
            },
            DistributionExpr::Heaviside { center } => SmoothFunction::KernelPrimitive {
                kernel,
                center: *center,
                width,
            },
            DistributionExpr::Polynomial { coefficients } => {
                // (psi_w * P)(x) = sum_j P^{(j)}(x) (-w)^j mu_j / j!
                let mut out = vec![ZERO; coefficients.len()];
                let mut deriv = coefficients.clone();
                let mut fact = 1.0;
                for j in 0..coefficients.len() {
                    if j > 0 {
                        deriv = deriv
                            .iter()
                            .enumerate()
                            .skip(1)
                            .map(|(i, c)| c * i as f64)
                            .collect();
                        fact *= j as f64;
                    }
                    let mu = kernel.moment(j);
                    if mu == 0.0 {
                        continue;
                    }
                    let s = (-width).powi(j as i32) * mu / fact;
                    for (i, c) in deriv.iter().enumerate() {
                        out[i] += c * s;
                    }
                }
                SmoothFunction::Polynomial(out)
            }
            DistributionExpr::CatalogSmooth { name, params } => SmoothFunction::MollifiedCatalog {
                func: CatalogSmooth {
                    name: *name,
                    params: params.clone(),
                },
                kernel,
                width,
            },
            DistributionExpr::Scaled { scalar, inner } => {
                SmoothFunction::Scaled(*scalar, Box::new(inner.convolve_inner(kernel, width)))
            }
            DistributionExpr::Sum { terms } => SmoothFunction::Sum(
                terms
                    .iter()
                    .map(|t| t.convolve_inner(kernel, width))
                    .collect(),
            ),
        }
    }

    /// The function itself, for locally integrable smooth members.
    pub fn as_smooth(&self) -> Option<SmoothFunction> {
        match self {
            DistributionExpr::Polynomial { coefficients } => {
                Some(SmoothFunction::Polynomial(coefficients.clone()))
            }
            DistributionExpr::CatalogSmooth { name, params } => {
                Some(SmoothFunction::Catalog(CatalogSmooth {
                    name: *name,
                    params: params.clone(),
                }))
            }
            DistributionExpr::Scaled { scalar, inner } => Some(SmoothFunction::Scaled(
                *scalar,
                Box::new(inner.as_smooth()?),
            )),
            DistributionExpr::Sum { terms } => Some(SmoothFunction::Sum(
                terms
                    .iter()
                    .map(|t| t.as_smooth())
                    .collect::<Option<Vec<_>>>()?,
            )),
            _ => None,
        }
    }

    /// Pointwise value of a locally integrable member (Heaviside is 1 at its jump).
    pub fn value(&self, x: f64) -> Result<Complex64> {
        match self {
            DistributionExpr::DiracDelta { center, order } => Err(Error::Singular(format!(
                "delta derivative of order {order} at {center} has no point values"
            ))),
            DistributionExpr::Heaviside { center } => {
                Ok(Complex64::new(if x >= *center { 1.0 } else { 0.0 }, 0.0))
            }
            DistributionExpr::Polynomial { coefficients } => {
                Ok(poly_eval(coefficients, Complex64::new(x, 0.0)))
            }
            DistributionExpr::CatalogSmooth { name, params } => Ok(CatalogSmooth {
                name: *name,
                params: params.clone(),
            }
            .value(x)),
            DistributionExpr::Scaled { scalar, inner } => Ok(scalar * inner.value(x)?),
            DistributionExpr::Sum { terms } => terms.iter().map(|t| t.value(x)).sum(),
        }
    }

    /// Samples on the grid nodes; singular members must be mollified first.
    pub fn sample(&self, grid: crate::grid_field::Grid) -> Result<Field> {
        self.validate()?;
        if self.is_singular() {
            return Err(Error::Singular(
                "delta terms cannot be sampled pointwise; regularize the expression first".into(),
            ));
        }
        let values = grid
            .nodes()
            .into_iter()
            .map(|x| self.value(x))
            .collect::<Result<Vec<_>>>()?;
        Field::new(grid, values)
    }
}

fn pair_opts() -> QuadOptions {
    QuadOptions {
        abs_tol: 1e-15,
        rel_tol: 1e-13,
        max_intervals: 20_000,
    }
}

fn riemann<F: Fn(f64) -> Complex64>(f: &Field, u: F) -> Complex64 {
    f.values
        .iter()
        .enumerate()
        .map(|(i, h)| u(f.grid.node(i)) * h)
        .sum::<Complex64>()
        * f.grid.dx()
}

/// Schwartz test function, closed form or sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum TestFunction {
    Closed(GaussPoly),
    Sampled(Field),
}

impl TestFunction {
    pub fn derivative_at(&self, x: f64, order: usize) -> Result<Complex64> {
        match self {
            TestFunction::Closed(g) => Ok(g.taylor(x, order).derivative(order)),
            TestFunction::Sampled(f) => {
                // derivative of the trigonometric interpolant
                let s = fourier(f);
                let g = f.grid;
                let n = g.points as f64;
                let mut acc = ZERO;
                for (k, c) in s.coeffs.iter().enumerate() {
                    if order % 2 == 1 && k == g.nyquist_bin() {
                        continue;
                    }
                    let xi = g.frequency(k);
                    acc += c
                        * Complex64::new(0.0, xi).powu(order as u32)
                        * Complex64::new(0.0, xi * (x + g.half_width)).exp();
                }
                Ok(acc / n.sqrt())
            }
        }
    }

    /// `int_a^inf h`.
    pub fn integral_from(&self, a: f64) -> Result<Complex64> {
        match self {
            TestFunction::Closed(g) => {
                let r = g.decay_radius(0.0, 1e-17);
                if a >= r {
                    return Ok(ZERO);
                }
                let lo = a.max(-r);
                let (v, _) = integrate(|x| g.eval(x), lo, r, &[], pair_opts())?;
                Ok(v)
            }
            TestFunction::Sampled(f) => {
                let s = fourier(f);
                let g = f.grid;
                let l = g.half_width;
                let n = g.points as f64;
                let a = a.clamp(-l, l);
                let mut acc = ZERO;
                for (k, c) in s.coeffs.iter().enumerate() {
                    let xi = g.frequency(k);
                    if xi == 0.0 {
                        acc += c * (l - a);
                    } else {
                        let i = Complex64::new(0.0, 1.0);
                        acc += c * (Complex64::new(1.0, 0.0) - (i * xi * (a + l)).exp()) / (i * xi);
                    }
                }
                Ok(acc / n.sqrt())
            }
        }
    }

    pub fn value(&self, x: f64) -> Result<Complex64> {
        self.derivative_at(x, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_field::Grid;

    fn gauss() -> TestFunction {
        TestFunction::Closed(GaussPoly::gaussian(0.0, 1.0))
    }

    fn shifted_poly_gauss() -> TestFunction {
        TestFunction::Closed(
            GaussPoly::gaussian(0.4, 0.9)
                .with_real_poly(&[1.0, -0.5, 0.3])
                .modulate(0.7),
        )
    }

    #[test]
    fn delta_pairings() {
        let h = shifted_poly_gauss();
        let TestFunction::Closed(g) = &h else {
            unreachable!()
        };
        let d0 = DistributionExpr::delta(0.0).pair(&h).unwrap();
        assert!((d0 - g.eval(0.0)).norm() < 1e-15);
        let d1 = DistributionExpr::delta_derivative(0.0, 1).pair(&h).unwrap();
        assert!((d1 + g.derivative().eval(0.0)).norm() < 1e-14);
    }

    #[test]
    fn heaviside_pairing_with_gaussian() {
        let v = DistributionExpr::heaviside(0.0).pair(&gauss()).unwrap();
        assert!((v.re - 0.886_226_925_452_758).abs() < 1e-13);
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn pairing_is_linear() {
        let h = shifted_poly_gauss();
        let u = DistributionExpr::catalog(CatalogSmooth::sech(0.2, 1.5));
        let v = DistributionExpr::polynomial(&[1.0, 0.0, -2.0]);
        let alpha = Complex64::new(0.3, -1.2);
        let lhs = DistributionExpr::sum(vec![u.clone().scaled(alpha), v.clone()])
            .pair(&h)
            .unwrap();
        let rhs = alpha * u.pair(&h).unwrap() + v.pair(&h).unwrap();
        assert!((lhs - rhs).norm() < 1e-12 * rhs.norm());
    }

    #[test]
    fn sampled_pairings_agree_with_closed_form() {
        let grid = Grid::new(20.0, 512).unwrap();
        let TestFunction::Closed(g) = shifted_poly_gauss() else {
            unreachable!()
        };
        let sampled = TestFunction::Sampled(Field::from_fn(grid, |x| g.eval(x)));
        let closed = TestFunction::Closed(g);
        for u in [
            DistributionExpr::delta_derivative(0.3, 2),
            DistributionExpr::heaviside(-0.2),
            DistributionExpr::polynomial(&[1.0, 2.0]),
            DistributionExpr::catalog(CatalogSmooth::gaussian(1.0, 2.0)),
        ] {
            let a = u.pair(&closed).unwrap();
            let b = u.pair(&sampled).unwrap();
            assert!((a - b).norm() < 1e-10, "{u:?}: {a} vs {b}");
        }
    }

    #[test]
    fn truncated_sample_is_flagged() {
        let grid = Grid::new(5.0, 64).unwrap();
        let h = TestFunction::Sampled(Field::from_real_fn(grid, |x| (-x * x / 20.0).exp()));
        assert!(matches!(
            DistributionExpr::delta(0.0).pair(&h),
            Err(Error::DomainTruncation { .. })
        ));
    }

    #[test]
    fn sampling_contract() {
        let grid = Grid::new(10.0, 64).unwrap();
        let f = DistributionExpr::catalog(CatalogSmooth::gaussian(0.0, 1.0))
            .sample(grid)
            .unwrap();
        assert!((f.values[32].re - 1.0).abs() < 1e-15);
        let err = DistributionExpr::delta(0.0).sample(grid).unwrap_err();
        assert!(err.to_string().contains("singular: mollify first"));
    }

    #[test]
    fn validation_rules() {
        assert!(DistributionExpr::sum(vec![DistributionExpr::delta(0.0)])
            .validate()
            .is_err());
        assert!(DistributionExpr::delta(0.0)
            .scaled(ZERO)
            .validate()
            .is_err());
        let bad = DistributionExpr::CatalogSmooth {
            name: CatalogName::Gaussian,
            params: vec![0.0],
        };
        assert!(bad.validate().is_err());
        assert!(DistributionExpr::delta_derivative(0.0, 9)
            .validate()
            .is_err());
    }

    #[test]
    fn catalog_fourier_transforms_match_quadrature() {
        let members = [
            CatalogSmooth::gaussian(0.3, 1.3),
            CatalogSmooth::sech(-0.5, 0.8),
            CatalogSmooth::new(CatalogName::SinePack, vec![0.2, 1.0, 3.0]).unwrap(),
        ];
        for c in members {
            for xi in [-2.5, 0.0, 1.0, 4.0] {
                let (v, _) = integrate(
                    |x| c.value(x) * Complex64::new(0.0, -x * xi).exp(),
                    -60.0,
                    60.0,
                    &[c.center()],
                    QuadOptions::new(1e-15, 1e-13),
                )
                .unwrap();
                assert!((v - c.fourier(xi)).norm() < 1e-11, "{:?} xi={xi}", c.name);
            }
        }
        // slowly decaying members: invert the exponentially decaying transform
        for c in [
            CatalogSmooth::new(CatalogName::Lorentzian, vec![0.5, 1.5]).unwrap(),
            CatalogSmooth::new(CatalogName::LorentzianOdd, vec![0.5, 1.5]).unwrap(),
        ] {
            let b = c.fourier_cutoff();
            for x in [-1.0, 0.5, 3.0] {
                let (v, _) = integrate(
                    |xi| c.fourier(xi) * Complex64::new(0.0, x * xi).exp() / (2.0 * PI),
                    -b,
                    b,
                    &[0.0],
                    QuadOptions::new(1e-15, 1e-13),
                )
                .unwrap();
                assert!((v - c.value(x)).norm() < 1e-12, "{:?} x={x}", c.name);
            }
        }
    }

    #[test]
    fn catalog_jets_match_values() {
        let members = [
            CatalogSmooth::gaussian(0.3, 1.3),
            CatalogSmooth::sech(-0.5, 0.8),
            CatalogSmooth::new(CatalogName::SinePack, vec![0.2, 1.0, 3.0]).unwrap(),
            CatalogSmooth::new(CatalogName::Lorentzian, vec![0.5, 1.5]).unwrap(),
            CatalogSmooth::new(CatalogName::LorentzianOdd, vec![0.5, 1.5]).unwrap(),
        ];
        let h = 1e-5;
        for c in &members {
            for x in [-3.0, 0.1, 2.2] {
                let j = c.taylor(x, 1);
                assert!((j.value() - c.value(x)).norm() < 1e-15);
                let fd = (c.value(x + h) - c.value(x - h)) / (2.0 * h);
                assert!((j.derivative(1) - fd).norm() < 1e-8, "{:?} at {x}", c.name);
            }
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let u = DistributionExpr::sum(vec![
            DistributionExpr::delta(0.0).scaled(Complex64::new(0.0, 1.0)),
            DistributionExpr::catalog(CatalogSmooth::gaussian(0.0, 1.0)),
        ]);
        let s = serde_json::to_string(&u).unwrap();
        let back: DistributionExpr = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        let real_scalar: DistributionExpr = serde_json::from_str(
            r#"{"kind":"scaled","scalar":2.0,"inner":{"kind":"heaviside","center":1.0}}"#,
        )
        .unwrap();
        assert!(matches!(real_scalar, DistributionExpr::Scaled { .. }));
        let unknown = serde_json::from_str::<DistributionExpr>(
            r#"{"kind":"heaviside","center":1.0,"bogus":1}"#,
        );
        assert!(unknown.is_err());
    }

    #[test]
    fn translation_of_polynomial() {
        let p = DistributionExpr::polynomial(&[1.0, 2.0, 3.0]);
        let t = p.translated(0.5);
        for x in [-1.0, 0.3, 2.0] {
            assert!((t.value(x).unwrap() - p.value(x - 0.5).unwrap()).norm() < 1e-13);
        }
    }
}
