//! Mollifier pairs, epsilon scales and the regularization map
//! `u -> phi(w x) (psi_w * u)(x)` with `w = omega(eps)`.

pub mod flat_table;
pub mod kernel;

pub use kernel::{CutoffKind, KernelKind};

use crate::dist_catalog::{DistributionExpr, TestFunction};
use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_vec, QuadOptions};
use crate::smooth::SmoothFunction;
use crate::taylor::Taylor;
use crate::time_curve::TimeCurve;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Points on the uniform part of a probe grid.
pub const PROBE_POINTS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairName {
    Gaussian,
    Flat,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flatness {
    Finite(u32),
    Infinite,
}

impl Flatness {
    pub fn at_least(self, q: u32) -> bool {
        match self {
            Flatness::Finite(f) => f >= q,
            Flatness::Infinite => true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollifierPair {
    pub name: PairName,
    pub kernel: KernelKind,
    pub cutoff: CutoffKind,
    pub flatness: Flatness,
}

impl MollifierPair {
    /// `phi = exp(-x^2)`, `psi = pi^{-1/2} exp(-x^2)`.
    pub fn gaussian() -> Self {
        MollifierPair {
            name: PairName::Gaussian,
            kernel: KernelKind::Gaussian,
            cutoff: CutoffKind::Gaussian,
            flatness: Flatness::Finite(1),
        }
    }

    /// `phi` the flat bump, `psi` the inverse transform of the flat bump.
    pub fn flat() -> Self {
        MollifierPair {
            name: PairName::Flat,
            kernel: KernelKind::Flat,
            cutoff: CutoffKind::Flat,
            flatness: Flatness::Infinite,
        }
    }

    pub fn from_name(name: PairName) -> Self {
        match name {
            PairName::Gaussian => Self::gaussian(),
            PairName::Flat => Self::flat(),
        }
    }

    /// Largest `q <= q_max` with vanishing `phi^{(b)}(0)` and moments of `psi`
    /// for `1 <= b <= q`; `Infinite` when all orders up to `q_max` vanish.
    pub fn measured_flatness(&self, q_max: u32, tol: f64) -> Flatness {
        let q_max_us = q_max as usize;
        let phi = self.cutoff.jet(0.0, q_max_us);
        let psi_hat = self.kernel.fourier_jet(0.0, q_max_us);
        for b in 1..=q_max_us {
            // moment_b = i^b psi_hat^{(b)}(0)
            let moment = Complex64::new(0.0, 1.0).powu(b as u32) * psi_hat.derivative(b);
            if phi.derivative(b).norm() > tol || moment.norm() > tol {
                return Flatness::Finite(b as u32 - 1);
            }
        }
        Flatness::Infinite
    }

    /// `phi(0)`, `int psi` and the first two moments by quadrature.
    pub fn normalization_check(&self) -> Result<NormalizationCheck> {
        let r = self.kernel.support_radius();
        let bp: Vec<f64> = (-(r as i64)..=(r as i64))
            .step_by(2)
            .map(|k| k as f64)
            .collect();
        let kernel = self.kernel;
        let res = integrate_vec(
            |y, out: &mut [Complex64]| {
                let v = kernel.value(y).unwrap_or(f64::NAN);
                out[0] = Complex64::new(v, 0.0);
                out[1] = Complex64::new(v * y, 0.0);
                out[2] = Complex64::new(v * y * y, 0.0);
            },
            3,
            -r,
            r,
            &bp,
            QuadOptions {
                abs_tol: 1e-15,
                rel_tol: 1e-14,
                max_intervals: 100_000,
            },
        )?;
        Ok(NormalizationCheck {
            phi_at_zero: self.cutoff.value(0.0),
            mass: res.value[0].re,
            first_moment: res.value[1].re,
            second_moment: res.value[2].re,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCheck {
    pub phi_at_zero: f64,
    pub mass: f64,
    pub first_moment: f64,
    pub second_moment: f64,
}

/// The scale `eps -> omega(eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EpsilonScale {
    Identity,
    Power {
        r: f64,
    },
    /// `1 / log(log(...log(1/eps)))` with `depth` logarithms.
    IteratedLog {
        depth: u32,
    },
}

impl Default for EpsilonScale {
    fn default() -> Self {
        EpsilonScale::IteratedLog { depth: 1 }
    }
}

impl EpsilonScale {
    pub fn validate(&self) -> Result<()> {
        match self {
            EpsilonScale::Power { r } if !(*r > 0.0 && r.is_finite()) => {
                Err(Error::Config(format!("power scale needs r > 0, got {r}")))
            }
            EpsilonScale::IteratedLog { depth } if !(1..=4).contains(depth) => Err(Error::Config(
                format!("iterated_log depth must be 1..=4, got {depth}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            EpsilonScale::Identity => "identity".into(),
            EpsilonScale::Power { r } => format!("power(r={r})"),
            EpsilonScale::IteratedLog { depth } => format!("iterated_log(depth={depth})"),
        }
    }

    /// `log(1/eps_max)`: the domain is `eps < eps_max`.
    pub fn log_inv_eps_max(&self) -> f64 {
        match self {
            EpsilonScale::IteratedLog { depth } => {
                // tower: 1, e, e^e, e^(e^e)
                (1..*depth).fold(1.0, |acc, _| f64::exp(acc))
            }
            _ => 0.0,
        }
    }

    /// Upper end of the domain (`1` for identity and power scales).
    pub fn eps_max(&self) -> f64 {
        match self {
            EpsilonScale::IteratedLog { .. } => (-self.log_inv_eps_max()).exp(),
            _ => 1.0,
        }
    }

    fn domain_error(&self, eps: f64) -> Error {
        let requirement = match self {
            EpsilonScale::IteratedLog { depth } => format!(
                "log applied {depth} times to 1/eps must exceed 1, i.e. eps < exp(-{:.6}) = {:e}",
                self.log_inv_eps_max(),
                self.eps_max()
            ),
            _ => "0 < eps <= 1".into(),
        };
        Error::ScaleDomain {
            scale: self.name(),
            eps,
            requirement,
        }
    }

    /// `omega(eps)`.
    pub fn omega(&self, eps: f64) -> Result<f64> {
        self.validate()?;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(self.domain_error(eps));
        }
        match self {
            EpsilonScale::Identity => Ok(eps),
            EpsilonScale::Power { r } => Ok(eps.powf(*r)),
            EpsilonScale::IteratedLog { .. } => self
                .omega_log(-eps.ln())
                .map_err(|_| self.domain_error(eps)),
        }
    }

    /// `omega` given `log(1/eps)` directly, which reaches the deep
    /// iterated-log domains that are out of double-precision range for `eps`.
    pub fn omega_log(&self, log_inv_eps: f64) -> Result<f64> {
        self.validate()?;
        let eps_hint = (-log_inv_eps).exp();
        match self {
            EpsilonScale::Identity => Ok(eps_hint),
            EpsilonScale::Power { r } => Ok((-r * log_inv_eps).exp()),
            EpsilonScale::IteratedLog { depth } => {
                let mut v = log_inv_eps;
                for _ in 1..*depth {
                    if !(v > 0.0) {
                        return Err(self.domain_error(eps_hint));
                    }
                    v = v.ln();
                }
                if v > 1.0 && v.is_finite() {
                    Ok(1.0 / v)
                } else {
                    Err(self.domain_error(eps_hint))
                }
            }
        }
    }

    /// Constants `(c, r)` with `omega(eps) >= c eps^r` on the domain.
    pub fn lower_bound(&self) -> (f64, f64) {
        match self {
            EpsilonScale::Identity => (1.0, 1.0),
            EpsilonScale::Power { r } => (1.0, *r),
            // eps log(1/eps) <= 1/e and the iterated logs are dominated by log(1/eps)
            EpsilonScale::IteratedLog { .. } => (std::f64::consts::E, 1.0),
        }
    }
}

/// `x -> phi(w x) (psi_w * u)(x)`.
pub fn regularize_with_omega(
    u: &DistributionExpr,
    pair: &MollifierPair,
    omega: f64,
) -> Result<SmoothFunction> {
    let conv = u.convolve_mollifier(pair.kernel, omega)?;
    Ok(SmoothFunction::Cutoff {
        cutoff: pair.cutoff,
        scale: omega,
    }
    .times(conv))
}

/// Regularization of `u` at `eps` through the scale.
pub fn regularize(
    u: &DistributionExpr,
    pair: &MollifierPair,
    scale: &EpsilonScale,
    eps: f64,
) -> Result<SmoothFunction> {
    regularize_with_omega(u, pair, scale.omega(eps)?)
}

/// Regularized curve together with its values at the requested nodes.
#[derive(Clone, Debug)]
pub struct RegularizedCurve {
    pub curve: TimeCurve<SmoothFunction>,
    pub t_nodes: Vec<f64>,
    pub at_nodes: Vec<SmoothFunction>,
}

/// Value of a smooth curve at `t` as a single function.
pub fn curve_at(curve: &TimeCurve<SmoothFunction>, t: f64) -> SmoothFunction {
    let mut parts: Vec<SmoothFunction> = curve
        .weights(t)
        .into_iter()
        .zip(&curve.terms)
        .filter(|(w, term)| *w != ZERO && !term.value.is_zero())
        .map(|(w, term)| {
            if w == Complex64::new(1.0, 0.0) {
                term.value.clone()
            } else {
                term.value.clone().scaled(w)
            }
        })
        .collect();
    match parts.len() {
        0 => SmoothFunction::Zero,
        1 => parts.pop().expect("one part"),
        _ => SmoothFunction::Sum(parts),
    }
}

/// Regularizes every spatial part of the curve with one `(pair, scale, eps)`.
pub fn regularize_curve(
    c: &TimeCurve<DistributionExpr>,
    pair: &MollifierPair,
    scale: &EpsilonScale,
    eps: f64,
    t_nodes: &[f64],
) -> Result<RegularizedCurve> {
    c.validate()?;
    let omega = scale.omega(eps)?;
    let curve = c.map(|u| regularize_with_omega(u, pair, omega))?;
    let at_nodes = t_nodes.iter().map(|t| curve_at(&curve, *t)).collect();
    Ok(RegularizedCurve {
        curve,
        t_nodes: t_nodes.to_vec(),
        at_nodes,
    })
}

/// Probe grid: `PROBE_POINTS` uniform points on `[-R, R]` plus refinements
/// around narrow features. `R` defaults to 40 for non-decaying functions.
pub fn probe_points(f: &SmoothFunction) -> Vec<f64> {
    let r = f.extent().unwrap_or(40.0).max(1e-6);
    let mut pts: Vec<f64> = (0..PROBE_POINTS)
        .map(|i| -r + 2.0 * r * i as f64 / (PROBE_POINTS - 1) as f64)
        .collect();
    for feat in f.features() {
        if feat.width * 50.0 < 2.0 * r {
            for k in -256..=256 {
                let p = feat.center + feat.width * k as f64 / 16.0;
                if p.abs() <= r {
                    pts.push(p);
                }
            }
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts
}

/// `max over probes of <x>^M |f^{(beta)}(x)|`.
pub fn seminorm_on(f: &SmoothFunction, weight: f64, beta: usize, probes: &[f64]) -> Result<f64> {
    let vals = probes
        .par_iter()
        .map(|x| Ok((1.0 + x * x).powf(0.5 * weight) * f.taylor(*x, beta)?.derivative(beta).norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

pub fn seminorm(f: &SmoothFunction, weight: f64, beta: usize) -> Result<f64> {
    seminorm_on(f, weight, beta, &probe_points(f))
}

/// `sup_t sup_x <x>^M |d^beta c_eps(t, x)|` over the nodes of a regularized curve.
pub fn curve_seminorm(c: &RegularizedCurve, weight: f64, beta: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for f in &c.at_nodes {
        best = best.max(seminorm(f, weight, beta)?);
    }
    Ok(best)
}

/// `sup_x <x>^M |d^beta (phi(w x) (psi_w * u)(x) - u(x))|` over a probe grid.
pub fn regularization_error(
    u: &TestFunction,
    pair: &MollifierPair,
    omega: f64,
    weight: u32,
    beta: u32,
) -> Result<f64> {
    Ok(regularization_error_table(u, pair, omega, &[(weight, beta)])?[0])
}

/// As [`regularization_error`] for several `(M, beta)` at once.
///
/// The difference `psi_w * u - u` is evaluated as a Fourier integral of
/// `(1 - psi_hat(w xi)) u_hat(xi)` so that no cancellation occurs when it is
/// small.
pub fn regularization_error_table(
    u: &TestFunction,
    pair: &MollifierPair,
    omega: f64,
    combos: &[(u32, u32)],
) -> Result<Vec<f64>> {
    let g = match u {
        TestFunction::Closed(g) => g,
        TestFunction::Sampled(_) => {
            return Err(Error::Unsupported(
                "regularization error needs a closed-form test function".into(),
            ))
        }
    };
    if g.is_zero() || combos.is_empty() {
        return Ok(vec![0.0; combos.len()]);
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidExpr(format!(
            "omega must be positive, got {omega}"
        )));
    }
    let beta_max = combos.iter().map(|c| c.1).max().unwrap_or(0) as usize;
    let weight_max = combos.iter().map(|c| c.0).max().unwrap_or(0) as f64;
    let uh = g.fourier();
    let band = uh.decay_radius(0.0, 1e-300);
    let kernel = pair.kernel;
    let lo = match kernel.band() {
        Some(_) => 1.0 / omega,
        None => 0.0,
    };
    let dim = beta_max + 1;

    // bound S_j = (1/2pi) int |xi|^j (1 - psi_hat) |u_hat| used to normalise
    let mut scales = vec![0.0; dim];
    if lo < band {
        let res = integrate_vec(
            |xi, out: &mut [Complex64]| {
                let base = kernel.fourier_complement(omega * xi) * uh.eval(xi).norm() / (2.0 * PI);
                let mut p = base;
                for o in out.iter_mut() {
                    *o = Complex64::new(p, 0.0);
                    p *= xi.abs();
                }
            },
            dim,
            lo,
            band,
            &[2.0 * lo, 1.0 / omega, 2.0 / omega],
            QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-6,
                max_intervals: 20_000,
            },
        );
        let neg = integrate_vec(
            |xi, out: &mut [Complex64]| {
                let base = kernel.fourier_complement(omega * xi) * uh.eval(-xi).norm() / (2.0 * PI);
                let mut p = base;
                for o in out.iter_mut() {
                    *o = Complex64::new(p, 0.0);
                    p *= xi.abs();
                }
            },
            dim,
            lo,
            band,
            &[2.0 * lo, 1.0 / omega, 2.0 / omega],
            QuadOptions {
                abs_tol: 0.0,
                rel_tol: 1e-6,
                max_intervals: 20_000,
            },
        );
        if let (Ok(a), Ok(b)) = (res, neg) {
            for j in 0..dim {
                scales[j] = a.value[j].re + b.value[j].re;
            }
        }
    }

    let r = g.decay_radius(weight_max, 1e-13) + 1.0;
    let probes: Vec<f64> = (0..PROBE_POINTS)
        .map(|i| -r + 2.0 * r * i as f64 / (PROBE_POINTS - 1) as f64)
        .collect();
    let cutoff = pair.cutoff;
    let rows = probes
        .par_iter()
        .map(|&x| -> Result<Vec<f64>> {
            // D^{(j)}(x) = -(1/2pi) int (i xi)^j (1 - psi_hat(w xi)) u_hat(xi) e^{i x xi}
            let mut d = vec![ZERO; dim];
            if scales.iter().any(|s| *s > 0.0) {
                let integrand = |xi: f64, out: &mut [Complex64]| {
                    let base = -kernel.fourier_complement(omega * xi)
                        * uh.eval(xi)
                        * Complex64::new(0.0, x * xi).exp()
                        / (2.0 * PI);
                    let ixi = Complex64::new(0.0, xi);
                    let mut p = base;
                    for (j, o) in out.iter_mut().enumerate() {
                        *o = if scales[j] > 0.0 { p / scales[j] } else { ZERO };
                        p *= ixi;
                    }
                };
                let segs = ((x.abs() * (band - lo) / PI).ceil() as usize).clamp(1, 4000);
                let mut bp: Vec<f64> = (1..segs)
                    .map(|i| lo + (band - lo) * i as f64 / segs as f64)
                    .collect();
                bp.extend([1.0 / omega, 2.0 / omega]);
                let opts = QuadOptions {
                    abs_tol: 1e-13,
                    rel_tol: 1e-11,
                    max_intervals: 50_000,
                };
                let pos = integrate_vec(integrand, dim, lo, band, &bp, opts)?;
                let neg_bp: Vec<f64> = bp.iter().map(|p| -p).collect();
                let neg = integrate_vec(integrand, dim, -band, -lo, &neg_bp, opts)?;
                for j in 0..dim {
                    d[j] = (pos.value[j] + neg.value[j]) * scales[j];
                }
            }
            let dj = Taylor::from_derivatives(&d);
            let phi = cutoff.jet(omega * x, beta_max).chain_linear(omega);
            let comp = cutoff
                .complement_jet(omega * x, beta_max)
                .chain_linear(omega);
            let uj = g.taylor(x, beta_max);
            let e = &(&phi * &dj) - &(&comp * &uj);
            Ok(combos
                .iter()
                .map(|(m, b)| {
                    (1.0 + x * x).powf(0.5 * *m as f64) * e.derivative(*b as usize).norm()
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = vec![0.0f64; combos.len()];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o = o.max(v);
        }
    }
    Ok(out)
}

/// `|<u_eps, h> - <u, h>|` with `u_eps` the regularization at `omega`.
pub fn pairing_gap(
    u: &DistributionExpr,
    h: &crate::gausspoly::GaussPoly,
    pair: &MollifierPair,
    omega: f64,
) -> Result<f64> {
    let reg = regularize_with_omega(u, pair, omega)?;
    let exact = u.pair(&TestFunction::Closed(h.clone()))?;
    Ok((reg.pair_closed(h)? - exact).norm())
}

/// Quadrature of `int_a^b f` used by the examples and tests.
pub fn integrate_smooth(f: &SmoothFunction, a: f64, b: f64) -> Result<Complex64> {
    let bp: Vec<f64> = f
        .features()
        .iter()
        .map(|x| x.center)
        .filter(|c| *c > a && *c < b)
        .collect();
    Ok(integrate(
        |x| f.value(x).unwrap_or(ZERO),
        a,
        b,
        &bp,
        QuadOptions::default(),
    )?
    .0)
}

/// `||f||_{L^2}` by adaptive quadrature, refined around narrow features.
pub fn l2_norm_quad(f: &SmoothFunction) -> Result<f64> {
    let r = f.extent().unwrap_or(60.0).max(1e-9);
    let mut bp = Vec::new();
    for feat in f.features() {
        for s in [-10.0, -3.0, -1.0, 0.0, 1.0, 3.0, 10.0] {
            let p = feat.center + s * feat.width;
            if p.abs() < r {
                bp.push(p);
            }
        }
    }
    let (v, _) = integrate(
        |x| Complex64::new(f.value(x).map(|z| z.norm_sqr()).unwrap_or(f64::NAN), 0.0),
        -r,
        r,
        &bp,
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-12,
            max_intervals: 20_000,
        },
    )?;
    Ok(v.re.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_catalog::CatalogSmooth;
    use crate::gausspoly::GaussPoly;

    #[test]
    fn omega_examples() {
        let d1 = EpsilonScale::IteratedLog { depth: 1 };
        assert!((d1.omega((-10f64).exp()).unwrap() - 0.1).abs() < 1e-15);
        let d2 = EpsilonScale::IteratedLog { depth: 2 };
        assert!((d2.omega((-(3f64.exp())).exp()).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        assert_eq!(EpsilonScale::Identity.omega(0.25).unwrap(), 0.25);
        assert!((EpsilonScale::Power { r: 0.5 }.omega(0.25).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn domain_guards() {
        let d1 = EpsilonScale::IteratedLog { depth: 1 };
        let err = d1.omega(0.5).unwrap_err();
        assert!(err.to_string().contains("exp(-1"));
        assert!(d1.omega(0.36).is_ok());
        let d4 = EpsilonScale::IteratedLog { depth: 4 };
        assert!(d4.omega(1e-300).is_err());
        assert_eq!(d4.eps_max(), 0.0);
        // depth 4 is reachable through log(1/eps)
        let w = d4.omega_log(1e8).unwrap();
        let expected = 1.0 / (1e8f64).ln().ln().ln();
        assert!((w - expected).abs() < 1e-15);
        assert!(EpsilonScale::Identity.omega(0.0).is_err());
        assert!(EpsilonScale::Identity.omega(1.5).is_err());
    }

    #[test]
    fn scales_are_bounded_below() {
        for scale in [
            EpsilonScale::Identity,
            EpsilonScale::Power { r: 0.5 },
            EpsilonScale::IteratedLog { depth: 1 },
            EpsilonScale::IteratedLog { depth: 2 },
        ] {
            let (c, r) = scale.lower_bound();
            let mut prev = f64::INFINITY;
            for k in 2..40 {
                let eps = 2f64.powi(-k);
                if let Ok(w) = scale.omega(eps) {
                    assert!(w > 0.0 && w <= 1.0);
                    assert!(w >= c * eps.powf(r) * (1.0 - 1e-12), "{scale:?} eps={eps}");
                    assert!(w <= prev);
                    prev = w;
                }
            }
        }
    }

    #[test]
    fn declared_flatness_matches_measured() {
        for pair in [MollifierPair::gaussian(), MollifierPair::flat()] {
            assert_eq!(pair.measured_flatness(12, 1e-10), pair.flatness);
        }
    }

    #[test]
    fn pairs_are_normalised() {
        for pair in [MollifierPair::gaussian(), MollifierPair::flat()] {
            let c = pair.normalization_check().unwrap();
            assert_eq!(c.phi_at_zero, 1.0);
            assert!(
                (c.mass - 1.0).abs() < 1e-12,
                "{:?} mass {}",
                pair.name,
                c.mass
            );
            assert!(c.first_moment.abs() < 1e-12);
            let expected = if pair.name == PairName::Flat {
                0.0
            } else {
                0.5
            };
            assert!(
                (c.second_moment - expected).abs() < 1e-8,
                "{}",
                c.second_moment
            );
        }
    }

    #[test]
    fn regularized_constant_is_cutoff() {
        let pair = MollifierPair::gaussian();
        let f = regularize(
            &DistributionExpr::constant(1.0),
            &pair,
            &EpsilonScale::Identity,
            0.2,
        )
        .unwrap();
        for x in [0.0f64, 1.0, 7.0] {
            assert!((f.value(x).unwrap().re - (-0.04 * x * x).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn scale_composition_is_exact() {
        let pair = MollifierPair::flat();
        let scale = EpsilonScale::IteratedLog { depth: 1 };
        let u = DistributionExpr::delta(0.3);
        let eps = 0.01;
        let a = regularize(&u, &pair, &scale, eps).unwrap();
        let b = regularize(
            &u,
            &pair,
            &EpsilonScale::Identity,
            scale.omega(eps).unwrap(),
        )
        .unwrap();
        for x in [-0.5, 0.3, 1.1] {
            assert_eq!(a.value(x).unwrap(), b.value(x).unwrap());
        }
    }

    #[test]
    fn zero_input_has_zero_error() {
        let zero = TestFunction::Closed(GaussPoly::gaussian(0.0, 1.0).scale(ZERO));
        assert_eq!(
            regularization_error(&zero, &MollifierPair::gaussian(), 0.1, 2, 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn gaussian_pair_error_matches_direct_difference() {
        // closed form: phi(wx) (1+w^2)^{-1/2} exp(-x^2/(1+w^2)) - exp(-x^2)
        let w = 0.3;
        let s = 1.0 + w * w;
        let u = TestFunction::Closed(GaussPoly::gaussian(0.0, 1.0));
        let got = regularization_error(&u, &MollifierPair::gaussian(), w, 0, 0).unwrap();
        let exact = (0..20001)
            .map(|i| {
                let x = -8.0 + 16.0 * i as f64 / 20000.0;
                ((-w * w * x * x).exp() * (-x * x / s).exp() / s.sqrt() - (-x * x).exp()).abs()
            })
            .fold(0.0, f64::max);
        assert!((got - exact).abs() < 1e-4 * exact, "{got} vs {exact}");
    }

    #[test]
    fn curve_nodes() {
        let pair = MollifierPair::gaussian();
        let c = TimeCurve::with_profile(
            crate::time_curve::TimeProfile::Sine {
                frequency: 1.0,
                phase: 0.0,
            },
            DistributionExpr::delta(0.0),
        );
        let r = regularize_curve(&c, &pair, &EpsilonScale::Identity, 0.1, &[0.0, 1.0]).unwrap();
        assert!(r.at_nodes[0].is_zero());
        let expected = 1f64.sin() / (0.1 * PI.sqrt());
        assert!((r.at_nodes[1].value(0.0).unwrap().re - expected).abs() < 1e-12);
        let k = TimeCurve::constant(DistributionExpr::catalog(CatalogSmooth::gaussian(0.0, 1.0)));
        let r =
            regularize_curve(&k, &pair, &EpsilonScale::Identity, 0.1, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.at_nodes[0], r.at_nodes[2]);
    }
}
