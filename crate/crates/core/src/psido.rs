//! Quantization `p(x, D) u(x) = int e^{i x xi} p(x, xi) u_hat(xi) dxi` on a grid,
//! weight conjugation of the coefficient set and probes of the standard
//! symbol-calculus estimates.

use crate::dist_catalog::DistributionExpr;
use crate::error::{Error, Result};
use crate::gausspoly::{test_family, GaussPoly, TEST_FAMILY_VERSION};
use crate::grid_field::{
    fft_in_place, ifft_in_place, weight_multiply, weighted_sobolev_norm, Field, Grid,
};
use crate::pde_solver::{rhs, CoefficientSet, Forcing};
use crate::smooth::SmoothFunction;
use crate::taylor::Taylor;
use crate::time_curve::{TimeCurve, TimeProfile};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// `d^derivative/dxi^derivative [ xi^power <xi>^bracket |xi|^(abs) ]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XiFactor {
    pub power: u32,
    pub bracket: f64,
    pub abs: bool,
    pub derivative: u32,
}

impl XiFactor {
    pub fn one() -> Self {
        Self::default()
    }

    pub fn power(power: u32) -> Self {
        XiFactor {
            power,
            ..Default::default()
        }
    }

    pub fn bracket(m: f64) -> Self {
        XiFactor {
            bracket: m,
            ..Default::default()
        }
    }

    pub fn abs() -> Self {
        XiFactor {
            abs: true,
            ..Default::default()
        }
    }

    pub fn is_one(&self) -> bool {
        self.power == 0 && self.bracket == 0.0 && !self.abs && self.derivative == 0
    }

    pub fn differentiated(mut self, k: u32) -> Self {
        self.derivative += k;
        self
    }

    /// Polynomial in `xi` with derivative order above the degree.
    pub fn vanishes(&self) -> bool {
        self.bracket == 0.0 && !self.abs && self.derivative > self.power
    }

    fn base_jet(&self, xi: f64, order: usize) -> Taylor {
        let v = Taylor::variable(xi, order);
        let mut out = Taylor::constant(ONE, order);
        if self.power > 0 {
            out = &out * &v.powi(self.power);
        }
        if self.bracket != 0.0 {
            let b = &Taylor::constant(ONE, order) + &(&v * &v);
            out = &out * &b.powf(self.bracket / 2.0);
        }
        if self.abs {
            let s = if xi < 0.0 { -1.0 } else { 1.0 };
            out = &out * &v.scale_re(s);
        }
        out
    }

    pub fn eval(&self, xi: f64) -> Complex64 {
        if self.vanishes() {
            return ZERO;
        }
        let d = self.derivative as usize;
        self.base_jet(xi, d).derivative(d)
    }

    /// `d^k/dxi^k` of this factor at `xi`.
    pub fn derivative_at(&self, xi: f64, k: usize) -> Complex64 {
        self.differentiated(k as u32).eval(xi)
    }
}

/// `a(x) prod_j b_j(xi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolTerm {
    pub x: SmoothFunction,
    pub xi: Vec<XiFactor>,
}

impl SymbolTerm {
    pub fn xi_value(&self, xi: f64) -> Complex64 {
        self.xi.iter().map(|f| f.eval(xi)).product()
    }

    pub fn is_x_independent(&self) -> bool {
        matches!(self.x, SmoothFunction::Constant(_))
    }

    pub fn is_xi_independent(&self) -> bool {
        self.xi.iter().all(|f| f.is_one())
    }

    pub fn is_zero(&self) -> bool {
        self.x.is_zero() || self.xi.iter().any(|f| f.vanishes())
    }

    /// `d^k/dxi^k` of the `xi` part by the Leibniz rule, as weighted products.
    fn xi_derivative(&self, k: u32) -> Vec<(f64, Vec<XiFactor>)> {
        fn split(factors: &[XiFactor], k: u32) -> Vec<(f64, Vec<XiFactor>)> {
            match factors {
                [] if k == 0 => vec![(1.0, Vec::new())],
                [] => Vec::new(),
                [only] => vec![(1.0, vec![only.differentiated(k)])],
                [head, tail @ ..] => {
                    let mut out = Vec::new();
                    for j in 0..=k {
                        for (m, mut v) in split(tail, k - j) {
                            v.insert(0, head.differentiated(j));
                            out.push((binom(k, j) as f64 * m, v));
                        }
                    }
                    out
                }
            }
        }
        split(&self.xi, k)
    }
}

fn binom(n: u32, k: u32) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Separable symbol `p(x, xi) = sum_k a_k(x) b_k(xi)` of order `m`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolSpec {
    pub terms: Vec<SymbolTerm>,
    pub order: f64,
}

impl SymbolSpec {
    pub fn zero() -> Self {
        SymbolSpec {
            terms: Vec::new(),
            order: 0.0,
        }
    }

    pub fn term(x: SmoothFunction, xi: XiFactor, order: f64) -> Self {
        SymbolSpec {
            terms: vec![SymbolTerm { x, xi: vec![xi] }],
            order,
        }
    }

    /// `<xi>^m`.
    pub fn bessel(m: f64) -> Self {
        Self::term(SmoothFunction::constant(1.0), XiFactor::bracket(m), m)
    }

    /// `xi^j`.
    pub fn xi_power(j: u32) -> Self {
        Self::term(SmoothFunction::constant(1.0), XiFactor::power(j), j as f64)
    }

    /// `a(x)`.
    pub fn multiplication(a: SmoothFunction) -> Self {
        Self::term(a, XiFactor::one(), 0.0)
    }

    pub fn plus(mut self, other: SymbolSpec) -> Self {
        self.order = self.order.max(other.order);
        self.terms.extend(other.terms);
        self
    }

    pub fn eval(&self, x: f64, xi: f64) -> Result<Complex64> {
        let mut acc = ZERO;
        for t in &self.terms {
            acc += t.x.value(x)? * t.xi_value(xi);
        }
        Ok(acc)
    }

    pub fn is_x_independent(&self) -> bool {
        self.terms.iter().all(|t| t.is_x_independent())
    }

    pub fn is_xi_independent(&self) -> bool {
        self.terms.iter().all(|t| t.is_xi_independent())
    }

    /// `sum_{alpha < n} (1/alpha!) d_xi^alpha p1 D_x^alpha p2`.
    pub fn composition_expansion(p1: &SymbolSpec, p2: &SymbolSpec, n: u32) -> SymbolSpec {
        let mut terms = Vec::new();
        let mut fact = 1.0f64;
        for alpha in 0..n {
            if alpha > 0 {
                fact *= alpha as f64;
            }
            // D^alpha = (-i)^alpha d^alpha
            let c = (-I).powu(alpha) / fact;
            for a in &p1.terms {
                for (mult, xi_part) in a.xi_derivative(alpha) {
                    if xi_part.iter().any(|f| f.vanishes()) {
                        continue;
                    }
                    for b in &p2.terms {
                        let x =
                            a.x.clone()
                                .times(b.x.clone().derivative(alpha))
                                .scaled(c * mult);
                        if x.is_zero() {
                            continue;
                        }
                        let mut xi = xi_part.clone();
                        xi.extend(b.xi.iter().copied());
                        terms.push(SymbolTerm { x, xi });
                    }
                }
            }
        }
        SymbolSpec {
            terms,
            order: p1.order + p2.order,
        }
    }
}

/// Serializable symbol description used by configs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub terms: Vec<SymbolTermConfig>,
    pub order: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolTermConfig {
    /// Smooth `x` factor (defaults to `1`).
    #[serde(default)]
    pub x: Option<DistributionExpr>,
    /// Further smooth factors multiplied into `x`.
    #[serde(default)]
    pub times: Vec<DistributionExpr>,
    #[serde(default)]
    pub xi: Vec<XiFactor>,
}

impl SymbolConfig {
    pub fn build(&self) -> Result<SymbolSpec> {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let smooth = |e: &DistributionExpr| {
                    e.validate()?;
                    e.as_smooth().ok_or_else(|| {
                        Error::Config(format!("symbol x-factor must be smooth, got {e:?}"))
                    })
                };
                let mut x = match &t.x {
                    None => SmoothFunction::constant(1.0),
                    Some(e) => smooth(e)?,
                };
                for e in &t.times {
                    x = x.times(smooth(e)?);
                }
                Ok(SymbolTerm {
                    x,
                    xi: t.xi.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SymbolSpec {
            terms,
            order: self.order,
        })
    }
}

fn check_grid(u: &Field) -> Result<()> {
    u.grid.validate()
}

/// `p(x, D) u` through the separable structure: `sum_k a_k(x) [b_k(D) u](x)`.
pub fn quantize(p: &SymbolSpec, u: &Field) -> Result<Field> {
    check_grid(u)?;
    let grid = u.grid;
    let n = grid.points;
    let freqs = grid.frequencies();
    let mut u_hat = u.values.clone();
    fft_in_place(&mut u_hat);
    let mut out = vec![ZERO; n];
    for term in &p.terms {
        if term.is_zero() {
            continue;
        }
        let bu: Vec<Complex64> = if term.is_xi_independent() {
            u.values.clone()
        } else {
            let mut v: Vec<Complex64> = u_hat
                .iter()
                .zip(&freqs)
                .map(|(c, xi)| c * term.xi_value(*xi))
                .collect();
            ifft_in_place(&mut v);
            v
        };
        match &term.x {
            SmoothFunction::Constant(c) => {
                for (o, b) in out.iter_mut().zip(&bu) {
                    *o += c * b;
                }
            }
            a => {
                let av = a.sample(grid)?;
                for i in 0..n {
                    out[i] += av.values[i] * bu[i];
                }
            }
        }
    }
    Field::new(grid, out)
}

/// Direct `O(N^2)` evaluation of `sum_k e^{i x_j xi_k} p(x_j, xi_k) u_hat_k`.
pub fn quantize_direct(p: &SymbolSpec, u: &Field) -> Result<Field> {
    check_grid(u)?;
    let grid = u.grid;
    let n = grid.points;
    let mut u_hat = u.values.clone();
    fft_in_place(&mut u_hat);
    let freqs = grid.frequencies();
    let a: Vec<Vec<Complex64>> = p
        .terms
        .iter()
        .map(|t| Ok(t.x.sample(grid)?.values))
        .collect::<Result<_>>()?;
    let b: Vec<Vec<Complex64>> = p
        .terms
        .iter()
        .map(|t| freqs.iter().map(|xi| t.xi_value(*xi)).collect())
        .collect();
    // phases relative to the left end of the grid, matching the transform
    let twiddle: Vec<Complex64> = (0..n)
        .map(|m| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / n as f64))
        .collect();
    let scale = 1.0 / (n as f64).sqrt();
    let values: Vec<Complex64> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut acc = ZERO;
            for k in 0..n {
                let mut pk = ZERO;
                for (ak, bk) in a.iter().zip(&b) {
                    pk += ak[j] * bk[k];
                }
                acc += twiddle[(j * k) % n] * pk * u_hat[k];
            }
            acc * scale
        })
        .collect();
    Field::new(grid, values)
}

/// Coefficients of `<x>^s S <x>^{-s}`.
pub fn conjugated_coefficients(coeffs: &CoefficientSet, s: u32) -> CoefficientSet {
    if s == 0 {
        return coeffs.clone();
    }
    let sf = s as f64;
    let w = SmoothFunction::Bracket {
        x_power: 1,
        exponent: -2.0,
    };
    let mut c1 = coeffs.c1.clone();
    c1.push(
        TimeProfile::constant(),
        w.clone().scaled(Complex64::new(0.0, 2.0 * sf)),
    );
    let mut c0 = coeffs.c0.clone();
    for term in &coeffs.c1.terms {
        if term.value.is_zero() {
            continue;
        }
        c0.push(
            term.profile.clone(),
            w.clone()
                .times(term.value.clone())
                .scaled(Complex64::new(0.0, sf)),
        );
    }
    let potential = SmoothFunction::Bracket {
        x_power: 0,
        exponent: -2.0,
    }
    .scaled(Complex64::new(sf, 0.0))
    .plus(
        SmoothFunction::Bracket {
            x_power: 2,
            exponent: -4.0,
        }
        .scaled(Complex64::new(-sf * (sf + 2.0), 0.0)),
    );
    c0.push(TimeProfile::constant(), potential);
    CoefficientSet {
        c1,
        c0,
        is_regular: coeffs.is_regular,
        eps: coeffs.eps,
        omega: coeffs.omega,
    }
}

/// Spatial part `D_x^2 v + c1 D_x v + c0 v` at time `t`.
pub fn spatial_operator(coeffs: &CoefficientSet, t: f64, v: &Field) -> Result<Field> {
    let sampled = coeffs.sample(v.grid)?;
    // rhs = -i P v without forcing
    Ok(rhs(v, t, &sampled, &Forcing::Zero, false)?.scale(I))
}

/// Relative `L^2` mismatch between `S_s(<x>^s v)` and `<x>^s S v` at time `t`.
pub fn conjugation_identity_error(
    coeffs: &CoefficientSet,
    s: u32,
    t: f64,
    v: &Field,
) -> Result<f64> {
    let conj = conjugated_coefficients(coeffs, s);
    let lhs = spatial_operator(&conj, t, &weight_multiply(v, s as f64))?;
    let rhs_v = weight_multiply(&spatial_operator(coeffs, t, v)?, s as f64);
    let denom = rhs_v.l2_norm();
    let diff = lhs.sub(&rhs_v)?.l2_norm();
    Ok(if denom > 0.0 { diff / denom } else { diff })
}

/// Value at a grid together with its value at double resolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub probe: String,
    pub family_version: String,
    pub value: f64,
    pub refined: f64,
    pub relative_change: f64,
    pub per_member: Vec<f64>,
}

impl ProbeResult {
    pub fn refinement_stable(&self, tol: f64) -> bool {
        self.relative_change < tol
    }
}

fn refined(grid: Grid) -> Grid {
    Grid {
        half_width: grid.half_width,
        points: grid.points * 2,
    }
}

fn family_fields(grid: Grid) -> Vec<Field> {
    test_family()
        .iter()
        .map(|g: &GaussPoly| Field::from_fn(grid, |x| g.eval(x)))
        .collect()
}

fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn two_resolution<F>(name: &str, grid: Grid, per_member: F, reduce_max: bool) -> Result<ProbeResult>
where
    F: Fn(&Field) -> Result<f64> + Sync,
{
    let eval =
        |g: Grid| -> Result<Vec<f64>> { family_fields(g).par_iter().map(&per_member).collect() };
    let coarse = eval(grid)?;
    let fine = eval(refined(grid))?;
    let pick = |v: &[f64]| {
        if reduce_max {
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            v.iter().copied().fold(f64::INFINITY, f64::min)
        }
    };
    let (a, b) = (pick(&coarse), pick(&fine));
    Ok(ProbeResult {
        probe: name.into(),
        family_version: TEST_FAMILY_VERSION.into(),
        value: a,
        refined: b,
        relative_change: relative_change(a, b),
        per_member: coarse,
    })
}

/// `max_u ||op(p1) op(p2) u - op(q_N) u||_{L^2} / ||u||_{L^2}` over the test family.
pub fn composition_residual(
    p1: &SymbolSpec,
    p2: &SymbolSpec,
    n: u32,
    grid: Grid,
) -> Result<ProbeResult> {
    let q = SymbolSpec::composition_expansion(p1, p2, n);
    two_resolution(
        &format!("composition(N={n})"),
        grid,
        |u| {
            let lhs = quantize(p1, &quantize(p2, u)?)?;
            let r = quantize(&q, u)?;
            Ok(lhs.sub(&r)?.l2_norm() / u.l2_norm())
        },
        true,
    )
}

/// `max_u ||p(x, D) u||_{H^s} / ||u||_{H^{s+m}}` over the test family.
pub fn cv_bound_probe(p: &SymbolSpec, s: f64, grid: Grid) -> Result<ProbeResult> {
    two_resolution(
        &format!("cv_bound(s={s}, m={})", p.order),
        grid,
        |u| {
            let pu = quantize(p, u)?;
            Ok(weighted_sobolev_norm(&pu, s, 0.0).value
                / weighted_sobolev_norm(u, s + p.order, 0.0).value)
        },
        true,
    )
}

/// `min_u Re <p(x, D) u, u> / ||u||^2` over the test family.
pub fn garding_probe(p: &SymbolSpec, grid: Grid) -> Result<ProbeResult> {
    two_resolution(
        "garding",
        grid,
        |u| {
            let pu = quantize(p, u)?;
            let nn = u.l2_norm().powi(2);
            Ok(u.inner(&pu)?.re / nn)
        },
        false,
    )
}

/// Symbol seminorms `|p|_l = max_{a + b <= l} sup |d_xi^a d_x^b p| <xi>^{-(m - a)}`
/// for `l = 0..=max_l`, by central finite differences on grid samples.
pub fn symbol_seminorms(p: &SymbolSpec, max_l: u32, grid: Grid) -> Result<Vec<f64>> {
    const H: f64 = 1e-2;
    let stride = (grid.points / 256).max(1);
    let xs: Vec<f64> = grid.nodes().into_iter().step_by(stride).collect();
    let xis: Vec<f64> = {
        let mut f = grid.frequencies();
        f.sort_by(|a, b| a.total_cmp(b));
        f.into_iter().step_by(stride).collect()
    };
    // central difference weights for derivative order k with step H
    let fd = |k: u32, f: &dyn Fn(f64) -> Result<Complex64>, at: f64| -> Result<Complex64> {
        let mut acc = ZERO;
        for j in 0..=k {
            let c = binom(k, j) as f64 * if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += c * f(at + (k as f64 / 2.0 - j as f64) * H)?;
        }
        Ok(acc / H.powi(k as i32))
    };
    let mut table = vec![0.0f64; max_l as usize + 1];
    {
        for a in 0..=max_l {
            for b in 0..=(max_l - a) {
                // values d_xi^a d_x^b p on the sample grid
                let xpart: Vec<Vec<Complex64>> = p
                    .terms
                    .iter()
                    .map(|t| {
                        xs.iter()
                            .map(|x| fd(b, &|y| t.x.value(y), *x))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?;
                let xipart: Vec<Vec<Complex64>> = p
                    .terms
                    .iter()
                    .map(|t| {
                        xis.iter()
                            .map(|xi| fd(a, &|e| Ok(t.xi_value(e)), *xi))
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<_>>()?;
                let mut sup = 0.0f64;
                for (j, xi) in xis.iter().enumerate() {
                    let w = (1.0 + xi * xi).powf(-(p.order - a as f64) / 2.0);
                    for i in 0..xs.len() {
                        let v: Complex64 =
                            (0..p.terms.len()).map(|k| xpart[k][i] * xipart[k][j]).sum();
                        sup = sup.max(v.norm() * w);
                    }
                }
                let l = (a + b) as usize;
                for entry in table.iter_mut().skip(l) {
                    *entry = entry.max(sup);
                }
            }
        }
    }
    Ok(table)
}

/// Bundled coefficient sets used by the conjugation check.
pub fn conjugation_test_sets() -> Vec<(String, CoefficientSet)> {
    use crate::dist_catalog::{CatalogName, CatalogSmooth};
    let gauss = SmoothFunction::Catalog(CatalogSmooth::gaussian(0.0, 1.0));
    let sech = SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0));
    let odd = SmoothFunction::Catalog(
        CatalogSmooth::new(CatalogName::LorentzianOdd, vec![0.0, 1.0]).expect("catalog parameters"),
    );
    let mut moving = CoefficientSet::new(
        TimeCurve::with_profile(
            TimeProfile::Sine {
                frequency: 2.0,
                phase: 0.3,
            },
            gauss.clone().scaled(I),
        ),
        TimeCurve::constant(sech.clone()),
    );
    moving
        .c0
        .push(TimeProfile::Phase { frequency: 1.0 }, gauss.clone());
    vec![
        ("free".into(), CoefficientSet::zero()),
        (
            "gaussian_first_order".into(),
            CoefficientSet::time_independent(gauss.scaled(I), sech),
        ),
        (
            "decaying_imaginary".into(),
            CoefficientSet::time_independent(odd.scaled(I), SmoothFunction::Zero),
        ),
        ("time_dependent".into(), moving),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_catalog::CatalogSmooth;
    use crate::grid_field::{bessel_potential, derivative};

    fn grid() -> Grid {
        Grid::new(20.0, 512).unwrap()
    }

    fn sample_u(grid: Grid) -> Field {
        Field::from_fn(grid, |x| {
            (-(x - 0.5) * (x - 0.5)).exp() * Complex64::new(1.0 + 0.2 * x, -0.3 * x)
        })
    }

    fn sech() -> SmoothFunction {
        SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0))
    }

    #[test]
    fn quantize_fast_paths() {
        let g = grid();
        let u = sample_u(g);
        let b = quantize(&SymbolSpec::bessel(1.5), &u).unwrap();
        let d = bessel_potential(&u, 1.5).sub(&b).unwrap().max_abs();
        assert!(d < 1e-12);
        let a = quantize(&SymbolSpec::multiplication(sech()), &u).unwrap();
        let expect = u.mul(&sech().sample(g).unwrap()).unwrap();
        assert!(a.sub(&expect).unwrap().max_abs() < 1e-15);
        let dx = quantize(&SymbolSpec::xi_power(1), &u).unwrap();
        let expect = derivative(&u, 1).scale(-I);
        assert!(dx.sub(&expect).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn direct_matches_separable() {
        let g = Grid::new(15.0, 128).unwrap();
        let u = sample_u(g);
        let p = SymbolSpec::term(sech(), XiFactor::bracket(1.0), 1.0).plus(SymbolSpec::xi_power(2));
        let a = quantize(&p, &u).unwrap();
        let b = quantize_direct(&p, &u).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-11 * a.max_abs());
    }

    #[test]
    fn conjugation_s1_free() {
        let c = conjugated_coefficients(&CoefficientSet::zero(), 1);
        for x in [-2.0, 0.3, 1.7] {
            let b = 1.0 + x * x;
            let c1 = c.c1.terms[0].value.value(x).unwrap();
            assert!((c1 - I * 2.0 * x / b).norm() < 1e-15);
            let c0 = c.c0.terms[0].value.value(x).unwrap();
            assert!((c0.re - (-3.0 * x * x / (b * b) + 1.0 / b)).abs() < 1e-15);
        }
        assert_eq!(
            conjugated_coefficients(&CoefficientSet::zero(), 0)
                .c1
                .terms
                .len(),
            0
        );
    }

    #[test]
    fn conjugation_identity() {
        let g = Grid::new(20.0, 1024).unwrap();
        let v = Field::from_real_fn(g, |x| (-x * x).exp());
        for (name, set) in conjugation_test_sets() {
            for s in 0..=3 {
                for t in [0.0, 0.4] {
                    let e = conjugation_identity_error(&set, s, t, &v).unwrap();
                    assert!(e < 1e-8, "{name} s={s} t={t}: {e}");
                }
            }
        }
    }

    #[test]
    fn terminating_compositions() {
        let g = grid();
        let a = SymbolSpec::multiplication(sech());
        for (p1, n) in [(SymbolSpec::xi_power(1), 2), (SymbolSpec::xi_power(2), 3)] {
            let r = composition_residual(&p1, &a, n, g).unwrap();
            assert!(r.value < 1e-10, "{r:?}");
        }
    }

    #[test]
    fn bracket_composition_improves() {
        let g = grid();
        let a = SymbolSpec::multiplication(sech());
        let p1 = SymbolSpec::bessel(1.0);
        let r: Vec<f64> = (1..=3)
            .map(|n| composition_residual(&p1, &a, n, g).unwrap().value)
            .collect();
        assert!(r[0] > r[1] && r[1] > r[2], "{r:?}");
    }

    #[test]
    fn cv_and_garding() {
        let g = grid();
        let r = cv_bound_probe(&SymbolSpec::bessel(1.0), 0.0, g).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12 && (r.refined - 1.0).abs() < 1e-12);
        let a = cv_bound_probe(&SymbolSpec::multiplication(sech()), 0.0, g).unwrap();
        assert!(a.value <= 1.0 + 1e-12);
        let c = cv_bound_probe(
            &SymbolSpec::term(sech(), XiFactor::bracket(1.0), 1.0),
            0.0,
            g,
        )
        .unwrap();
        assert!(c.refinement_stable(0.05), "{c:?}");
        let gp = garding_probe(&SymbolSpec::bessel(1.0), g).unwrap();
        assert!(gp.value >= 0.0);
        let sech2 = sech().times(sech());
        let gq = garding_probe(&SymbolSpec::term(sech2, XiFactor::abs(), 1.0), g).unwrap();
        assert!(gq.value.is_finite() && gq.refinement_stable(0.05), "{gq:?}");
        let z = garding_probe(&SymbolSpec::zero(), g).unwrap();
        assert_eq!(z.value, 0.0);
    }

    #[test]
    fn seminorms_of_bracket() {
        let t =
            symbol_seminorms(&SymbolSpec::bessel(1.0), 4, Grid::new(20.0, 256).unwrap()).unwrap();
        assert!((t[0] - 1.0).abs() < 1e-12);
        assert!(t.windows(2).all(|w| w[0] <= w[1]));
        assert!(t[4].is_finite() && t[4] < 10.0);
    }
}
