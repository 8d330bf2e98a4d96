//! Adaptive Gauss-Kronrod quadrature and Gauss-Legendre rules.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct QuadResult {
    pub value: Vec<Complex64>,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: Vec<Complex64>,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize, buf: &mut [Complex64]) -> Segment
where
    F: Fn(f64, &mut [Complex64]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![Complex64::new(0.0, 0.0); dim];
    let mut g = vec![Complex64::new(0.0, 0.0); dim];
    f(c, buf);
    for d in 0..dim {
        k[d] += buf[d] * WGK[7];
        g[d] += buf[d] * WG[3];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        for x in [c - dx, c + dx] {
            f(x, buf);
            for d in 0..dim {
                k[d] += buf[d] * WGK[j];
                if j % 2 == 1 {
                    g[d] += buf[d] * WG[j / 2];
                }
            }
        }
    }
    let mut err = 0.0f64;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).norm());
    }
    Segment {
        a,
        b,
        value: k,
        error: err,
    }
}

/// Integrates a vector-valued function over `[a, b]`, with optional interior
/// breakpoints. Infinite endpoints are mapped onto finite intervals.
pub fn integrate_vec<F>(
    f: F,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64, &mut [Complex64]),
{
    integrate_dyn(&f, dim, a, b, breakpoints, opts)
}

type Integrand<'a> = &'a dyn Fn(f64, &mut [Complex64]);

fn integrate_dyn(
    f: Integrand,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if a.is_infinite() || b.is_infinite() {
        return integrate_infinite(f, dim, a, b, breakpoints, opts);
    }
    let mut pts = vec![a];
    let (lo, hi) = (a.min(b), a.max(b));
    let mut inner: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| *p > lo && *p < hi)
        .collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    if b < a {
        inner.reverse();
    }
    pts.extend(inner);
    pts.push(b);
    integrate_segments(&f, dim, &pts, opts)
}

fn integrate_segments<F>(f: &F, dim: usize, pts: &[f64], opts: QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64, &mut [Complex64]),
{
    let mut buf = vec![Complex64::new(0.0, 0.0); dim];
    let mut heap = BinaryHeap::new();
    let mut total = vec![Complex64::new(0.0, 0.0); dim];
    let mut err = 0.0;
    for w in pts.windows(2) {
        if w[0] != w[1] {
            let s = gk15(f, w[0], w[1], dim, &mut buf);
            for d in 0..dim {
                total[d] += s.value[d];
            }
            err += s.error;
            heap.push(s);
        }
    }
    let mut count = heap.len();
    let mut since_resum = 0usize;
    loop {
        if since_resum >= 256 {
            // running sums drift; refresh them from the segments
            since_resum = 0;
            total.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            err = 0.0;
            for s in heap.iter() {
                for d in 0..dim {
                    total[d] += s.value[d];
                }
                err += s.error;
            }
        }
        let tol = opts.abs_tol.max(opts.rel_tol * norm(&total));
        if err <= tol || heap.is_empty() {
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: count,
            });
        }
        let worst = heap.pop().expect("non-empty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if count >= opts.max_intervals || mid == worst.a || mid == worst.b {
            if err <= 10.0 * tol {
                return Ok(QuadResult {
                    value: total,
                    error: err,
                    intervals: count,
                });
            }
            return Err(Error::Quadrature {
                estimated: err,
                tolerance: tol,
            });
        }
        let left = gk15(f, worst.a, mid, dim, &mut buf);
        let right = gk15(f, mid, worst.b, dim, &mut buf);
        for d in 0..dim {
            total[d] += left.value[d] + right.value[d] - worst.value[d];
        }
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        count += 1;
        since_resum += 1;
    }
}

fn integrate_infinite(
    f: Integrand,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    // Split at a finite anchor, then map each half-line with x = p + t/(1-t).
    let mut bp: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite())
        .collect();
    bp.sort_by(|x, y| x.total_cmp(y));
    let sign = if a > b { -1.0 } else { 1.0 };
    let (lo, hi) = (a.min(b), a.max(b));
    let (left, right) = match (lo.is_infinite(), hi.is_infinite()) {
        (true, true) => {
            let l = bp.first().copied().unwrap_or(0.0);
            let r = bp.last().copied().unwrap_or(0.0);
            (Some(l), Some(r))
        }
        (true, false) => (Some(bp.first().copied().unwrap_or(hi).min(hi)), None),
        (false, true) => (None, Some(bp.last().copied().unwrap_or(lo).max(lo))),
        _ => unreachable!(),
    };
    let mut value = vec![Complex64::new(0.0, 0.0); dim];
    let mut error = 0.0;
    let mut intervals = 0;
    let mut add = |r: QuadResult| {
        for d in 0..dim {
            value[d] += r.value[d] * sign;
        }
        error += r.error;
        intervals += r.intervals;
    };
    let mid_lo = left.unwrap_or(lo);
    let mid_hi = right.unwrap_or(hi);
    if mid_hi > mid_lo {
        add(integrate_dyn(f, dim, mid_lo, mid_hi, &bp, opts)?);
    }
    if let Some(p) = right {
        let g = |t: f64, out: &mut [Complex64]| {
            let s = 1.0 - t;
            let x = p + t / s;
            f(x, out);
            let jac = 1.0 / (s * s);
            for o in out.iter_mut() {
                *o *= jac;
            }
        };
        add(integrate_segments(&g, dim, &[0.0, 0.5, 1.0], opts)?);
    }
    if let Some(p) = left {
        let g = |t: f64, out: &mut [Complex64]| {
            let s = 1.0 - t;
            let x = p - t / s;
            f(x, out);
            let jac = 1.0 / (s * s);
            for o in out.iter_mut() {
                *o *= jac;
            }
        };
        add(integrate_segments(&g, dim, &[0.0, 0.5, 1.0], opts)?);
    }
    Ok(QuadResult {
        value,
        error,
        intervals,
    })
}

/// Scalar convenience wrapper over [`integrate_vec`].
pub fn integrate<F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: QuadOptions,
) -> Result<(Complex64, f64)>
where
    F: Fn(f64) -> Complex64,
{
    let r = integrate_vec(|x, out| out[0] = f(x), 1, a, b, breakpoints, opts)?;
    Ok((r.value[0], r.error))
}

pub fn integrate_real<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let (v, e) = integrate(|x| Complex64::new(f(x), 0.0), a, b, &[], opts)?;
    Ok((v.re, e))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_over_real_line() {
        let (v, _) = integrate_real(
            |x| (-x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            QuadOptions::default(),
        )
        .unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn oscillatory_with_breakpoints() {
        let (v, _) = integrate(
            |x| Complex64::new(0.0, 30.0 * x).exp(),
            0.0,
            1.0,
            &[0.5],
            QuadOptions::default(),
        )
        .unwrap();
        let exact = (Complex64::new(0.0, 30.0).exp() - 1.0) / Complex64::new(0.0, 30.0);
        assert!((v - exact).norm() < 1e-11);
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let (v, _) = integrate_real(|x| x * x, 1.0, 0.0, QuadOptions::default()).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-14);
        let (w, _) =
            integrate_real(|x| (-x).exp(), f64::INFINITY, 0.0, QuadOptions::default()).unwrap();
        assert!((w + 1.0).abs() < 1e-10);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reports_failure_on_nonintegrable_singularity() {
        let opts = QuadOptions {
            max_intervals: 50,
            ..Default::default()
        };
        assert!(integrate_real(|x| 1.0 / x, 0.0, 1.0, opts).is_err());
    }
}
