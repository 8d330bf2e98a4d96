//! Integrating-factor RK4 for `D_t u + D_x^2 u + c1 D_x u + c0 u = f`,
//! `u(0) = g`, on a periodic grid. In evolution form
//! `u_t = i u_xx - c1 u_x - i c0 u + i f`.

use crate::error::{Error, Result};
use crate::grid_field::{
    dealias_spectral, fft_in_place, ifft_in_place, spectral_derivative_in_place,
    weighted_sobolev_norm, Field, Grid,
};
use crate::smooth::SmoothFunction;
use crate::time_curve::{TimeCurve, TimeProfile};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Blow-up guard: abort once `||u|| > BLOWUP_FACTOR ||g||`.
pub const BLOWUP_FACTOR: f64 = 1e12;

/// Coefficients `c1(t, x)` and `c0(t, x)` as closed-form curves.
#[derive(Clone, Debug, Default)]
pub struct CoefficientSet {
    pub c1: TimeCurve<SmoothFunction>,
    pub c0: TimeCurve<SmoothFunction>,
    /// Built from Schwartz catalog members without mollification.
    pub is_regular: bool,
    pub eps: Option<f64>,
    pub omega: Option<f64>,
}

impl CoefficientSet {
    pub fn zero() -> Self {
        CoefficientSet {
            is_regular: true,
            ..Default::default()
        }
    }

    pub fn new(c1: TimeCurve<SmoothFunction>, c0: TimeCurve<SmoothFunction>) -> Self {
        CoefficientSet {
            c1,
            c0,
            is_regular: false,
            eps: None,
            omega: None,
        }
    }

    pub fn time_independent(c1: SmoothFunction, c0: SmoothFunction) -> Self {
        Self::new(TimeCurve::constant(c1), TimeCurve::constant(c0))
    }

    pub fn constant_potential(lambda: f64) -> Self {
        let mut c = Self::time_independent(SmoothFunction::Zero, SmoothFunction::constant(lambda));
        c.is_regular = true;
        c
    }

    pub fn regular(mut self, flag: bool) -> Self {
        self.is_regular = flag;
        self
    }

    pub fn sample(&self, grid: Grid) -> Result<SampledCoefficients> {
        self.c1.validate()?;
        self.c0.validate()?;
        Ok(SampledCoefficients {
            grid,
            c1: SampledCurve::from_smooth(&self.c1, grid)?,
            c0: SampledCurve::from_smooth(&self.c0, grid)?,
        })
    }
}

/// A curve `sum_k p_k(t) v_k` with the spatial parts sampled on a grid.
#[derive(Clone, Debug, Default)]
pub struct SampledCurve {
    pub terms: Vec<(TimeProfile, Vec<Complex64>)>,
}

impl SampledCurve {
    pub fn from_smooth(c: &TimeCurve<SmoothFunction>, grid: Grid) -> Result<Self> {
        let mut terms = Vec::new();
        for term in &c.terms {
            if term.value.is_zero() {
                continue;
            }
            terms.push((term.profile.clone(), term.value.sample(grid)?.values));
        }
        Ok(SampledCurve { terms })
    }

    pub fn from_fields(c: &TimeCurve<Field>, grid: Grid) -> Result<Self> {
        c.validate()?;
        let mut terms = Vec::new();
        for term in &c.terms {
            if term.value.grid != grid {
                return Err(Error::GridMismatch(format!(
                    "{:?} vs {:?}",
                    term.value.grid, grid
                )));
            }
            if term.value.values.iter().all(|z| *z == ZERO) {
                continue;
            }
            terms.push((term.profile.clone(), term.value.values.clone()));
        }
        Ok(SampledCurve { terms })
    }

    pub fn constant(values: Vec<Complex64>) -> Self {
        SampledCurve {
            terms: vec![(TimeProfile::constant(), values)],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Writes the value at `t` into `out` (overwriting).
    pub fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        out.iter_mut().for_each(|z| *z = ZERO);
        for (p, v) in &self.terms {
            let w = p.eval(t);
            if w == ZERO {
                continue;
            }
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
    }

    pub fn at(&self, t: f64, n: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; n];
        self.eval_into(t, &mut out);
        out
    }

    /// Upper bound of `sup_{t,x} |c(t,x)|`.
    pub fn sup_bound(&self) -> f64 {
        let Some((_, first)) = self.terms.first() else {
            return 0.0;
        };
        (0..first.len())
            .map(|i| {
                self.terms
                    .iter()
                    .map(|(p, v)| p.sup_abs() * v[i].norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        SampledCurve {
            terms: self
                .terms
                .iter()
                .map(|(p, v)| (p.clone(), v.iter().map(|z| z * s).collect()))
                .collect(),
        }
    }

    pub fn plus(&self, other: &SampledCurve) -> Self {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        SampledCurve { terms }
    }
}

#[derive(Clone, Debug)]
pub struct SampledCoefficients {
    pub grid: Grid,
    pub c1: SampledCurve,
    pub c0: SampledCurve,
}

impl SampledCoefficients {
    pub fn zero(grid: Grid) -> Self {
        SampledCoefficients {
            grid,
            c1: SampledCurve::default(),
            c0: SampledCurve::default(),
        }
    }

    /// `sup_{t in times, x} |Im c1(t, x)| <x>`.
    pub fn im_c1_decay_constant(&self, times: &[f64]) -> f64 {
        let n = self.grid.points;
        let mut best = 0.0f64;
        for &t in times {
            let c = self.c1.at(t, n);
            for (i, z) in c.iter().enumerate() {
                let x = self.grid.node(i);
                best = best.max(z.im.abs() * (1.0 + x * x).sqrt());
            }
        }
        best
    }
}

/// Right-hand side `f(t)` as grid values.
#[derive(Clone, Default)]
pub enum Forcing {
    #[default]
    Zero,
    Curve(SampledCurve),
    Custom(Arc<dyn Fn(f64) -> Vec<Complex64> + Send + Sync>),
}

impl std::fmt::Debug for Forcing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Forcing::Zero => write!(f, "Zero"),
            Forcing::Curve(c) => write!(f, "Curve({} terms)", c.terms.len()),
            Forcing::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Curve(c) => c.is_zero(),
            Forcing::Custom(_) => false,
        }
    }

    pub fn at(&self, t: f64, n: usize) -> Option<Vec<Complex64>> {
        match self {
            Forcing::Zero => None,
            Forcing::Curve(c) if c.is_zero() => None,
            Forcing::Curve(c) => Some(c.at(t, n)),
            Forcing::Custom(f) => Some(f(t)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DtPolicy {
    /// `dt <= cfl * dx / max |c1|`.
    pub cfl: f64,
    /// `dt <= T / min_steps`.
    pub min_steps: usize,
    /// Overrides the bound when set (still split evenly between record nodes).
    pub fixed_dt: Option<f64>,
}

impl Default for DtPolicy {
    fn default() -> Self {
        DtPolicy {
            cfl: 0.5,
            min_steps: 64,
            fixed_dt: None,
        }
    }
}

impl DtPolicy {
    pub fn fixed(dt: f64) -> Self {
        DtPolicy {
            fixed_dt: Some(dt),
            ..Default::default()
        }
    }

    pub fn max_dt(&self, t_final: f64, dx: f64, c1_sup: f64) -> Result<f64> {
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::InvalidProblem(format!(
                    "fixed dt must be positive, got {dt}"
                )));
            }
            return Ok(dt);
        }
        if !(self.cfl > 0.0) || self.min_steps == 0 {
            return Err(Error::InvalidProblem(
                "dt policy needs cfl > 0 and min_steps >= 1".into(),
            ));
        }
        let mut dt = t_final / self.min_steps as f64;
        if c1_sup > 0.0 {
            dt = dt.min(self.cfl * dx / c1_sup);
        }
        Ok(dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RecordSpec {
    /// Times at which snapshots and norms are recorded; `0` and `T` are always added.
    pub t_nodes: Vec<f64>,
    /// `(m, M)` pairs of the recorded `H^{m,M}` norms.
    pub norms: Vec<(f64, f64)>,
}

impl Default for RecordSpec {
    fn default() -> Self {
        RecordSpec {
            t_nodes: Vec::new(),
            norms: vec![(0.0, 0.0)],
        }
    }
}

#[derive(Clone, Debug)]
pub struct CauchyProblem {
    pub coeffs: SampledCoefficients,
    pub f: Forcing,
    pub g: Field,
    pub t_final: f64,
    pub dt: DtPolicy,
    pub record: RecordSpec,
    /// 2/3-rule filtering of the variable-coefficient products.
    pub dealias: bool,
}

impl CauchyProblem {
    pub fn new(coeffs: SampledCoefficients, g: Field, t_final: f64) -> Self {
        CauchyProblem {
            coeffs,
            f: Forcing::Zero,
            g,
            t_final,
            dt: DtPolicy::default(),
            record: RecordSpec::default(),
            dealias: true,
        }
    }

    pub fn free(g: Field, t_final: f64) -> Self {
        let grid = g.grid;
        Self::new(SampledCoefficients::zero(grid), g, t_final)
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.f = f;
        self
    }

    pub fn with_dt(mut self, dt: DtPolicy) -> Self {
        self.dt = dt;
        self
    }

    pub fn with_record(mut self, record: RecordSpec) -> Self {
        self.record = record;
        self
    }

    pub fn grid(&self) -> Grid {
        self.g.grid
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidProblem(format!(
                "T must be positive, got {}",
                self.t_final
            )));
        }
        self.grid().validate()?;
        if self.coeffs.grid != self.grid() {
            return Err(Error::GridMismatch(
                "coefficients and data live on different grids".into(),
            ));
        }
        if !self.g.is_finite() {
            return Err(Error::InvalidProblem("initial data is not finite".into()));
        }
        for t in &self.record.t_nodes {
            if !(*t >= 0.0 && *t <= self.t_final) {
                return Err(Error::InvalidProblem(format!(
                    "record node {t} outside [0, T]"
                )));
            }
        }
        Ok(())
    }

    /// Sorted, deduplicated record nodes including `0` and `T`.
    pub fn record_nodes(&self) -> Vec<f64> {
        let mut nodes = self.record.t_nodes.clone();
        nodes.push(0.0);
        nodes.push(self.t_final);
        nodes.sort_by(|a, b| a.total_cmp(b));
        nodes.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * self.t_final);
        nodes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub t: f64,
    pub m: f64,
    pub weight: f64,
    pub value: f64,
    pub decay_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Abort {
    pub t_last: f64,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub t_nodes: Vec<f64>,
    #[serde(skip)]
    pub snapshots: Vec<Field>,
    pub norms: Vec<NormEntry>,
    pub steps: usize,
    pub dt_max: f64,
    pub aborted: Option<Abort>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub manufactured_error: Option<f64>,
}

impl SolveReport {
    pub fn completed(&self) -> bool {
        self.aborted.is_none()
    }

    pub fn final_state(&self) -> Option<&Field> {
        if self.completed() {
            self.snapshots.last()
        } else {
            None
        }
    }

    /// Snapshot at the record node closest to `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        let (k, _) = self
            .t_nodes
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?;
        self.snapshots.get(k)
    }

    pub fn norm(&self, t: f64, m: f64, weight: f64) -> Option<f64> {
        self.norms
            .iter()
            .filter(|e| e.m == m && e.weight == weight)
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
            .map(|e| e.value)
    }
}

/// `-c1 u_x - i c0 u` in Fourier space for a state given in Fourier space.
/// Leaves `out` zero when both coefficients vanish.
pub fn lower_order_hat(
    coeffs: &SampledCoefficients,
    t: f64,
    u_hat: &[Complex64],
    dealias: bool,
    out: &mut [Complex64],
) {
    let grid = coeffs.grid;
    let n = grid.points;
    out.iter_mut().for_each(|z| *z = ZERO);
    if coeffs.c1.is_zero() && coeffs.c0.is_zero() {
        return;
    }
    let mut acc = vec![ZERO; n];
    if !coeffs.c1.is_zero() {
        let c1 = coeffs.c1.at(t, n);
        let mut ux = u_hat.to_vec();
        spectral_derivative_in_place(&mut ux, &grid, 1);
        ifft_in_place(&mut ux);
        for i in 0..n {
            acc[i] -= c1[i] * ux[i];
        }
    }
    if !coeffs.c0.is_zero() {
        let c0 = coeffs.c0.at(t, n);
        let mut u = u_hat.to_vec();
        ifft_in_place(&mut u);
        for i in 0..n {
            acc[i] -= I * c0[i] * u[i];
        }
    }
    fft_in_place(&mut acc);
    if dealias {
        dealias_spectral(&mut acc);
    }
    out.copy_from_slice(&acc);
}

/// `i u_xx - c1 u_x - i c0 u + i f` at time `t`.
pub fn rhs(
    state: &Field,
    t: f64,
    coeffs: &SampledCoefficients,
    f: &Forcing,
    dealias: bool,
) -> Result<Field> {
    if state.grid != coeffs.grid {
        return Err(Error::GridMismatch(
            "state and coefficients on different grids".into(),
        ));
    }
    let grid = state.grid;
    let mut u_hat = state.values.clone();
    fft_in_place(&mut u_hat);
    let mut out = vec![ZERO; grid.points];
    lower_order_hat(coeffs, t, &u_hat, dealias, &mut out);
    for (k, o) in out.iter_mut().enumerate() {
        let xi = grid.frequency(k);
        *o += -I * xi * xi * u_hat[k];
    }
    ifft_in_place(&mut out);
    if let Some(fv) = f.at(t, grid.points) {
        for (o, v) in out.iter_mut().zip(fv) {
            *o += I * v;
        }
    }
    Field::new(grid, out)
}

/// Output of [`integrate_system`].
#[derive(Clone, Debug)]
pub struct SystemTrajectory {
    pub t_nodes: Vec<f64>,
    /// `snapshots[node][component]`, physical space.
    pub snapshots: Vec<Vec<Field>>,
    pub steps: usize,
    pub dt_max: f64,
    pub aborted: Option<Abort>,
}

/// IF-RK4 for a system of components sharing the linear part `i d_x^2`.
///
/// `nonlinear(t, states_hat, out_hat)` returns the remaining part of the
/// right-hand side of every component in Fourier space. `guard(states)`
/// returns `Some(reason)` to abort.
pub fn integrate_system<N, G>(
    grid: Grid,
    initial: Vec<Field>,
    t_nodes: &[f64],
    dt_max: f64,
    nonlinear: N,
    guard: G,
) -> Result<SystemTrajectory>
where
    N: Fn(f64, &[Vec<Complex64>], &mut [Vec<Complex64>]),
    G: Fn(&[Vec<Complex64>]) -> Option<String>,
{
    if t_nodes.is_empty() || t_nodes[0] != 0.0 {
        return Err(Error::InvalidProblem("record nodes must start at 0".into()));
    }
    let comps = initial.len();
    let n = grid.points;
    let mut state: Vec<Vec<Complex64>> = initial
        .iter()
        .map(|f| {
            let mut v = f.values.clone();
            fft_in_place(&mut v);
            v
        })
        .collect();
    let xi2: Vec<f64> = (0..n).map(|k| grid.frequency(k).powi(2)).collect();
    let to_fields = |st: &[Vec<Complex64>]| -> Vec<Field> {
        st.iter()
            .map(|v| {
                let mut w = v.clone();
                ifft_in_place(&mut w);
                Field { grid, values: w }
            })
            .collect()
    };

    let mut snapshots = vec![to_fields(&state)];
    let mut steps = 0usize;
    let zeros = || vec![vec![ZERO; n]; comps];
    let (mut k1, mut k2, mut k3, mut k4) = (zeros(), zeros(), zeros(), zeros());
    let mut tmp = zeros();

    for seg in t_nodes.windows(2) {
        let (ta, tb) = (seg[0], seg[1]);
        let len = tb - ta;
        let m = ((len / dt_max) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = len / m as f64;
        let e1: Vec<Complex64> = xi2
            .iter()
            .map(|q| Complex64::new(0.0, -q * h / 2.0).exp())
            .collect();
        let e2: Vec<Complex64> = e1.iter().map(|z| z * z).collect();
        for step in 0..m {
            let t = ta + h * step as f64;
            nonlinear(t, &state, &mut k1);
            for c in 0..comps {
                for k in 0..n {
                    tmp[c][k] = e1[k] * (state[c][k] + 0.5 * h * k1[c][k]);
                }
            }
            nonlinear(t + 0.5 * h, &tmp, &mut k2);
            for c in 0..comps {
                for k in 0..n {
                    tmp[c][k] = e1[k] * state[c][k] + 0.5 * h * k2[c][k];
                }
            }
            nonlinear(t + 0.5 * h, &tmp, &mut k3);
            for c in 0..comps {
                for k in 0..n {
                    tmp[c][k] = e2[k] * state[c][k] + h * e1[k] * k3[c][k];
                }
            }
            nonlinear(t + h, &tmp, &mut k4);
            for c in 0..comps {
                for k in 0..n {
                    state[c][k] = e2[k] * state[c][k]
                        + h / 6.0
                            * (e2[k] * k1[c][k] + 2.0 * e1[k] * (k2[c][k] + k3[c][k]) + k4[c][k]);
                }
            }
            steps += 1;
            let t_now = t + h;
            let bad = state
                .iter()
                .any(|v| v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()));
            let reason = if bad {
                Some("non-finite state".to_string())
            } else {
                guard(&state)
            };
            if let Some(reason) = reason {
                let done = snapshots.len();
                return Ok(SystemTrajectory {
                    t_nodes: t_nodes[..done].to_vec(),
                    snapshots,
                    steps,
                    dt_max,
                    aborted: Some(Abort {
                        t_last: t_now - h,
                        reason,
                    }),
                });
            }
        }
        snapshots.push(to_fields(&state));
    }
    Ok(SystemTrajectory {
        t_nodes: t_nodes.to_vec(),
        snapshots,
        steps,
        dt_max,
        aborted: None,
    })
}

/// `||v||_{L^2}` of a state given by unitary Fourier coefficients.
pub(crate) fn hat_l2(v: &[Complex64], grid: &Grid) -> f64 {
    (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.dx()).sqrt()
}

/// Integrates the problem from `0` to `T`.
pub fn solve(problem: &CauchyProblem) -> Result<SolveReport> {
    problem.validate()?;
    let grid = problem.grid();
    let n = grid.points;
    let dt_max = problem
        .dt
        .max_dt(problem.t_final, grid.dx(), problem.coeffs.c1.sup_bound())?;
    let nodes = problem.record_nodes();
    let g_norm = problem.g.l2_norm();
    let limit = BLOWUP_FACTOR * g_norm;
    let coeffs = &problem.coeffs;
    let forcing = &problem.f;
    let dealias = problem.dealias;
    let f_hat = |t: f64| -> Option<Vec<Complex64>> {
        forcing.at(t, n).map(|mut v| {
            fft_in_place(&mut v);
            v
        })
    };
    let traj = integrate_system(
        grid,
        vec![problem.g.clone()],
        &nodes,
        dt_max,
        |t, st, out| {
            lower_order_hat(coeffs, t, &st[0], dealias, &mut out[0]);
            if let Some(fh) = f_hat(t) {
                for (o, v) in out[0].iter_mut().zip(fh) {
                    *o += I * v;
                }
            }
        },
        |st| {
            let norm = hat_l2(&st[0], &grid);
            if g_norm > 0.0 && norm > limit {
                Some(format!(
                    "norm {norm:.3e} exceeded {BLOWUP_FACTOR:e} x ||g|| = {limit:.3e}"
                ))
            } else {
                None
            }
        },
    )?;
    let mut norms = Vec::new();
    let mut snapshots = Vec::with_capacity(traj.snapshots.len());
    for (t, snap) in traj.t_nodes.iter().zip(traj.snapshots) {
        let u = snap.into_iter().next().expect("one component");
        for &(m, weight) in &problem.record.norms {
            let tn = weighted_sobolev_norm(&u, m, weight);
            norms.push(NormEntry {
                t: *t,
                m,
                weight,
                value: tn.value,
                decay_ratio: tn.decay_ratio,
            });
        }
        snapshots.push(u);
    }
    Ok(SolveReport {
        t_nodes: traj.t_nodes,
        snapshots,
        norms,
        steps: traj.steps,
        dt_max: traj.dt_max,
        aborted: traj.aborted,
        manufactured_error: None,
    })
}

/// `max_t | ||u(t)||_{L^2} - ||g||_{L^2} |` over the record nodes (at least 16 of them).
pub fn conservation_probe(problem: &CauchyProblem) -> Result<f64> {
    let mut p = problem.clone();
    let t = p.t_final;
    p.record
        .t_nodes
        .extend((1..16).map(|k| t * k as f64 / 16.0));
    let report = solve(&p)?;
    if let Some(a) = &report.aborted {
        return Err(Error::InvalidProblem(format!(
            "solve aborted at t = {}: {}",
            a.t_last, a.reason
        )));
    }
    let g = p.g.l2_norm();
    Ok(report
        .snapshots
        .iter()
        .map(|u| (u.l2_norm() - g).abs())
        .fold(0.0, f64::max))
}

/// A prescribed solution `u*(t, x) = sum_k p_k(t) U_k(x)`.
#[derive(Clone, Debug)]
pub struct Manufactured {
    pub u: TimeCurve<SmoothFunction>,
}

impl Manufactured {
    pub fn new(u: TimeCurve<SmoothFunction>) -> Self {
        Manufactured { u }
    }

    /// `exp(-x^2) exp(i t)`.
    pub fn gaussian_phase() -> Self {
        Self::new(TimeCurve::with_profile(
            TimeProfile::Phase { frequency: 1.0 },
            SmoothFunction::Catalog(crate::dist_catalog::CatalogSmooth::gaussian(0.0, 1.0)),
        ))
    }

    fn sampled(&self, grid: Grid, order: usize) -> Result<Vec<(TimeProfile, Vec<Complex64>)>> {
        self.u
            .terms
            .iter()
            .map(|term| {
                Ok((
                    term.profile.clone(),
                    term.value.sample_derivative(grid, order)?.values,
                ))
            })
            .collect()
    }

    pub fn at(&self, t: f64, grid: Grid) -> Result<Field> {
        let parts = self.sampled(grid, 0)?;
        let mut out = vec![ZERO; grid.points];
        for (p, v) in parts {
            let w = p.eval(t);
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Field::new(grid, out)
    }

    /// `d_t u*` at time `t`.
    pub fn time_derivative(&self, t: f64, grid: Grid) -> Result<Field> {
        let parts = self.sampled(grid, 0)?;
        let mut out = vec![ZERO; grid.points];
        for (p, v) in parts {
            let w = p.eval_derivative(t);
            for (o, x) in out.iter_mut().zip(v) {
                *o += w * x;
            }
        }
        Field::new(grid, out)
    }

    /// `f = S u* = -i u*_t - u*_xx - i c1 u*_x + c0 u*`, evaluated exactly at each `t`.
    pub fn forcing(&self, coeffs: &SampledCoefficients) -> Result<Forcing> {
        let grid = coeffs.grid;
        let n = grid.points;
        let u0 = self.sampled(grid, 0)?;
        let u1 = self.sampled(grid, 1)?;
        let u2 = self.sampled(grid, 2)?;
        let c = coeffs.clone();
        Ok(Forcing::Custom(Arc::new(move |t| {
            let c1 = c.c1.at(t, n);
            let c0 = c.c0.at(t, n);
            let mut out = vec![ZERO; n];
            for k in 0..u0.len() {
                let p = u0[k].0.eval(t);
                let dp = u0[k].0.eval_derivative(t);
                for i in 0..n {
                    out[i] += -I * dp * u0[k].1[i] - p * u2[k].1[i] - I * c1[i] * p * u1[k].1[i]
                        + c0[i] * p * u0[k].1[i];
                }
            }
            out
        })))
    }

    /// Solves with `f = S u*`, `g = u*(0)` and returns the report with the
    /// max-norm error against `u*` over the record nodes.
    pub fn check(
        &self,
        coeffs: &SampledCoefficients,
        t_final: f64,
        dt: DtPolicy,
    ) -> Result<SolveReport> {
        let grid = coeffs.grid;
        let mut p = CauchyProblem::new(coeffs.clone(), self.at(0.0, grid)?, t_final)
            .with_forcing(self.forcing(coeffs)?)
            .with_dt(dt);
        p.record.t_nodes = (1..4).map(|k| t_final * k as f64 / 4.0).collect();
        let mut report = solve(&p)?;
        let mut err = 0.0f64;
        for (t, u) in report.t_nodes.iter().zip(&report.snapshots) {
            err = err.max(u.sub(&self.at(*t, grid)?)?.max_abs());
        }
        report.manufactured_error = Some(err);
        Ok(report)
    }
}

/// `(1 + 2 i t)^{-1/2} exp(-x^2 / (2 (1 + 2 i t)))`, the free evolution of `exp(-x^2/2)`.
pub fn free_gaussian(t: f64, x: f64) -> Complex64 {
    let a = Complex64::new(1.0, 2.0 * t);
    a.sqrt().inv() * (-(x * x) / (2.0 * a)).exp()
}

/// Thresholds for [`validation_suite`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ValidationSettings {
    pub grid: Grid,
    pub t_final: f64,
    pub closed_form_tolerance: f64,
    /// Constant potential used by the temporal order fit.
    pub order_potential: f64,
    pub order_steps: Vec<usize>,
    pub order_target: f64,
    pub order_tolerance: f64,
    pub manufactured_t: f64,
    pub manufactured_tolerance: f64,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        ValidationSettings {
            grid: Grid::default(),
            t_final: 0.5,
            closed_form_tolerance: 1e-6,
            order_potential: 20.0,
            order_steps: vec![64, 128, 256],
            order_target: 4.0,
            order_tolerance: 0.3,
            manufactured_t: 0.25,
            manufactured_tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub closed_form_error: f64,
    pub order_errors: Vec<f64>,
    pub temporal_order: f64,
    pub manufactured_free: f64,
    pub manufactured_coefficients: f64,
    pub pass: bool,
}

/// Closed-form free evolution, temporal order against the exact phase of a
/// constant potential, and manufactured solutions with and without coefficients.
pub fn validation_suite(vs: &ValidationSettings) -> Result<ValidationReport> {
    let grid = vs.grid;
    grid.validate()?;
    if vs.order_steps.len() < 2 {
        return Err(Error::Config(
            "order_steps needs at least two entries".into(),
        ));
    }
    let final_of = |r: SolveReport| -> Result<Field> {
        r.final_state()
            .cloned()
            .ok_or_else(|| Error::InvalidProblem("validation solve aborted".into()))
    };
    let g = Field::from_real_fn(grid, |x| (-x * x / 2.0).exp());
    let t = vs.t_final;
    let free = final_of(solve(&CauchyProblem::free(g.clone(), t))?)?;
    let closed_form_error = (0..grid.points)
        .map(|i| (free.values[i] - free_gaussian(t, grid.node(i))).norm())
        .fold(0.0, f64::max);

    let coeffs = CoefficientSet::constant_potential(vs.order_potential).sample(grid)?;
    let exact = free.scale(Complex64::new(0.0, -vs.order_potential * t).exp());
    let order_errors = vs
        .order_steps
        .iter()
        .map(|n| {
            let p = CauchyProblem::new(coeffs.clone(), g.clone(), t)
                .with_dt(DtPolicy::fixed(t / *n as f64));
            Ok(final_of(solve(&p)?)?.sub(&exact)?.max_abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    let lx: Vec<f64> = vs.order_steps.iter().map(|n| (*n as f64).ln()).collect();
    let ly: Vec<f64> = order_errors.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let temporal_order = -sxy / sxx;

    let m = Manufactured::gaussian_phase();
    let manufactured_free = m
        .check(
            &SampledCoefficients::zero(grid),
            vs.manufactured_t,
            DtPolicy::default(),
        )?
        .manufactured_error
        .unwrap_or(f64::INFINITY);
    let c1 =
        SmoothFunction::Catalog(crate::dist_catalog::CatalogSmooth::gaussian(0.0, 1.0)).scaled(I);
    let c0 = SmoothFunction::Catalog(crate::dist_catalog::CatalogSmooth::sech(0.5, 1.0));
    let sampled = CoefficientSet::time_independent(c1, c0).sample(grid)?;
    let manufactured_coefficients = m
        .check(&sampled, vs.manufactured_t, DtPolicy::default())?
        .manufactured_error
        .unwrap_or(f64::INFINITY);
    let pass = closed_form_error < vs.closed_form_tolerance
        && (temporal_order - vs.order_target).abs() < vs.order_tolerance
        && manufactured_free < vs.manufactured_tolerance
        && manufactured_coefficients < vs.manufactured_tolerance;
    Ok(ValidationReport {
        closed_form_error,
        order_errors,
        temporal_order,
        manufactured_free,
        manufactured_coefficients,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist_catalog::CatalogSmooth;
    use crate::grid_field::Grid;

    fn gaussian_data(grid: Grid) -> Field {
        Field::from_real_fn(grid, |x| (-x * x / 2.0).exp())
    }

    #[test]
    fn rhs_of_plane_wave() {
        let grid = Grid::new(std::f64::consts::PI, 64).unwrap();
        let k = 3.0;
        let u = Field::from_fn(grid, |x| Complex64::new(0.0, k * x).exp());
        let r = rhs(
            &u,
            0.0,
            &SampledCoefficients::zero(grid),
            &Forcing::Zero,
            true,
        )
        .unwrap();
        for (a, b) in r.values.iter().zip(&u.values) {
            assert!((a - (-I * k * k * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn rhs_with_constant_potential() {
        let grid = Grid::new(20.0, 256).unwrap();
        let lambda = 2.5;
        let coeffs = CoefficientSet::constant_potential(lambda)
            .sample(grid)
            .unwrap();
        let u = Field::from_real_fn(grid, |x| (-x * x).exp());
        let r = rhs(&u, 0.0, &coeffs, &Forcing::Zero, false).unwrap();
        let uxx = crate::grid_field::derivative(&u, 2);
        for i in 0..grid.points {
            let expected = I * uxx.values[i] - I * lambda * u.values[i];
            assert!((r.values[i] - expected).norm() < 1e-12);
        }
    }

    #[test]
    fn free_gaussian_closed_form() {
        let grid = Grid::default();
        let report = solve(&CauchyProblem::free(gaussian_data(grid), 0.5)).unwrap();
        let u = report.final_state().unwrap();
        let err = (0..grid.points)
            .map(|i| (u.values[i] - free_gaussian(0.5, grid.node(i))).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn constant_potential_is_a_phase() {
        let grid = Grid::new(20.0, 512).unwrap();
        let lambda = 3.0;
        let g = gaussian_data(grid);
        let coeffs = CoefficientSet::constant_potential(lambda)
            .sample(grid)
            .unwrap();
        let p = CauchyProblem::new(coeffs, g.clone(), 0.5).with_dt(DtPolicy::fixed(0.5 / 512.0));
        let u = solve(&p).unwrap();
        let free = solve(&CauchyProblem::free(g, 0.5)).unwrap();
        let phase = Complex64::new(0.0, -lambda * 0.5).exp();
        let diff = u
            .final_state()
            .unwrap()
            .sub(&free.final_state().unwrap().scale(phase))
            .unwrap();
        assert!(diff.max_abs() < 1e-10, "{}", diff.max_abs());
    }

    #[test]
    fn manufactured_gaussian_phase() {
        let grid = Grid::default();
        let m = Manufactured::gaussian_phase();
        let report = m
            .check(&SampledCoefficients::zero(grid), 0.25, DtPolicy::default())
            .unwrap();
        assert!(
            report.manufactured_error.unwrap() < 1e-7,
            "{:?}",
            report.manufactured_error
        );
        // f = (3 - 4 x^2) exp(-x^2) exp(i t) for c = 0
        let f = m.forcing(&SampledCoefficients::zero(grid)).unwrap();
        let fv = f.at(0.3, grid.points).unwrap();
        for i in (0..grid.points).step_by(97) {
            let x = grid.node(i);
            let e = (3.0 - 4.0 * x * x) * (-x * x).exp() * Complex64::new(0.0, 0.3).exp();
            assert!((fv[i] - e).norm() < 1e-12);
        }
    }

    #[test]
    fn manufactured_with_coefficients() {
        let grid = Grid::new(30.0, 1024).unwrap();
        let c1 = SmoothFunction::Catalog(CatalogSmooth::gaussian(0.0, 1.0))
            .scaled(Complex64::new(0.0, 1.0));
        let c0 = SmoothFunction::Catalog(CatalogSmooth::sech(0.5, 1.0));
        let coeffs = CoefficientSet::time_independent(c1, c0)
            .sample(grid)
            .unwrap();
        let report = Manufactured::gaussian_phase()
            .check(&coeffs, 0.25, DtPolicy::default())
            .unwrap();
        assert!(
            report.manufactured_error.unwrap() < 1e-7,
            "{:?}",
            report.manufactured_error
        );
    }

    #[test]
    fn conservation() {
        let grid = Grid::new(30.0, 1024).unwrap();
        let g = gaussian_data(grid);
        let free = conservation_probe(&CauchyProblem::free(g.clone(), 0.5)).unwrap();
        assert!(free < 1e-9);
        let sech = SmoothFunction::Catalog(CatalogSmooth::sech(0.0, 1.0));
        let real = CoefficientSet::time_independent(SmoothFunction::Zero, sech.clone())
            .sample(grid)
            .unwrap();
        let d = conservation_probe(&CauchyProblem::new(real, g.clone(), 0.5)).unwrap();
        assert!(d < 1e-7, "{d}");
        let imag = CoefficientSet::time_independent(SmoothFunction::Zero, sech.scaled(I))
            .sample(grid)
            .unwrap();
        let d = conservation_probe(&CauchyProblem::new(imag, g, 0.5)).unwrap();
        assert!(d > 1e-3, "{d}");
    }

    #[test]
    fn blowup_is_reported() {
        let grid = Grid::new(20.0, 256).unwrap();
        let coeffs = CoefficientSet::time_independent(
            SmoothFunction::Zero,
            SmoothFunction::constant(1.0).scaled(I * 40.0),
        )
        .sample(grid)
        .unwrap();
        let p = CauchyProblem::new(coeffs, gaussian_data(grid), 1.0);
        let r = solve(&p).unwrap();
        let a = r.aborted.clone().expect("aborted");
        assert!(a.t_last > 0.5 && a.t_last < 0.8, "{}", a.t_last);
        assert!(r.final_state().is_none());
    }

    #[test]
    fn superposition() {
        let grid = Grid::new(20.0, 256).unwrap();
        let c1 = SmoothFunction::Catalog(CatalogSmooth::gaussian(0.0, 1.0));
        let coeffs = CoefficientSet::time_independent(c1, SmoothFunction::Zero)
            .sample(grid)
            .unwrap();
        let g1 = gaussian_data(grid);
        let g2 = Field::from_real_fn(grid, |x| (-(x - 1.0).powi(2)).exp());
        let f = Forcing::Curve(SampledCurve::constant(g2.values.clone()));
        let solve_with = |g: Field, f: Forcing| {
            solve(&CauchyProblem::new(coeffs.clone(), g, 0.3).with_forcing(f))
                .unwrap()
                .final_state()
                .unwrap()
                .clone()
        };
        let a = solve_with(g1.clone(), Forcing::Zero);
        let b = solve_with(Field::zeros(grid), f.clone());
        let ab = solve_with(g1, f);
        let diff = ab.sub(&a.add(&b).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-10);
    }

    #[test]
    fn validation_suite_passes() {
        let vs = ValidationSettings {
            grid: Grid::new(20.0, 512).unwrap(),
            ..Default::default()
        };
        let r = validation_suite(&vs).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn fourth_order_in_time() {
        let grid = Grid::new(20.0, 256).unwrap();
        let lambda = 20.0;
        let t = 0.5;
        let g = gaussian_data(grid);
        let coeffs = CoefficientSet::constant_potential(lambda)
            .sample(grid)
            .unwrap();
        let phase = Complex64::new(0.0, -lambda * t).exp();
        let exact = solve(&CauchyProblem::free(g.clone(), t))
            .unwrap()
            .final_state()
            .unwrap()
            .scale(phase);
        let errs: Vec<f64> = [64.0, 128.0, 256.0]
            .iter()
            .map(|n| {
                let p = CauchyProblem::new(coeffs.clone(), g.clone(), t)
                    .with_dt(DtPolicy::fixed(t / n));
                solve(&p)
                    .unwrap()
                    .final_state()
                    .unwrap()
                    .sub(&exact)
                    .unwrap()
                    .max_abs()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 4.0).abs() < 0.3, "{errs:?}");
        }
    }
}
