//! Epsilon-nets of regularized Cauchy problems, power-law fits and the
//! existence / uniqueness / consistency / classical-regime experiments.

use crate::dist_catalog::{CatalogName, CatalogSmooth, DistributionExpr};
use crate::error::{Error, Result};
use crate::grid_field::{weighted_sobolev_norm, Field, Grid};
use crate::mollifier::{regularize_with_omega, EpsilonScale, MollifierPair, PairName};
use crate::pde_solver::{
    hat_l2, integrate_system, lower_order_hat, solve, CauchyProblem, CoefficientSet, DtPolicy,
    Forcing, RecordSpec, SampledCoefficients, SampledCurve, SolveReport, BLOWUP_FACTOR,
};
use crate::smooth::SmoothFunction;
use crate::time_curve::{TimeCurve, TimeProfile};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn default_t_final() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

/// A Cauchy problem with distributional inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemTemplate {
    pub name: String,
    #[serde(default)]
    pub c1: TimeCurve<DistributionExpr>,
    #[serde(default)]
    pub c0: TimeCurve<DistributionExpr>,
    pub g: DistributionExpr,
    #[serde(default)]
    pub f: TimeCurve<DistributionExpr>,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub dt: DtPolicy,
    #[serde(default = "yes")]
    pub dealias: bool,
}

fn catalog(name: CatalogName, params: &[f64]) -> DistributionExpr {
    DistributionExpr::CatalogSmooth {
        name,
        params: params.to_vec(),
    }
}

fn gaussian() -> DistributionExpr {
    catalog(CatalogName::Gaussian, &[0.0, 1.0])
}

impl ProblemTemplate {
    pub fn new(name: &str, g: DistributionExpr) -> Self {
        ProblemTemplate {
            name: name.into(),
            c1: TimeCurve::zero(),
            c0: TimeCurve::zero(),
            g,
            f: TimeCurve::zero(),
            t_final: default_t_final(),
            grid: Grid::default(),
            dt: DtPolicy::default(),
            dealias: true,
        }
    }

    pub fn with_c1(mut self, c1: DistributionExpr) -> Self {
        self.c1 = TimeCurve::constant(c1);
        self
    }

    pub fn with_c0(mut self, c0: DistributionExpr) -> Self {
        self.c0 = TimeCurve::constant(c0);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::Config(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        self.grid.validate()?;
        for c in [&self.c1, &self.c0, &self.f] {
            c.validate()?;
            for t in &c.terms {
                t.value.validate()?;
            }
        }
        self.g.validate()
    }

    /// Every input is a smooth closed-form function.
    pub fn is_regular(&self) -> bool {
        let curve_ok =
            |c: &TimeCurve<DistributionExpr>| c.terms.iter().all(|t| t.value.as_smooth().is_some());
        curve_ok(&self.c1)
            && curve_ok(&self.c0)
            && curve_ok(&self.f)
            && self.g.as_smooth().is_some()
    }

    /// Bundled templates by name.
    pub fn bundled(name: &str) -> Result<Self> {
        let i = Complex64::new(0.0, 1.0);
        let t = match name {
            "free" => Self::new(name, gaussian()),
            "schwartz" => Self::new(name, gaussian())
                .with_c1(catalog(CatalogName::Gaussian, &[0.0, 1.0]).scaled(i * 0.5))
                .with_c0(catalog(CatalogName::Sech, &[0.0, 1.0])),
            "delta_potential" => Self::new(name, gaussian()).with_c0(DistributionExpr::delta(0.0)),
            "delta_first_order" => {
                Self::new(name, gaussian()).with_c1(DistributionExpr::delta(0.0).scaled(i))
            }
            "heaviside_potential" => {
                Self::new(name, gaussian()).with_c0(DistributionExpr::heaviside(0.0))
            }
            "zero_data" => Self::new(name, DistributionExpr::constant(0.0))
                .with_c0(DistributionExpr::delta(0.0)),
            "regular" => Self::new(name, gaussian()).with_c1(gaussian().scaled(i)),
            "decaying_imaginary" => Self::new(name, gaussian())
                .with_c1(catalog(CatalogName::LorentzianOdd, &[0.0, 1.0]).scaled(i)),
            "nondecaying_imaginary" => {
                Self::new(name, gaussian()).with_c1(DistributionExpr::constant(1.0).scaled(i))
            }
            _ => {
                return Err(Error::Config(format!(
                    "unknown template '{name}' (known: {})",
                    Self::bundled_names().join(", ")
                )))
            }
        };
        Ok(t)
    }

    pub fn bundled_names() -> Vec<&'static str> {
        vec![
            "free",
            "schwartz",
            "delta_potential",
            "delta_first_order",
            "heaviside_potential",
            "zero_data",
            "regular",
            "decaying_imaginary",
            "nondecaying_imaginary",
        ]
    }

    /// The problem without any regularization; needs [`Self::is_regular`].
    pub fn unregularized(&self) -> Result<CauchyProblem> {
        let smooth = |e: &DistributionExpr| {
            e.as_smooth().ok_or_else(|| {
                Error::InvalidProblem(format!("template '{}' has a singular input", self.name))
            })
        };
        let coeffs = CoefficientSet::new(self.c1.map(smooth)?, self.c0.map(smooth)?).regular(true);
        let f = self.f.map(smooth)?;
        let g = smooth(&self.g)?;
        assemble(self, &coeffs, &g, &f)
    }
}

fn assemble(
    template: &ProblemTemplate,
    coeffs: &CoefficientSet,
    g: &SmoothFunction,
    f: &TimeCurve<SmoothFunction>,
) -> Result<CauchyProblem> {
    let grid = template.grid;
    let sampled = coeffs.sample(grid)?;
    let forcing = SampledCurve::from_smooth(f, grid)?;
    let mut p = CauchyProblem::new(sampled, g.sample(grid)?, template.t_final).with_dt(template.dt);
    if !forcing.is_zero() {
        p.f = Forcing::Curve(forcing);
    }
    p.dealias = template.dealias;
    Ok(p)
}

/// Which width the data regularization uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataScale {
    /// Data mollified at width `eps`.
    #[default]
    Identity,
    /// Data mollified at the coefficient width `omega(eps)`.
    Coefficient,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizationSpec {
    pub pair: PairName,
    pub scale: EpsilonScale,
    pub data_scale: DataScale,
    /// When false every net member is the unregularized problem.
    pub enabled: bool,
}

impl Default for RegularizationSpec {
    fn default() -> Self {
        RegularizationSpec {
            pair: PairName::Gaussian,
            scale: EpsilonScale::default(),
            data_scale: DataScale::Identity,
            enabled: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationTarget {
    C1,
    C0,
    G,
    F,
}

/// `amplitude eps^order bump` added to the regularized targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub order: f64,
    pub targets: Vec<PerturbationTarget>,
    #[serde(default = "unit")]
    pub amplitude: f64,
    #[serde(default = "default_bump")]
    pub bump: CatalogSmooth,
}

fn unit() -> f64 {
    1.0
}

fn default_bump() -> CatalogSmooth {
    CatalogSmooth::gaussian(0.5, 1.0)
}

impl Perturbation {
    pub fn new(order: f64, targets: &[PerturbationTarget]) -> Self {
        Perturbation {
            order,
            targets: targets.to_vec(),
            amplitude: 1.0,
            bump: default_bump(),
        }
    }

    pub fn hits(&self, t: PerturbationTarget) -> bool {
        self.targets.contains(&t)
    }

    pub fn term(&self, eps: f64) -> SmoothFunction {
        if self.amplitude == 0.0 {
            return SmoothFunction::Zero;
        }
        SmoothFunction::Catalog(self.bump.clone())
            .scaled(Complex64::new(self.amplitude * eps.powf(self.order), 0.0))
    }
}

/// Regularized inputs of one net member.
#[derive(Clone, Debug)]
pub struct MemberInputs {
    pub eps: f64,
    pub omega: f64,
    pub coeffs: CoefficientSet,
    pub g: SmoothFunction,
    pub f: TimeCurve<SmoothFunction>,
}

impl MemberInputs {
    pub fn problem(&self, template: &ProblemTemplate) -> Result<CauchyProblem> {
        assemble(template, &self.coeffs, &self.g, &self.f)
    }
}

fn add_constant_term(c: &mut TimeCurve<SmoothFunction>, term: SmoothFunction) {
    if !term.is_zero() {
        c.push(TimeProfile::constant(), term);
    }
}

/// Regularizes the template at `eps` and applies the optional perturbation.
pub fn member_inputs(
    template: &ProblemTemplate,
    reg: &RegularizationSpec,
    eps: f64,
    perturbation: Option<&Perturbation>,
) -> Result<MemberInputs> {
    let (mut coeffs, mut g, mut f, omega) = if reg.enabled {
        let pair = MollifierPair::from_name(reg.pair);
        let omega = reg.scale.omega(eps)?;
        let data_w = match reg.data_scale {
            DataScale::Identity => eps,
            DataScale::Coefficient => omega,
        };
        let by = |w: f64| move |e: &DistributionExpr| regularize_with_omega(e, &pair, w);
        let mut coeffs =
            CoefficientSet::new(template.c1.map(by(omega))?, template.c0.map(by(omega))?);
        coeffs.eps = Some(eps);
        coeffs.omega = Some(omega);
        (
            coeffs,
            by(data_w)(&template.g)?,
            template.f.map(by(data_w))?,
            omega,
        )
    } else {
        let smooth = |e: &DistributionExpr| {
            e.as_smooth().ok_or_else(|| {
                Error::InvalidProblem("regularization disabled on a singular input".into())
            })
        };
        let coeffs =
            CoefficientSet::new(template.c1.map(smooth)?, template.c0.map(smooth)?).regular(true);
        (coeffs, smooth(&template.g)?, template.f.map(smooth)?, eps)
    };
    if let Some(p) = perturbation {
        let term = p.term(eps);
        if p.hits(PerturbationTarget::C1) {
            add_constant_term(&mut coeffs.c1, term.clone());
        }
        if p.hits(PerturbationTarget::C0) {
            add_constant_term(&mut coeffs.c0, term.clone());
        }
        if p.hits(PerturbationTarget::G) && !term.is_zero() {
            g = g.plus(term.clone());
        }
        if p.hits(PerturbationTarget::F) {
            add_constant_term(&mut f, term);
        }
    }
    Ok(MemberInputs {
        eps,
        omega,
        coeffs,
        g,
        f,
    })
}

/// `(m, M)` pair of a weighted Sobolev norm.
pub type NormIndex = (f64, f64);

/// Default ladder `{(m, M) : m, M <= 3}`.
pub fn default_ladder() -> Vec<NormIndex> {
    let mut v = Vec::new();
    for m in 0..=3 {
        for w in 0..=3 {
            v.push((m as f64, w as f64));
        }
    }
    v
}

/// Default geometric grid `2^-2 .. 2^-7`.
pub fn default_eps_grid() -> Vec<f64> {
    (2..=7).map(|k| 2f64.powi(-k)).collect()
}

/// Minimum number of net members for a fit.
pub const MIN_NET_POINTS: usize = 5;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsilonNet {
    pub template: String,
    pub pair: PairName,
    pub scale: EpsilonScale,
    pub eps: Vec<f64>,
    pub omegas: Vec<f64>,
    pub members: Vec<SolveReport>,
}

impl EpsilonNet {
    pub fn aborted_eps(&self) -> Vec<f64> {
        self.eps
            .iter()
            .zip(&self.members)
            .filter(|(_, r)| !r.completed())
            .map(|(e, _)| *e)
            .collect()
    }

    /// `||u_eps(t)||_{H^{m,M}}` per member; `None` for aborted members.
    pub fn norms(&self, idx: NormIndex, t: f64) -> Vec<Option<f64>> {
        self.members
            .iter()
            .map(|r| {
                if r.completed() {
                    r.norm(t, idx.0, idx.1)
                } else {
                    None
                }
            })
            .collect()
    }

    /// `||u_eps(t) - v_eps(t)||_{H^{m,M}}` per member.
    pub fn difference(
        &self,
        other: &EpsilonNet,
        idx: NormIndex,
        t: f64,
    ) -> Result<Vec<Option<f64>>> {
        if self.eps != other.eps {
            return Err(Error::InvalidProblem(
                "nets have different eps grids".into(),
            ));
        }
        self.members
            .iter()
            .zip(&other.members)
            .map(|(a, b)| match (a.snapshot_at(t), b.snapshot_at(t)) {
                (Some(x), Some(y)) if a.completed() && b.completed() => {
                    Ok(Some(weighted_sobolev_norm(&x.sub(y)?, idx.0, idx.1).value))
                }
                _ => Ok(None),
            })
            .collect()
    }

    /// CSV rows `eps,t,m,M,norm`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("eps,t,m,M,norm\n");
        for (e, r) in self.eps.iter().zip(&self.members) {
            for n in &r.norms {
                s.push_str(&format!(
                    "{e:e},{},{},{},{:e}\n",
                    n.t, n.m, n.weight, n.value
                ));
            }
        }
        s
    }
}

/// Settings shared by the net-based experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetSettings {
    pub eps: Vec<f64>,
    pub ladder: Vec<NormIndex>,
    /// Extra record times besides `0` and `T`.
    pub t_nodes: Vec<f64>,
}

impl Default for NetSettings {
    fn default() -> Self {
        NetSettings {
            eps: default_eps_grid(),
            ladder: default_ladder(),
            t_nodes: Vec::new(),
        }
    }
}

impl NetSettings {
    pub fn validate(&self) -> Result<()> {
        if self.eps.len() < MIN_NET_POINTS {
            return Err(Error::TooFewPoints {
                got: self.eps.len(),
                need: MIN_NET_POINTS,
            });
        }
        if self.eps.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Config("eps values must lie in (0, 1]".into()));
        }
        if self.ladder.is_empty() {
            return Err(Error::Config("norm ladder is empty".into()));
        }
        Ok(())
    }

    fn record(&self) -> RecordSpec {
        RecordSpec {
            t_nodes: self.t_nodes.clone(),
            norms: self.ladder.clone(),
        }
    }
}

fn max_dt_of(p: &CauchyProblem) -> Result<f64> {
    p.dt.max_dt(p.t_final, p.grid().dx(), p.coeffs.c1.sup_bound())
}

/// Builds and solves the net of regularized problems (members in parallel,
/// merged in eps order).
pub fn build_net(
    template: &ProblemTemplate,
    reg: &RegularizationSpec,
    settings: &NetSettings,
    perturbation: Option<&Perturbation>,
) -> Result<EpsilonNet> {
    template.validate()?;
    settings.validate()?;
    let members: Vec<(f64, SolveReport)> = settings
        .eps
        .par_iter()
        .map(|&eps| {
            let inputs = member_inputs(template, reg, eps, perturbation)?;
            let p = inputs.problem(template)?.with_record(settings.record());
            Ok((inputs.omega, solve(&p)?))
        })
        .collect::<Result<_>>()?;
    let (omegas, members) = members.into_iter().unzip();
    Ok(EpsilonNet {
        template: template.name.clone(),
        pair: reg.pair,
        scale: reg.scale,
        eps: settings.eps.clone(),
        omegas,
        members,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerdictThresholds {
    pub r_squared: f64,
    /// Slopes up to this count as bounded norms.
    pub bounded_slope: f64,
    /// Least decay rate for a negligible verdict.
    pub negligible_decay: f64,
    /// Slack between the requested and the measured decay order.
    pub slope_slack: f64,
}

impl Default for VerdictThresholds {
    fn default() -> Self {
        VerdictThresholds {
            r_squared: 0.9,
            bounded_slope: 0.1,
            negligible_decay: 0.5,
            slope_slack: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Growth at most `eps^{-n}`.
    Moderate(u32),
    /// Decay like `eps^q`; `None` for an identically zero net.
    Negligible(Option<f64>),
    Indeterminate,
}

impl Verdict {
    /// Negligible nets are moderate as well.
    pub fn is_moderate(&self) -> bool {
        !matches!(self, Verdict::Indeterminate)
    }

    pub fn negligible_order(&self) -> Option<f64> {
        match self {
            Verdict::Negligible(Some(q)) => Some(*q),
            Verdict::Negligible(None) => Some(f64::INFINITY),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Verdict::Moderate(n) => format!("moderate({n})"),
            Verdict::Negligible(Some(q)) => format!("negligible({q:.3})"),
            Verdict::Negligible(None) => "negligible(zero)".into(),
            Verdict::Indeterminate => "indeterminate".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Slope of `log y` against `log(1/eps)`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points that entered the fit (exact zeros are dropped).
    pub points: usize,
    pub verdict: Verdict,
}

/// Least-squares line through `(log(1/x), log y)`; returns `(slope, intercept, r^2)`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && b.is_finite())
        .map(|(a, b)| (-a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::TooFewPoints {
            got: pts.len(),
            need: 2,
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidProblem("fit abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    // a flat line through flat data is a perfect fit
    let r2 = if syy <= 1e-24 * (1.0 + my * my) {
        1.0
    } else {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

pub fn verdict_of(slope: f64, r_squared: f64, th: &VerdictThresholds) -> Verdict {
    if -slope >= th.negligible_decay && r_squared >= th.r_squared {
        Verdict::Negligible(Some(-slope))
    } else if r_squared >= th.r_squared || slope <= th.bounded_slope {
        Verdict::Moderate(slope.max(0.0).ceil() as u32)
    } else {
        Verdict::Indeterminate
    }
}

/// Fits `log ||u_eps|| ~ slope log(1/eps)` over a net's values.
pub fn fit_powerlaw(
    eps: &[f64],
    values: &[Option<f64>],
    th: &VerdictThresholds,
) -> Result<FitResult> {
    let done: Vec<(f64, f64)> = eps
        .iter()
        .zip(values)
        .filter_map(|(e, v)| v.map(|v| (*e, v)))
        .collect();
    if done.len() < MIN_NET_POINTS {
        return Err(Error::TooFewPoints {
            got: done.len(),
            need: MIN_NET_POINTS,
        });
    }
    if done.iter().all(|(_, v)| *v == 0.0) {
        return Ok(FitResult {
            slope: 0.0,
            intercept: 0.0,
            r_squared: 1.0,
            points: 0,
            verdict: Verdict::Negligible(None),
        });
    }
    let (x, y): (Vec<f64>, Vec<f64>) = done.into_iter().unzip();
    let points = y.iter().filter(|v| **v > 0.0).count();
    if points < 2 {
        return Ok(FitResult {
            slope: 0.0,
            intercept: 0.0,
            r_squared: 0.0,
            points,
            verdict: Verdict::Indeterminate,
        });
    }
    let (slope, intercept, r_squared) = loglog_fit(&x, &y)?;
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        points,
        verdict: verdict_of(slope, r_squared, th),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderFit {
    pub m: f64,
    pub weight: f64,
    pub fit: FitResult,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExistenceReport {
    pub template: String,
    pub eps: Vec<f64>,
    pub fits: Vec<LadderFit>,
    pub aborted: Vec<f64>,
    pub pass: bool,
    #[serde(skip)]
    pub net: Option<EpsilonNet>,
}

/// Moderateness of `||u_eps(T)||_{H^{m,M}}` over the norm ladder.
pub fn run_existence(
    template: &ProblemTemplate,
    reg: &RegularizationSpec,
    settings: &NetSettings,
    th: &VerdictThresholds,
) -> Result<ExistenceReport> {
    let net = build_net(template, reg, settings, None)?;
    let aborted = net.aborted_eps();
    let mut fits = Vec::new();
    for &(m, w) in &settings.ladder {
        let values = net.norms((m, w), template.t_final);
        let fit = if aborted.is_empty() {
            fit_powerlaw(&net.eps, &values, th)?
        } else {
            fit_powerlaw(&net.eps, &values, th).unwrap_or(FitResult {
                slope: f64::NAN,
                intercept: f64::NAN,
                r_squared: 0.0,
                points: 0,
                verdict: Verdict::Indeterminate,
            })
        };
        fits.push(LadderFit { m, weight: w, fit });
    }
    let pass = aborted.is_empty() && fits.iter().all(|f| f.fit.verdict.is_moderate());
    Ok(ExistenceReport {
        template: template.name.clone(),
        eps: net.eps.clone(),
        fits,
        aborted,
        pass,
        net: Some(net),
    })
}

/// Difference `w = u' - u` computed directly from the joint system
/// `u_t = L u + N(u) + i f`, `w_t = L w + N'(w) + i (df - d1 D u - d0 u)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleCheck {
    pub eps: f64,
    pub oracle_norm: f64,
    pub relative_mismatch: f64,
}

fn duhamel_check(
    template: &ProblemTemplate,
    base: &MemberInputs,
    perturbation: &Perturbation,
    pert_problem: &CauchyProblem,
    separate_difference: &Field,
    dt: f64,
) -> Result<OracleCheck> {
    let grid = template.grid;
    let n = grid.points;
    let base_problem = base.problem(template)?;
    let bump = perturbation.term(base.eps).sample(grid)?.values;
    let zero = vec![Complex64::new(0.0, 0.0); n];
    let pick = |t: PerturbationTarget| {
        if perturbation.hits(t) {
            bump.clone()
        } else {
            zero.clone()
        }
    };
    let (d1, d0, dg, df) = (
        pick(PerturbationTarget::C1),
        pick(PerturbationTarget::C0),
        pick(PerturbationTarget::G),
        pick(PerturbationTarget::F),
    );
    let to_hat = |v: &[Complex64]| {
        let mut h = v.to_vec();
        crate::grid_field::fft_in_place(&mut h);
        h
    };
    let df_hat = to_hat(&df);
    let coeffs_a = base_problem.coeffs.clone();
    let coeffs_b: SampledCoefficients = pert_problem.coeffs.clone();
    let delta = SampledCoefficients {
        grid,
        c1: if d1.iter().any(|z| z.norm() > 0.0) {
            SampledCurve::constant(d1)
        } else {
            SampledCurve::default()
        },
        c0: if d0.iter().any(|z| z.norm() > 0.0) {
            SampledCurve::constant(d0)
        } else {
            SampledCurve::default()
        },
    };
    let forcing = base_problem.f.clone();
    let dealias = base_problem.dealias;
    let g_norm = base_problem.g.l2_norm();
    let traj = integrate_system(
        grid,
        vec![base_problem.g.clone(), Field::new(grid, dg)?],
        &[0.0, template.t_final],
        dt,
        |t, st, out| {
            let (head, tail) = out.split_at_mut(1);
            lower_order_hat(&coeffs_a, t, &st[0], dealias, &mut head[0]);
            if let Some(mut fv) = forcing.at(t, n) {
                crate::grid_field::fft_in_place(&mut fv);
                for (o, v) in head[0].iter_mut().zip(fv) {
                    *o += I * v;
                }
            }
            lower_order_hat(&coeffs_b, t, &st[1], dealias, &mut tail[0]);
            let mut src = vec![Complex64::new(0.0, 0.0); n];
            lower_order_hat(&delta, t, &st[0], dealias, &mut src);
            for k in 0..n {
                tail[0][k] += src[k] + I * df_hat[k];
            }
        },
        |st| {
            let norm = hat_l2(&st[0], &grid);
            (g_norm > 0.0 && norm > BLOWUP_FACTOR * g_norm).then(|| "blow-up".to_string())
        },
    )?;
    if let Some(a) = traj.aborted {
        return Err(Error::InvalidProblem(format!(
            "oracle solve aborted: {}",
            a.reason
        )));
    }
    let w = &traj.snapshots.last().expect("final snapshot")[1];
    let oracle_norm = w.l2_norm();
    let mismatch = w.sub(separate_difference)?.l2_norm();
    Ok(OracleCheck {
        eps: base.eps,
        oracle_norm,
        relative_mismatch: if oracle_norm > 0.0 {
            mismatch / oracle_norm
        } else {
            mismatch
        },
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub template: String,
    pub perturbation: Perturbation,
    pub eps: Vec<f64>,
    pub fits: Vec<LadderFit>,
    pub differences: Vec<Vec<Option<f64>>>,
    pub oracle: Option<OracleCheck>,
    pub verdict: Verdict,
    pub pass: bool,
}

/// Solves the net and the perturbed net (same step per member) and fits the
/// size of the differences at `T`.
pub fn run_uniqueness(
    template: &ProblemTemplate,
    reg: &RegularizationSpec,
    perturbation: &Perturbation,
    settings: &NetSettings,
    th: &VerdictThresholds,
) -> Result<UniquenessReport> {
    template.validate()?;
    settings.validate()?;
    let record = settings.record();
    let pairs: Vec<(MemberInputs, CauchyProblem, f64, SolveReport, SolveReport)> = settings
        .eps
        .par_iter()
        .map(|&eps| {
            let a_in = member_inputs(template, reg, eps, None)?;
            let b_in = member_inputs(template, reg, eps, Some(perturbation))?;
            let pa = a_in.problem(template)?;
            let pb = b_in.problem(template)?;
            let dt = max_dt_of(&pa)?.min(max_dt_of(&pb)?);
            let pa = pa.with_dt(DtPolicy::fixed(dt)).with_record(record.clone());
            let pb = pb.with_dt(DtPolicy::fixed(dt)).with_record(record.clone());
            let (ra, rb) = (solve(&pa)?, solve(&pb)?);
            Ok((a_in, pb, dt, ra, rb))
        })
        .collect::<Result<_>>()?;
    let mut differences = Vec::new();
    for &idx in &settings.ladder {
        let mut row = Vec::new();
        for (_, _, _, ra, rb) in &pairs {
            row.push(match (ra.final_state(), rb.final_state()) {
                (Some(a), Some(b)) => Some(weighted_sobolev_norm(&b.sub(a)?, idx.0, idx.1).value),
                _ => None,
            });
        }
        differences.push(row);
    }
    let mut fits = Vec::new();
    for (&(m, w), values) in settings.ladder.iter().zip(&differences) {
        fits.push(LadderFit {
            m,
            weight: w,
            fit: fit_powerlaw(&settings.eps, values, th)?,
        });
    }
    let need = perturbation.order - th.slope_slack;
    let negligible = fits.iter().all(|f| {
        f.fit
            .verdict
            .negligible_order()
            .is_some_and(|q| q >= need && q >= th.negligible_decay)
    });
    // direct difference solve at the smallest eps
    let oracle = pairs
        .iter()
        .enumerate()
        .min_by(|a, b| settings.eps[a.0].total_cmp(&settings.eps[b.0]))
        .and_then(|(_, (a_in, pb, dt, ra, rb))| {
            let diff = rb.final_state()?.sub(ra.final_state()?).ok()?;
            duhamel_check(template, a_in, perturbation, pb, &diff, *dt).ok()
        });
    let verdict = if negligible {
        let q = fits
            .iter()
            .filter_map(|f| f.fit.verdict.negligible_order())
            .fold(f64::INFINITY, f64::min);
        Verdict::Negligible(q.is_finite().then_some(q))
    } else {
        Verdict::Indeterminate
    };
    Ok(UniquenessReport {
        template: template.name.clone(),
        perturbation: perturbation.clone(),
        eps: settings.eps.clone(),
        fits,
        differences,
        oracle,
        verdict,
        pass: negligible,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencySettings {
    pub eps: Vec<f64>,
    pub pairs: Vec<PairName>,
    pub scale: EpsilonScale,
    /// Norm `H^{m,M}` of the error.
    pub norm: NormIndex,
    pub tolerance: f64,
    /// Errors below this level count as converged in the monotonicity check.
    pub floor: f64,
    /// Common time step; defaults to the strictest member bound.
    pub dt: Option<f64>,
    pub enabled: bool,
}

impl Default for ConsistencySettings {
    fn default() -> Self {
        ConsistencySettings {
            eps: (1..=6).map(|k| 2f64.powi(-k)).collect(),
            pairs: vec![PairName::Gaussian, PairName::Flat],
            scale: EpsilonScale::Identity,
            norm: (1.0, 1.0),
            tolerance: 1e-3,
            floor: 1e-10,
            dt: None,
            enabled: true,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyCurve {
    pub pair: PairName,
    pub errors: Vec<f64>,
    pub monotone: bool,
    pub final_error: f64,
    pub fit: Option<FitResult>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub template: String,
    pub eps: Vec<f64>,
    pub norm: NormIndex,
    pub reference_norm: f64,
    pub dt: f64,
    pub curves: Vec<ConsistencyCurve>,
    /// Largest difference between the final errors of two pairs.
    pub limit_gap: f64,
    pub pass: bool,
}

/// Non-increasing, or already below `floor`.
pub fn is_monotone(values: &[f64], floor: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor)
}

/// Error of the regularized solutions against the unregularized solve at `T`.
pub fn run_consistency(
    template: &ProblemTemplate,
    cs: &ConsistencySettings,
) -> Result<ConsistencyReport> {
    template.validate()?;
    if !template.is_regular() {
        return Err(Error::InvalidProblem(format!(
            "consistency needs smooth inputs; template '{}' is singular",
            template.name
        )));
    }
    if cs.eps.len() < 2 || cs.pairs.is_empty() {
        return Err(Error::Config(
            "consistency needs at least two eps values and one pair".into(),
        ));
    }
    let reference = template.unregularized()?;
    let mut problems: Vec<Vec<CauchyProblem>> = Vec::new();
    for pair in &cs.pairs {
        let reg = RegularizationSpec {
            pair: *pair,
            scale: cs.scale,
            data_scale: DataScale::Identity,
            enabled: cs.enabled,
        };
        let row = cs
            .eps
            .par_iter()
            .map(|&e| member_inputs(template, &reg, e, None)?.problem(template))
            .collect::<Result<Vec<_>>>()?;
        problems.push(row);
    }
    let dt = match cs.dt {
        Some(dt) => dt,
        None => {
            let mut dt = max_dt_of(&reference)?;
            for p in problems.iter().flatten() {
                dt = dt.min(max_dt_of(p)?);
            }
            dt
        }
    };
    let record = RecordSpec {
        t_nodes: Vec::new(),
        norms: vec![cs.norm],
    };
    let ref_report = solve(
        &reference
            .with_dt(DtPolicy::fixed(dt))
            .with_record(record.clone()),
    )?;
    let u_ref = ref_report
        .final_state()
        .ok_or_else(|| Error::InvalidProblem("reference solve aborted".into()))?
        .clone();
    let mut curves = Vec::new();
    for (pair, row) in cs.pairs.iter().zip(problems) {
        let errors = row
            .into_par_iter()
            .map(|p| {
                let r = solve(&p.with_dt(DtPolicy::fixed(dt)).with_record(record.clone()))?;
                let u = r
                    .final_state()
                    .ok_or_else(|| Error::InvalidProblem("net member aborted".into()))?;
                Ok(weighted_sobolev_norm(&u.sub(&u_ref)?, cs.norm.0, cs.norm.1).value)
            })
            .collect::<Result<Vec<f64>>>()?;
        let monotone = is_monotone(&errors, cs.floor);
        let final_error = *errors.last().expect("non-empty");
        let fit = loglog_fit(&cs.eps, &errors)
            .ok()
            .map(|(slope, intercept, r2)| FitResult {
                slope,
                intercept,
                r_squared: r2,
                points: errors.iter().filter(|e| **e > 0.0).count(),
                verdict: verdict_of(slope, r2, &VerdictThresholds::default()),
            });
        curves.push(ConsistencyCurve {
            pair: *pair,
            errors,
            monotone,
            final_error,
            fit,
        });
    }
    let finals: Vec<f64> = curves.iter().map(|c| c.final_error).collect();
    let limit_gap = finals
        .iter()
        .flat_map(|a| finals.iter().map(move |b| (a - b).abs()))
        .fold(0.0, f64::max);
    let pass = curves
        .iter()
        .all(|c| c.monotone && c.final_error < cs.tolerance)
        && limit_gap < 2.0 * cs.tolerance;
    Ok(ConsistencyReport {
        template: template.name.clone(),
        eps: cs.eps.clone(),
        norm: cs.norm,
        reference_norm: weighted_sobolev_norm(&u_ref, cs.norm.0, cs.norm.1).value,
        dt,
        curves,
        limit_gap,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalSettings {
    pub eps: Vec<f64>,
    pub m: f64,
    pub s: f64,
    /// Candidate loss exponents, smallest first.
    pub loss_ladder: Vec<f64>,
    /// Largest accepted `(max - min) / min` of the ratio across the net.
    pub spread_tolerance: f64,
    /// Largest accepted `max / min` of the decay constant across the net.
    pub decay_tolerance: f64,
}

impl Default for ClassicalSettings {
    fn default() -> Self {
        ClassicalSettings {
            eps: default_eps_grid(),
            m: 2.0,
            s: 1.0,
            loss_ladder: vec![0.0, 0.5, 1.0, 1.5, 2.0],
            spread_tolerance: 0.1,
            decay_tolerance: 1.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeVerdict {
    UniformBound,
    OutsideRegime,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassicalReport {
    pub template: String,
    pub eps: Vec<f64>,
    /// `sup_{t,x} |Im c1_eps| <x>` per member.
    pub decay_constants: Vec<f64>,
    pub decay_tag_ok: bool,
    /// `ratios[j][k]`: loss `loss_ladder[j]`, member `k`.
    pub ratios: Vec<Vec<f64>>,
    pub spreads: Vec<f64>,
    pub loss: Option<f64>,
    pub aborted: Vec<f64>,
    pub verdict: RegimeVerdict,
    pub reason: String,
}

fn trapezoid(t: &[f64], v: &[f64]) -> f64 {
    t.windows(2)
        .zip(v.windows(2))
        .map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1]))
        .sum()
}

/// Uniform bound `||u_eps(T)||_{H^{m-c,s}} <= C (||g_eps||_{H^{m,s}} + int ||f_eps||_{H^{m,s}})`.
pub fn run_classical(
    template: &ProblemTemplate,
    reg: &RegularizationSpec,
    cs: &ClassicalSettings,
) -> Result<ClassicalReport> {
    template.validate()?;
    if cs.eps.len() < 2 || cs.loss_ladder.is_empty() {
        return Err(Error::Config(
            "classical run needs two eps values and a loss ladder".into(),
        ));
    }
    let t_final = template.t_final;
    let tag_times: Vec<f64> = (0..=8).map(|k| t_final * k as f64 / 8.0).collect();
    let record = RecordSpec {
        t_nodes: Vec::new(),
        norms: cs.loss_ladder.iter().map(|c| (cs.m - c, cs.s)).collect(),
    };
    let rows = cs
        .eps
        .par_iter()
        .map(|&eps| {
            let inputs = member_inputs(template, reg, eps, None)?;
            let p = inputs.problem(template)?.with_record(record.clone());
            let k = p.coeffs.im_c1_decay_constant(&tag_times);
            let data = weighted_sobolev_norm(&p.g, cs.m, cs.s).value
                + trapezoid(
                    &tag_times,
                    &tag_times
                        .iter()
                        .map(|t| {
                            p.f.at(*t, p.grid().points)
                                .map(|v| {
                                    weighted_sobolev_norm(
                                        &Field {
                                            grid: p.grid(),
                                            values: v,
                                        },
                                        cs.m,
                                        cs.s,
                                    )
                                    .value
                                })
                                .unwrap_or(0.0)
                        })
                        .collect::<Vec<_>>(),
                );
            let r = solve(&p)?;
            Ok((k, data, r))
        })
        .collect::<Result<Vec<_>>>()?;
    let decay_constants: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let aborted: Vec<f64> = cs
        .eps
        .iter()
        .zip(&rows)
        .filter(|(_, r)| !r.2.completed())
        .map(|(e, _)| *e)
        .collect();
    let kmax = decay_constants.iter().copied().fold(0.0, f64::max);
    let kmin = decay_constants
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let decay_tag_ok = kmax.is_finite() && (kmax == 0.0 || kmax <= cs.decay_tolerance * kmin);
    let mut ratios = Vec::new();
    let mut spreads = Vec::new();
    for c in &cs.loss_ladder {
        let row: Vec<f64> = rows
            .iter()
            .map(|(_, data, r)| match r.norm(t_final, cs.m - c, cs.s) {
                Some(v) if r.completed() && *data > 0.0 => v / data,
                Some(_) if r.completed() => 0.0,
                _ => f64::INFINITY,
            })
            .collect();
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = row.iter().copied().fold(0.0, f64::max);
        spreads.push(if hi == 0.0 { 0.0 } else { (hi - lo) / lo });
        ratios.push(row);
    }
    let loss = cs
        .loss_ladder
        .iter()
        .zip(&spreads)
        .find(|(_, s)| s.is_finite() && **s < cs.spread_tolerance)
        .map(|(c, _)| *c);
    let (verdict, reason) = if !aborted.is_empty() {
        (
            RegimeVerdict::OutsideRegime,
            format!("solves aborted at eps {aborted:?}"),
        )
    } else if !decay_tag_ok {
        (
            RegimeVerdict::OutsideRegime,
            format!(
                "|Im c1| <x> is not uniformly bounded across the net ({kmin:.3e} .. {kmax:.3e})"
            ),
        )
    } else if loss.is_none() {
        (
            RegimeVerdict::OutsideRegime,
            format!(
                "ratio spread {:.3} exceeds {} for every loss exponent",
                spreads[0], cs.spread_tolerance
            ),
        )
    } else {
        (
            RegimeVerdict::UniformBound,
            "ratio bounded uniformly in eps".into(),
        )
    };
    Ok(ClassicalReport {
        template: template.name.clone(),
        eps: cs.eps.clone(),
        decay_constants,
        decay_tag_ok,
        ratios,
        spreads,
        loss,
        aborted,
        verdict,
        reason,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(t: ProblemTemplate) -> ProblemTemplate {
        ProblemTemplate {
            grid: Grid::new(20.0, 256).unwrap(),
            ..t
        }
    }

    #[test]
    fn fit_rules() {
        let eps = default_eps_grid();
        let th = VerdictThresholds::default();
        let constant: Vec<Option<f64>> = eps.iter().map(|_| Some(3.0)).collect();
        let f = fit_powerlaw(&eps, &constant, &th).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert_eq!(f.verdict, Verdict::Moderate(0));
        let decaying: Vec<Option<f64>> = eps.iter().map(|e| Some(2.0 * e.powi(3))).collect();
        let f = fit_powerlaw(&eps, &decaying, &th).unwrap();
        assert!((f.slope + 3.0).abs() < 1e-12);
        assert!(matches!(f.verdict, Verdict::Negligible(Some(q)) if (q - 3.0).abs() < 1e-12));
        let growing: Vec<Option<f64>> = eps.iter().map(|e| Some(e.powf(-0.5))).collect();
        assert_eq!(
            fit_powerlaw(&eps, &growing, &th).unwrap().verdict,
            Verdict::Moderate(1)
        );
        let zero: Vec<Option<f64>> = eps.iter().map(|_| Some(0.0)).collect();
        assert_eq!(
            fit_powerlaw(&eps, &zero, &th).unwrap().verdict,
            Verdict::Negligible(None)
        );
        assert!(fit_powerlaw(&eps[..3], &constant[..3], &th).is_err());
        let noisy: Vec<Option<f64>> = [1.0, 30.0, 0.5, 80.0, 0.2, 300.0]
            .iter()
            .map(|v| Some(*v))
            .collect();
        assert_eq!(
            fit_powerlaw(&eps, &noisy, &th).unwrap().verdict,
            Verdict::Indeterminate
        );
    }

    #[test]
    fn zero_template_gives_zero_net() {
        let t = small(ProblemTemplate::bundled("zero_data").unwrap());
        let settings = NetSettings {
            ladder: vec![(0.0, 0.0), (1.0, 1.0)],
            ..Default::default()
        };
        let r = run_existence(
            &t,
            &RegularizationSpec::default(),
            &settings,
            &VerdictThresholds::default(),
        )
        .unwrap();
        assert!(r.pass);
        for f in &r.fits {
            assert_eq!(f.fit.verdict, Verdict::Negligible(None));
        }
    }

    #[test]
    fn scaling_covariance() {
        let t = small(ProblemTemplate::bundled("delta_potential").unwrap());
        let mut t2 = t.clone();
        t2.g = t.g.clone().scaled(Complex64::new(3.0, 0.0));
        let settings = NetSettings {
            ladder: vec![(1.0, 1.0)],
            ..Default::default()
        };
        let reg = RegularizationSpec::default();
        let a = build_net(&t, &reg, &settings, None).unwrap();
        let b = build_net(&t2, &reg, &settings, None).unwrap();
        for (x, y) in a
            .norms((1.0, 1.0), 0.5)
            .iter()
            .zip(b.norms((1.0, 1.0), 0.5))
        {
            let (x, y) = (x.unwrap(), y.unwrap());
            assert!((y - 3.0 * x).abs() < 1e-12 * y, "{x} {y}");
        }
    }

    #[test]
    fn data_perturbation_difference_is_linear() {
        let t = small(ProblemTemplate::bundled("free").unwrap());
        let settings = NetSettings {
            ladder: vec![(0.0, 0.0), (1.0, 1.0)],
            ..Default::default()
        };
        let p = Perturbation::new(2.0, &[PerturbationTarget::G]);
        let r = run_uniqueness(
            &t,
            &RegularizationSpec::default(),
            &p,
            &settings,
            &VerdictThresholds::default(),
        )
        .unwrap();
        assert!(r.pass, "{:?}", r.fits);
        for f in &r.fits {
            assert!((f.fit.slope + 2.0).abs() < 1e-6, "{}", f.fit.slope);
        }
        assert!(r.oracle.unwrap().relative_mismatch < 1e-8);
    }

    #[test]
    fn zero_perturbation_has_zero_difference() {
        let t = small(ProblemTemplate::bundled("delta_potential").unwrap());
        let mut p = Perturbation::new(2.0, &[PerturbationTarget::C0, PerturbationTarget::G]);
        p.amplitude = 0.0;
        let settings = NetSettings {
            ladder: vec![(0.0, 0.0)],
            ..Default::default()
        };
        let r = run_uniqueness(
            &t,
            &RegularizationSpec::default(),
            &p,
            &settings,
            &VerdictThresholds::default(),
        )
        .unwrap();
        assert!(r.differences[0].iter().all(|d| *d == Some(0.0)));
        assert_eq!(r.verdict, Verdict::Negligible(None));
    }

    #[test]
    fn disabled_regularization_matches_reference() {
        let t = small(ProblemTemplate::bundled("regular").unwrap());
        let cs = ConsistencySettings {
            enabled: false,
            pairs: vec![PairName::Gaussian],
            ..Default::default()
        };
        let r = run_consistency(&t, &cs).unwrap();
        assert!(r.curves[0].errors.iter().all(|e| *e == 0.0));
    }

    #[test]
    fn free_classical_ratio_is_one() {
        let t = small(ProblemTemplate::bundled("free").unwrap());
        let cs = ClassicalSettings {
            s: 0.0,
            ..Default::default()
        };
        let r = run_classical(&t, &RegularizationSpec::default(), &cs).unwrap();
        assert_eq!(r.verdict, RegimeVerdict::UniformBound);
        assert_eq!(r.loss, Some(0.0));
        assert!(
            r.ratios[0].iter().all(|v| *v <= 1.0 + 1e-6),
            "{:?}",
            r.ratios[0]
        );
    }

    #[test]
    fn templates_round_trip() {
        for name in ProblemTemplate::bundled_names() {
            let t = ProblemTemplate::bundled(name).unwrap();
            let s = serde_json::to_string(&t).unwrap();
            let back: ProblemTemplate = serde_json::from_str(&s).unwrap();
            assert_eq!(back, t);
        }
        assert!(ProblemTemplate::bundled("nope").is_err());
    }
}
