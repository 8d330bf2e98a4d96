//! Config-driven experiment runner behind the `vwlab` binary.
//!
//! A config file (TOML, or JSON when the extension is `.json`) carries one
//! optional section per subcommand. Missing sections run with defaults. Every
//! run writes `<command>.json` (report with the resolved config inline),
//! `<command>.csv` and `metadata.json` (timestamps) into the output directory.

use crate::dist_catalog::{CatalogSmooth, DistributionExpr, TestFunction};
use crate::error::{Error, Result};
use crate::gausspoly::{test_family, GaussPoly, TEST_FAMILY_VERSION};
use crate::grid_field::{Field, Grid};
use crate::mollifier::{
    l2_norm_quad, pairing_gap, regularization_error_table, regularize, EpsilonScale, MollifierPair,
    PairName,
};
use crate::pde_solver::{
    solve, validation_suite, RecordSpec, SolveReport, ValidationReport, ValidationSettings,
};
use crate::psido::{
    composition_residual, conjugation_identity_error, conjugation_test_sets, cv_bound_probe,
    garding_probe, symbol_seminorms, ProbeResult, SymbolConfig,
};
use crate::vws_harness::{
    build_net, default_eps_grid, fit_powerlaw, loglog_fit, member_inputs, run_classical,
    run_consistency, run_existence, run_uniqueness, ClassicalReport, ClassicalSettings,
    ConsistencyReport, ConsistencySettings, EpsilonNet, ExistenceReport, LadderFit, NetSettings,
    Perturbation, PerturbationTarget, ProblemTemplate, RegimeVerdict, RegularizationSpec,
    UniquenessReport, VerdictThresholds,
};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const FORMAT_VERSION: u32 = 1;

/// Exit code for a run whose verdict passed.
pub const EXIT_PASS: i32 = 0;
/// Exit code for configuration or runtime errors.
pub const EXIT_ERROR: i32 = 1;
/// Exit code for a completed run whose verdict failed.
pub const EXIT_FAIL: i32 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Regularize,
    Solve,
    Net,
    Existence,
    Uniqueness,
    Consistency,
    Classical,
    ConjugateCheck,
    PsidoProbe,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Regularize,
        Command::Solve,
        Command::Net,
        Command::Existence,
        Command::Uniqueness,
        Command::Consistency,
        Command::Classical,
        Command::ConjugateCheck,
        Command::PsidoProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Regularize => "regularize",
            Command::Solve => "solve",
            Command::Net => "net",
            Command::Existence => "existence",
            Command::Uniqueness => "uniqueness",
            Command::Consistency => "consistency",
            Command::Classical => "classical",
            Command::ConjugateCheck => "conjugate-check",
            Command::PsidoProbe => "psido-probe",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    #[default]
    Both,
}

/// A bundled template name or an inline template.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TemplateSource {
    Bundled(String),
    Inline(Box<ProblemTemplate>),
}

impl<'de> Deserialize<'de> for TemplateSource {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => Ok(TemplateSource::Bundled(s)),
            v => serde_json::from_value(v)
                .map(|t| TemplateSource::Inline(Box::new(t)))
                .map_err(|e| D::Error::custom(format!("template: {e}"))),
        }
    }
}

impl TemplateSource {
    pub fn named(name: &str) -> Self {
        TemplateSource::Bundled(name.into())
    }

    pub fn resolve(&self) -> Result<ProblemTemplate> {
        let t = match self {
            TemplateSource::Bundled(name) => ProblemTemplate::bundled(name)?,
            TemplateSource::Inline(t) => (**t).clone(),
        };
        t.validate()?;
        Ok(t)
    }

    fn resolved(&self) -> Result<Self> {
        Ok(TemplateSource::Inline(Box::new(self.resolve()?)))
    }
}

/// Expected decay of `||log L^2 norm||` against `log(1/eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeCheck {
    pub target: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PairingCheck {
    pub tolerance: f64,
    /// Increases below this size count as round-off.
    pub floor: f64,
}

impl Default for PairingCheck {
    fn default() -> Self {
        PairingCheck {
            tolerance: 1e-3,
            floor: 1e-10,
        }
    }
}

/// Decay of `sup <x>^M |d^beta (u_eps - u)|` for a gaussian `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrderCheck {
    /// `[center, width]` of the gaussian input.
    pub gaussian: [f64; 2],
    pub ladder: Vec<(u32, u32)>,
    pub min_decay: Option<f64>,
    pub max_decay: Option<f64>,
}

impl Default for OrderCheck {
    fn default() -> Self {
        OrderCheck {
            gaussian: [0.0, 1.0],
            ladder: vec![(0, 0), (1, 1), (2, 2)],
            min_decay: None,
            max_decay: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegularizeConfig {
    pub pair: PairName,
    pub scale: EpsilonScale,
    pub eps: Vec<f64>,
    pub inputs: Vec<DistributionExpr>,
    pub l2_slope: Option<SlopeCheck>,
    pub pairing: Option<PairingCheck>,
    pub order: Option<OrderCheck>,
}

impl Default for RegularizeConfig {
    fn default() -> Self {
        RegularizeConfig {
            pair: PairName::Gaussian,
            scale: EpsilonScale::Identity,
            eps: default_eps_grid(),
            inputs: vec![DistributionExpr::delta(0.0)],
            l2_slope: None,
            pairing: None,
            order: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveConfig {
    pub template: TemplateSource,
    /// Regularization width; `None` solves the unregularized problem.
    pub eps: Option<f64>,
    pub regularization: RegularizationSpec,
    pub record: RecordSpec,
    /// Times whose states are written as binary field files.
    pub snapshots: Vec<f64>,
    pub validation: Option<ValidationSettings>,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            template: TemplateSource::named("free"),
            eps: None,
            regularization: RegularizationSpec::default(),
            record: RecordSpec::default(),
            snapshots: Vec::new(),
            validation: None,
        }
    }
}

/// Shared by `net` and `existence`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    pub templates: Vec<TemplateSource>,
    pub regularization: RegularizationSpec,
    pub net: NetSettings,
    pub thresholds: VerdictThresholds,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            templates: vec![TemplateSource::named("delta_potential")],
            regularization: RegularizationSpec::default(),
            net: NetSettings::default(),
            thresholds: VerdictThresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UniquenessConfig {
    pub template: TemplateSource,
    pub regularization: RegularizationSpec,
    pub perturbations: Vec<Perturbation>,
    pub net: NetSettings,
    pub thresholds: VerdictThresholds,
}

impl Default for UniquenessConfig {
    fn default() -> Self {
        UniquenessConfig {
            template: TemplateSource::named("delta_potential"),
            regularization: RegularizationSpec::default(),
            perturbations: vec![Perturbation::new(2.0, &[PerturbationTarget::G])],
            net: NetSettings {
                ladder: vec![(0.0, 0.0), (1.0, 1.0)],
                ..NetSettings::default()
            },
            thresholds: VerdictThresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsistencyConfig {
    pub template: TemplateSource,
    pub settings: ConsistencySettings,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            template: TemplateSource::named("regular"),
            settings: ConsistencySettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassicalCase {
    pub template: TemplateSource,
    pub expect: RegimeVerdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicalConfig {
    pub cases: Vec<ClassicalCase>,
    pub regularization: RegularizationSpec,
    pub settings: ClassicalSettings,
}

impl Default for ClassicalConfig {
    fn default() -> Self {
        ClassicalConfig {
            cases: vec![
                ClassicalCase {
                    template: TemplateSource::named("decaying_imaginary"),
                    expect: RegimeVerdict::UniformBound,
                },
                ClassicalCase {
                    template: TemplateSource::named("nondecaying_imaginary"),
                    expect: RegimeVerdict::OutsideRegime,
                },
            ],
            regularization: RegularizationSpec {
                scale: EpsilonScale::Identity,
                ..RegularizationSpec::default()
            },
            settings: ClassicalSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConjugateCheckConfig {
    /// Names from the bundled coefficient sets; empty means all.
    pub sets: Vec<String>,
    pub s_values: Vec<u32>,
    pub t_nodes: Vec<f64>,
    pub grid: Grid,
    pub probe: CatalogSmooth,
    pub tolerance: f64,
}

impl Default for ConjugateCheckConfig {
    fn default() -> Self {
        ConjugateCheckConfig {
            sets: Vec::new(),
            s_values: vec![0, 1, 2, 3],
            t_nodes: vec![0.0, 0.25, 0.5],
            grid: Grid {
                half_width: 20.0,
                points: 1024,
            },
            probe: CatalogSmooth::gaussian(0.0, 1.0),
            tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProbeSpec {
    CvBound {
        symbol: SymbolConfig,
        #[serde(default)]
        s: f64,
        #[serde(default)]
        expect: Option<f64>,
        #[serde(default)]
        max: Option<f64>,
    },
    Composition {
        p1: SymbolConfig,
        p2: SymbolConfig,
        n: u32,
        #[serde(default)]
        max_residual: Option<f64>,
    },
    Garding {
        symbol: SymbolConfig,
        #[serde(default)]
        min: Option<f64>,
    },
    Seminorms {
        symbol: SymbolConfig,
        max_l: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsidoProbeConfig {
    pub grid: Grid,
    /// Largest accepted relative change between `N` and `2N`.
    pub stability: f64,
    /// Values below this are compared absolutely under refinement.
    pub absolute_floor: f64,
    /// Tolerance on `expect` values.
    pub exact_tolerance: f64,
    pub probes: Vec<ProbeSpec>,
}

fn sym(terms: Vec<crate::psido::SymbolTermConfig>, order: f64) -> SymbolConfig {
    SymbolConfig { terms, order }
}

fn term(
    x: Option<DistributionExpr>,
    times: Vec<DistributionExpr>,
    xi: crate::psido::XiFactor,
) -> crate::psido::SymbolTermConfig {
    crate::psido::SymbolTermConfig {
        x,
        times,
        xi: vec![xi],
    }
}

impl Default for PsidoProbeConfig {
    fn default() -> Self {
        use crate::psido::XiFactor;
        let sech = || DistributionExpr::catalog(CatalogSmooth::sech(0.0, 1.0));
        let bracket = sym(vec![term(None, vec![], XiFactor::bracket(1.0))], 1.0);
        let a = sym(vec![term(Some(sech()), vec![], XiFactor::one())], 0.0);
        PsidoProbeConfig {
            grid: Grid {
                half_width: 20.0,
                points: 512,
            },
            stability: 0.05,
            absolute_floor: 1e-10,
            exact_tolerance: 1e-12,
            probes: vec![
                ProbeSpec::CvBound {
                    symbol: bracket.clone(),
                    s: 0.0,
                    expect: Some(1.0),
                    max: None,
                },
                ProbeSpec::CvBound {
                    symbol: sym(
                        vec![term(Some(sech()), vec![], XiFactor::bracket(1.0))],
                        1.0,
                    ),
                    s: 0.0,
                    expect: None,
                    max: None,
                },
                ProbeSpec::Composition {
                    p1: sym(vec![term(None, vec![], XiFactor::power(1))], 1.0),
                    p2: a.clone(),
                    n: 2,
                    max_residual: Some(1e-10),
                },
                ProbeSpec::Composition {
                    p1: sym(vec![term(None, vec![], XiFactor::power(2))], 2.0),
                    p2: a,
                    n: 3,
                    max_residual: Some(1e-10),
                },
                ProbeSpec::Garding {
                    symbol: bracket,
                    min: Some(0.0),
                },
                ProbeSpec::Garding {
                    symbol: sym(vec![term(Some(sech()), vec![sech()], XiFactor::abs())], 1.0),
                    min: None,
                },
            ],
        }
    }
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

/// Top-level config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    /// Subcommand run by `vwlab run`.
    #[serde(default)]
    pub command: Option<Command>,
    /// Recorded in every report. All experiments are deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularize: Option<RegularizeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<NetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub existence: Option<NetConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<ConsistencyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classical: Option<ClassicalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conjugate_check: Option<ConjugateCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psido_probe: Option<PsidoProbeConfig>,
}

impl ExperimentConfig {
    pub fn new() -> Self {
        ExperimentConfig {
            format_version: FORMAT_VERSION,
            ..Default::default()
        }
    }

    pub fn parse_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.check_version()?;
        Ok(c)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.check_version()?;
        Ok(c)
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let parsed = if path.extension().is_some_and(|e| e == "json") {
            Self::parse_json(&text)
        } else {
            Self::parse_toml(&text)
        };
        parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn check_version(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Config(format!(
                "format_version: unsupported value {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        Ok(())
    }

    /// Copy holding only the section of `command`, defaults filled in and
    /// bundled templates expanded.
    pub fn resolved(&self, command: Command) -> Result<Self> {
        let mut r = ExperimentConfig {
            format_version: self.format_version,
            command: Some(command),
            seed: self.seed,
            out: self.out.clone(),
            ..Default::default()
        };
        match command {
            Command::Regularize => r.regularize = Some(self.regularize.clone().unwrap_or_default()),
            Command::Solve => {
                let mut s = self.solve.clone().unwrap_or_default();
                s.template = s.template.resolved()?;
                r.solve = Some(s);
            }
            Command::Net | Command::Existence => {
                let src = if command == Command::Net {
                    &self.net
                } else {
                    &self.existence
                };
                let mut s = src.clone().unwrap_or_default();
                s.templates = s
                    .templates
                    .iter()
                    .map(|t| t.resolved())
                    .collect::<Result<_>>()?;
                if command == Command::Net {
                    r.net = Some(s);
                } else {
                    r.existence = Some(s);
                }
            }
            Command::Uniqueness => {
                let mut s = self.uniqueness.clone().unwrap_or_default();
                s.template = s.template.resolved()?;
                r.uniqueness = Some(s);
            }
            Command::Consistency => {
                let mut s = self.consistency.clone().unwrap_or_default();
                s.template = s.template.resolved()?;
                r.consistency = Some(s);
            }
            Command::Classical => {
                let mut s = self.classical.clone().unwrap_or_default();
                for c in &mut s.cases {
                    c.template = c.template.resolved()?;
                }
                r.classical = Some(s);
            }
            Command::ConjugateCheck => {
                r.conjugate_check = Some(self.conjugate_check.clone().unwrap_or_default())
            }
            Command::PsidoProbe => {
                r.psido_probe = Some(self.psido_probe.clone().unwrap_or_default())
            }
        }
        Ok(r)
    }
}

/// Result of one subcommand, before anything is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub command: Command,
    pub pass: bool,
    /// Short human-readable lines.
    pub summary: Vec<String>,
    /// Full report JSON (config, verdict, result).
    pub report: serde_json::Value,
    pub csv: String,
    /// Extra binary outputs `(file name, bytes)`.
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    format_version: u32,
    command: &'a str,
    seed: u64,
    pass: bool,
    config: &'a ExperimentConfig,
    result: &'a T,
}

struct Partial<T> {
    pass: bool,
    summary: Vec<String>,
    result: T,
    csv: String,
    files: Vec<(String, Vec<u8>)>,
}

fn partial<T>(pass: bool, summary: Vec<String>, result: T, csv: String) -> Partial<T> {
    Partial {
        pass,
        summary,
        result,
        csv,
        files: Vec::new(),
    }
}

fn finish<T: Serialize>(
    command: Command,
    config: &ExperimentConfig,
    p: Partial<T>,
) -> Result<Outcome> {
    let env = Envelope {
        format_version: FORMAT_VERSION,
        command: command.name(),
        seed: config.seed,
        pass: p.pass,
        config,
        result: &p.result,
    };
    Ok(Outcome {
        command,
        pass: p.pass,
        summary: p.summary,
        report: serde_json::to_value(&env)?,
        csv: p.csv,
        files: p.files,
    })
}

/// Runs `command` with the matching config section.
pub fn execute(config: &ExperimentConfig, command: Command) -> Result<Outcome> {
    let rc = config.resolved(command)?;
    match command {
        Command::Regularize => finish(
            command,
            &rc,
            regularize_cmd(rc.regularize.as_ref().expect("resolved"))?,
        ),
        Command::Solve => finish(
            command,
            &rc,
            solve_cmd(rc.solve.as_ref().expect("resolved"))?,
        ),
        Command::Net => finish(command, &rc, net_cmd(rc.net.as_ref().expect("resolved"))?),
        Command::Existence => finish(
            command,
            &rc,
            existence_cmd(rc.existence.as_ref().expect("resolved"))?,
        ),
        Command::Uniqueness => finish(
            command,
            &rc,
            uniqueness_cmd(rc.uniqueness.as_ref().expect("resolved"))?,
        ),
        Command::Consistency => finish(
            command,
            &rc,
            consistency_cmd(rc.consistency.as_ref().expect("resolved"))?,
        ),
        Command::Classical => finish(
            command,
            &rc,
            classical_cmd(rc.classical.as_ref().expect("resolved"))?,
        ),
        Command::ConjugateCheck => finish(
            command,
            &rc,
            conjugate_cmd(rc.conjugate_check.as_ref().expect("resolved"))?,
        ),
        Command::PsidoProbe => finish(
            command,
            &rc,
            psido_cmd(rc.psido_probe.as_ref().expect("resolved"))?,
        ),
    }
}

/// Runs inside a rayon pool of `jobs` threads (`None`: rayon default).
pub fn execute_with_jobs(
    config: &ExperimentConfig,
    command: Command,
    jobs: Option<usize>,
) -> Result<Outcome> {
    match jobs {
        None => execute(config, command),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| Error::Config(format!("jobs: {e}")))?;
            pool.install(|| execute(config, command))
        }
    }
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    crate_version: &'a str,
    started_unix: f64,
    finished_unix: f64,
    elapsed_seconds: f64,
    jobs: Option<usize>,
    pass: bool,
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Writes the report, CSV, extra files and `metadata.json`; returns the paths.
pub fn write_outcome(
    outcome: &Outcome,
    out: &Path,
    format: OutputFormat,
    started_unix: f64,
    elapsed_seconds: f64,
    jobs: Option<usize>,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let stem = outcome.command.name();
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        let p = out.join(format!("{stem}.json"));
        std::fs::write(&p, serde_json::to_string_pretty(&outcome.report)? + "\n")?;
        written.push(p);
    }
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let p = out.join(format!("{stem}.csv"));
        std::fs::write(&p, &outcome.csv)?;
        written.push(p);
    }
    for (name, bytes) in &outcome.files {
        let p = out.join(name);
        std::fs::write(&p, bytes)?;
        written.push(p);
    }
    let meta = Metadata {
        command: stem,
        crate_version: env!("CARGO_PKG_VERSION"),
        started_unix,
        finished_unix: started_unix + elapsed_seconds,
        elapsed_seconds,
        jobs,
        pass: outcome.pass,
    };
    let p = out.join("metadata.json");
    std::fs::write(&p, serde_json::to_string_pretty(&meta)? + "\n")?;
    written.push(p);
    Ok(written)
}

/// Options of one binary invocation.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub command: Option<Command>,
    pub config: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

/// Loads, runs and writes; returns the process exit code. Messages go to
/// stdout (summary) and stderr (errors).
pub fn run(opts: &RunOptions) -> i32 {
    match run_inner(opts) {
        Ok(o) => {
            for line in &o.summary {
                println!("{line}");
            }
            println!(
                "{}: {}",
                o.command.name(),
                if o.pass { "pass" } else { "fail" }
            );
            o.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn run_inner(opts: &RunOptions) -> Result<Outcome> {
    let config = match &opts.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::new(),
    };
    let command = opts.command.or(config.command).ok_or_else(|| {
        Error::Config("command: no subcommand given and none set in the config".into())
    })?;
    let started = unix_now();
    let clock = Instant::now();
    let outcome = execute_with_jobs(&config, command, opts.jobs)?;
    let out = opts
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("vwlab-out"));
    write_outcome(
        &outcome,
        &out,
        opts.format,
        started,
        clock.elapsed().as_secs_f64(),
        opts.jobs,
    )?;
    Ok(outcome)
}

// regularize

#[derive(Clone, Debug, Serialize)]
pub struct InputRow {
    pub input: DistributionExpr,
    pub l2_norms: Vec<f64>,
    /// Growth rate of the L^2 norm in `log(1/eps)`.
    pub l2_slope: f64,
    pub l2_r_squared: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairingTable {
    pub family_version: String,
    /// `gaps[u][h][eps]`.
    pub gaps: Vec<Vec<Vec<f64>>>,
    pub all_monotone: bool,
    pub worst_final: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct OrderRow {
    pub weight: u32,
    pub beta: u32,
    pub errors: Vec<f64>,
    /// Decay rate in `log(1/eps)`, fitted over the nonzero errors.
    pub decay: f64,
    pub r_squared: f64,
    pub points: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularizeReport {
    pub pair: PairName,
    pub eps: Vec<f64>,
    pub omegas: Vec<f64>,
    pub inputs: Vec<InputRow>,
    pub pairing: Option<PairingTable>,
    pub order: Option<Vec<OrderRow>>,
}

/// Gap table of `inputs` against the versioned test family.
pub fn pairing_table(
    inputs: &[DistributionExpr],
    pair: &MollifierPair,
    omegas: &[f64],
    check: &PairingCheck,
) -> Result<PairingTable> {
    let family = test_family();
    let gaps = inputs
        .par_iter()
        .map(|u| {
            family
                .par_iter()
                .map(|h| {
                    omegas
                        .iter()
                        .map(|w| pairing_gap(u, h, pair, *w))
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let all_monotone = gaps
        .iter()
        .flatten()
        .all(|row| crate::vws_harness::is_monotone(row, check.floor));
    let worst_final = gaps
        .iter()
        .flatten()
        .map(|row| *row.last().unwrap_or(&f64::INFINITY))
        .fold(0.0, f64::max);
    Ok(PairingTable {
        family_version: TEST_FAMILY_VERSION.into(),
        pass: all_monotone && worst_final < check.tolerance,
        gaps,
        all_monotone,
        worst_final,
    })
}

/// Regularization error decay for a gaussian input.
pub fn order_table(
    check: &OrderCheck,
    pair: &MollifierPair,
    eps: &[f64],
    omegas: &[f64],
) -> Result<Vec<OrderRow>> {
    let u = TestFunction::Closed(GaussPoly::gaussian(check.gaussian[0], check.gaussian[1]));
    let rows = omegas
        .par_iter()
        .map(|w| regularization_error_table(&u, pair, *w, &check.ladder))
        .collect::<Result<Vec<_>>>()?;
    check
        .ladder
        .iter()
        .enumerate()
        .map(|(j, &(weight, beta))| {
            let errors: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (slope, _, r2) = loglog_fit(eps, &errors)?;
            Ok(OrderRow {
                weight,
                beta,
                points: errors.iter().filter(|e| **e > 0.0).count(),
                errors,
                decay: -slope,
                r_squared: r2,
            })
        })
        .collect()
}

fn regularize_cmd(c: &RegularizeConfig) -> Result<Partial<RegularizeReport>> {
    c.scale.validate()?;
    if c.eps.len() < 2 || c.inputs.is_empty() {
        return Err(Error::Config(
            "regularize: needs two eps values and one input".into(),
        ));
    }
    for u in &c.inputs {
        u.validate()?;
    }
    let pair = MollifierPair::from_name(c.pair);
    let omegas = c
        .eps
        .iter()
        .map(|e| c.scale.omega(*e))
        .collect::<Result<Vec<_>>>()?;
    let inputs = c
        .inputs
        .par_iter()
        .map(|u| {
            let l2_norms = c
                .eps
                .iter()
                .map(|e| l2_norm_quad(&regularize(u, &pair, &c.scale, *e)?))
                .collect::<Result<Vec<f64>>>()?;
            let (slope, _, r2) = loglog_fit(&c.eps, &l2_norms)?;
            Ok(InputRow {
                input: u.clone(),
                l2_norms,
                l2_slope: slope,
                l2_r_squared: r2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pairing = c
        .pairing
        .as_ref()
        .map(|chk| pairing_table(&c.inputs, &pair, &omegas, chk))
        .transpose()?;
    let order = c
        .order
        .as_ref()
        .map(|chk| order_table(chk, &pair, &c.eps, &omegas))
        .transpose()?;

    let mut pass = true;
    let mut summary = Vec::new();
    for (k, row) in inputs.iter().enumerate() {
        let ok = c
            .l2_slope
            .is_none_or(|s| (row.l2_slope - s.target).abs() <= s.tolerance);
        pass &= ok;
        summary.push(format!(
            "input {k}: L2 slope {:.4} (r2 {:.4})",
            row.l2_slope, row.l2_r_squared
        ));
    }
    if let Some(p) = &pairing {
        pass &= p.pass;
        summary.push(format!(
            "pairing gaps: monotone {} worst final {:.3e}",
            p.all_monotone, p.worst_final
        ));
    }
    if let (Some(rows), Some(chk)) = (&order, &c.order) {
        for r in rows {
            let ok = chk.min_decay.is_none_or(|m| r.decay >= m)
                && chk.max_decay.is_none_or(|m| r.decay <= m);
            pass &= ok;
            summary.push(format!(
                "error decay (M={}, beta={}): {:.3} over {} points",
                r.weight, r.beta, r.decay, r.points
            ));
        }
    }
    let mut csv = String::from("kind,input,index,eps,value\n");
    for (k, row) in inputs.iter().enumerate() {
        for (e, v) in c.eps.iter().zip(&row.l2_norms) {
            let _ = writeln!(csv, "l2_norm,{k},0,{e:e},{v:e}");
        }
    }
    if let Some(p) = &pairing {
        for (k, u) in p.gaps.iter().enumerate() {
            for (h, row) in u.iter().enumerate() {
                for (e, v) in c.eps.iter().zip(row) {
                    let _ = writeln!(csv, "pairing_gap,{k},{h},{e:e},{v:e}");
                }
            }
        }
    }
    if let Some(rows) = &order {
        for (j, r) in rows.iter().enumerate() {
            for (e, v) in c.eps.iter().zip(&r.errors) {
                let _ = writeln!(csv, "regularization_error,0,{j},{e:e},{v:e}");
            }
        }
    }
    Ok(partial(
        pass,
        summary,
        RegularizeReport {
            pair: c.pair,
            eps: c.eps.clone(),
            omegas,
            inputs,
            pairing,
            order,
        },
        csv,
    ))
}

// solve

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub template: String,
    pub eps: Option<f64>,
    pub report: SolveReport,
    pub snapshot_files: Vec<String>,
    pub validation: Option<ValidationReport>,
}

fn solve_cmd(c: &SolveConfig) -> Result<Partial<SolveResult>> {
    let template = c.template.resolve()?;
    let problem = match c.eps {
        Some(eps) => member_inputs(&template, &c.regularization, eps, None)?.problem(&template)?,
        None => template.unregularized()?,
    };
    let mut record = c.record.clone();
    for t in &c.snapshots {
        if !record.t_nodes.iter().any(|s| s == t) {
            record.t_nodes.push(*t);
        }
    }
    let report = solve(&problem.with_record(record))?;
    let mut files = Vec::new();
    let mut snapshot_files = Vec::new();
    for (k, t) in c.snapshots.iter().enumerate() {
        if let Some(u) = report.snapshot_at(*t) {
            let mut bytes = Vec::new();
            u.write_binary_to(&mut bytes)?;
            let name = format!("snapshot_{k}.bin");
            snapshot_files.push(name.clone());
            files.push((name, bytes));
        }
    }
    let validation = c.validation.as_ref().map(validation_suite).transpose()?;
    let mut summary = vec![format!(
        "{}: {} steps, dt_max {:.3e}{}",
        template.name,
        report.steps,
        report.dt_max,
        match &report.aborted {
            Some(a) => format!(", aborted at t = {} ({})", a.t_last, a.reason),
            None => String::new(),
        }
    )];
    if let Some(v) = &validation {
        summary.push(format!(
            "validation: closed form {:.3e}, temporal order {:.3}, manufactured {:.3e} / {:.3e}",
            v.closed_form_error, v.temporal_order, v.manufactured_free, v.manufactured_coefficients
        ));
    }
    let pass = report.completed() && validation.as_ref().is_none_or(|v| v.pass);
    let mut csv = String::from("t,m,M,norm\n");
    for n in &report.norms {
        let _ = writeln!(csv, "{},{},{},{:e}", n.t, n.m, n.weight, n.value);
    }
    let mut p = partial(
        pass,
        summary,
        SolveResult {
            template: template.name.clone(),
            eps: c.eps,
            report,
            snapshot_files,
            validation,
        },
        csv,
    );
    p.files = files;
    Ok(p)
}

// net / existence

#[derive(Clone, Debug, Serialize)]
pub struct NetSummary {
    pub template: String,
    pub eps: Vec<f64>,
    pub omegas: Vec<f64>,
    pub aborted: Vec<f64>,
    pub fits: Vec<LadderFit>,
}

fn net_csv(csv: &mut String, name: &str, net: &EpsilonNet) {
    for (e, r) in net.eps.iter().zip(&net.members) {
        for n in &r.norms {
            let _ = writeln!(
                csv,
                "{name},{e:e},{},{},{},{:e}",
                n.t, n.m, n.weight, n.value
            );
        }
    }
}

const NET_CSV_HEADER: &str = "template,eps,t,m,M,norm\n";

fn net_cmd(c: &NetConfig) -> Result<Partial<Vec<NetSummary>>> {
    let mut out = Vec::new();
    let mut csv = String::from(NET_CSV_HEADER);
    let mut summary = Vec::new();
    for src in &c.templates {
        let t = src.resolve()?;
        let net = build_net(&t, &c.regularization, &c.net, None)?;
        let fits = c
            .net
            .ladder
            .iter()
            .filter_map(|&(m, w)| {
                fit_powerlaw(&net.eps, &net.norms((m, w), t.t_final), &c.thresholds)
                    .ok()
                    .map(|fit| LadderFit { m, weight: w, fit })
            })
            .collect();
        net_csv(&mut csv, &t.name, &net);
        let aborted = net.aborted_eps();
        summary.push(format!(
            "{}: {} members, aborted {:?}",
            t.name,
            net.eps.len(),
            aborted
        ));
        out.push(NetSummary {
            template: t.name.clone(),
            eps: net.eps.clone(),
            omegas: net.omegas.clone(),
            aborted,
            fits,
        });
    }
    let pass = out.iter().all(|n| n.aborted.is_empty());
    Ok(partial(pass, summary, out, csv))
}

fn fit_line(f: &LadderFit) -> String {
    format!(
        "  (m={}, M={}) slope {:.3} r2 {:.3} -> {}",
        f.m,
        f.weight,
        f.fit.slope,
        f.fit.r_squared,
        f.fit.verdict.label()
    )
}

fn existence_cmd(c: &NetConfig) -> Result<Partial<Vec<ExistenceReport>>> {
    let mut reports = Vec::new();
    let mut csv = String::from(NET_CSV_HEADER);
    let mut summary = Vec::new();
    for src in &c.templates {
        let t = src.resolve()?;
        let r = run_existence(&t, &c.regularization, &c.net, &c.thresholds)?;
        if let Some(net) = &r.net {
            net_csv(&mut csv, &t.name, net);
        }
        summary.push(format!(
            "{}: {}",
            t.name,
            if r.pass {
                "all moderate"
            } else {
                "not all moderate"
            }
        ));
        summary.extend(r.fits.iter().map(fit_line));
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(partial(pass, summary, reports, csv))
}

// uniqueness

fn uniqueness_cmd(c: &UniquenessConfig) -> Result<Partial<Vec<UniquenessReport>>> {
    let t = c.template.resolve()?;
    if c.perturbations.is_empty() {
        return Err(Error::Config("uniqueness.perturbations: empty".into()));
    }
    let mut reports = Vec::new();
    let mut summary = Vec::new();
    let mut csv = String::from("q,m,M,eps,difference\n");
    for p in &c.perturbations {
        let r = run_uniqueness(&t, &c.regularization, p, &c.net, &c.thresholds)?;
        summary.push(format!("q = {}: verdict {}", p.order, r.verdict.label()));
        summary.extend(r.fits.iter().map(fit_line));
        for (&(m, w), row) in c.net.ladder.iter().zip(&r.differences) {
            for (e, v) in r.eps.iter().zip(row) {
                let v = v.map(|x| format!("{x:e}")).unwrap_or_default();
                let _ = writeln!(csv, "{},{m},{w},{e:e},{v}", p.order);
            }
        }
        reports.push(r);
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(partial(pass, summary, reports, csv))
}

// consistency

fn consistency_cmd(c: &ConsistencyConfig) -> Result<Partial<ConsistencyReport>> {
    let t = c.template.resolve()?;
    let r = run_consistency(&t, &c.settings)?;
    let mut summary = Vec::new();
    let mut csv = String::from("pair,eps,error\n");
    for curve in &r.curves {
        summary.push(format!(
            "{:?}: final {:.3e}, monotone {}",
            curve.pair, curve.final_error, curve.monotone
        ));
        for (e, v) in r.eps.iter().zip(&curve.errors) {
            let _ = writeln!(csv, "{:?},{e:e},{v:e}", curve.pair);
        }
    }
    summary.push(format!("limit gap {:.3e}", r.limit_gap));
    Ok(partial(r.pass, summary, r, csv))
}

// classical

#[derive(Clone, Debug, Serialize)]
pub struct ClassicalCaseResult {
    pub expect: RegimeVerdict,
    pub report: ClassicalReport,
    pub pass: bool,
}

fn classical_cmd(c: &ClassicalConfig) -> Result<Partial<Vec<ClassicalCaseResult>>> {
    let mut out = Vec::new();
    let mut summary = Vec::new();
    let mut csv = String::from("template,loss,eps,ratio\n");
    for case in &c.cases {
        let t = case.template.resolve()?;
        let report = run_classical(&t, &c.regularization, &c.settings)?;
        let pass = report.verdict == case.expect;
        summary.push(format!(
            "{}: {} (expected {}), loss {:?}: {}",
            t.name,
            regime_label(report.verdict),
            regime_label(case.expect),
            report.loss,
            report.reason
        ));
        for (loss, row) in c.settings.loss_ladder.iter().zip(&report.ratios) {
            for (e, v) in report.eps.iter().zip(row) {
                let _ = writeln!(csv, "{},{loss},{e:e},{v:e}", t.name);
            }
        }
        out.push(ClassicalCaseResult {
            expect: case.expect,
            report,
            pass,
        });
    }
    let pass = out.iter().all(|r| r.pass);
    Ok(partial(pass, summary, out, csv))
}

pub fn regime_label(v: RegimeVerdict) -> &'static str {
    match v {
        RegimeVerdict::UniformBound => "uniform_bound",
        RegimeVerdict::OutsideRegime => "outside_regime",
    }
}

// conjugate-check

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationRow {
    pub set: String,
    pub s: u32,
    pub t: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugationReport {
    pub rows: Vec<ConjugationRow>,
    pub max_error: f64,
}

fn conjugate_cmd(c: &ConjugateCheckConfig) -> Result<Partial<ConjugationReport>> {
    c.grid.validate()?;
    c.probe.validate()?;
    let all = conjugation_test_sets();
    for name in &c.sets {
        if !all.iter().any(|(n, _)| n == name) {
            let known: Vec<&str> = all.iter().map(|(n, _)| n.as_str()).collect();
            return Err(Error::Config(format!(
                "conjugate_check.sets: unknown set '{name}' (known: {})",
                known.join(", ")
            )));
        }
    }
    let probe = c.probe.clone();
    let v = Field::from_fn(c.grid, |x| probe.value(x));
    let mut jobs = Vec::new();
    for (name, set) in all
        .iter()
        .filter(|(n, _)| c.sets.is_empty() || c.sets.contains(n))
    {
        for &s in &c.s_values {
            for &t in &c.t_nodes {
                jobs.push((name.clone(), set, s, t));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|(name, set, s, t)| {
            Ok(ConjugationRow {
                set: name.clone(),
                s: *s,
                t: *t,
                relative_error: conjugation_identity_error(set, *s, *t, &v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_error = rows.iter().map(|r| r.relative_error).fold(0.0, f64::max);
    let mut csv = String::from("set,s,t,relative_error\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{:e}", r.set, r.s, r.t, r.relative_error);
    }
    let summary = vec![format!(
        "{} checks, max relative error {max_error:.3e}",
        rows.len()
    )];
    Ok(partial(
        max_error < c.tolerance,
        summary,
        ConjugationReport { rows, max_error },
        csv,
    ))
}

// psido-probe

#[derive(Clone, Debug, Serialize)]
pub struct ProbeOutcome {
    pub spec: ProbeSpec,
    pub result: Option<ProbeResult>,
    pub seminorms: Option<Vec<f64>>,
    pub stable: bool,
    pub pass: bool,
}

/// Refinement stability with an absolute floor for values near zero.
pub fn probe_stable(r: &ProbeResult, stability: f64, floor: f64) -> bool {
    r.refinement_stable(stability) || (r.value.abs() < floor && r.refined.abs() < floor)
}

fn psido_cmd(c: &PsidoProbeConfig) -> Result<Partial<Vec<ProbeOutcome>>> {
    c.grid.validate()?;
    let outs = c
        .probes
        .iter()
        .map(|spec| {
            let (result, seminorms, expectation_ok) = match spec {
                ProbeSpec::CvBound {
                    symbol,
                    s,
                    expect,
                    max,
                } => {
                    let r = cv_bound_probe(&symbol.build()?, *s, c.grid)?;
                    let ok = expect.is_none_or(|e| {
                        (r.value - e).abs() <= c.exact_tolerance * e.abs().max(1.0)
                    }) && max.is_none_or(|m| r.value <= m)
                        && r.value.is_finite();
                    (Some(r), None, ok)
                }
                ProbeSpec::Composition {
                    p1,
                    p2,
                    n,
                    max_residual,
                } => {
                    let r = composition_residual(&p1.build()?, &p2.build()?, *n, c.grid)?;
                    let ok = max_residual.is_none_or(|m| r.value < m) && r.value.is_finite();
                    (Some(r), None, ok)
                }
                ProbeSpec::Garding { symbol, min } => {
                    let r = garding_probe(&symbol.build()?, c.grid)?;
                    let ok = min.is_none_or(|m| r.value >= m) && r.value.is_finite();
                    (Some(r), None, ok)
                }
                ProbeSpec::Seminorms { symbol, max_l } => {
                    let t = symbol_seminorms(&symbol.build()?, *max_l, c.grid)?;
                    let ok = t.iter().all(|v| v.is_finite());
                    (None, Some(t), ok)
                }
            };
            let stable = result
                .as_ref()
                .is_none_or(|r| probe_stable(r, c.stability, c.absolute_floor));
            Ok(ProbeOutcome {
                spec: spec.clone(),
                result,
                seminorms,
                stable,
                pass: stable && expectation_ok,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut csv = String::from("probe,index,value,refined,relative_change\n");
    let mut summary = Vec::new();
    for (k, o) in outs.iter().enumerate() {
        if let Some(r) = &o.result {
            let _ = writeln!(
                csv,
                "{},{k},{:e},{:e},{:e}",
                r.probe, r.value, r.refined, r.relative_change
            );
            summary.push(format!(
                "{}: {:.6e} (2N: {:.6e}) {}",
                r.probe,
                r.value,
                r.refined,
                if o.pass { "ok" } else { "FAIL" }
            ));
        }
        if let Some(t) = &o.seminorms {
            for (l, v) in t.iter().enumerate() {
                let _ = writeln!(csv, "seminorm(l={l}),{k},{v:e},,");
            }
            summary.push(format!("seminorms: {t:?}"));
        }
    }
    let pass = outs.iter().all(|o| o.pass);
    Ok(partial(pass, summary, outs, csv))
}
