//! Declarative experiments: a model, a stopping rule, a reference law and
//! the artifacts to write, read from one JSON document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{BarrierFunction, ConditionalMean, FnSpec};
use crate::lawlib::{self, ClosedForm, ScaleFunction, SurvivalLaw};
use crate::measure::{MeasureOnHalfLine, MeasureSpec};
use crate::pathsim::{ModelSpec, Variant};
use crate::rng::RngStream;
use crate::stoprule::{Detection, RuleSpec, StoppedRecord, StoppingRule};
use crate::verify::{self, EmpiricalSample, Summary, SurvivalComparison};

/// Environment variable overriding `n_paths` of every scenario.
pub const PATHS_ENV: &str = "SIGMALAB_PATHS";

/// Step of the tabulated survival curves used for comparisons.
const CURVE_STEP: f64 = 2e-3;

/// Stopped quantity compared against the law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    #[default]
    X,
    A,
    /// The model's side series, such as the running maximum.
    Companion,
    T,
    /// 1 if the first member of an `any_of` rule fired, else 0.
    FirstMemberFired,
}

impl Observable {
    pub fn of(self, r: &StoppedRecord) -> f64 {
        match self {
            Observable::X => r.x,
            Observable::A => r.a,
            Observable::Companion => r.companion,
            Observable::T => r.t,
            Observable::FirstMemberFired => f64::from(u8::from(r.fired == Some(0))),
        }
    }
}

/// A named law with its parameters. Survival laws describe `P(V > x)`;
/// probabilities are compared as the law of an indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawSpec {
    Exponential {
        rate: f64,
    },
    MeasureSurvival {
        measure: MeasureSpec,
    },
    #[serde(alias = "law_A_infty_survival")]
    LawAInftySurvival {
        lambda: FnSpec,
    },
    LawMaxMartingaleSurvival {
        alpha: FnSpec,
    },
    #[serde(alias = "law_A_T_survival")]
    LawATSurvival {
        phi: FnSpec,
    },
    #[serde(alias = "law_A_T_psi_survival")]
    LawATPsiSurvival {
        psi: FnSpec,
    },
    LehoczkySurvival {
        drift: FnSpec,
        diffusion: FnSpec,
        theta: FnSpec,
    },
    #[serde(alias = "reflected_sde_LT_survival")]
    ReflectedSdeLtSurvival {
        drift: FnSpec,
        diffusion: FnSpec,
        theta: FnSpec,
    },
    ReflectedConstantRatioSurvival {
        gamma: f64,
        level: f64,
    },
    LawSpqSurvival {
        p: f64,
        q: f64,
    },
    LawSphiSurvival {
        phi: FnSpec,
    },
    DoobMaximalSurvival {
        x0: f64,
    },
    /// `R^{2μ}_t` for the Bessel process of dimension `2(1-μ)` from 0.
    BesselPowerMarginal {
        mu: f64,
        #[serde(default = "one")]
        t: f64,
    },
    HittingProb {
        phi: FnSpec,
    },
    HittingProbUpTo {
        phi: FnSpec,
        u: f64,
    },
    SpqConstant {
        p: f64,
        q: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// A law ready for evaluation.
pub enum CompiledLaw {
    Survival(Box<dyn SurvivalLaw + Send>),
    /// A probability, compared as the law of a 0/1 observable.
    Probability(f64),
    /// A constant with no sampling interpretation.
    Constant(f64),
}

impl std::fmt::Debug for CompiledLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CompiledLaw::Survival(_) => f.write_str("Survival(..)"),
            CompiledLaw::Probability(p) => write!(f, "Probability({p})"),
            CompiledLaw::Constant(c) => write!(f, "Constant({c})"),
        }
    }
}

/// Survival of an indicator that equals 1 with probability `p`.
fn bernoulli(p: f64) -> impl Fn(f64) -> f64 + Sync {
    move |x| {
        if x < 0.0 {
            1.0
        } else if x < 1.0 {
            p
        } else {
            0.0
        }
    }
}

struct MeasureLaw(MeasureOnHalfLine);

impl SurvivalLaw for MeasureLaw {
    fn survival(&self, x: f64) -> f64 {
        self.0.survival(x)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.0.quantile(p)
    }
}

fn pointwise(f: impl Fn(f64) -> Result<f64> + Sync + Send + 'static) -> Box<dyn SurvivalLaw + Send> {
    Box::new(ClosedForm(move |x: f64| if x <= 0.0 { 1.0 } else { f(x).unwrap_or(f64::NAN) }))
}

impl LawSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LawSpec::Exponential { .. } => "exponential",
            LawSpec::MeasureSurvival { .. } => "measure_survival",
            LawSpec::LawAInftySurvival { .. } => "law_a_infty_survival",
            LawSpec::LawMaxMartingaleSurvival { .. } => "law_max_martingale_survival",
            LawSpec::LawATSurvival { .. } => "law_a_t_survival",
            LawSpec::LawATPsiSurvival { .. } => "law_a_t_psi_survival",
            LawSpec::LehoczkySurvival { .. } => "lehoczky_survival",
            LawSpec::ReflectedSdeLtSurvival { .. } => "reflected_sde_lt_survival",
            LawSpec::ReflectedConstantRatioSurvival { .. } => "reflected_constant_ratio_survival",
            LawSpec::LawSpqSurvival { .. } => "law_spq_survival",
            LawSpec::LawSphiSurvival { .. } => "law_sphi_survival",
            LawSpec::DoobMaximalSurvival { .. } => "doob_maximal_survival",
            LawSpec::BesselPowerMarginal { .. } => "bessel_power_marginal",
            LawSpec::HittingProb { .. } => "hitting_prob",
            LawSpec::HittingProbUpTo { .. } => "hitting_prob_up_to",
            LawSpec::SpqConstant { .. } => "spq_constant",
        }
    }

    /// Resolves functions and tables; relative paths are taken from `base`.
    pub fn compile(&self, base: Option<&Path>) -> Result<CompiledLaw> {
        // Heavy tails never reach the curve's cutoff; those are evaluated pointwise.
        let curve = |law: lawlib::ExponentLaw| -> Result<CompiledLaw> {
            Ok(CompiledLaw::Survival(match law.curve(CURVE_STEP) {
                Ok(c) => Box::new(c),
                Err(Error::QuadratureFailure(_)) => Box::new(law),
                Err(e) => return Err(e),
            }))
        };
        let field = |name: &str, e: Error| Error::config(format!("law.{name}"), e.to_string());
        match self {
            LawSpec::Exponential { rate } => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(Error::config("law.rate", format!("must be positive, got {rate}")));
                }
                let rate = *rate;
                Ok(CompiledLaw::Survival(Box::new(ClosedForm(move |x: f64| if x <= 0.0 { 1.0 } else { (-rate * x).exp() }))))
            }
            LawSpec::MeasureSurvival { measure } => {
                let m = measure.build(base).map_err(|e| field("measure", e))?;
                Ok(CompiledLaw::Survival(Box::new(MeasureLaw(m))))
            }
            LawSpec::LawAInftySurvival { lambda } => {
                let lam = ConditionalMean::new(lambda.compile(base)?).map_err(|e| field("lambda", e))?;
                curve(lawlib::law_a_infty(&lam))
            }
            LawSpec::LawMaxMartingaleSurvival { alpha } => {
                curve(lawlib::law_max_martingale(&alpha.compile(base)?).map_err(|e| field("alpha", e))?)
            }
            LawSpec::LawATSurvival { phi } => curve(lawlib::law_a_t(&phi.compile(base)?)),
            LawSpec::LawATPsiSurvival { psi } => curve(lawlib::law_a_t_psi(&psi.compile(base)?)),
            LawSpec::LehoczkySurvival { drift, diffusion, theta } => {
                let sf = ScaleFunction::new(drift.compile(base)?, diffusion.compile(base)?)
                    .map_err(|e| field("diffusion", e))?;
                let theta = BarrierFunction::new(theta.compile(base)?).map_err(|e| field("theta", e))?;
                curve(lawlib::lehoczky_law(&sf, &theta))
            }
            LawSpec::ReflectedSdeLtSurvival { drift, diffusion, theta } => {
                let sf = ScaleFunction::new(drift.compile(base)?, diffusion.compile(base)?)
                    .map_err(|e| field("diffusion", e))?;
                let theta = BarrierFunction::new(theta.compile(base)?).map_err(|e| field("theta", e))?;
                curve(lawlib::reflected_sde_lt_law(&sf, &theta))
            }
            LawSpec::ReflectedConstantRatioSurvival { gamma, level } => {
                if !(gamma.is_finite() && *level > 0.0 && level.is_finite()) {
                    return Err(Error::config("law.level", format!("need finite gamma and positive level, got {gamma}, {level}")));
                }
                let (g, a) = (*gamma, *level);
                Ok(CompiledLaw::Survival(Box::new(ClosedForm(move |x: f64| lawlib::reflected_constant_ratio_survival(g, a, x)))))
            }
            LawSpec::LawSpqSurvival { p, q } => {
                let (p, q) = (*p, *q);
                lawlib::spq_constant(p, q).map_err(|e| field("q", e))?;
                Ok(CompiledLaw::Survival(pointwise(move |a| lawlib::law_spq_survival_closed(p, q, a))))
            }
            LawSpec::LawSphiSurvival { phi } => {
                let phi = phi.compile(base)?;
                lawlib::law_sphi_survival(&phi, 1.0).map_err(|e| field("phi", e))?;
                Ok(CompiledLaw::Survival(pointwise(move |a| lawlib::law_sphi_survival(&phi, a))))
            }
            LawSpec::DoobMaximalSurvival { x0 } => {
                if !(*x0 > 0.0 && x0.is_finite()) {
                    return Err(Error::config("law.x0", format!("must be positive, got {x0}")));
                }
                let x0 = *x0;
                Ok(CompiledLaw::Survival(pointwise(move |a| lawlib::doob_maximal_survival(x0, a))))
            }
            LawSpec::BesselPowerMarginal { mu, t } => {
                if !(*mu > 0.0 && *mu < 1.0) || !(*t > 0.0 && t.is_finite()) {
                    return Err(Error::config("law.mu", format!("need mu in (0, 1) and t > 0, got {mu}, {t}")));
                }
                let (mu, t) = (*mu, *t);
                Ok(CompiledLaw::Survival(pointwise(move |x| Ok(bessel_power_marginal_survival(mu, t, x)))))
            }
            LawSpec::HittingProb { phi } => {
                let phi = BarrierFunction::new(phi.compile(base)?).map_err(|e| field("phi", e))?;
                Ok(CompiledLaw::Probability(lawlib::hitting_prob(&phi).map_err(|e| field("phi", e))?))
            }
            LawSpec::HittingProbUpTo { phi, u } => {
                let phi = BarrierFunction::new(phi.compile(base)?).map_err(|e| field("phi", e))?;
                Ok(CompiledLaw::Probability(lawlib::hitting_prob_up_to(&phi, *u).map_err(|e| field("u", e))?))
            }
            LawSpec::SpqConstant { p, q } => Ok(CompiledLaw::Constant(lawlib::spq_constant(*p, *q).map_err(|e| field("q", e))?)),
        }
    }
}

/// `P(R^{2μ}_t > x)` for the Bessel process of dimension `2(1-μ)` started at 0,
/// where `R²_t = 2t·Gamma(1-μ)`.
pub fn bessel_power_marginal_survival(mu: f64, t: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(1.0 - mu, x.powf(1.0 / mu) / (2.0 * t))
}

/// An artifact written after a run; relative paths are taken from the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OutputSpec {
    SurvivalCsv { path: PathBuf },
    SummaryJson { path: PathBuf },
    PathDump { dir: PathBuf, count: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleSpec>,
    #[serde(default)]
    pub detection: Detection,
    #[serde(default)]
    pub observable: Observable,
    pub law: LawSpec,
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Defaults to the exact-simulator slack, or the Euler slack for Euler models.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default = "default_censor_limit")]
    pub censor_limit: f64,
    /// Compare only at these points instead of over the whole law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<f64>>,
    #[serde(default)]
    pub outputs: Vec<OutputSpec>,
}

fn default_alpha() -> f64 {
    0.01
}

fn default_censor_limit() -> f64 {
    verify::CENSOR_LIMIT
}

/// Comparison and verdict of one run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub comparison: SurvivalComparison,
    pub summary: Summary,
    pub sample: EmpiricalSample,
    pub records: Vec<StoppedRecord>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let s: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            Error::config(if field == "." { "scenario".to_string() } else { field }, e.into_inner().to_string())
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("name", "must not be empty"));
        }
        if self.n_paths == 0 {
            return Err(Error::config("n_paths", "must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if self.slack.is_some_and(|s| !(s >= 0.0 && s.is_finite())) {
            return Err(Error::config("slack", "must be finite and nonnegative"));
        }
        if !(self.censor_limit > 0.0 && self.censor_limit <= 1.0) {
            return Err(Error::config("censor_limit", "must lie in (0, 1]"));
        }
        if let Some(points) = &self.points {
            if points.is_empty() || points.iter().any(|p| !p.is_finite()) {
                return Err(Error::config("points", "must be a nonempty list of finite numbers"));
            }
        }
        if self.observable == Observable::FirstMemberFired && !matches!(self.rule, Some(RuleSpec::AnyOf { .. })) {
            return Err(Error::config("observable", "first_member_fired needs an any_of rule"));
        }
        Ok(())
    }

    /// Slack in effect for this scenario.
    pub fn effective_slack(&self) -> f64 {
        self.slack.unwrap_or(match self.model.variant {
            Variant::ReflectedSde { .. } | Variant::DiffusionWithMax { .. } | Variant::SupMinusMartingale { .. } => {
                verify::EULER_SLACK
            }
            _ => verify::EXACT_SLACK,
        })
    }

    /// Applies the `SIGMALAB_PATHS` override and explicit CLI overrides.
    pub fn apply_overrides(&mut self, paths: Option<u64>, seed: Option<u64>) -> Result<()> {
        if let Ok(v) = std::env::var(PATHS_ENV) {
            let n = v.trim().parse().map_err(|_| Error::config(PATHS_ENV, format!("not a count: {v}")))?;
            self.n_paths = n;
        }
        if let Some(n) = paths {
            self.n_paths = n;
        }
        if let Some(s) = seed {
            self.seed = s;
        }
        self.validate()
    }

    /// Simulates every path and returns its stopped record. Without a rule the
    /// record is the state at the end of the window and counts as observed.
    pub fn simulate(&self, base: Option<&Path>) -> Result<Vec<StoppedRecord>> {
        let model = self.model.compile(base)?;
        match &self.rule {
            Some(spec) => {
                let rule = spec.compile(base)?;
                verify::run_batch_with(&model, &rule, self.seed, self.n_paths, self.detection)
            }
            None => {
                let never = StoppingRule::AnyOf(Vec::new());
                let mut records = verify::run_batch(&model, &never, self.seed, self.n_paths)?;
                for r in &mut records {
                    r.stopped = true;
                    r.fired = None;
                }
                Ok(records)
            }
        }
    }

    /// Runs the scenario and compares the observable against the law.
    pub fn run(&self, base: Option<&Path>) -> Result<Outcome> {
        let law = self.law.compile(base)?;
        log::info!("{}: simulating {} paths", self.name, self.n_paths);
        let records = self.simulate(base)?;
        let observable = self.observable;
        let sample = EmpiricalSample::from_records(&records, |r| observable.of(r))?;
        let slack = self.effective_slack();
        let boxed: Box<dyn SurvivalLaw + Send> = match law {
            CompiledLaw::Survival(l) => l,
            CompiledLaw::Probability(p) => Box::new(ClosedForm(bernoulli(p))),
            CompiledLaw::Constant(_) => {
                return Err(Error::config("law.name", format!("{} is a constant, not a law", self.law.name())));
            }
        };
        let comparison = match &self.points {
            None => verify::ks_against_with_limit(&sample, boxed.as_ref(), self.alpha, slack, self.censor_limit)?,
            Some(points) => verify::compare_at_points(&sample, boxed.as_ref(), points, self.alpha, slack, self.censor_limit)?,
        };
        let summary = comparison.summary(&self.name);
        log::info!("{}: ks {:.4}, band {:.4}, pass {}", self.name, summary.ks, summary.dkw_eps + summary.slack, summary.pass);
        Ok(Outcome { comparison, summary, sample, records })
    }

    /// Writes the declared outputs of a finished run under `out`.
    pub fn write_outputs(&self, outcome: &Outcome, out: &Path, base: Option<&Path>) -> Result<()> {
        for o in &self.outputs {
            match o {
                OutputSpec::SurvivalCsv { path } => {
                    let p = out.join(path);
                    ensure_parent(&p)?;
                    outcome.comparison.write_csv(&p)?;
                }
                OutputSpec::SummaryJson { path } => {
                    let p = out.join(path);
                    ensure_parent(&p)?;
                    write_summary(&outcome.summary, &p)?;
                }
                OutputSpec::PathDump { dir, count } => self.dump_paths(&out.join(dir), *count, base)?,
            }
        }
        Ok(())
    }

    /// Writes the first `count` full paths as `path_<i>.csv`.
    pub fn dump_paths(&self, dir: &Path, count: u64, base: Option<&Path>) -> Result<()> {
        let model = self.model.compile(base)?;
        std::fs::create_dir_all(dir)?;
        for i in 0..count.min(self.n_paths) {
            let path = model.simulate(RngStream::new(self.seed, i))?;
            path.write_csv(&dir.join(format!("path_{i}.csv")))?;
        }
        Ok(())
    }
}

fn ensure_parent(p: &Path) -> Result<()> {
    if let Some(dir) = p.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

/// Writes the verdict object, floats with 17 significant digits.
pub fn write_summary(summary: &Summary, path: &Path) -> Result<()> {
    std::fs::write(path, summary_json(summary) + "\n")?;
    Ok(())
}

pub fn summary_json(s: &Summary) -> String {
    format!(
        "{{\"scenario\":{},\"n\":{},\"censored\":{},\"ks\":{:.16e},\"dkw_eps\":{:.16e},\"slack\":{:.16e},\"pass\":{}}}",
        serde_json::Value::String(s.scenario.clone()),
        s.n,
        s.censored,
        s.ks,
        s.dkw_eps,
        s.slack,
        s.pass
    )
}

/// Writes stopped records as CSV.
pub fn write_records(records: &[StoppedRecord], path: &Path) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "path,stopped,index,t,x,a,companion")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(out, "{i},{},{},{:.16e},{:.16e},{:.16e},{:.16e}", r.stopped, r.index, r.t, r.x, r.a, r.companion)?;
    }
    out.flush()?;
    Ok(())
}

/// Grid for a law table: either explicit points or `from..=to` by `step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Points(Vec<f64>),
    Range { from: f64, to: f64, step: f64 },
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<f64>> {
        match *self {
            GridSpec::Points(ref p) => Ok(p.clone()),
            GridSpec::Range { from, to, step } => {
                if !(step > 0.0 && from.is_finite() && to >= from) {
                    return Err(Error::config("grid", format!("need step > 0 and to ≥ from, got {from}..{to} by {step}")));
                }
                let n = ((to - from) / step + 1e-9).floor() as usize;
                Ok((0..=n).map(|i| from + i as f64 * step).collect())
            }
        }
    }
}

/// A law evaluated on a grid, as read by the `laws` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawTable {
    pub law: LawSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
}

impl LawTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))
    }

    /// `(x, value)` rows. Constants and probabilities give one row at `x = 0`.
    pub fn rows(&self, base: Option<&Path>) -> Result<Vec<(f64, f64)>> {
        match self.law.compile(base)? {
            CompiledLaw::Constant(c) | CompiledLaw::Probability(c) => Ok(vec![(0.0, c)]),
            CompiledLaw::Survival(law) => {
                let grid = self.grid.as_ref().ok_or_else(|| Error::config("grid", "survival laws need a grid"))?;
                Ok(grid.points()?.into_iter().map(|x| (x, law.survival(x))).collect())
            }
        }
    }
}

/// Writes `x,value` rows with 17 significant digits.
pub fn write_law_rows(rows: &[(f64, f64)], mut out: impl std::io::Write) -> Result<()> {
    writeln!(out, "x,value")?;
    for (x, v) in rows {
        writeln!(out, "{x:.16e},{v:.16e}")?;
    }
    out.flush()?;
    Ok(())
}

/// Scenario files shipped with the crate, by file name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("embed_exp.json", include_str!("../scenarios/embed_exp.json")),
    ("embed_uniform_bar.json", include_str!("../scenarios/embed_uniform_bar.json")),
    ("knight_estimate.json", include_str!("../scenarios/knight_estimate.json")),
    ("hitting_level_bm.json", include_str!("../scenarios/hitting_level_bm.json")),
    ("hitting_level_bessel_quarter.json", include_str!("../scenarios/hitting_level_bessel_quarter.json")),
    ("hitting_level_bessel_three_quarters.json", include_str!("../scenarios/hitting_level_bessel_three_quarters.json")),
    ("reciprocal_barrier.json", include_str!("../scenarios/reciprocal_barrier.json")),
    ("lehoczky_ou.json", include_str!("../scenarios/lehoczky_ou.json")),
    ("reflected_sde_local_time.json", include_str!("../scenarios/reflected_sde_local_time.json")),
    ("doob_maximal.json", include_str!("../scenarios/doob_maximal.json")),
    ("stopped_bm_maximum.json", include_str!("../scenarios/stopped_bm_maximum.json")),
    ("bessel_marginal_quarter.json", include_str!("../scenarios/bessel_marginal_quarter.json")),
    ("bessel_marginal_half.json", include_str!("../scenarios/bessel_marginal_half.json")),
    ("bessel_marginal_three_quarters.json", include_str!("../scenarios/bessel_marginal_three_quarters.json")),
];

/// Where scenario files are read from.
#[derive(Debug, Clone, Default)]
pub enum ScenarioSource {
    #[default]
    Bundled,
    Dir(PathBuf),
}

impl ScenarioSource {
    /// Loads and validates a scenario by file name.
    pub fn load(&self, file: &str) -> Result<Scenario> {
        match self {
            ScenarioSource::Bundled => {
                let text = BUNDLED
                    .iter()
                    .find(|(n, _)| *n == file)
                    .map(|(_, t)| *t)
                    .ok_or_else(|| Error::config("scenario", format!("no bundled scenario {file}")))?;
                Scenario::from_json(text).map_err(|e| in_file(file, e))
            }
            ScenarioSource::Dir(dir) => Scenario::load(&dir.join(file)).map_err(|e| in_file(file, e)),
        }
    }

    /// Base directory for relative table paths.
    pub fn base(&self) -> Option<&Path> {
        match self {
            ScenarioSource::Bundled => None,
            ScenarioSource::Dir(d) => Some(d),
        }
    }
}

fn in_file(file: &str, e: Error) -> Error {
    match e {
        Error::Config { field, reason } => Error::Config { field: format!("{file}: {field}"), reason },
        other => other,
    }
}
