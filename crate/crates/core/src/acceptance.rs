//! The acceptance suite: thirteen Monte Carlo and quadrature criteria, each
//! reported on one line.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::func::{BarrierFunction, FnSpec};
use crate::lawlib;
use crate::measure::MeasureOnHalfLine;
use crate::pathsim::{Model, ModelKind, Window};
use crate::scenario::{Outcome, ScenarioSource, PATHS_ENV};
use crate::stoprule::StoppingRule;
use crate::verify;

pub const CRITERIA: [&str; 13] =
    ["AC-1", "AC-2", "AC-3", "AC-4", "AC-5", "AC-6", "AC-7", "AC-8", "AC-9", "AC-10", "AC-11", "AC-12", "AC-13"];

/// Outcome of one criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: String,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{:<6}{word}  {}  [{:.1} s]", self.id, self.detail, self.seconds)
    }
}

/// Runs one criterion. Errors are configuration or numerical failures;
/// statistical failures, including excess censoring, are failing verdicts.
pub fn run(id: &str, source: &ScenarioSource) -> Result<Verdict> {
    let start = Instant::now();
    let (pass, detail) = match id {
        "AC-1" => ks_criterion(source, &[("embed_exp.json", 0.02)])?,
        "AC-2" => ks_criterion(source, &[("embed_uniform_bar.json", 0.02)])?,
        "AC-3" => knight_estimate(source)?,
        "AC-4" => ks_criterion(
            source,
            &[
                ("hitting_level_bm.json", 0.015),
                ("hitting_level_bessel_quarter.json", 0.03),
                ("hitting_level_bessel_three_quarters.json", 0.03),
            ],
        )?,
        "AC-5" => ks_criterion(source, &[("reciprocal_barrier.json", 0.02)])?,
        "AC-6" => ks_criterion(source, &[("lehoczky_ou.json", 0.03)])?,
        "AC-7" => ks_criterion(source, &[("reflected_sde_local_time.json", 0.02)])?,
        "AC-8" => ks_criterion(source, &[("doob_maximal.json", 0.015)])?,
        "AC-9" => ks_criterion(source, &[("stopped_bm_maximum.json", 0.015)])?,
        "AC-10" => quadrature_oracles()?,
        "AC-11" => martingale_identities()?,
        "AC-12" => inequalities()?,
        "AC-13" => ks_criterion(
            source,
            &[
                ("bessel_marginal_quarter.json", 0.02),
                ("bessel_marginal_half.json", 0.02),
                ("bessel_marginal_three_quarters.json", 0.02),
            ],
        )?,
        other => return Err(Error::config("criterion", format!("unknown criterion {other}"))),
    };
    Ok(Verdict { id: id.to_string(), pass, detail, seconds: start.elapsed().as_secs_f64() })
}

fn run_scenario(source: &ScenarioSource, file: &str) -> Result<std::result::Result<Outcome, String>> {
    let mut s = source.load(file)?;
    s.apply_overrides(None, None)?;
    match s.run(source.base()) {
        Ok(o) => Ok(Ok(o)),
        Err(Error::ExcessCensoring { fraction, limit }) => {
            Ok(Err(format!("{}: censored fraction {fraction:.4} ≥ {limit}", s.name)))
        }
        Err(e) => Err(e),
    }
}

/// Each scenario passes when its distance is within `tol`; point-checked
/// scenarios report the largest pointwise gap.
fn ks_criterion(source: &ScenarioSource, items: &[(&str, f64)]) -> Result<(bool, String)> {
    let mut pass = true;
    let mut parts = Vec::new();
    for &(file, tol) in items {
        match run_scenario(source, file)? {
            Ok(o) => {
                let ok = o.comparison.ks <= tol;
                pass &= ok;
                let what = if o.comparison.grid.len() <= 8 { "max gap" } else { "ks" };
                parts.push(format!(
                    "{}: {what} {:.4} {} {tol} (n {}, censored {})",
                    o.summary.scenario,
                    o.comparison.ks,
                    if ok { "<=" } else { ">" },
                    o.comparison.n,
                    o.comparison.censored
                ));
            }
            Err(msg) => {
                pass = false;
                parts.push(msg);
            }
        }
    }
    Ok((pass, parts.join("; ")))
}

fn knight_estimate(source: &ScenarioSource) -> Result<(bool, String)> {
    let phi = BarrierFunction::new(FnSpec::Exp { coef: 1.0, rate: 1.0, offset: 0.0 }.compile(None)?)?;
    let target = lawlib::hitting_prob_up_to(&phi, 2.0)?;
    match run_scenario(source, "knight_estimate.json")? {
        Ok(o) => {
            let p_hat = o.sample.values().iter().filter(|&&v| v >= 1.0).count() as f64 / o.sample.n() as f64;
            let gap = (p_hat - target).abs();
            let ok = gap <= 0.02;
            Ok((ok, format!("knight_estimate: p_hat {p_hat:.4} vs {target:.6}, gap {gap:.4} (tol 0.02, n {})", o.sample.n())))
        }
        Err(msg) => Ok((false, msg)),
    }
}

fn quadrature_oracles() -> Result<(bool, String)> {
    let mut worst = 0.0_f64;
    let c = lawlib::spq_constant(1.0, 2.0)?;
    worst = worst.max((c - FRAC_PI_2).abs());
    worst = worst.max((lawlib::spq_constant_by_quadrature(1.0, 2.0)? - FRAC_PI_2).abs());
    for (p, q) in [(0.5, 1.0), (1.0, 2.0), (2.0, 3.0)] {
        for a in [0.5, 1.0, 2.0] {
            let direct = lawlib::law_spq_survival(p, q, a)?;
            let closed = lawlib::law_spq_survival_closed(p, q, a)?;
            worst = worst.max((direct - closed).abs());
        }
    }
    let exp = MeasureOnHalfLine::exponential(2.0)?;
    let uni = MeasureOnHalfLine::uniform(1.0)?;
    for x in [0.1, 0.5, 0.9] {
        worst = worst.max((exp.dual_hl_psi(x)? - x * x).abs());
        worst = worst.max((uni.dual_hl_psi(x)? - (-x - (-x).ln_1p())).abs());
    }
    for z in [0.05, 0.5, 2.0] {
        worst = worst.max((exp.dual_hl_phi(z)? - z.sqrt()).abs());
        let x = uni.dual_hl_phi(z)?;
        worst = worst.max((-x - (-x).ln_1p() - z).abs());
    }
    let ok = worst <= 1e-8;
    Ok((ok, format!("largest deviation from closed forms {worst:.2e} (tol 1e-8)")))
}

fn paths(default: u64) -> Result<u64> {
    match std::env::var(PATHS_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| Error::config(PATHS_ENV, format!("not a count: {v}"))),
        Err(_) => Ok(default),
    }
}

/// A bump on `[0, 1]` and its antiderivative.
fn bump(a: f64) -> f64 {
    if (0.0..=1.0).contains(&a) {
        (PI * a).sin().powi(2)
    } else {
        0.0
    }
}

fn bump_integral(a: f64) -> f64 {
    let a = a.clamp(0.0, 1.0);
    0.5 * a - (2.0 * PI * a).sin() / (4.0 * PI)
}

fn indicator(a: f64) -> f64 {
    if a <= 1.0 {
        1.0
    } else {
        0.0
    }
}

fn indicator_integral(a: f64) -> f64 {
    a.min(1.0)
}

fn martingale_identities() -> Result<(bool, String)> {
    let n = paths(100_000)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut report = |label: &str, c: verify::IdentityCheck| {
        pass &= c.pass;
        parts.push(format!(
            "{label}: {:+.4} ± {:.4}{}",
            c.estimate.mean,
            c.estimate.std_err,
            if c.pass { "" } else { " (beyond 4 se)" }
        ));
    };
    let bm = Model::reflected_bm(2e-3, Window::Horizon(4.0))?;
    let records = verify::run_batch(&bm, &StoppingRule::InverseA(0.8), 1101, n)?;
    report("reflected BM at tau_0.8 ^ 4, bump", verify::identity_from_records(&records, &bump, &bump_integral));
    let age = Model::new(ModelKind::AgeProcess { mu: 0.5 }, 2e-3, Window::Horizon(500.0), None, None)?;
    let records = verify::run_batch(&age, &StoppingRule::HittingLevel(1.0), 1102, n)?;
    report("age 1/2 at X = 1, 1[0,1]", verify::identity_from_records(&records, &indicator, &indicator_integral));
    report("age 1/2 at X = 1, bump", verify::identity_from_records(&records, &bump, &bump_integral));
    Ok((pass, parts.join("; ")))
}

fn inequalities() -> Result<(bool, String)> {
    let n = paths(20_000)?;
    let mut pass = true;
    let mut parts = Vec::new();
    let sde = ModelKind::ReflectedSde { drift: crate::func::RealFn::constant(0.0), diffusion: crate::func::RealFn::constant(1.0) };
    for (name, kind, seed) in [("reflected BM", ModelKind::ReflectedBm, 1201), ("reflected SDE", sde, 1202)] {
        let model = Model::new(kind, 1e-3, Window::Horizon(1.0), None, None)?;
        let mut checks = verify::lenglart_moment_check(&model, 0.5, seed, n)?;
        for k in [1.0, 2.0] {
            checks.push(verify::hk_inequality_check(&model, k, seed + 10, n)?);
        }
        let held = checks.iter().filter(|c| c.pass).count();
        pass &= held == checks.len();
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.label.as_str()).collect();
        if failed.is_empty() {
            parts.push(format!("{name}: {held}/{} hold", checks.len()));
        } else {
            parts.push(format!("{name}: {held}/{} hold, failing {}", checks.len(), failed.join(", ")));
        }
    }
    Ok((pass, parts.join("; ")))
}

/// Runs every criterion in order, printing each verdict as it finishes.
/// Returns the verdicts, or the first configuration error.
pub fn run_all(source: &ScenarioSource, mut each: impl FnMut(&Verdict)) -> Result<Vec<Verdict>> {
    let mut out = Vec::with_capacity(CRITERIA.len());
    for id in CRITERIA {
        let v = run(id, source)?;
        each(&v);
        out.push(v);
    }
    Ok(out)
}
