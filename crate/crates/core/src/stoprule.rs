//! First-crossing stopping rules on simulated paths.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{BarrierFunction, FnSpec, RealFn};
use crate::measure::{MeasureOnHalfLine, MeasureSpec};
use crate::pathsim::{ClassSigmaPath, Model, State, Window};
use crate::rng::RngStream;

/// A first-crossing rule. Every predicate uses a closed inequality.
#[derive(Debug, Clone)]
pub enum StoppingRule {
    /// `φ(A) X ≥ 1`
    ReciprocalBarrier(BarrierFunction),
    /// `X ≥ ψ(A)`
    FunctionBarrier(RealFn),
    /// `Ȳ - Y ≥ θ(Ȳ)`, with `Ȳ` the path's running maximum (or `A` if it has none)
    Drawdown(BarrierFunction),
    /// `X ≥ a`
    HittingLevel(f64),
    /// `A > u`
    InverseA(f64),
    /// First time any member fires.
    AnyOf(Vec<StoppingRule>),
}

/// Result of scanning one path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppedRecord {
    pub stopped: bool,
    pub index: u64,
    pub t: f64,
    pub x: f64,
    pub a: f64,
    pub companion: f64,
    /// For `AnyOf`, the position of the member that fired first.
    pub fired: Option<usize>,
    /// The crossing was found inside the step ending at `index` by the bridge
    /// test, and `x` is the barrier level there.
    pub bridged: bool,
}

impl StoppedRecord {
    fn at(k: u64, s: &State, stopped: bool, fired: Option<usize>) -> Self {
        Self { stopped, index: k, t: s.t, x: s.x, a: s.a, companion: s.companion, fired, bridged: false }
    }
}

/// How crossings are detected between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detection {
    /// Only at grid points.
    #[default]
    Grid,
    /// Also inside each step, with the crossing probability of a Brownian
    /// bridge whose diffusion coefficient is that of `X` at the barrier; steps
    /// are shortened where `X` is within a few standard deviations of a barrier.
    Bridge,
}

fn eval_checked(f: &RealFn, at: f64) -> Result<f64> {
    let v = f.eval(at);
    if v.is_nan() {
        Err(Error::Evaluation { at, reason: format!("{} returned NaN", f.label()) })
    } else {
        Ok(v)
    }
}

/// Scan state that remembers the last barrier value; `A` and `Ȳ` are
/// piecewise constant along a path, so barriers rarely need recomputing.
#[derive(Debug, Clone)]
pub struct RuleScanner<'a> {
    rule: &'a StoppingRule,
    cache: Vec<(f64, f64)>,
}

impl<'a> RuleScanner<'a> {
    pub fn new(rule: &'a StoppingRule) -> Self {
        Self { rule, cache: vec![(f64::NAN, f64::NAN); rule.leaves()] }
    }

    /// Returns `Some(member)` when the rule holds at `s`.
    pub fn check(&mut self, s: &State) -> Result<Option<usize>> {
        let mut slot = 0;
        check_rule(self.rule, s, &mut self.cache, &mut slot)
    }

    /// Bridge test over the step from `prev` to `cur`, when neither end crossed.
    /// Returns the member and the barrier level it crossed.
    fn check_between(&mut self, step: &Step<'_>, rng: &mut ChaCha8Rng) -> Result<Option<(usize, f64)>> {
        let mut slot = 0;
        bridge_rule(self.rule, step, &mut self.cache, &mut slot, rng)
    }
}

/// Steps near a barrier are shortened until the distance to it is at least
/// this many standard deviations of the step.
const REFINE_SIGMAS: f64 = 4.0;
/// Shortest refined step, as a fraction of the grid step.
const MIN_STEP_FRACTION: f64 = 1.0 / 4096.0;

/// Smallest `((L - X) / σ(L))²` over barrier leaves that `X` has not reached.
fn barrier_gap(
    rule: &StoppingRule,
    s: &State,
    cache: &mut [(f64, f64)],
    slot: &mut usize,
    vol: &dyn Fn(f64) -> f64,
) -> Result<f64> {
    if let StoppingRule::AnyOf(rules) = rule {
        let mut gap = f64::INFINITY;
        for r in rules {
            gap = gap.min(barrier_gap(r, s, cache, slot, vol)?);
        }
        return Ok(gap);
    }
    let here = *slot;
    *slot += 1;
    let Some(level) = leaf_level(rule, s, cache, here)? else {
        return Ok(f64::INFINITY);
    };
    let sigma = vol(level);
    if !(level.is_finite() && sigma > 0.0) {
        return Ok(f64::INFINITY);
    }
    let d = (level - s.x).max(0.0) / sigma;
    Ok(d * d)
}

struct Step<'a> {
    prev: &'a State,
    cur: &'a State,
    dt: f64,
    vol: &'a dyn Fn(f64) -> f64,
}

/// Level `L` such that the leaf holds iff `X ≥ L`, at the end of the step.
fn leaf_level(rule: &StoppingRule, s: &State, cache: &mut [(f64, f64)], slot: usize) -> Result<Option<f64>> {
    Ok(match rule {
        StoppingRule::ReciprocalBarrier(phi) => Some(1.0 / cached(cache, slot, s.a, &phi.f)?),
        StoppingRule::FunctionBarrier(psi) => Some(cached(cache, slot, s.a, psi)?),
        StoppingRule::Drawdown(theta) => {
            let peak = if s.companion.is_nan() { s.a } else { s.companion };
            Some(cached(cache, slot, peak, &theta.f)?)
        }
        StoppingRule::HittingLevel(a) => Some(*a),
        StoppingRule::InverseA(_) | StoppingRule::AnyOf(_) => None,
    })
}

fn bridge_rule(
    rule: &StoppingRule,
    step: &Step<'_>,
    cache: &mut [(f64, f64)],
    slot: &mut usize,
    rng: &mut ChaCha8Rng,
) -> Result<Option<(usize, f64)>> {
    if let StoppingRule::AnyOf(rules) = rule {
        for (i, r) in rules.iter().enumerate() {
            if let Some((_, level)) = bridge_rule(r, step, cache, slot, rng)? {
                return Ok(Some((i, level)));
            }
        }
        return Ok(None);
    }
    let here = *slot;
    *slot += 1;
    let Some(level) = leaf_level(rule, step.cur, cache, here)? else {
        return Ok(None);
    };
    let (x0, x1) = (step.prev.x, step.cur.x);
    if !(level > 0.0 && level.is_finite() && x0 < level && x1 < level) {
        return Ok(None);
    }
    let vol = (step.vol)(level);
    if !(vol > 0.0) {
        return Ok(None);
    }
    let exponent = 2.0 * (level - x0) * (level - x1) / (vol * vol * step.dt);
    if exponent > 40.0 {
        return Ok(None);
    }
    Ok((rng.random::<f64>() < (-exponent).exp()).then_some((0, level)))
}

fn cached(cache: &mut [(f64, f64)], slot: usize, key: f64, f: &RealFn) -> Result<f64> {
    let (k, v) = cache[slot];
    if k == key {
        return Ok(v);
    }
    let v = eval_checked(f, key)?;
    cache[slot] = (key, v);
    Ok(v)
}

fn check_rule(rule: &StoppingRule, s: &State, cache: &mut [(f64, f64)], slot: &mut usize) -> Result<Option<usize>> {
    let here = *slot;
    *slot += 1;
    let hit = match rule {
        StoppingRule::ReciprocalBarrier(phi) => {
            // X = 0 never crosses, even where φ is infinite.
            s.x > 0.0 && cached(cache, here, s.a, &phi.f)? * s.x >= 1.0
        }
        StoppingRule::FunctionBarrier(psi) => {
            let level = cached(cache, here, s.a, psi)?;
            // The origin itself never counts as a crossing of a vanishing barrier.
            s.x >= level && !(s.x == 0.0 && s.a == 0.0 && level == 0.0)
        }
        StoppingRule::Drawdown(theta) => {
            let peak = if s.companion.is_nan() { s.a } else { s.companion };
            s.x >= cached(cache, here, peak, &theta.f)?
        }
        StoppingRule::HittingLevel(a) => s.x >= *a,
        StoppingRule::InverseA(u) => s.a > *u,
        StoppingRule::AnyOf(rules) => {
            *slot -= 1;
            for (i, r) in rules.iter().enumerate() {
                if check_rule(r, s, cache, slot)?.is_some() {
                    return Ok(Some(i));
                }
            }
            return Ok(None);
        }
    };
    Ok(hit.then_some(0))
}

impl StoppingRule {
    fn leaves(&self) -> usize {
        match self {
            StoppingRule::AnyOf(rules) => rules.iter().map(StoppingRule::leaves).sum(),
            _ => 1,
        }
    }

    /// Evaluates the predicate at one state without caching.
    pub fn holds(&self, s: &State) -> Result<bool> {
        Ok(RuleScanner::new(self).check(s)?.is_some())
    }

    /// Signed distance past the barrier at a stopped state: `X - ψ(A)`,
    /// `φ(A)X - 1`, `X - θ(Ȳ)`, `X - a` or `A - u`.
    pub fn overshoot(&self, rec: &StoppedRecord) -> Result<f64> {
        Ok(match self {
            StoppingRule::ReciprocalBarrier(phi) => eval_checked(&phi.f, rec.a)? * rec.x - 1.0,
            StoppingRule::FunctionBarrier(psi) => rec.x - eval_checked(psi, rec.a)?,
            StoppingRule::Drawdown(theta) => {
                let peak = if rec.companion.is_nan() { rec.a } else { rec.companion };
                rec.x - eval_checked(&theta.f, peak)?
            }
            StoppingRule::HittingLevel(a) => rec.x - a,
            StoppingRule::InverseA(u) => rec.a - u,
            StoppingRule::AnyOf(rules) => {
                let i = rec.fired.unwrap_or(0);
                let inner = StoppedRecord { fired: None, ..*rec };
                rules[i].overshoot(&inner)?
            }
        })
    }
}

/// Scans a stored path for the first index where the rule holds.
pub fn first_crossing(path: &ClassSigmaPath, rule: &StoppingRule) -> Result<StoppedRecord> {
    if path.is_empty() {
        return Err(Error::InvalidSpec("empty path".into()));
    }
    let mut scanner = RuleScanner::new(rule);
    for k in 0..path.len() {
        let s = path.state(k);
        if let Some(i) = scanner.check(&s)? {
            return Ok(StoppedRecord::at(k as u64, &s, true, fired(rule, i)));
        }
    }
    let last = path.len() - 1;
    Ok(StoppedRecord::at(last as u64, &path.state(last), false, None))
}

fn fired(rule: &StoppingRule, i: usize) -> Option<usize> {
    matches!(rule, StoppingRule::AnyOf(_)).then_some(i)
}

/// Simulates until the rule fires or the model's window runs out, without
/// storing the path. Gives the same record as `first_crossing` on the full path.
pub fn run_until_stopped(model: &Model, rule: &StoppingRule, stream: RngStream) -> Result<StoppedRecord> {
    run_until_stopped_with(model, rule, stream, Detection::Grid)
}

/// As [`run_until_stopped`], with a choice of crossing detection. The bridge
/// test draws from the path's auxiliary stream, so the path itself is unchanged.
pub fn run_until_stopped_with(
    model: &Model,
    rule: &StoppingRule,
    stream: RngStream,
    detection: Detection,
) -> Result<StoppedRecord> {
    let mut stepper = model.stepper(stream);
    let mut scanner = RuleScanner::new(rule);
    let mut aux = match detection {
        Detection::Bridge => Some(stream.auxiliary()),
        Detection::Grid => None,
    };
    let mut k = 0;
    let mut h = model.dt;
    let mut prev = stepper.current();
    loop {
        let s = stepper.current();
        if let Some(rng) = aux.as_mut().filter(|_| k > 0) {
            let vol = |x: f64| stepper.x_vol_at(x);
            let step = Step { prev: &prev, cur: &s, dt: h, vol: &vol };
            if let Some((i, level)) = scanner.check_between(&step, rng)? {
                let mut rec = StoppedRecord::at(k, &s, true, fired(rule, i));
                rec.x = level;
                rec.bridged = true;
                return Ok(rec);
            }
        }
        if let Some(i) = scanner.check(&s)? {
            return Ok(StoppedRecord::at(k, &s, true, fired(rule, i)));
        }
        if model.window_done(k, &s) {
            return Ok(StoppedRecord::at(k, &s, false, None));
        }
        h = model.dt;
        if aux.is_some() {
            let vol = |x: f64| stepper.x_vol_at(x);
            let mut slot = 0;
            let gap = barrier_gap(rule, &s, &mut scanner.cache, &mut slot, &vol)?;
            h = (gap / (REFINE_SIGMAS * REFINE_SIGMAS)).clamp(model.dt * MIN_STEP_FRACTION, model.dt);
            if let Window::Horizon(end) = model.window {
                if end - s.t > 0.0 {
                    h = h.min(end - s.t);
                }
            }
        }
        stepper.advance_by(h)?;
        prev = s;
        k += 1;
    }
}

/// The embedding rule `X ≥ φ_ϑ(A)`, whose stopped value has law `ϑ`.
pub fn embed_rule(m: &MeasureOnHalfLine) -> Result<StoppingRule> {
    m.dual_hl_phi(1.0)?;
    let m = m.clone();
    let f = RealFn::new("phi_theta", move |z| m.dual_hl_phi(z).unwrap_or(f64::NAN));
    Ok(StoppingRule::FunctionBarrier(f))
}

/// The second embedding rule `X ≥ φ̄_ϑ(A)`.
pub fn embed_rule_bar(m: &MeasureOnHalfLine) -> Result<StoppingRule> {
    let probe = m.b_upper().min(1.0) * 0.5;
    m.dual_hl_psi_bar(probe)?;
    let m = m.clone();
    let mut breaks = Vec::new();
    if m.b_upper().is_finite() {
        breaks.push(m.b_upper());
    }
    let f = RealFn::new("phi_bar_theta", move |z| m.dual_hl_phi_bar(z).unwrap_or(f64::NAN)).with_breaks(breaks);
    Ok(StoppingRule::FunctionBarrier(f))
}

/// Overshoot of a stopped record past its barrier; zero for an exact crossing.
pub fn check_stopped_identity(rec: &StoppedRecord, rule: &StoppingRule) -> Result<f64> {
    if !rec.stopped {
        return Err(Error::Domain("record did not stop".into()));
    }
    rule.overshoot(rec)
}

/// Declarative rule, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    ReciprocalBarrier { phi: FnSpec },
    FunctionBarrier { psi: FnSpec },
    Drawdown { theta: FnSpec },
    HittingLevel { level: f64 },
    InverseA { u: f64 },
    AnyOf { rules: Vec<RuleSpec> },
    Embed { measure: MeasureSpec },
    EmbedBar { measure: MeasureSpec },
}

impl RuleSpec {
    pub fn compile(&self, base: Option<&std::path::Path>) -> Result<StoppingRule> {
        Ok(match self {
            RuleSpec::ReciprocalBarrier { phi } => StoppingRule::ReciprocalBarrier(BarrierFunction::new(phi.compile(base)?)?),
            RuleSpec::FunctionBarrier { psi } => StoppingRule::FunctionBarrier(psi.compile(base)?),
            RuleSpec::Drawdown { theta } => StoppingRule::Drawdown(BarrierFunction::new(theta.compile(base)?)?),
            RuleSpec::HittingLevel { level } => StoppingRule::HittingLevel(*level),
            RuleSpec::InverseA { u } => StoppingRule::InverseA(*u),
            RuleSpec::AnyOf { rules } => {
                StoppingRule::AnyOf(rules.iter().map(|r| r.compile(base)).collect::<Result<_>>()?)
            }
            RuleSpec::Embed { measure } => embed_rule(&measure.build(base)?)?,
            RuleSpec::EmbedBar { measure } => embed_rule_bar(&measure.build(base)?)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::MeasureKind;
    use crate::pathsim::ModelKind;

    fn toy() -> ClassSigmaPath {
        ClassSigmaPath {
            t: vec![0.0, 1.0, 2.0],
            x: vec![0.0, 0.5, 1.2],
            a: vec![0.0, 0.0, 0.0],
            companion: None,
            model_tag: "toy",
            zero_threshold: 0.0,
        }
    }

    #[test]
    fn direct_scan_examples() {
        let r = first_crossing(&toy(), &StoppingRule::FunctionBarrier(RealFn::constant(1.0))).unwrap();
        assert!(r.stopped);
        assert_eq!(r.index, 2);
        assert_eq!(r.x, 1.2);
        let r = first_crossing(&toy(), &StoppingRule::HittingLevel(2.0)).unwrap();
        assert!(!r.stopped);
    }

    #[test]
    fn exact_grid_crossing_has_zero_overshoot() {
        let rule = StoppingRule::HittingLevel(0.5);
        let r = first_crossing(&toy(), &rule).unwrap();
        assert_eq!(r.index, 1);
        assert_eq!(check_stopped_identity(&r, &rule).unwrap(), 0.0);
    }

    #[test]
    fn origin_never_stops_a_vanishing_barrier() {
        let rule = embed_rule(&MeasureOnHalfLine::exponential(1.0).unwrap()).unwrap();
        let r = first_crossing(&toy(), &rule).unwrap();
        // φ(0) = 0, so the first positive X stops the scan.
        assert_eq!(r.index, 1);
    }

    #[test]
    fn embedding_barrier_matches_square_root() {
        for rho in [0.5, 1.0, 3.0] {
            let StoppingRule::FunctionBarrier(f) = embed_rule(&MeasureOnHalfLine::exponential(rho).unwrap()).unwrap()
            else {
                panic!("unexpected rule")
            };
            for k in 0..60 {
                let z = 1e-4 * 1.25f64.powi(k);
                assert!((f.eval(z) - (2.0 * z / rho).sqrt()).abs() < 1e-8, "rho {rho} z {z}");
            }
        }
    }

    #[test]
    fn tabulated_exponential_rule_agrees_with_analytic_rule() {
        let x: Vec<f64> = (0..=4000).map(|i| i as f64 * 0.01).collect();
        let mut s: Vec<f64> = x.iter().map(|v| (-v).exp()).collect();
        *s.last_mut().unwrap() = 0.0;
        let table = crate::measure::SurvivalTable::new(x, s).unwrap();
        let tab = embed_rule(&MeasureOnHalfLine::new(MeasureKind::Tabulated(table.into())).unwrap()).unwrap();
        let exact = embed_rule(&MeasureOnHalfLine::exponential(1.0).unwrap()).unwrap();
        let (StoppingRule::FunctionBarrier(f), StoppingRule::FunctionBarrier(g)) = (tab, exact) else {
            panic!("unexpected rule")
        };
        // Linear interpolation of the survival costs O(h²) in the barrier.
        for z in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
            assert!((f.eval(z) - g.eval(z)).abs() < 2e-4, "z {z}: {} vs {}", f.eval(z), g.eval(z));
        }
    }

    #[test]
    fn uniform_second_family_is_x_plus_a_level() {
        let rule = embed_rule_bar(&MeasureOnHalfLine::uniform(1.0).unwrap()).unwrap();
        for (x, a, expected) in [(0.3, 0.6, false), (0.4, 0.6, true), (0.0, 1.0, true), (0.05, 0.9, false), (0.2, 1.5, true)] {
            let s = State { t: 0.0, x, a, companion: f64::NAN };
            assert_eq!(rule.holds(&s).unwrap(), expected, "x {x} a {a}");
        }
    }

    #[test]
    fn divergent_second_family_is_rejected() {
        let m = MeasureOnHalfLine::new(MeasureKind::Lomax { alpha: 0.8 }).unwrap();
        assert!(matches!(embed_rule_bar(&m), Err(Error::DivergentTransform { .. })));
    }

    #[test]
    fn nan_barrier_is_an_evaluation_error() {
        let rule = StoppingRule::FunctionBarrier(RealFn::new("nan", |_| f64::NAN));
        assert!(matches!(first_crossing(&toy(), &rule), Err(Error::Evaluation { .. })));
    }

    #[test]
    fn streaming_matches_stored_path() {
        let model = Model::reflected_bm(1e-3, Window::Horizon(5.0)).unwrap();
        let rule = embed_rule(&MeasureOnHalfLine::exponential(1.0).unwrap()).unwrap();
        for i in 0..20 {
            let stream = RngStream::new(3, i);
            let path = model.simulate(stream).unwrap();
            assert_eq!(first_crossing(&path, &rule).unwrap(), run_until_stopped(&model, &rule, stream).unwrap());
        }
    }

    #[test]
    fn any_of_reports_the_member() {
        let kind = ModelKind::DiffusionWithMax { drift: RealFn::constant(0.0), diffusion: RealFn::constant(1.0), y0: 0.0 };
        let model = Model::new(kind, 1e-3, Window::Horizon(50.0), None, None).unwrap();
        let down = BarrierFunction::new(RealFn::new("1+y", |y| 1.0 + y)).unwrap();
        let rule = StoppingRule::AnyOf(vec![StoppingRule::Drawdown(down), StoppingRule::InverseA(1.0)]);
        let mut seen = [false; 2];
        for i in 0..40 {
            let r = run_until_stopped(&model, &rule, RngStream::new(5, i)).unwrap();
            assert!(r.stopped);
            let member = r.fired.unwrap();
            seen[member] = true;
            let y = r.companion - r.x;
            if member == 0 {
                assert!(y <= -1.0);
            } else {
                assert!(r.companion > 1.0);
            }
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn inverse_a_times_increase_with_level() {
        let model = Model::reflected_bm(1e-3, Window::Horizon(20.0)).unwrap();
        let path = model.simulate(RngStream::new(8, 0)).unwrap();
        let mut prev = 0;
        for u in [0.1, 0.2, 0.4, 0.8, 1.0] {
            let r = first_crossing(&path, &StoppingRule::InverseA(u)).unwrap();
            if r.stopped {
                assert!(r.index >= prev);
                prev = r.index;
            }
        }
    }

    #[test]
    fn rule_spec_round_trip() {
        let spec = RuleSpec::AnyOf {
            rules: vec![
                RuleSpec::FunctionBarrier { psi: FnSpec::Exp { coef: 1.0, rate: 1.0, offset: 0.0 } },
                RuleSpec::InverseA { u: 2.0 },
                RuleSpec::Embed { measure: MeasureSpec::Exponential { rate: 1.0 } },
            ],
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<RuleSpec>(&text).unwrap(), spec);
        assert!(spec.compile(None).is_ok());
    }
}
