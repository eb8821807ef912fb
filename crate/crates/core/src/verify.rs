//! Goodness-of-fit and moment checks of simulated samples against exact laws.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lawlib::SurvivalLaw;
use crate::pathsim::{Model, ModelKind};
use crate::rng::RngStream;
use crate::stoprule::{run_until_stopped_with, Detection, StoppedRecord, StoppingRule};

/// Default slack for simulators that are exact in law on the grid.
pub const EXACT_SLACK: f64 = 0.005;
/// Default slack for Euler-discretized simulators.
pub const EULER_SLACK: f64 = 0.015;
/// Largest censored fraction accepted by default.
pub const CENSOR_LIMIT: f64 = 0.01;
/// Number of quantile points added to the sample points when computing KS.
pub const QUANTILE_GRID: usize = 512;

/// Stopped values of a batch plus the number of paths that never stopped.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    censored: usize,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>, censored: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("sample values must be finite".into()));
        }
        if values.len() + censored == 0 {
            return Err(Error::Domain("empty sample".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values, censored })
    }

    /// Collects one coordinate of the stopped records; unstopped paths are censored.
    pub fn from_records(records: &[StoppedRecord], value: impl Fn(&StoppedRecord) -> f64) -> Result<Self> {
        let values = records.iter().filter(|r| r.stopped).map(value).collect();
        Self::new(values, records.iter().filter(|r| !r.stopped).count())
    }

    /// Merges per-worker samples; the result does not depend on the order.
    pub fn merge(mut self, other: Self) -> Self {
        self.values.extend(other.values);
        self.values.sort_by(f64::total_cmp);
        self.censored += other.censored;
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.len() + self.censored
    }

    pub fn censored(&self) -> usize {
        self.censored
    }

    pub fn censored_fraction(&self) -> f64 {
        self.censored as f64 / self.n() as f64
    }

    /// Fraction of the batch above `x`; censored paths count as above every level.
    pub fn survival(&self, x: f64) -> f64 {
        let at_or_below = self.values.partition_point(|&v| v <= x);
        (self.n() - at_or_below) as f64 / self.n() as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// DKW half-width at confidence `1 - alpha`.
pub fn dkw_eps(n: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Empirical against theoretical survival on a quantile grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalComparison {
    pub grid: Vec<f64>,
    pub empirical: Vec<f64>,
    pub theoretical: Vec<f64>,
    pub ks: f64,
    pub dkw_eps: f64,
    pub slack: f64,
    pub n: usize,
    pub censored: usize,
    pub pass: bool,
    /// Set when the DKW band is too wide for the verdict to mean much.
    pub low_power: bool,
}

/// The verdict object written next to a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub scenario: String,
    pub n: usize,
    pub censored: usize,
    pub ks: f64,
    pub dkw_eps: f64,
    pub slack: f64,
    pub pass: bool,
}

impl SurvivalComparison {
    pub fn summary(&self, scenario: &str) -> Summary {
        Summary {
            scenario: scenario.to_string(),
            n: self.n,
            censored: self.censored,
            ks: self.ks,
            dkw_eps: self.dkw_eps,
            slack: self.slack,
            pass: self.pass,
        }
    }

    /// Writes `x,empirical,theoretical,abs_diff` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,empirical,theoretical,abs_diff")?;
        for i in 0..self.grid.len() {
            let (e, t) = (self.empirical[i], self.theoretical[i]);
            writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", self.grid[i], e, t, (e - t).abs())?;
        }
        out.flush()?;
        Ok(())
    }
}

/// KS distance at the sample points and a quantile grid, with the default censoring limit.
pub fn ks_against(sample: &EmpiricalSample, law: &dyn SurvivalLaw, alpha: f64, slack: f64) -> Result<SurvivalComparison> {
    ks_against_with_limit(sample, law, alpha, slack, CENSOR_LIMIT)
}

/// As [`ks_against`], accepting censored fractions below `censor_limit`.
pub fn ks_against_with_limit(
    sample: &EmpiricalSample,
    law: &dyn SurvivalLaw,
    alpha: f64,
    slack: f64,
    censor_limit: f64,
) -> Result<SurvivalComparison> {
    if !(alpha > 0.0 && alpha < 1.0) || !(slack >= 0.0) {
        return Err(Error::Domain(format!("need alpha in (0, 1) and slack ≥ 0, got {alpha}, {slack}")));
    }
    let fraction = sample.censored_fraction();
    if sample.censored > 0 && fraction >= censor_limit {
        return Err(Error::ExcessCensoring { fraction, limit: censor_limit });
    }
    let n = sample.n() as f64;
    let values = &sample.values;
    let mut ks = 0.0_f64;
    let mut i = 0;
    while i < values.len() {
        let x = values[i];
        let mut j = i;
        while j < values.len() && values[j] == x {
            j += 1;
        }
        let s = law.survival(x);
        // Just below x the empirical survival is (n - i)/n, at x it is (n - j)/n.
        let before = (n - i as f64) / n;
        let after = (n - j as f64) / n;
        let s_before = law.survival(prev_float(x)).max(s);
        ks = ks.max((before - s_before).abs()).max((after - s).abs());
        i = j;
    }
    let m = QUANTILE_GRID;
    let mut grid = Vec::with_capacity(m);
    for k in 1..=m {
        let q = law.quantile(k as f64 / (m + 1) as f64);
        if q.is_finite() && grid.last().is_none_or(|&last| q > last) {
            grid.push(q);
        }
    }
    let empirical: Vec<f64> = grid.iter().map(|&x| sample.survival(x)).collect();
    let theoretical: Vec<f64> = grid.iter().map(|&x| law.survival(x)).collect();
    for (e, t) in empirical.iter().zip(&theoretical) {
        ks = ks.max((e - t).abs());
    }
    let eps = dkw_eps(sample.n(), alpha);
    let low_power = eps > 0.1;
    if low_power {
        log::warn!("only {} paths: DKW half-width {eps:.3} makes the KS verdict weak", sample.n());
    }
    Ok(SurvivalComparison {
        grid,
        empirical,
        theoretical,
        ks,
        dkw_eps: eps,
        slack,
        n: sample.n(),
        censored: sample.censored,
        pass: ks <= eps + slack,
        low_power,
    })
}

/// As [`ks_against_with_limit`], with the distance taken only at `points`.
pub fn compare_at_points(
    sample: &EmpiricalSample,
    law: &dyn SurvivalLaw,
    points: &[f64],
    alpha: f64,
    slack: f64,
    censor_limit: f64,
) -> Result<SurvivalComparison> {
    if !(alpha > 0.0 && alpha < 1.0) || !(slack >= 0.0) {
        return Err(Error::Domain(format!("need alpha in (0, 1) and slack ≥ 0, got {alpha}, {slack}")));
    }
    let fraction = sample.censored_fraction();
    if sample.censored > 0 && fraction >= censor_limit {
        return Err(Error::ExcessCensoring { fraction, limit: censor_limit });
    }
    let grid = points.to_vec();
    let empirical: Vec<f64> = grid.iter().map(|&x| sample.survival(x)).collect();
    let theoretical: Vec<f64> = grid.iter().map(|&x| law.survival(x)).collect();
    let ks = empirical.iter().zip(&theoretical).map(|(e, t)| (e - t).abs()).fold(0.0, f64::max);
    let eps = dkw_eps(sample.n(), alpha);
    Ok(SurvivalComparison {
        grid,
        empirical,
        theoretical,
        ks,
        dkw_eps: eps,
        slack,
        n: sample.n(),
        censored: sample.censored,
        pass: ks <= eps + slack,
        low_power: eps > 0.1,
    })
}

fn prev_float(x: f64) -> f64 {
    if x == 0.0 {
        -f64::MIN_POSITIVE
    } else if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        f64::from_bits(x.to_bits() + 1)
    }
}

/// Runs `n` independent paths until the rule fires, in parallel, in path order.
pub fn run_batch(model: &Model, rule: &StoppingRule, seed: u64, n: u64) -> Result<Vec<StoppedRecord>> {
    run_batch_with(model, rule, seed, n, Detection::Grid)
}

/// As [`run_batch`], with a choice of crossing detection.
pub fn run_batch_with(
    model: &Model,
    rule: &StoppingRule,
    seed: u64,
    n: u64,
    detection: Detection,
) -> Result<Vec<StoppedRecord>> {
    (0..n).into_par_iter().map(|i| run_until_stopped_with(model, rule, RngStream::new(seed, i), detection)).collect()
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_err: f64,
}

impl MeanEstimate {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Self { mean, std_err: (var / n).sqrt() }
    }

    fn rel_err(&self) -> f64 {
        if self.mean == 0.0 {
            0.0
        } else {
            self.std_err / self.mean.abs()
        }
    }
}

/// Verdict of a Monte Carlo identity `E[V] = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub estimate: MeanEstimate,
    pub n: usize,
    pub pass: bool,
}

/// Checks `E[F(A_T) - f(A_T) X_T] = 0` where `F' = f`, `F(0) = 0`. Paths that do
/// not stop are evaluated at the end of the model's window.
pub fn martingale_identity_check(
    model: &Model,
    rule: &StoppingRule,
    f: &(dyn Fn(f64) -> f64 + Sync),
    antiderivative: &(dyn Fn(f64) -> f64 + Sync),
    seed: u64,
    n: u64,
) -> Result<IdentityCheck> {
    let records = run_batch(model, rule, seed, n)?;
    Ok(identity_from_records(&records, f, antiderivative))
}

/// The identity of [`martingale_identity_check`] on records already simulated.
pub fn identity_from_records(
    records: &[StoppedRecord],
    f: &dyn Fn(f64) -> f64,
    antiderivative: &dyn Fn(f64) -> f64,
) -> IdentityCheck {
    let v: Vec<f64> = records.iter().map(|r| antiderivative(r.a) - f(r.a) * r.x).collect();
    let estimate = MeanEstimate::of(&v);
    let pass = estimate.mean.abs() <= 4.0 * estimate.std_err;
    IdentityCheck { estimate, n: v.len(), pass }
}

/// Verdict of a Monte Carlo inequality `left ≤ right`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityCheck {
    pub label: String,
    pub left: MeanEstimate,
    pub right: MeanEstimate,
    pub pass: bool,
}

impl InequalityCheck {
    fn new(label: String, left: MeanEstimate, right: MeanEstimate, rel_slack: f64) -> Self {
        let pass = left.mean <= right.mean * (1.0 + rel_slack);
        Self { label, left, right, pass }
    }
}

/// Per-path extremes over the model's window: `X*`, `A_end`, `N*`.
#[derive(Debug, Clone, Copy)]
struct Extremes {
    x_star: f64,
    a: f64,
    n_star: f64,
}

fn extremes(model: &Model, stream: RngStream) -> Result<Extremes> {
    let mut stepper = model.stepper(stream);
    let mut k = 0;
    let mut e = Extremes { x_star: 0.0, a: 0.0, n_star: 0.0 };
    loop {
        let s = stepper.current();
        e.x_star = e.x_star.max(s.x);
        e.n_star = e.n_star.max((s.x - s.a).abs());
        e.a = s.a;
        if model.window_done(k, &s) {
            return Ok(e);
        }
        stepper.advance()?;
        k += 1;
    }
}

fn batch_extremes(model: &Model, seed: u64, n: u64) -> Result<Vec<Extremes>> {
    (0..n).into_par_iter().map(|i| extremes(model, RngStream::new(seed, i))).collect()
}

fn scaled(m: MeanEstimate, c: f64) -> MeanEstimate {
    MeanEstimate { mean: m.mean * c, std_err: m.std_err * c }
}

/// `E[(X*)^k] ≤ (2-k)/(1-k) E[A^k]` at the end of the window, plus the reverse
/// bound with `X*` and `A` swapped when `X` has continuous paths.
pub fn lenglart_moment_check(model: &Model, k: f64, seed: u64, n: u64) -> Result<Vec<InequalityCheck>> {
    if !(k > 0.0 && k < 1.0) {
        return Err(Error::Domain(format!("need k in (0, 1), got {k}")));
    }
    let c = (2.0 - k) / (1.0 - k);
    let ex = batch_extremes(model, seed, n)?;
    let xk = MeanEstimate::of(&ex.iter().map(|e| e.x_star.powf(k)).collect::<Vec<_>>());
    let ak = MeanEstimate::of(&ex.iter().map(|e| e.a.powf(k)).collect::<Vec<_>>());
    let slack = |l: MeanEstimate, r: MeanEstimate| 4.0 * l.rel_err().hypot(r.rel_err());
    let mut out = vec![InequalityCheck::new(format!("E[X*^{k}] <= {c} E[A^{k}]"), xk, scaled(ak, c), slack(xk, ak))];
    if !matches!(model.kind, ModelKind::AgeProcess { .. }) {
        out.push(InequalityCheck::new(format!("E[A^{k}] <= {c} E[X*^{k}]"), ak, scaled(xk, c), slack(ak, xk)));
    }
    Ok(out)
}

/// `‖A‖_k ≤ ‖N*‖_k` at the end of the window, with `N = X - A`.
pub fn hk_inequality_check(model: &Model, k: f64, seed: u64, n: u64) -> Result<InequalityCheck> {
    if !(k >= 1.0) {
        return Err(Error::Domain(format!("need k ≥ 1, got {k}")));
    }
    let ex = batch_extremes(model, seed, n)?;
    let ak = MeanEstimate::of(&ex.iter().map(|e| e.a.powf(k)).collect::<Vec<_>>());
    let nk = MeanEstimate::of(&ex.iter().map(|e| e.n_star.powf(k)).collect::<Vec<_>>());
    // Compare k-th moments; the relative slack on the norm is 1/k of that on the moment.
    let rel = 4.0 * ak.rel_err().hypot(nk.rel_err());
    Ok(InequalityCheck::new(format!("E[A^{k}] <= E[N*^{k}]"), ak, nk, rel))
}
