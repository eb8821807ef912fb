//! Discretised sample paths of the example processes.
//!
//! Each model is advanced by a [`Stepper`]; a full [`ClassSigmaPath`] is
//! just the collected states, and stopping-rule scans can consume the same
//! stepper without storing the path.

mod besq;
mod steppers;

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::func::{FnSpec, RealFn};
use crate::rng::RngStream;

pub use besq::{besq_compensated_power, sim_besq_exact};
pub use steppers::Stepper;

/// One grid point of a simulated path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub t: f64,
    pub x: f64,
    pub a: f64,
    /// Model-specific side series: the running maximum for maximum-based
    /// models, the Bessel radius for the age process, NaN otherwise.
    pub companion: f64,
}

/// Aligned arrays `(t, X, A)`; `N = X - A` is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassSigmaPath {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub a: Vec<f64>,
    pub companion: Option<Vec<f64>>,
    pub model_tag: &'static str,
    /// Band inside which `A` is allowed to increase.
    pub zero_threshold: f64,
}

impl ClassSigmaPath {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn state(&self, k: usize) -> State {
        State {
            t: self.t[k],
            x: self.x[k],
            a: self.a[k],
            companion: self.companion.as_ref().map_or(f64::NAN, |c| c[k]),
        }
    }

    /// `N = X - A` at every grid point.
    pub fn n(&self) -> Vec<f64> {
        self.x.iter().zip(&self.a).map(|(x, a)| x - a).collect()
    }

    /// Checks nonnegativity, monotone `A` from 0, and that `A` only moves
    /// while `X` is inside the zero band.
    pub fn check_invariants(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidSpec(format!("{} path: {msg}", self.model_tag)));
        let n = self.len();
        if n == 0 || self.x.len() != n || self.a.len() != n {
            return fail("misaligned arrays".into());
        }
        if self.companion.as_ref().is_some_and(|c| c.len() != n) {
            return fail("misaligned companion".into());
        }
        if self.t[0] != 0.0 || self.a[0] != 0.0 {
            return fail(format!("must start at t = 0 with A = 0, got t = {}, A = {}", self.t[0], self.a[0]));
        }
        for k in 0..n {
            if !(self.x[k] >= 0.0) {
                return fail(format!("X[{k}] = {} is negative", self.x[k]));
            }
            if k > 0 {
                if self.t[k] <= self.t[k - 1] {
                    return fail(format!("time not increasing at {k}"));
                }
                if self.a[k] < self.a[k - 1] {
                    return fail(format!("A decreases at {k}"));
                }
                if self.a[k] > self.a[k - 1] && self.x[k - 1].min(self.x[k]) > self.zero_threshold {
                    return fail(format!(
                        "A increases at {k} while X = ({}, {}) is off the zero band {}",
                        self.x[k - 1],
                        self.x[k],
                        self.zero_threshold
                    ));
                }
            }
        }
        Ok(())
    }

    /// Writes `t,X,A` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,X,A")?;
        for k in 0..self.len() {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", self.t[k], self.x[k], self.a[k])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Which process to simulate, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Variant {
    ReflectedBm,
    /// `X = S - M` for `dM = σ(t) dB`.
    SupMinusMartingale { volatility: FnSpec },
    BesselPower { mu: f64 },
    AgeProcess { mu: f64 },
    ReflectedSde { drift: FnSpec, diffusion: FnSpec },
    DiffusionWithMax {
        drift: FnSpec,
        diffusion: FnSpec,
        #[serde(default)]
        y0: f64,
    },
    ExponentialMartingale { x0: f64 },
}

/// Declarative model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub variant: Variant,
    pub dt: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_threshold: Option<f64>,
    /// Hard cap on steps per path, for `u_cap` windows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<u64>,
}

impl ModelSpec {
    pub fn new(variant: Variant, dt: f64) -> Self {
        Self { variant, dt, horizon: None, u_cap: None, zero_threshold: None, max_steps: None }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self.u_cap = None;
        self
    }

    pub fn with_u_cap(mut self, u: f64) -> Self {
        self.u_cap = Some(u);
        self.horizon = None;
        self
    }

    pub fn compile(&self, base: Option<&Path>) -> Result<Model> {
        let kind = match &self.variant {
            Variant::ReflectedBm => ModelKind::ReflectedBm,
            Variant::SupMinusMartingale { volatility } => {
                ModelKind::SupMinusMartingale { volatility: volatility.compile(base)? }
            }
            Variant::BesselPower { mu } => ModelKind::BesselPower { mu: *mu },
            Variant::AgeProcess { mu } => ModelKind::AgeProcess { mu: *mu },
            Variant::ReflectedSde { drift, diffusion } => ModelKind::ReflectedSde {
                drift: drift.compile(base)?,
                diffusion: diffusion.compile(base)?,
            },
            Variant::DiffusionWithMax { drift, diffusion, y0 } => ModelKind::DiffusionWithMax {
                drift: drift.compile(base)?,
                diffusion: diffusion.compile(base)?,
                y0: *y0,
            },
            Variant::ExponentialMartingale { x0 } => ModelKind::ExponentialMartingale { x0: *x0 },
        };
        let window = match (self.horizon, self.u_cap) {
            (Some(h), None) => Window::Horizon(h),
            (None, Some(u)) => Window::UCap(u),
            _ => return Err(Error::InvalidSpec("exactly one of horizon and u_cap must be set".into())),
        };
        Model::new(kind, self.dt, window, self.zero_threshold, self.max_steps)
    }
}

/// Compiled model, with functions resolved.
#[derive(Debug, Clone)]
pub enum ModelKind {
    ReflectedBm,
    SupMinusMartingale { volatility: RealFn },
    BesselPower { mu: f64 },
    AgeProcess { mu: f64 },
    ReflectedSde { drift: RealFn, diffusion: RealFn },
    DiffusionWithMax { drift: RealFn, diffusion: RealFn, y0: f64 },
    ExponentialMartingale { x0: f64 },
}

impl ModelKind {
    pub fn tag(&self) -> &'static str {
        match self {
            ModelKind::ReflectedBm => "reflected_bm",
            ModelKind::SupMinusMartingale { .. } => "sup_minus_martingale",
            ModelKind::BesselPower { .. } => "bessel_power",
            ModelKind::AgeProcess { .. } => "age_process",
            ModelKind::ReflectedSde { .. } => "reflected_sde",
            ModelKind::DiffusionWithMax { .. } => "diffusion_with_max",
            ModelKind::ExponentialMartingale { .. } => "exponential_martingale",
        }
    }
}

/// Simulation window: a time horizon, or the first time `A` exceeds a level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Horizon(f64),
    UCap(f64),
}

const DEFAULT_MAX_STEPS: u64 = 100_000_000;

#[derive(Debug, Clone)]
pub struct Model {
    pub kind: ModelKind,
    pub dt: f64,
    pub window: Window,
    pub zero_threshold: f64,
    pub max_steps: u64,
}

/// `0.5 √dt`, or for the age process the scale `2 √h_min` that substeps
/// near 0 resolve, whichever is smaller.
pub fn default_zero_threshold(kind: &ModelKind, dt: f64) -> f64 {
    let grid = 0.5 * dt.sqrt();
    match kind {
        ModelKind::AgeProcess { mu } if *mu > 0.0 && *mu < 1.0 => grid.min(2.0 * steppers::substep_floor(*mu).sqrt()),
        _ => grid,
    }
}

static DEGENERATE_THRESHOLD_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Number of age-process paths simulated with a zero threshold of 0, for
/// which no zero after the start can be detected on a grid.
pub fn degenerate_threshold_warnings() -> u64 {
    DEGENERATE_THRESHOLD_WARNINGS.load(Ordering::Relaxed)
}

impl Model {
    pub fn new(kind: ModelKind, dt: f64, window: Window, zero_threshold: Option<f64>, max_steps: Option<u64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be positive, got {dt}")));
        }
        match window {
            Window::Horizon(h) if !(h >= 0.0 && h.is_finite()) => {
                return Err(Error::InvalidSpec(format!("horizon must be finite and nonnegative, got {h}")));
            }
            Window::UCap(u) if !(u > 0.0) => {
                return Err(Error::InvalidSpec(format!("u_cap must be positive, got {u}")));
            }
            _ => {}
        }
        match &kind {
            ModelKind::BesselPower { mu } | ModelKind::AgeProcess { mu } if !(*mu > 0.0 && *mu < 1.0) => {
                return Err(Error::InvalidSpec(format!("mu must lie in (0, 1), got {mu}")));
            }
            ModelKind::ExponentialMartingale { x0 } if !(*x0 > 0.0 && x0.is_finite()) => {
                return Err(Error::InvalidSpec(format!("x0 must be positive, got {x0}")));
            }
            ModelKind::DiffusionWithMax { y0, .. } if !y0.is_finite() => {
                return Err(Error::InvalidSpec(format!("y0 must be finite, got {y0}")));
            }
            _ => {}
        }
        let zero_threshold = zero_threshold.unwrap_or_else(|| default_zero_threshold(&kind, dt));
        if !(zero_threshold >= 0.0) {
            return Err(Error::InvalidSpec(format!("zero_threshold must be nonnegative, got {zero_threshold}")));
        }
        if zero_threshold == 0.0 && matches!(kind, ModelKind::AgeProcess { .. }) {
            log::warn!("age process with zero_threshold = 0: zeros after the start cannot be detected");
        }
        Ok(Self { kind, dt, window, zero_threshold, max_steps: max_steps.unwrap_or(DEFAULT_MAX_STEPS) })
    }

    pub fn reflected_bm(dt: f64, window: Window) -> Result<Self> {
        Self::new(ModelKind::ReflectedBm, dt, window, None, None)
    }

    pub fn tag(&self) -> &'static str {
        self.kind.tag()
    }

    /// Band used by the carried-on-zeros invariant for this model's paths.
    pub fn invariant_band(&self) -> f64 {
        match self.kind {
            ModelKind::BesselPower { mu } => besq::compensator_band(self.dt).powf(mu),
            // A zero found inside a step leaves X at most dt^μ at its end.
            ModelKind::AgeProcess { mu } => self.dt.powf(mu),
            ModelKind::ExponentialMartingale { .. } => 0.0,
            ModelKind::ReflectedBm => steppers::BRIDGE_BAND * self.dt.sqrt(),
            _ => self.zero_threshold,
        }
    }

    /// Whether the window is exhausted at step `k` with state `s`.
    pub fn window_done(&self, k: u64, s: &State) -> bool {
        if k >= self.max_steps {
            return true;
        }
        match self.window {
            Window::Horizon(h) => s.t >= h - 1e-9 * self.dt,
            Window::UCap(u) => s.a > u,
        }
    }

    pub fn stepper(&self, stream: RngStream) -> Box<dyn Stepper + '_> {
        if self.zero_threshold == 0.0 && matches!(self.kind, ModelKind::AgeProcess { .. }) {
            DEGENERATE_THRESHOLD_WARNINGS.fetch_add(1, Ordering::Relaxed);
        }
        steppers::make(self, stream.rng())
    }

    /// Simulates one full path over the window.
    pub fn simulate(&self, stream: RngStream) -> Result<ClassSigmaPath> {
        let mut stepper = self.stepper(stream);
        let mut s = stepper.current();
        let mut path = ClassSigmaPath {
            t: vec![s.t],
            x: vec![s.x],
            a: vec![s.a],
            companion: if s.companion.is_nan() { None } else { Some(vec![s.companion]) },
            model_tag: self.tag(),
            zero_threshold: self.invariant_band(),
        };
        let mut k = 0;
        while !self.window_done(k, &s) {
            stepper.advance()?;
            s = stepper.current();
            k += 1;
            path.t.push(s.t);
            path.x.push(s.x);
            path.a.push(s.a);
            if let Some(c) = path.companion.as_mut() {
                c.push(s.companion);
            }
        }
        if let Some(band) = stepper.zero_band() {
            path.zero_threshold = band;
        }
        debug_assert!(path.check_invariants().is_ok(), "{:?}", path.check_invariants());
        Ok(path)
    }
}

fn expect_kind(model: &Model, ok: bool, name: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} called with a {} model", model.tag())))
    }
}

pub fn sim_reflected_bm(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::ReflectedBm), "sim_reflected_bm")?;
    model.simulate(stream)
}

pub fn sim_sup_minus_martingale(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::SupMinusMartingale { .. }), "sim_sup_minus_martingale")?;
    model.simulate(stream)
}

pub fn sim_bessel_power(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::BesselPower { .. }), "sim_bessel_power")?;
    model.simulate(stream)
}

pub fn sim_age_process(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::AgeProcess { .. }), "sim_age_process")?;
    model.simulate(stream)
}

pub fn sim_reflected_sde(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::ReflectedSde { .. }), "sim_reflected_sde")?;
    model.simulate(stream)
}

pub fn sim_diffusion_with_max(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::DiffusionWithMax { .. }), "sim_diffusion_with_max")?;
    model.simulate(stream)
}

pub fn sim_exponential_martingale(model: &Model, stream: RngStream) -> Result<ClassSigmaPath> {
    expect_kind(model, matches!(model.kind, ModelKind::ExponentialMartingale { .. }), "sim_exponential_martingale")?;
    model.simulate(stream)
}

#[cfg(test)]
mod tests;
