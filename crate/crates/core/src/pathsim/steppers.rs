use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::besq::{besq_step, compensator_band, PowerMoment};
use super::{Model, ModelKind, State};
use crate::error::{Error, Result};
use crate::func::RealFn;

/// Advances one model by one grid step at a time.
pub trait Stepper {
    fn current(&self) -> State;

    /// Advances by one step of length `h`.
    fn advance_by(&mut self, h: f64) -> Result<()>;

    /// The model's grid step.
    fn step_size(&self) -> f64;

    /// Advances by one grid step.
    fn advance(&mut self) -> Result<()> {
        self.advance_by(self.step_size())
    }

    /// Band for the carried-on-zeros invariant when it depends on the path.
    fn zero_band(&self) -> Option<f64> {
        None
    }

    /// Diffusion coefficient of `X` near the level `x` over the coming step,
    /// or 0 where `X` has no Brownian part.
    fn x_vol_at(&self, x: f64) -> f64;
}

/// Bridge extremes end within this many `σ√dt` of the grid value except with
/// probability about `1e-15`.
pub(crate) const BRIDGE_BAND: f64 = 8.0;

/// Maximum over a step of a Brownian bridge from `w0` to `w1` with variance
/// `var` over the step, drawn from `u ∈ (0, 1]`.
#[inline]
fn bridge_max(w0: f64, w1: f64, var: f64, u: f64) -> f64 {
    let jump = w1 - w0;
    0.5 * (w0 + w1 + (jump * jump - 2.0 * var * u.ln()).sqrt())
}

#[inline]
fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

pub(crate) fn make<'a>(model: &'a Model, rng: ChaCha8Rng) -> Box<dyn Stepper + 'a> {
    let clock = Clock { dt: model.dt, k: 0, anchor_k: 0, anchor_t: 0.0 };
    match &model.kind {
        ModelKind::ReflectedBm => Box::new(ReflectedBm { rng, clock, b: 0.0, s: 0.0 }),
        ModelKind::SupMinusMartingale { volatility } => {
            Box::new(SupMinus { rng, clock, vol: volatility, m: 0.0, s: 0.0, sigma_max: 0.0 })
        }
        ModelKind::BesselPower { mu } => Box::new(BesselPower {
            core: BesqCore::new(rng, *mu),
            clock,
            a: 0.0,
        }),
        ModelKind::AgeProcess { mu } => {
            let norm = 2f64.powf(*mu) * statrs::function::gamma::gamma(1.0 + mu);
            Box::new(Age {
                core: BesqCore::new(rng, *mu),
                clock,
                mu: *mu,
                threshold_sq: model.zero_threshold * model.zero_threshold,
                norm,
                local_time: 0.0,
                released: 0.0,
                last_zero: 0.0,
            })
        }
        ModelKind::ReflectedSde { drift, diffusion } => {
            Box::new(ReflectedSde { rng, clock, drift, diffusion, y: 0.0, l: 0.0, sigma_max: 0.0 })
        }
        ModelKind::DiffusionWithMax { drift, diffusion, y0 } => {
            Box::new(DiffusionWithMax { rng, clock, drift, diffusion, y0: *y0, y: *y0, ymax: *y0, sigma_max: 0.0 })
        }
        ModelKind::ExponentialMartingale { x0 } => Box::new(ExponentialMartingale {
            rng,
            clock,
            x0: *x0,
            w: 0.0,
            grid_max: *x0,
            bridge_max: *x0,
        }),
    }
}

/// Step counter; grid times stay exact multiples of `dt` until a step of
/// another length is taken.
#[derive(Debug, Clone, Copy)]
struct Clock {
    dt: f64,
    k: u64,
    anchor_k: u64,
    anchor_t: f64,
}

impl Clock {
    fn t(&self) -> f64 {
        self.anchor_t + (self.k - self.anchor_k) as f64 * self.dt
    }

    fn tick(&mut self, h: f64) {
        if h != self.dt {
            self.anchor_t = self.t() + h;
            self.anchor_k = self.k + 1;
        }
        self.k += 1;
    }
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Euler increment over a step `h` with a guard against explosive coefficients.
fn euler_increment(clock: &Clock, h: f64, b: f64, sigma: f64, xi: f64) -> Result<f64> {
    let sqrt_h = h.sqrt();
    let guard = 10.0 * sqrt_h * sigma.abs().max(1.0);
    let drift = b * h;
    let inc = sigma * sqrt_h * xi + drift;
    if !inc.is_finite() || drift.abs() > guard {
        return Err(Error::UnstableStep { t: clock.t(), increment: inc, guard });
    }
    Ok(inc)
}

/// `X = S - B` with `S` the running maximum over continuous time, drawn
/// exactly from the Brownian bridge between grid points.
struct ReflectedBm {
    rng: ChaCha8Rng,
    clock: Clock,
    b: f64,
    s: f64,
}

impl Stepper for ReflectedBm {
    fn current(&self) -> State {
        State { t: self.clock.t(), x: self.s - self.b, a: self.s, companion: self.s }
    }

    #[inline]
    fn advance_by(&mut self, h: f64) -> Result<()> {
        let b0 = self.b;
        self.b += h.sqrt() * normal(&mut self.rng);
        let u = uniform(&mut self.rng);
        self.s = self.s.max(bridge_max(b0, self.b, h, u));
        self.clock.tick(h);
        Ok(())
    }

    fn zero_band(&self) -> Option<f64> {
        Some(BRIDGE_BAND * self.clock.dt.sqrt())
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, _x: f64) -> f64 {
        1.0
    }
}

struct SupMinus<'a> {
    rng: ChaCha8Rng,
    clock: Clock,
    vol: &'a RealFn,
    m: f64,
    s: f64,
    sigma_max: f64,
}

impl Stepper for SupMinus<'_> {
    fn current(&self) -> State {
        State { t: self.clock.t(), x: self.s - self.m, a: self.s, companion: self.s }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        let sigma = self.vol.eval(self.clock.t());
        let m0 = self.m;
        self.m += euler_increment(&self.clock, h, 0.0, sigma, normal(&mut self.rng))?;
        let u = uniform(&mut self.rng);
        self.s = self.s.max(bridge_max(m0, self.m, sigma * sigma * h, u));
        self.sigma_max = self.sigma_max.max(sigma.abs());
        self.clock.tick(h);
        Ok(())
    }

    fn zero_band(&self) -> Option<f64> {
        Some(BRIDGE_BAND * self.clock.dt.sqrt() * self.sigma_max)
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, _x: f64) -> f64 {
        self.vol.eval(self.clock.t()).abs()
    }
}

/// Squared Bessel state with its power compensator.
///
/// Near 0 a step is split into substeps of length `Z/(2λ)`, down to `h_min`,
/// so that the compensator accrues in increments of about `A_RESOLUTION`
/// rather than one deterministic lump per step. `λ` grows with `Z`, since a
/// substep at scale `Z` can misplace about `Z^μ` of compensator.
struct BesqCore {
    rng: ChaCha8Rng,
    half_delta: f64,
    mu: f64,
    z: f64,
    moment: PowerMoment,
    h_min: f64,
}

/// Compensator increment of one substep started at 0.
const A_RESOLUTION: f64 = 2e-3;
/// `λ = Z/(2h)` reached by substeps at the top of the compensator band.
const SUBSTEP_LAMBDA: f64 = 16.0;

/// Shortest substep taken near 0 by the Bessel steppers of index `mu`.
pub(crate) fn substep_floor(mu: f64) -> f64 {
    // From 0 a substep h adds (2h)^μ Γ(δ/2 + μ)/Γ(δ/2).
    let moment = PowerMoment::new(1.0 - mu, mu);
    0.5 * (A_RESOLUTION / moment.conditional(0.0, 0.5)).powf(1.0 / mu)
}

impl BesqCore {
    fn new(rng: ChaCha8Rng, mu: f64) -> Self {
        let half_delta = 1.0 - mu;
        let moment = PowerMoment::new(half_delta, mu);
        Self { rng, half_delta, mu, z: 0.0, moment, h_min: substep_floor(mu) }
    }

    /// Steps `Z` over `h` and returns the compensator increment of `Z^μ`.
    /// `visit(offset, z, increment_so_far)` sees every substep end.
    fn step(&mut self, h: f64, mut visit: impl FnMut(f64, f64, f64)) -> f64 {
        let mut inc = 0.0;
        let mut done = 0.0;
        while done < h {
            let remaining = h - done;
            let mut sub = remaining;
            if self.z < compensator_band(remaining) {
                let lambda = 1.0 + SUBSTEP_LAMBDA * (self.z / compensator_band(h)).powf(self.mu);
                sub = (self.z / (2.0 * lambda)).max(self.h_min).min(remaining);
                if remaining - sub < 0.5 * self.h_min {
                    sub = remaining;
                }
            }
            if self.z < compensator_band(sub) {
                inc += (self.moment.conditional(self.z, sub) - self.z.powf(self.mu)).max(0.0);
            }
            self.z = besq_step(self.half_delta, self.z, sub, &mut self.rng);
            done = if sub == remaining { h } else { done + sub };
            visit(done, self.z, inc);
        }
        inc
    }
}

struct BesselPower {
    core: BesqCore,
    clock: Clock,
    a: f64,
}

impl Stepper for BesselPower {
    fn current(&self) -> State {
        State { t: self.clock.t(), x: self.core.z.powf(self.core.mu), a: self.a, companion: f64::NAN }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        self.a += self.core.step(h, |_, _, _| {});
        self.clock.tick(h);
        Ok(())
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, x: f64) -> f64 {
        if x > 0.0 {
            2.0 * self.core.mu * x.powf(1.0 - 0.5 / self.core.mu)
        } else {
            0.0
        }
    }
}

/// `X = (t - g_t)^μ` with `g_t` the last detected zero of the Bessel process.
struct Age {
    core: BesqCore,
    clock: Clock,
    mu: f64,
    threshold_sq: f64,
    norm: f64,
    local_time: f64,
    released: f64,
    last_zero: f64,
}

impl Stepper for Age {
    fn current(&self) -> State {
        let age = (self.clock.t() - self.last_zero).max(0.0);
        State { t: self.clock.t(), x: age.powf(self.mu), a: self.released, companion: self.core.z.sqrt() }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        let t0 = self.clock.t();
        let base = self.local_time;
        let threshold_sq = self.threshold_sq;
        let mut zero = None;
        self.local_time += self.core.step(h, |offset, z, inc| {
            if z <= threshold_sq {
                zero = Some((offset, inc));
            }
        });
        self.clock.tick(h);
        if let Some((offset, inc)) = zero {
            self.last_zero = if offset >= h { self.clock.t() } else { t0 + offset };
            self.released = (base + inc) / self.norm;
        }
        Ok(())
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, _x: f64) -> f64 {
        0.0
    }
}

struct ReflectedSde<'a> {
    rng: ChaCha8Rng,
    clock: Clock,
    drift: &'a RealFn,
    diffusion: &'a RealFn,
    y: f64,
    l: f64,
    sigma_max: f64,
}

impl Stepper for ReflectedSde<'_> {
    fn current(&self) -> State {
        State { t: self.clock.t(), x: self.y, a: self.l, companion: f64::NAN }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        let arg = self.y + self.l;
        let sigma = self.diffusion.eval(arg);
        let inc = euler_increment(&self.clock, h, self.drift.eval(arg), sigma, normal(&mut self.rng))?;
        // Reflect off the minimum of the frozen-coefficient bridge, not just the endpoint.
        let u = uniform(&mut self.rng);
        let low = -bridge_max(0.0, -inc, sigma * sigma * h, u);
        let push = (-(self.y + low)).max(0.0);
        self.y = (self.y + inc + push).max(0.0);
        self.l += push;
        self.sigma_max = self.sigma_max.max(sigma.abs());
        self.clock.tick(h);
        Ok(())
    }

    fn zero_band(&self) -> Option<f64> {
        Some(BRIDGE_BAND * self.clock.dt.sqrt() * self.sigma_max)
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, x: f64) -> f64 {
        self.diffusion.eval(x + self.l).abs()
    }
}

struct DiffusionWithMax<'a> {
    rng: ChaCha8Rng,
    clock: Clock,
    drift: &'a RealFn,
    diffusion: &'a RealFn,
    y0: f64,
    y: f64,
    ymax: f64,
    sigma_max: f64,
}

impl Stepper for DiffusionWithMax<'_> {
    fn current(&self) -> State {
        State { t: self.clock.t(), x: self.ymax - self.y, a: self.ymax - self.y0, companion: self.ymax }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        let sigma = self.diffusion.eval(self.y);
        let y0 = self.y;
        self.y += euler_increment(&self.clock, h, self.drift.eval(y0), sigma, normal(&mut self.rng))?;
        let u = uniform(&mut self.rng);
        self.ymax = self.ymax.max(bridge_max(y0, self.y, sigma * sigma * h, u));
        self.sigma_max = self.sigma_max.max(sigma.abs());
        self.clock.tick(h);
        Ok(())
    }

    fn zero_band(&self) -> Option<f64> {
        Some(BRIDGE_BAND * self.clock.dt.sqrt() * self.sigma_max)
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, x: f64) -> f64 {
        self.diffusion.eval(self.ymax - x).abs()
    }
}

/// `M = x0·exp(W - t/2)`; the companion is the running maximum of `M` over
/// continuous time, drawn exactly from the Brownian bridge between grid points.
struct ExponentialMartingale {
    rng: ChaCha8Rng,
    clock: Clock,
    x0: f64,
    w: f64,
    grid_max: f64,
    bridge_max: f64,
}

impl ExponentialMartingale {
    fn m(&self) -> f64 {
        self.x0 * self.w.exp()
    }
}

impl Stepper for ExponentialMartingale {
    fn current(&self) -> State {
        let m = self.m();
        State { t: self.clock.t(), x: self.grid_max - m, a: self.grid_max - self.x0, companion: self.bridge_max }
    }

    fn advance_by(&mut self, h: f64) -> Result<()> {
        let w0 = self.w;
        let w1 = w0 + h.sqrt() * normal(&mut self.rng) - 0.5 * h;
        let u = uniform(&mut self.rng);
        let peak = bridge_max(w0, w1, h, u);
        self.w = w1;
        self.grid_max = self.grid_max.max(self.m());
        self.bridge_max = self.bridge_max.max(self.x0 * peak.exp());
        self.clock.tick(h);
        Ok(())
    }

    fn step_size(&self) -> f64 {
        self.clock.dt
    }

    fn x_vol_at(&self, x: f64) -> f64 {
        (self.grid_max - x).max(0.0)
    }
}
