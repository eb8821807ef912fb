//! Closed-form laws, evaluated by quadrature.
//!
//! Most laws here are of the form `P(V > x) = exp(-∫₀ˣ r(z) dz)` for some rate
//! `r`; those are built as [`ExponentLaw`] values, which can evaluate single
//! points exactly or produce a dense [`SurvivalCurve`] for goodness-of-fit work.

use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::func::{BarrierFunction, ConditionalMean, RealFn};
use crate::quad::{self, Tolerance};

const DIVERGENCE_CAP: f64 = 700.0;
/// An unconverged exponent this large already means survival below 1e-13.
const SOFT_DIVERGENCE: f64 = 30.0;

/// A law on the real line described by its survival function.
pub trait SurvivalLaw: Sync {
    fn survival(&self, x: f64) -> f64;

    /// Smallest `x` with `survival(x) ≤ 1 - p`, by bracketing and bisection.
    fn quantile(&self, p: f64) -> f64 {
        let level = 1.0 - p;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        while self.survival(lo) <= level && lo > -1e12 {
            hi = lo;
            lo = 2.0 * lo - 1.0;
        }
        while self.survival(hi) > level && hi < 1e12 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.survival(mid) > level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Wraps an analytic survival closure.
pub struct ClosedForm<F>(pub F);

impl<F: Fn(f64) -> f64 + Sync> SurvivalLaw for ClosedForm<F> {
    fn survival(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

type Rate = Arc<dyn Fn(f64) -> Result<f64> + Send + Sync>;

/// `P(V > x) = exp(-∫₀ˣ r(z) dz)` for `x ≥ 0`, and 1 below 0.
#[derive(Clone)]
pub struct ExponentLaw {
    rate: Rate,
    breaks: Vec<f64>,
    tol: Tolerance,
}

impl std::fmt::Debug for ExponentLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExponentLaw").field("breaks", &self.breaks).finish()
    }
}

impl ExponentLaw {
    pub fn new(rate: impl Fn(f64) -> Result<f64> + Send + Sync + 'static, breaks: Vec<f64>) -> Self {
        Self { rate: Arc::new(rate), breaks, tol: Tolerance::default() }
    }

    pub fn rate(&self, z: f64) -> Result<f64> {
        (self.rate)(z)
    }

    fn integral(&self, lo: f64, hi: f64) -> Result<f64> {
        let failure = RefCell::new(None);
        let est = quad::integrate_with_breaks(
            |z| match (self.rate)(z) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            &self.breaks,
            self.tol,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        divergence_aware(est, "survival exponent")
    }

    /// `∫₀ˣ r(z) dz`, possibly `+∞`.
    pub fn exponent(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        self.integral(0.0, x)
    }

    pub fn survival(&self, x: f64) -> Result<f64> {
        Ok((-self.exponent(x)?).exp())
    }

    /// Tabulates the exponent with step `h` until survival drops below `e^{-40}`.
    pub fn curve(&self, h: f64) -> Result<SurvivalCurve> {
        let mut x = vec![0.0];
        let mut g = vec![0.0];
        let mut r = vec![self.rate(0.0).unwrap_or(f64::INFINITY)];
        let mut pending: Vec<f64> = self.breaks.iter().copied().filter(|&b| b > 0.0).rev().collect();
        let mut lo = 0.0;
        let mut total = 0.0_f64;
        while total < 40.0 {
            if x.len() > 2_000_000 {
                return Err(Error::QuadratureFailure(format!("survival still {:e} at x = {lo}", (-total).exp())));
            }
            let mut hi = lo + h;
            while let Some(&b) = pending.last() {
                if b <= lo {
                    pending.pop();
                } else {
                    if b < hi {
                        hi = b;
                        pending.pop();
                    }
                    break;
                }
            }
            total += self.integral(lo, hi)?;
            x.push(hi);
            g.push(total);
            r.push(self.rate(hi)?);
            lo = hi;
        }
        Ok(SurvivalCurve { x, g, r })
    }
}

fn divergence_aware(est: quad::Estimate, what: &str) -> Result<f64> {
    if est.value.is_nan() {
        return Err(Error::QuadratureFailure(format!("{what}: NaN integrand")));
    }
    if est.value > DIVERGENCE_CAP || (!est.converged && est.value >= SOFT_DIVERGENCE) {
        return Ok(f64::INFINITY);
    }
    est.accept(what)
}

/// Dense tabulation of `G(x) = ∫₀ˣ r`, cubic Hermite between nodes.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    x: Vec<f64>,
    g: Vec<f64>,
    r: Vec<f64>,
}

impl SurvivalCurve {
    pub fn exponent(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let n = self.x.len();
        if x >= self.x[n - 1] {
            let tail = self.r[n - 1].max(0.0) * (x - self.x[n - 1]);
            return self.g[n - 1] + tail;
        }
        let i = self.x.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (g0, g1) = (self.g[i], self.g[i + 1]);
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        if !(r0.is_finite() && r1.is_finite()) {
            return g0 + t * (g1 - g0);
        }
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * g0
            + (t3 - 2.0 * t2 + t) * h * r0
            + (-2.0 * t3 + 3.0 * t2) * g1
            + (t3 - t2) * h * r1;
        v.clamp(g0, g1)
    }

    pub fn upper_end(&self) -> f64 {
        *self.x.last().expect("non-empty curve")
    }
}

impl SurvivalLaw for SurvivalCurve {
    fn survival(&self, x: f64) -> f64 {
        (-self.exponent(x)).exp()
    }

    fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        let target = -(-p).ln_1p();
        let i = self.g.partition_point(|&v| v < target);
        if i >= self.g.len() {
            return self.upper_end();
        }
        if i == 0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (self.x[i - 1], self.x[i]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.exponent(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

impl SurvivalLaw for ExponentLaw {
    fn survival(&self, x: f64) -> f64 {
        ExponentLaw::survival(self, x).unwrap_or(f64::NAN)
    }
}

fn reciprocal_integral(phi: &RealFn, lo: f64, hi: f64) -> Result<f64> {
    let est = quad::integrate_with_breaks(|x| 1.0 / phi.eval(x), lo, hi, phi.breaks(), Tolerance::default());
    divergence_aware(est, "reciprocal integral")
}

/// `∫₀^∞ dx / φ(x)`, `+∞` when divergent.
pub fn reciprocal_integral_to_infinity(phi: &RealFn) -> Result<f64> {
    let r = quad::integrate_to_infinity(|x| 1.0 / phi.eval(x), 0.0, phi.breaks(), Tolerance::default(), DIVERGENCE_CAP)?;
    Ok(r.value())
}

/// `P(∃t : X_t > φ(A_t)) = 1 - exp(-∫₀^∞ dx/φ(x))`
pub fn hitting_prob(phi: &BarrierFunction) -> Result<f64> {
    let i = reciprocal_integral_to_infinity(&phi.f)?;
    Ok(if i.is_infinite() { 1.0 } else { -(-i).exp_m1() })
}

/// `P(∃t ≤ τ_u : X_t > φ(A_t)) = 1 - exp(-∫₀ᵘ dx/φ(x))`
pub fn hitting_prob_up_to(phi: &BarrierFunction, u: f64) -> Result<f64> {
    if u <= 0.0 {
        return Ok(0.0);
    }
    let i = reciprocal_integral(&phi.f, 0.0, u)?;
    Ok(-(-i).exp_m1())
}

fn exponent_law_of(f: RealFn, reciprocal: bool) -> ExponentLaw {
    let breaks = f.breaks().to_vec();
    if reciprocal {
        ExponentLaw::new(move |z| Ok(1.0 / f.eval(z)), breaks)
    } else {
        ExponentLaw::new(move |z| Ok(f.eval(z)), breaks)
    }
}

/// Law of `A_∞`: `P(A_∞ > x) = exp(-∫₀ˣ dz/λ(z))`.
pub fn law_a_infty(lam: &ConditionalMean) -> ExponentLaw {
    exponent_law_of(lam.lambda.clone(), true)
}

pub fn law_a_infty_survival(lam: &ConditionalMean, x: f64) -> Result<f64> {
    law_a_infty(lam).survival(x)
}

/// Law of the maximum of a uniformly integrable martingale,
/// `P(S_∞ > x) = exp(-∫₀ˣ dz/(z - α(z)))`.
pub fn law_max_martingale(alpha: &RealFn) -> Result<ExponentLaw> {
    if -alpha.eval(0.0) <= 0.0 {
        return Err(Error::DivergentAtOrigin);
    }
    let alpha = alpha.clone();
    let breaks = alpha.breaks().to_vec();
    Ok(ExponentLaw::new(
        move |z| {
            let d = z - alpha.eval(z);
            if d > 0.0 {
                Ok(1.0 / d)
            } else {
                Err(Error::NonpositiveDenominator { z })
            }
        },
        breaks,
    ))
}

pub fn law_max_martingale_survival(alpha: &RealFn, x: f64) -> Result<f64> {
    law_max_martingale(alpha)?.survival(x)
}

/// Law of `A_T` for `T = inf{t : φ(A_t) X_t ≥ 1}`: `exp(-∫₀ˣ φ)`.
pub fn law_a_t(phi: &RealFn) -> ExponentLaw {
    exponent_law_of(phi.clone(), false)
}

pub fn law_a_t_survival(phi: &RealFn, x: f64) -> Result<f64> {
    law_a_t(phi).survival(x)
}

/// Law of `A_T` for `T = inf{t : X_t ≥ ψ(A_t)}`: `exp(-∫₀ˣ dz/ψ(z))`.
pub fn law_a_t_psi(psi: &RealFn) -> ExponentLaw {
    exponent_law_of(psi.clone(), true)
}

pub fn law_a_t_psi_survival(psi: &RealFn, x: f64) -> Result<f64> {
    law_a_t_psi(psi).survival(x)
}

/// Scale function of `dY = b(Y) dt + σ(Y) dB`, normalised at 0.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    pub drift: RealFn,
    pub diffusion: RealFn,
    beta_nodes: Vec<f64>,
    /// `s` at the nodes `s_lo..=s_hi`; NaN outside.
    s_nodes: Vec<f64>,
    s_lo: usize,
    s_hi: usize,
}

const SCALE_STEP: f64 = 1.0 / 32.0;
const SCALE_HALF_WIDTH: f64 = 20.0;
/// `s'` is tabulated only where `-β` stays below this, short of overflow.
const SCALE_EXPONENT_CAP: f64 = 650.0;

impl ScaleFunction {
    pub fn new(drift: RealFn, diffusion: RealFn) -> Result<Self> {
        for k in -40..=40 {
            let x = k as f64 * 0.5;
            let s = diffusion.eval(x);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidSpec(format!("diffusion coefficient {s} at x = {x} must be positive")));
            }
            if !drift.eval(x).is_finite() {
                return Err(Error::InvalidSpec(format!("drift is not finite at x = {x}")));
            }
        }
        let mut sf = Self { drift, diffusion, beta_nodes: Vec::new(), s_nodes: Vec::new(), s_lo: 0, s_hi: 0 };
        let n = (2.0 * SCALE_HALF_WIDTH / SCALE_STEP).round() as usize;
        let origin = n / 2;
        let mut beta = vec![0.0; n + 1];
        for k in origin..n {
            beta[k + 1] = beta[k] + sf.beta_between(sf.node(k), sf.node(k + 1))?;
        }
        for k in (1..=origin).rev() {
            beta[k - 1] = beta[k] - sf.beta_between(sf.node(k - 1), sf.node(k))?;
        }
        let tame = |k: usize| beta[k] > -SCALE_EXPONENT_CAP;
        let (mut lo, mut hi) = (origin, origin);
        while hi < n && tame(hi + 1) {
            hi += 1;
        }
        while lo > 0 && tame(lo - 1) {
            lo -= 1;
        }
        sf.beta_nodes = beta;
        let mut s = vec![f64::NAN; n + 1];
        s[origin] = 0.0;
        for k in origin..hi {
            s[k + 1] = s[k] + sf.s_between(k, sf.node(k + 1))?;
        }
        for k in (lo + 1..=origin).rev() {
            s[k - 1] = s[k] - sf.s_between(k - 1, sf.node(k))?;
        }
        sf.s_nodes = s;
        sf.s_lo = lo;
        sf.s_hi = hi;
        Ok(sf)
    }

    /// Driftless unit diffusion, `s(x) = x`.
    pub fn brownian() -> Self {
        Self::new(RealFn::constant(0.0), RealFn::constant(1.0)).expect("valid coefficients")
    }

    fn node(&self, k: usize) -> f64 {
        k as f64 * SCALE_STEP - SCALE_HALF_WIDTH
    }

    fn nearest(&self, x: f64) -> usize {
        let k = ((x + SCALE_HALF_WIDTH) / SCALE_STEP).round();
        k.clamp(0.0, (self.beta_nodes.len() - 1) as f64) as usize
    }

    fn breaks(&self) -> Vec<f64> {
        let mut b = self.drift.breaks().to_vec();
        b.extend_from_slice(self.diffusion.breaks());
        b
    }

    fn beta_between(&self, lo: f64, hi: f64) -> Result<f64> {
        let f = |y: f64| {
            let s = self.diffusion.eval(y);
            2.0 * self.drift.eval(y) / (s * s)
        };
        quad::integrate_with_breaks(f, lo, hi, &self.breaks(), Tolerance::new(1e-12, 1e-14)).accept("beta")
    }

    /// `s(x) - s(node k)`, using the tabulated `β(node k)`.
    fn s_between(&self, k: usize, x: f64) -> Result<f64> {
        let anchor = self.node(k);
        let b0 = self.beta_nodes[k];
        let breaks = self.breaks();
        let failure = RefCell::new(None);
        let est = quad::integrate_with_breaks(
            |y| match self.beta_between(anchor, y) {
                Ok(b) => (-(b0 + b)).exp(),
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            anchor,
            x,
            &breaks,
            Tolerance::new(1e-11, 1e-300),
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        est.accept("scale function")
    }

    /// `β(x) = 2∫₀ˣ b/σ²`
    pub fn beta_eval(&self, x: f64) -> Result<f64> {
        let k = self.nearest(x);
        Ok(self.beta_nodes[k] + self.beta_between(self.node(k), x)?)
    }

    /// `s'(x) = exp(-β(x))`
    pub fn s_prime(&self, x: f64) -> Result<f64> {
        Ok((-self.beta_eval(x)?).exp())
    }

    /// `s(x) = ∫₀ˣ exp(-β(y)) dy`, `±∞` past the point where `s'` overflows.
    pub fn s_eval(&self, x: f64) -> Result<f64> {
        let k = self.nearest(x).clamp(self.s_lo, self.s_hi);
        match self.s_between(k, x) {
            Ok(d) => Ok(self.s_nodes[k] + d),
            Err(_) if x < self.node(self.s_lo) => Ok(f64::NEG_INFINITY),
            Err(_) if x > self.node(self.s_hi) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Inverse of `s` on its range.
    pub fn s_inverse(&self, y: f64) -> Result<f64> {
        if !y.is_finite() {
            return Err(Error::Domain(format!("scale inverse of {y}")));
        }
        let nodes = &self.s_nodes[self.s_lo..=self.s_hi];
        let (first, last) = (self.node(self.s_lo), self.node(self.s_hi));
        let i = nodes.partition_point(|&v| v <= y);
        let (lo, hi) = if i == 0 {
            let mut lo = first - 1.0;
            while self.s_eval(lo)? > y {
                lo *= 2.0;
                if lo < -1e6 {
                    return Err(Error::BisectionFailure(format!("s never falls to {y}")));
                }
            }
            (lo, first)
        } else if i == nodes.len() {
            let mut hi = last + 1.0;
            while self.s_eval(hi)? < y {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(Error::BisectionFailure(format!("s never reaches {y}")));
                }
            }
            (last, hi)
        } else {
            (self.node(self.s_lo + i - 1), self.node(self.s_lo + i))
        };
        quad::bisect(|x| Ok(self.s_eval(x)? - y), lo, hi, 1e-14)
    }
}

pub fn scale_eval(sf: &ScaleFunction, x: f64) -> Result<f64> {
    sf.s_eval(x)
}

pub fn scale_inverse(sf: &ScaleFunction, y: f64) -> Result<f64> {
    sf.s_inverse(y)
}

fn theta_at(theta: &BarrierFunction, z: f64) -> Result<f64> {
    let t = theta.eval(z);
    if t > 0.0 && t.is_finite() {
        Ok(t)
    } else {
        Err(Error::Domain(format!("drawdown function must be positive and finite, got {t} at {z}")))
    }
}

/// Law of `Ȳ_T` for the drawdown time `T = inf{t : Ȳ_t - Y_t ≥ θ(Ȳ_t)}`.
pub fn lehoczky_law(sf: &ScaleFunction, theta: &BarrierFunction) -> ExponentLaw {
    let (sf, theta) = (sf.clone(), theta.clone());
    let mut breaks = theta.f.breaks().to_vec();
    breaks.extend(sf.breaks());
    ExponentLaw::new(
        move |z| {
            let th = theta_at(&theta, z)?;
            let den = sf.s_eval(z)? - sf.s_eval(z - th)?;
            if den <= 0.0 {
                return Err(Error::NonpositiveDenominator { z });
            }
            Ok(sf.s_prime(z)? / den)
        },
        breaks,
    )
}

pub fn lehoczky_survival(sf: &ScaleFunction, theta: &BarrierFunction, x: f64) -> Result<f64> {
    lehoczky_law(sf, theta).survival(x)
}

/// Law of `L_T` for the reflected diffusion stopped at `T = inf{t : Y_t ≥ θ(L_t)}`.
pub fn reflected_sde_lt_law(sf: &ScaleFunction, theta: &BarrierFunction) -> ExponentLaw {
    let (sf, theta) = (sf.clone(), theta.clone());
    let mut breaks = theta.f.breaks().to_vec();
    breaks.extend(sf.breaks());
    ExponentLaw::new(
        move |z| {
            let th = theta_at(&theta, z)?;
            let den = sf.s_eval(z + th)? - sf.s_eval(z)?;
            if den <= 0.0 {
                return Err(Error::NonpositiveDenominator { z });
            }
            Ok(sf.s_prime(z)? / den)
        },
        breaks,
    )
}

pub fn reflected_sde_lt_survival(sf: &ScaleFunction, theta: &BarrierFunction, x: f64) -> Result<f64> {
    reflected_sde_lt_law(sf, theta).survival(x)
}

/// Constant ratio `γ = b/σ²` and constant level `a`: `exp(-2γx / (1 - e^{-2γa}))`.
pub fn reflected_constant_ratio_survival(gamma: f64, a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if gamma == 0.0 {
        return (-x / a).exp();
    }
    (2.0 * gamma * x / (-2.0 * gamma * a).exp_m1()).exp()
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if p > 0.0 && q > p && p.is_finite() && q.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("need q > p > 0, got p = {p}, q = {q}")))
    }
}

/// `c_{p,q} = B(1/q, 1/p - 1/q) / q`
pub fn spq_constant(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let (a, b) = (1.0 / q, 1.0 / p - 1.0 / q);
    let ln_beta = statrs::function::gamma::ln_gamma(a) + statrs::function::gamma::ln_gamma(b)
        - statrs::function::gamma::ln_gamma(a + b);
    Ok(ln_beta.exp() / q)
}

/// `c_{p,q}` straight from its defining integral.
pub fn spq_constant_by_quadrature(p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let f = |z: f64| z.powf(1.0 / q - 1.0) * (1.0 + z).powf(-1.0 / p) / q;
    let head = quad::integrate(f, 0.0, 1.0, Tolerance::default()).accept("c_pq head")?;
    let tail = quad::integrate_to_infinity(f, 1.0, &[], Tolerance::default(), DIVERGENCE_CAP)?;
    Ok(head + tail.value())
}

/// `P(S_{p,q} > a) = 1 - exp(-∫₀^∞ dx / (a + x^q)^{1/p})`
pub fn law_spq_survival(p: f64, q: f64, a: f64) -> Result<f64> {
    check_pq(p, q)?;
    if a <= 0.0 {
        return Ok(1.0);
    }
    let f = |x: f64| (a + x.powf(q)).powf(-1.0 / p);
    let scale = a.powf(1.0 / q);
    let head = quad::integrate(f, 0.0, scale, Tolerance::default()).accept("S_pq head")?;
    let tail = quad::integrate_to_infinity(f, scale, &[], Tolerance::default(), DIVERGENCE_CAP)?;
    Ok(-(-(head + tail.value())).exp_m1())
}

/// The same law through the constant: `1 - exp(-c_{p,q} a^{(p-q)/(pq)})`.
pub fn law_spq_survival_closed(p: f64, q: f64, a: f64) -> Result<f64> {
    let c = spq_constant(p, q)?;
    if a <= 0.0 {
        return Ok(1.0);
    }
    Ok(-(-c * a.powf((p - q) / (p * q))).exp_m1())
}

/// `P(S_φ > a) = 1 - exp(-∫₀^∞ dx / (a + φ(x)))`
pub fn law_sphi_survival(phi: &RealFn, a: f64) -> Result<f64> {
    let shifted = phi.clone();
    let g = RealFn::new("a+phi", move |x| a + shifted.eval(x)).with_breaks(phi.breaks().to_vec());
    let i = reciprocal_integral_to_infinity(&g)?;
    Ok(if i.is_infinite() { 1.0 } else { -(-i).exp_m1() })
}

/// `P(S_∞ > a) = (x₀ / a) ∧ 1`
pub fn doob_maximal_survival(x0: f64, a: f64) -> Result<f64> {
    if !(x0 > 0.0 && a > 0.0) {
        return Err(Error::Domain(format!("need x0 > 0 and a > 0, got x0 = {x0}, a = {a}")));
    }
    Ok((x0 / a).min(1.0))
}
