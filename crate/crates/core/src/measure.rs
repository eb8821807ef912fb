//! Non-atomic probability measures on `[0, ∞)` and their dual Hardy–Littlewood
//! transforms.
//!
//! Both transforms are computed in a coordinate where the integrand stays
//! bounded. With `H = -ln ϑ̄` (hazard) and `H⁻¹` its right-continuous inverse,
//!
//! ```text
//! ψ(x) = ∫_{[0,x]} z dϑ(z) / ϑ̄(z) = Ψ(H(x)),   Ψ(u) = ∫₀ᵘ H⁻¹(w) dw,
//! ```
//!
//! and with `W = -ln F` (`F` the distribution function) and `Z = W⁻¹`,
//!
//! ```text
//! ψ̄(x) = ∫_{(x,∞)} z dϑ(z) / F(z) = C(W(x)),    C(w) = ∫₀ʷ Z(v) dv.
//! ```
//!
//! `Ψ` and `C` are tabulated once on a uniform grid up to survival `1e-12`;
//! a point evaluation integrates from the nearest node. The inverses `φ`
//! and `φ̄` solve `Ψ(u) = z` or `C(w) = x` by Newton steps guarded by
//! bisection (the derivatives are `H⁻¹` and `Z`).

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Improper, Tolerance};

const NODE_STEP: f64 = 0.05;
/// `-ln(1e-12)`: where the cached tables stop.
const NODE_MAX: f64 = 27.631_021_115_928_547;
const ATOM_GUARD: f64 = 1e-9;
const DIVERGENCE_CAP: f64 = 700.0;

/// Survival values sampled on an increasing grid, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    x: Vec<f64>,
    s: Vec<f64>,
}

impl SurvivalTable {
    /// Validates the samples: `x` strictly increasing from a nonnegative
    /// start, survival nonincreasing from 1 down to 0.
    pub fn new(x: Vec<f64>, s: Vec<f64>) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidMeasure(msg));
        if x.len() != s.len() || x.len() < 2 {
            return bad(format!("need at least two aligned rows, got {} x and {} survival", x.len(), s.len()));
        }
        if x.iter().chain(&s).any(|v| !v.is_finite()) {
            return bad("non-finite entry".into());
        }
        if x[0] < 0.0 {
            return bad(format!("grid starts at negative x = {}", x[0]));
        }
        for i in 1..x.len() {
            if x[i] == x[i - 1] && (s[i - 1] - s[i]).abs() > ATOM_GUARD {
                return bad(format!("jump of {} in survival at x = {} (atom)", s[i - 1] - s[i], x[i]));
            }
            if x[i] <= x[i - 1] {
                return bad(format!("x not strictly increasing at row {i}"));
            }
            if s[i] > s[i - 1] {
                return bad(format!("survival increases at x = {}", x[i]));
            }
        }
        if (s[0] - 1.0).abs() > ATOM_GUARD {
            return bad(format!("survival must start at 1, got {} (atom at the origin)", s[0]));
        }
        let last = *s.last().expect("non-empty");
        if last.abs() > ATOM_GUARD {
            return bad(format!("survival must reach 0, ends at {last}"));
        }
        let mut s = s;
        s[0] = 1.0;
        *s.last_mut().expect("non-empty") = 0.0;
        Ok(Self { x, s })
    }

    /// Reads a CSV with header `x,survival`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            survival: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let (mut x, mut s) = (Vec::new(), Vec::new());
        for row in reader.deserialize() {
            let row: Row = row?;
            x.push(row.x);
            s.push(row.survival);
        }
        Self::new(x, s)
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn survival_values(&self) -> &[f64] {
        &self.s
    }

    fn survival(&self, x: f64) -> f64 {
        crate::func::interp(&self.x, &self.s, x)
    }

    /// `sup{x : S(x) ≥ level}` for `level ∈ (0, 1]`.
    fn upper_quantile(&self, level: f64) -> f64 {
        // s is nonincreasing; i = number of entries with s ≥ level.
        let i = self.s.partition_point(|&v| v >= level);
        if i == 0 {
            return 0.0;
        }
        if i == self.s.len() {
            return self.x[i - 1];
        }
        let (s0, s1) = (self.s[i - 1], self.s[i]);
        self.x[i - 1] + (s0 - level) / (s0 - s1) * (self.x[i] - self.x[i - 1])
    }

    /// `inf{x : S(x) ≤ level}` for `level ∈ [0, 1)`.
    fn lower_quantile(&self, level: f64) -> f64 {
        let j = self.s.partition_point(|&v| v > level);
        if j == 0 {
            return 0.0;
        }
        if j == self.s.len() {
            return self.x[j - 1];
        }
        let (s0, s1) = (self.s[j - 1], self.s[j]);
        self.x[j - 1] + (s0 - level) / (s0 - s1) * (self.x[j] - self.x[j - 1])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureKind {
    Exponential { rate: f64 },
    Uniform { b: f64 },
    /// Survival `(1 + x)^{-alpha}`; the mean is infinite for `alpha ≤ 1`.
    Lomax { alpha: f64 },
    Tabulated(Arc<SurvivalTable>),
}

/// Declarative measure, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Exponential { rate: f64 },
    Uniform { b: f64 },
    Lomax { alpha: f64 },
    Tabulated { path: std::path::PathBuf },
}

impl MeasureSpec {
    pub fn build(&self, base: Option<&Path>) -> Result<MeasureOnHalfLine> {
        let kind = match self {
            MeasureSpec::Exponential { rate } => MeasureKind::Exponential { rate: *rate },
            MeasureSpec::Uniform { b } => MeasureKind::Uniform { b: *b },
            MeasureSpec::Lomax { alpha } => MeasureKind::Lomax { alpha: *alpha },
            MeasureSpec::Tabulated { path } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                MeasureKind::Tabulated(Arc::new(SurvivalTable::from_csv(&full)?))
            }
        };
        MeasureOnHalfLine::new(kind)
    }
}

/// Cumulative integral of a nonnegative integrand on the nodes `k · NODE_STEP`.
#[derive(Debug, Clone)]
struct Cumulative {
    values: Vec<f64>,
    breaks: Vec<f64>,
}

impl Cumulative {
    fn top(&self) -> (f64, f64) {
        let k = self.values.len() - 1;
        (k as f64 * NODE_STEP, self.values[k])
    }

    fn anchor(&self, u: f64) -> (f64, f64) {
        let k = ((u / NODE_STEP) as usize).min(self.values.len() - 1);
        (k as f64 * NODE_STEP, self.values[k])
    }

    fn breaks_in(&self, lo: f64, hi: f64) -> &[f64] {
        let i = self.breaks.partition_point(|&b| b <= lo);
        let j = self.breaks.partition_point(|&b| b < hi);
        &self.breaks[i..j.max(i)]
    }
}

/// A transform tabulated on a grid of its argument.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformCurve {
    pub x_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Where the transform becomes infinite (`+∞` if nowhere).
    pub divergence_point: f64,
}

#[derive(Debug, Clone)]
pub struct MeasureOnHalfLine {
    kind: MeasureKind,
    a_lower: f64,
    b_upper: f64,
    tol: Tolerance,
    hazard: Cumulative,
    quantile: Option<Cumulative>,
    psi_bar_origin: f64,
}

impl MeasureOnHalfLine {
    pub fn new(kind: MeasureKind) -> Result<Self> {
        Self::with_tolerance(kind, Tolerance::default())
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(MeasureKind::Exponential { rate })
    }

    pub fn uniform(b: f64) -> Result<Self> {
        Self::new(MeasureKind::Uniform { b })
    }

    pub fn tabulated(table: SurvivalTable) -> Result<Self> {
        Self::new(MeasureKind::Tabulated(Arc::new(table)))
    }

    pub fn with_tolerance(kind: MeasureKind, tol: Tolerance) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidMeasure(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let (a_lower, b_upper) = match &kind {
            MeasureKind::Exponential { rate } => {
                positive("rate", *rate)?;
                (0.0, f64::INFINITY)
            }
            MeasureKind::Uniform { b } => {
                positive("b", *b)?;
                (0.0, *b)
            }
            MeasureKind::Lomax { alpha } => {
                positive("alpha", *alpha)?;
                (0.0, f64::INFINITY)
            }
            MeasureKind::Tabulated(t) => {
                let flat = t.s.partition_point(|&v| v >= 1.0);
                let zero = t.s.partition_point(|&v| v > 0.0);
                (t.x[flat - 1], t.x[zero.min(t.x.len() - 1)])
            }
        };
        let (hazard_breaks, quantile_breaks) = match &kind {
            MeasureKind::Tabulated(t) => {
                let hb = t.s.iter().filter(|&&v| v > 0.0 && v < 1.0).map(|&v| -v.ln()).rev().collect();
                let qb = t.s.iter().filter(|&&v| v > 0.0 && v < 1.0).map(|&v| -(-v).ln_1p()).collect();
                (hb, qb)
            }
            _ => (Vec::new(), Vec::new()),
        };
        let mut m = Self {
            kind,
            a_lower,
            b_upper,
            tol,
            hazard: Cumulative { values: vec![0.0], breaks: hazard_breaks },
            quantile: None,
            psi_bar_origin: f64::INFINITY,
        };
        m.hazard = m.tabulate(|u| m.hazard_inverse(u), &m.hazard.breaks.clone())?;
        if m.mean_is_finite() {
            let cum = m.tabulate(|w| m.z_of_w(w), &quantile_breaks)?;
            let origin = if m.a_lower > 0.0 {
                f64::INFINITY
            } else {
                let (top, base) = cum.top();
                match quad::integrate_to_infinity(|w| m.z_of_w(w), top, &[], tol, DIVERGENCE_CAP)? {
                    Improper::Finite(e) => base + e.value,
                    Improper::Divergent { .. } => f64::INFINITY,
                }
            };
            m.quantile = Some(cum);
            m.psi_bar_origin = origin;
        }
        Ok(m)
    }

    fn tabulate(&self, f: impl Fn(f64) -> f64, breaks: &[f64]) -> Result<Cumulative> {
        let n = (NODE_MAX / NODE_STEP).ceil() as usize;
        let mut cum = Cumulative { values: Vec::with_capacity(n + 1), breaks: breaks.to_vec() };
        cum.values.push(0.0);
        let mut acc = 0.0;
        for k in 0..n {
            let (lo, hi) = (k as f64 * NODE_STEP, (k + 1) as f64 * NODE_STEP);
            let est = quad::integrate_with_breaks(&f, lo, hi, cum.breaks_in(lo, hi), self.tol);
            acc += est.accept("transform table")?;
            cum.values.push(acc);
        }
        Ok(cum)
    }

    pub fn kind(&self) -> &MeasureKind {
        &self.kind
    }

    /// `a_ϑ = sup{x : ϑ̄(x) = 1}`
    pub fn a_lower(&self) -> f64 {
        self.a_lower
    }

    /// `b_ϑ = inf{x : ϑ̄(x) = 0}`
    pub fn b_upper(&self) -> f64 {
        self.b_upper
    }

    pub fn tolerance(&self) -> Tolerance {
        self.tol
    }

    pub fn mean_is_finite(&self) -> bool {
        !matches!(self.kind, MeasureKind::Lomax { alpha } if alpha <= 1.0)
    }

    /// `ϑ̄(x) = ϑ([x, ∞))`
    pub fn survival(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            MeasureKind::Exponential { rate } => (-rate * x).exp(),
            MeasureKind::Uniform { b } => (1.0 - x / b).max(0.0),
            MeasureKind::Lomax { alpha } => (-alpha * x.ln_1p()).exp(),
            MeasureKind::Tabulated(t) => t.survival(x),
        }
    }

    /// Quantile of the law at probability `p`.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return self.a_lower;
        }
        if p >= 1.0 {
            return self.b_upper;
        }
        self.hazard_inverse(-(-p).ln_1p())
    }

    /// `H(x) = -ln ϑ̄(x)`
    fn hazard(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            MeasureKind::Exponential { rate } => rate * x,
            MeasureKind::Uniform { b } => {
                if x >= *b {
                    f64::INFINITY
                } else {
                    -(-x / b).ln_1p()
                }
            }
            MeasureKind::Lomax { alpha } => alpha * x.ln_1p(),
            MeasureKind::Tabulated(t) => -t.survival(x).ln(),
        }
    }

    /// `H⁻¹(u) = sup{x : H(x) ≤ u}`
    fn hazard_inverse(&self, u: f64) -> f64 {
        if u.is_infinite() {
            return self.b_upper;
        }
        match &self.kind {
            MeasureKind::Exponential { rate } => u / rate,
            MeasureKind::Uniform { b } => -b * (-u).exp_m1(),
            MeasureKind::Lomax { alpha } => (u / alpha).exp_m1(),
            MeasureKind::Tabulated(t) => t.upper_quantile((-u).exp()),
        }
    }

    /// `W(x) = -ln F(x)`
    fn w_of_x(&self, x: f64) -> f64 {
        -(-self.survival(x)).ln_1p()
    }

    /// `Z(w) = inf{z : F(z) ≥ e^{-w}}`
    fn z_of_w(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return self.b_upper;
        }
        let tail = -(-w).exp_m1();
        match &self.kind {
            MeasureKind::Exponential { rate } => -tail.ln() / rate,
            MeasureKind::Uniform { b } => b * (-w).exp(),
            MeasureKind::Lomax { alpha } => tail.powf(-1.0 / alpha) - 1.0,
            MeasureKind::Tabulated(t) => t.lower_quantile(tail),
        }
    }

    fn big_psi(&self, u: f64) -> Result<f64> {
        if u <= 0.0 {
            return Ok(0.0);
        }
        if u.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let (lo, base) = self.hazard.anchor(u);
        let est = quad::integrate_with_breaks(|w| self.hazard_inverse(w), lo, u, self.hazard.breaks_in(lo, u), self.tol);
        Ok(base + est.accept("psi")?)
    }

    /// `ψ_ϑ(x) = ∫_{[0,x]} z / ϑ̄(z) dϑ(z)`; `+∞` for `x ≥ b_ϑ`.
    pub fn dual_hl_psi(&self, x: f64) -> Result<f64> {
        if x < self.a_lower {
            return Ok(0.0);
        }
        if x >= self.b_upper {
            return Ok(f64::INFINITY);
        }
        self.big_psi(self.hazard(x))
    }

    /// `φ_ϑ(z) = inf{x ≥ 0 : ψ_ϑ(x) > z}`
    pub fn dual_hl_phi(&self, z: f64) -> Result<f64> {
        if z <= 0.0 {
            return Ok(self.a_lower);
        }
        if z.is_infinite() {
            return Ok(self.b_upper);
        }
        let u = invert_cumulative(&self.hazard, |w| self.hazard_inverse(w), z, self.tol)?;
        Ok(self.hazard_inverse(u))
    }

    /// `ψ̄_ϑ(x) = ∫_{(x,∞)} z dϑ(z) / ϑ([0, z])`
    pub fn dual_hl_psi_bar(&self, x: f64) -> Result<f64> {
        if x >= self.b_upper {
            return Ok(0.0);
        }
        let Some(cum) = &self.quantile else {
            return Err(Error::DivergentTransform { x });
        };
        if x <= self.a_lower {
            return if self.psi_bar_origin.is_finite() {
                Ok(self.psi_bar_origin)
            } else {
                Err(Error::DivergentTransform { x })
            };
        }
        let w = self.w_of_x(x);
        let (lo, base) = cum.anchor(w);
        let est = quad::integrate_with_breaks(|v| self.z_of_w(v), lo, w, cum.breaks_in(lo, w), self.tol);
        Ok(base + est.accept("psi_bar")?)
    }

    /// Decreasing inverse of `ψ̄`: `inf{z ≥ 0 : ψ̄_ϑ(z) ≤ x}`, and `0` for `x ≥ b_ϑ`.
    pub fn dual_hl_phi_bar(&self, x: f64) -> Result<f64> {
        if x >= self.b_upper {
            return Ok(0.0);
        }
        let Some(cum) = &self.quantile else {
            return Err(Error::DivergentTransform { x });
        };
        if x <= 0.0 {
            return Ok(self.b_upper);
        }
        if x >= self.psi_bar_origin {
            return Ok(self.a_lower);
        }
        let w = invert_cumulative(cum, |v| self.z_of_w(v), x, self.tol)?;
        Ok(self.z_of_w(w))
    }

    /// `ψ_ϑ` on its cached nodes.
    pub fn psi_curve(&self) -> TransformCurve {
        let x_grid = (0..self.hazard.values.len()).map(|k| self.hazard_inverse(k as f64 * NODE_STEP)).collect();
        TransformCurve { x_grid, values: self.hazard.values.clone(), divergence_point: self.b_upper }
    }

    /// `ψ̄_ϑ` on its cached nodes, in increasing `x`; values are nonincreasing.
    pub fn psi_bar_curve(&self) -> Option<TransformCurve> {
        let cum = self.quantile.as_ref()?;
        let mut x_grid = Vec::with_capacity(cum.values.len());
        let mut values = Vec::with_capacity(cum.values.len());
        for k in (1..cum.values.len()).rev() {
            x_grid.push(self.z_of_w(k as f64 * NODE_STEP));
            values.push(cum.values[k]);
        }
        if self.b_upper.is_finite() {
            x_grid.push(self.b_upper);
            values.push(0.0);
        }
        let divergence_point = if self.psi_bar_origin.is_finite() { -1.0 } else { self.a_lower };
        Some(TransformCurve { x_grid, values, divergence_point })
    }
}

/// Solves `C(u) = target` where `C` is the running integral of `g ≥ 0`.
fn invert_cumulative(cum: &Cumulative, g: impl Fn(f64) -> f64, target: f64, tol: Tolerance) -> Result<f64> {
    let eval_from = |lo: f64, base: f64, u: f64| -> Result<f64> {
        let est = quad::integrate_with_breaks(&g, lo, u, cum.breaks_in(lo, u), tol);
        Ok(base + est.accept("transform inverse")?)
    };
    let (top, top_value) = cum.top();
    let (mut lo, mut hi, base) = if target <= top_value {
        let k = cum.values.partition_point(|&v| v <= target).max(1) - 1;
        let lo = k as f64 * NODE_STEP;
        (lo, lo + NODE_STEP, cum.values[k])
    } else {
        // Past the table: march with doubling steps until the target is bracketed.
        let (mut lo, mut base) = (top, top_value);
        let mut width = NODE_STEP;
        loop {
            let next = eval_from(lo, base, lo + width)?;
            if next >= target {
                break (lo, lo + width, base);
            }
            if width > 1e6 {
                return Err(Error::BisectionFailure(format!("transform never reaches {target}")));
            }
            lo += width;
            base = next;
            width *= 2.0;
        }
    };
    let anchor = lo;
    let mut u = 0.5 * (lo + hi);
    for _ in 0..200 {
        let r = eval_from(anchor, base, u)? - target;
        if r == 0.0 {
            return Ok(u);
        }
        if r > 0.0 {
            hi = u;
        } else {
            lo = u;
        }
        let slope = g(u);
        let newton = u - r / slope;
        let next = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - u).abs() <= 1e-14 * u.abs().max(1.0) || hi - lo <= 1e-15 * hi.abs().max(1.0) {
            return Ok(next);
        }
        u = next;
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn survival_examples() {
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        assert_eq!(e1.survival(0.0), 1.0);
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.survival(0.25), 0.75, epsilon = 1e-15);
        let e2 = MeasureOnHalfLine::exponential(2.0).unwrap();
        assert_abs_diff_eq!(e2.survival(1.0), 0.135_335_283_236_612_7, epsilon = 1e-15);
    }

    #[test]
    fn psi_examples() {
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e1.dual_hl_psi(2.0).unwrap(), 2.0, epsilon = 1e-10);
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.dual_hl_psi(0.5).unwrap(), 0.193_147_180_559_945_31, epsilon = 1e-10);
        assert_eq!(u.dual_hl_psi(1.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn phi_examples() {
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e1.dual_hl_phi(2.0).unwrap(), 2.0, epsilon = 1e-10);
        assert_eq!(e1.dual_hl_phi(0.0).unwrap(), 0.0);
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.dual_hl_phi(0.193_147_180_559_945_31).unwrap(), 0.5, epsilon = 1e-10);
        // Far beyond the cached table.
        assert_abs_diff_eq!(e1.dual_hl_phi(5000.0).unwrap(), 100.0, epsilon = 1e-8);
    }

    #[test]
    fn psi_bar_examples() {
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.dual_hl_psi_bar(0.3).unwrap(), 0.7, epsilon = 1e-10);
        assert_eq!(u.dual_hl_psi_bar(1.0).unwrap(), 0.0);
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e1.dual_hl_psi_bar(1.0).unwrap(), 0.867_429_432_735_978_2, epsilon = 1e-9);
        assert_abs_diff_eq!(e1.dual_hl_psi_bar(0.0).unwrap(), std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-9);
    }

    #[test]
    fn phi_bar_examples() {
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        assert_abs_diff_eq!(u.dual_hl_phi_bar(0.4).unwrap(), 0.6, epsilon = 1e-10);
        assert_eq!(u.dual_hl_phi_bar(1.0).unwrap(), 0.0);
        assert_eq!(u.dual_hl_phi_bar(3.0).unwrap(), 0.0);
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        assert_abs_diff_eq!(e1.dual_hl_phi_bar(0.867_429_432_735_978_2).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn infinite_mean_diverges() {
        let m = MeasureOnHalfLine::new(MeasureKind::Lomax { alpha: 0.5 }).unwrap();
        assert!(matches!(m.dual_hl_psi_bar(1.0), Err(Error::DivergentTransform { .. })));
        assert!(matches!(m.dual_hl_phi_bar(1.0), Err(Error::DivergentTransform { .. })));
        // ψ itself is fine.
        assert!(m.dual_hl_psi(1.0).unwrap().is_finite());
        let finite = MeasureOnHalfLine::new(MeasureKind::Lomax { alpha: 3.0 }).unwrap();
        assert!(finite.dual_hl_psi_bar(1.0).unwrap().is_finite());
    }

    #[test]
    fn lower_support_bound_of_table() {
        let t = SurvivalTable::new(vec![0.0, 0.5, 1.5], vec![1.0, 1.0, 0.0]).unwrap();
        let m = MeasureOnHalfLine::tabulated(t).unwrap();
        assert_eq!(m.a_lower(), 0.5);
        assert_eq!(m.b_upper(), 1.5);
        assert_eq!(m.dual_hl_psi(0.3).unwrap(), 0.0);
        assert_eq!(m.dual_hl_phi(0.0).unwrap(), 0.5);
        assert!(matches!(m.dual_hl_psi_bar(0.5), Err(Error::DivergentTransform { .. })));
        // Shifted uniform on [0.5, 1.5]: ψ̄(x) = ∫_x^{1.5} z / (z - 0.5) dz.
        let x: f64 = 1.0;
        let expected = (1.5 - x) + 0.5 * ((1.5 - 0.5) / (x - 0.5f64)).ln();
        assert_abs_diff_eq!(m.dual_hl_psi_bar(x).unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn table_rejects_atoms_and_bad_shapes() {
        assert!(SurvivalTable::new(vec![0.0, 1.0, 1.0, 2.0], vec![1.0, 0.6, 0.4, 0.0]).is_err());
        assert!(SurvivalTable::new(vec![0.0, 1.0], vec![0.9, 0.0]).is_err());
        assert!(SurvivalTable::new(vec![0.0, 1.0], vec![1.0, 0.1]).is_err());
        assert!(SurvivalTable::new(vec![0.0, 1.0, 2.0], vec![1.0, 0.3, 0.5]).is_err());
        assert!(SurvivalTable::new(vec![0.0, 2.0, 1.0], vec![1.0, 0.5, 0.0]).is_err());
    }

    #[test]
    fn table_of_uniform_matches_analytic_uniform() {
        let t = SurvivalTable::new(vec![0.0, 1.0], vec![1.0, 0.0]).unwrap();
        let m = MeasureOnHalfLine::tabulated(t).unwrap();
        let u = MeasureOnHalfLine::uniform(1.0).unwrap();
        for &x in &[0.1, 0.5, 0.9, 0.999] {
            assert_abs_diff_eq!(m.dual_hl_psi(x).unwrap(), u.dual_hl_psi(x).unwrap(), epsilon = 1e-9);
            assert_abs_diff_eq!(m.dual_hl_psi_bar(x).unwrap(), 1.0 - x, epsilon = 1e-9);
        }
    }

    #[test]
    fn curves_are_monotone() {
        let e1 = MeasureOnHalfLine::exponential(1.0).unwrap();
        let c = e1.psi_curve();
        assert!(c.values.windows(2).all(|w| w[1] >= w[0]));
        assert!(c.x_grid.windows(2).all(|w| w[1] > w[0]));
        let cb = e1.psi_bar_curve().unwrap();
        assert!(cb.values.windows(2).all(|w| w[1] <= w[0]));
        assert!(cb.x_grid.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(&path, "x,survival\n0,1\n1,0.5\n2,0\n").unwrap();
        let m = MeasureSpec::Tabulated { path: "m.csv".into() }.build(Some(dir.path())).unwrap();
        assert_abs_diff_eq!(m.survival(1.5), 0.25, epsilon = 1e-15);
        std::fs::write(&path, "x,survival\n0,1\n1,0.5\n1,0.2\n2,0\n").unwrap();
        assert!(MeasureSpec::Tabulated { path: path.clone() }.build(None).is_err());
    }
}
