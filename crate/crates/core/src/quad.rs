//! Adaptive Gauss–Kronrod quadrature.
//!
//! Finite intervals are refined by repeatedly bisecting the panel with the
//! largest error estimate (7-point Gauss embedded in 15-point Kronrod, with
//! the QUADPACK error heuristic). Integrals to `+∞` are summed over panels
//! whose width doubles, which is the dyadic partition of `t ∈ [0, 1)` under
//! `x = a + t / (1 - t)`; the sum is declared divergent once it passes a cap.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_5,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_48,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_19,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_42,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Requested accuracy for an integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12, max_subdivisions: 1_000_000 }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Self {
        Self { rel, abs, ..Self::default() }
    }

    fn target(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub abs_err: f64,
    pub converged: bool,
    pub evaluations: usize,
}

impl Estimate {
    /// Accepts the estimate if it converged, or if the residual error is
    /// still small in absolute terms (1e-6 relative).
    pub fn accept(self, what: &str) -> Result<f64> {
        if !self.value.is_finite() {
            return Err(Error::QuadratureFailure(format!("{what}: non-finite value {}", self.value)));
        }
        if self.converged || self.abs_err <= 1e-6 * self.value.abs().max(1.0) {
            Ok(self.value)
        } else {
            Err(Error::QuadratureFailure(format!(
                "{what}: value {} with error {:e} after {} evaluations",
                self.value, self.abs_err, self.evaluations
            )))
        }
    }
}

/// One 15-point Kronrod panel: `(value, error estimate)`.
pub fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    (value, if err.is_finite() { err } else { f64::MAX / 1e8 })
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Adaptive integration of `f` over `[a, b]`, split first at `breaks`.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Estimate {
    if a == b {
        return Estimate { value: 0.0, abs_err: 0.0, converged: true, evaluations: 0 };
    }
    if b < a {
        let est = integrate_with_breaks(f, b, a, breaks, tol);
        return Estimate { value: -est.value, ..est };
    }
    let mut cuts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    cuts.extend(inner);
    cuts.push(b);

    let mut heap = BinaryHeap::new();
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    let mut evaluations = 0;
    for w in cuts.windows(2) {
        let (value, err) = gauss_kronrod(&mut f, w[0], w[1]);
        evaluations += 15;
        heap.push(Panel { a: w[0], b: w[1], value, err });
    }
    let mut subdivisions = 0;
    let (mut live_value, mut live_err) = (0.0, 0.0);
    let mut resum = true;
    loop {
        // Running sums drift; resum from the heap now and then.
        if resum || subdivisions % 512 == 0 {
            (live_value, live_err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
        }
        let (total, total_err) = (frozen_value + live_value, frozen_err + live_err.max(0.0));
        if total_err <= tol.target(total) || !total.is_finite() {
            return Estimate { value: total, abs_err: total_err, converged: total.is_finite(), evaluations };
        }
        if subdivisions >= tol.max_subdivisions || heap.is_empty() {
            return Estimate { value: total, abs_err: total_err, converged: false, evaluations };
        }
        let worst = heap.pop().expect("non-empty heap");
        // Removing a dominant term from a running sum loses its small companions.
        resum = worst.err > 0.5 * live_err || !worst.value.is_finite();
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel is at floating-point resolution; keep its contribution as is.
            frozen_value += worst.value;
            frozen_err += worst.err;
            live_value -= worst.value;
            live_err -= worst.err;
            continue;
        }
        let (v1, e1) = gauss_kronrod(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod(&mut f, mid, worst.b);
        evaluations += 30;
        subdivisions += 1;
        live_value += v1 + v2 - worst.value;
        live_err += e1 + e2 - worst.err;
        heap.push(Panel { a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, err: e2 });
    }
}

pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Estimate {
    integrate_with_breaks(f, a, b, &[], tol)
}

/// Outcome of an integral over `[a, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Improper {
    Finite(Estimate),
    Divergent { partial: f64 },
}

impl Improper {
    /// Value with divergence mapped to `+∞`.
    pub fn value(&self) -> f64 {
        match self {
            Improper::Finite(e) => e.value,
            Improper::Divergent { .. } => f64::INFINITY,
        }
    }
}

/// Integrates a nonnegative-tailed `f` over `[a, ∞)`.
///
/// Panels are `[a + 2^k - 1, a + 2^(k+1) - 1]`. The sum is divergent when it
/// exceeds `cap`, or when the panel contributions have not died out by
/// `x ≈ 1e300`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    breaks: &[f64],
    tol: Tolerance,
    cap: f64,
) -> Result<Improper> {
    let last_break = breaks.iter().copied().filter(|p| p.is_finite()).fold(a, f64::max);
    let mut sum = 0.0;
    let mut err = 0.0;
    let mut evaluations = 0;
    let mut quiet = 0;
    let mut lo = a;
    let mut width = 1.0_f64;
    while lo < 1e300 {
        let hi = lo + width;
        let est = integrate_with_breaks(&mut f, lo, hi, breaks, tol);
        if !est.value.is_finite() {
            return Err(Error::QuadratureFailure(format!("non-finite integrand on [{lo}, {hi}]")));
        }
        evaluations += est.evaluations;
        sum += est.value;
        err += est.abs_err;
        if sum.abs() > cap {
            return Ok(Improper::Divergent { partial: sum });
        }
        if hi >= last_break && est.value.abs() <= 0.5 * tol.target(sum) {
            quiet += 1;
            if quiet >= 3 {
                return Ok(Improper::Finite(Estimate {
                    value: sum,
                    abs_err: err + est.value.abs(),
                    converged: true,
                    evaluations,
                }));
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Ok(Improper::Divergent { partial: sum })
}

/// Bisection for the root of a monotone `g` on `[lo, hi]` (signs must differ).
pub fn bisect<G: FnMut(f64) -> Result<f64>>(mut g: G, mut lo: f64, mut hi: f64, x_tol: f64) -> Result<f64> {
    let mut g_lo = g(lo)?;
    let g_hi = g(hi)?;
    if g_lo == 0.0 {
        return Ok(lo);
    }
    if g_hi == 0.0 {
        return Ok(hi);
    }
    if g_lo.signum() == g_hi.signum() {
        return Err(Error::BisectionFailure(format!(
            "no sign change on [{lo}, {hi}] (g = {g_lo}, {g_hi})"
        )));
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= x_tol || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let g_mid = g(mid)?;
        if g_mid == 0.0 {
            return Ok(mid);
        }
        if g_mid.signum() == g_lo.signum() {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
