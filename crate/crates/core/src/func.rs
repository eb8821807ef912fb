//! Real functions used as barriers, drifts, volatilities and conditional means.
//!
//! Functions come either from Rust closures or from a small declarative
//! registry (`FnSpec`) so that scenario files never need an expression language.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn one() -> f64 {
    1.0
}

/// Declarative function, as written in scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnSpec {
    /// `value`
    Constant { value: f64 },
    /// `coef · (x + shift)^exponent`
    Power {
        #[serde(default = "one")]
        coef: f64,
        exponent: f64,
        #[serde(default)]
        shift: f64,
    },
    /// `coef · exp(rate · x) + offset`
    Exp {
        #[serde(default = "one")]
        coef: f64,
        #[serde(default = "one")]
        rate: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `slope · x + intercept`
    Affine { slope: f64, intercept: f64 },
    /// `max(inner(x), min)`
    Floor { inner: Box<FnSpec>, min: f64 },
    /// Piecewise linear through a CSV with header `x,value`, flat outside the table.
    Tabulated { path: PathBuf },
}

impl FnSpec {
    /// Builds the function; relative table paths are resolved against `base`.
    pub fn compile(&self, base: Option<&Path>) -> Result<RealFn> {
        let label = self.to_string();
        Ok(match *self {
            FnSpec::Constant { value } => {
                finite("value", value)?;
                RealFn::new(label, move |_| value)
            }
            FnSpec::Power { coef, exponent, shift } => {
                finite("coef", coef)?;
                finite("exponent", exponent)?;
                finite("shift", shift)?;
                let f = RealFn::new(label, move |x| coef * (x + shift).powf(exponent));
                f.with_breaks(vec![-shift])
            }
            FnSpec::Exp { coef, rate, offset } => {
                finite("coef", coef)?;
                finite("rate", rate)?;
                finite("offset", offset)?;
                RealFn::new(label, move |x| coef * (rate * x).exp() + offset)
            }
            FnSpec::Affine { slope, intercept } => {
                finite("slope", slope)?;
                finite("intercept", intercept)?;
                RealFn::new(label, move |x| slope * x + intercept)
            }
            FnSpec::Floor { ref inner, min } => {
                finite("min", min)?;
                let g = inner.compile(base)?;
                let breaks = g.breaks.clone();
                RealFn::new(label, move |x| g.eval(x).max(min)).with_breaks(breaks)
            }
            FnSpec::Tabulated { ref path } => {
                let full = match base {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let table = Table::from_csv(&full)?;
                let breaks = table.x.clone();
                let table = Arc::new(table);
                RealFn::new(label, move |x| table.eval(x)).with_breaks(breaks)
            }
        })
    }
}

impl fmt::Display for FnSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FnSpec::Constant { value } => write!(f, "{value}"),
            FnSpec::Power { coef, exponent, shift } => write!(f, "{coef}*(x+{shift})^{exponent}"),
            FnSpec::Exp { coef, rate, offset } => write!(f, "{coef}*exp({rate}x)+{offset}"),
            FnSpec::Affine { slope, intercept } => write!(f, "{slope}x+{intercept}"),
            FnSpec::Floor { inner, min } => write!(f, "max({inner}, {min})"),
            FnSpec::Tabulated { path } => write!(f, "table({})", path.display()),
        }
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be finite, got {v}")))
    }
}

#[derive(Debug, Clone)]
struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Table {
    fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            x: f64,
            value: f64,
        }
        let mut reader = csv::Reader::from_path(path)?;
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for row in reader.deserialize() {
            let row: Row = row?;
            x.push(row.x);
            y.push(row.value);
        }
        if x.is_empty() {
            return Err(Error::config("path", format!("{} has no rows", path.display())));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::config(
                "path",
                format!("{}: x must be strictly increasing and all values finite", path.display()),
            ));
        }
        Ok(Self { x, y })
    }

    fn eval(&self, x: f64) -> f64 {
        interp(&self.x, &self.y, x)
    }
}

/// Linear interpolation with flat extrapolation; `xs` strictly increasing.
pub(crate) fn interp(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let i = xs.partition_point(|&v| v <= x);
    let (x0, x1) = (xs[i - 1], xs[i]);
    let w = (x - x0) / (x1 - x0);
    ys[i - 1] + w * (ys[i] - ys[i - 1])
}

/// A shareable real function with optional kink locations.
#[derive(Clone)]
pub struct RealFn {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    breaks: Vec<f64>,
    label: String,
}

impl RealFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Arc::new(f), breaks: Vec::new(), label: label.into() }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn with_breaks(mut self, mut breaks: Vec<f64>) -> Self {
        breaks.retain(|b| b.is_finite());
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        self.breaks = breaks;
        self
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    /// Points where the function may fail to be smooth.
    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for RealFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RealFn({})", self.label)
    }
}

/// Whether `∫₀^∞ dx / f(x)` is known to be finite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    ReciprocalIntegrable,
    ReciprocalDivergent,
    #[default]
    Unknown,
}

const PROBE: [f64; 12] = [0.0, 1e-6, 1e-3, 0.01, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0, 1e4];

fn check_positive(f: &RealFn, what: &str) -> Result<()> {
    for &x in &PROBE {
        let v = f.eval(x);
        if v.is_nan() || v <= 0.0 {
            return Err(Error::Domain(format!("{what} {} must be positive, got {v} at x = {x}", f.label())));
        }
    }
    Ok(())
}

/// A positive function on `[0, ∞)` used as a barrier.
#[derive(Debug, Clone)]
pub struct BarrierFunction {
    pub f: RealFn,
    pub hint: Integrability,
}

impl BarrierFunction {
    /// Checks positivity on a probe grid (`+∞` is allowed).
    pub fn new(f: RealFn) -> Result<Self> {
        check_positive(&f, "barrier")?;
        Ok(Self { f, hint: Integrability::Unknown })
    }

    pub fn with_hint(mut self, hint: Integrability) -> Self {
        self.hint = hint;
        self
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(RealFn::constant(c))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.f.eval(x)
    }
}

/// `λ(x) = E[X_∞ | A_∞ = x]`.
#[derive(Debug, Clone)]
pub struct ConditionalMean {
    pub lambda: RealFn,
}

impl ConditionalMean {
    pub fn new(lambda: RealFn) -> Result<Self> {
        check_positive(&lambda, "conditional mean")?;
        Ok(Self { lambda })
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.lambda.eval(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn registry_functions_evaluate() {
        let p = FnSpec::Power { coef: 2.0, exponent: 0.5, shift: 0.0 }.compile(None).unwrap();
        assert!((p.eval(4.0) - 4.0).abs() < 1e-15);
        let e = FnSpec::Exp { coef: 1.0, rate: 1.0, offset: -1.0 }.compile(None).unwrap();
        assert!((e.eval(1.0) - (std::f64::consts::E - 1.0)).abs() < 1e-15);
        let a = FnSpec::Affine { slope: 2.0, intercept: 0.0 }.compile(None).unwrap();
        let fl = FnSpec::Floor { inner: Box::new(FnSpec::Affine { slope: 2.0, intercept: 0.0 }), min: 0.1 }
            .compile(None)
            .unwrap();
        assert_eq!(a.eval(0.01), 0.02);
        assert_eq!(fl.eval(0.01), 0.1);
        assert_eq!(fl.eval(1.0), 2.0);
    }

    #[test]
    fn spec_json_round_trip() {
        let spec = FnSpec::Floor { inner: Box::new(FnSpec::Power { coef: 1.0, exponent: 2.0, shift: 1.0 }), min: 0.5 };
        let text = serde_json::to_string(&spec).unwrap();
        let back: FnSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
        let short: FnSpec = serde_json::from_str(r#"{"kind":"power","exponent":2}"#).unwrap();
        assert_eq!(short, FnSpec::Power { coef: 1.0, exponent: 2.0, shift: 0.0 });
        assert!(serde_json::from_str::<FnSpec>(r#"{"kind":"cosine"}"#).is_err());
    }

    #[test]
    fn tabulated_interpolates_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let mut file = std::fs::File::create(dir.path().join("f.csv")).unwrap();
        writeln!(file, "x,value\n0,1\n1,3\n2,3").unwrap();
        let f = FnSpec::Tabulated { path: "f.csv".into() }.compile(Some(dir.path())).unwrap();
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(-1.0), 1.0);
        assert_eq!(f.eval(10.0), 3.0);
        assert_eq!(f.breaks(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn barrier_positivity_is_enforced() {
        assert!(BarrierFunction::constant(1.0).is_ok());
        assert!(BarrierFunction::constant(0.0).is_err());
        let lin = RealFn::new("x", |x| x);
        assert!(BarrierFunction::new(lin).is_err());
        let inv = RealFn::new("1/sqrt(2x)", |x: f64| 1.0 / (2.0 * x).sqrt());
        assert!(BarrierFunction::new(inv).is_ok());
    }
}
