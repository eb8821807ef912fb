//! Exact transitions of the squared Bessel process of dimension `δ ∈ (0, 2)`.
//!
//! Given `Z_0 = z`, `Z_t = 2t · G` where `G ~ Gamma(δ/2 + N)` and
//! `N ~ Poisson(z / 2t)`: the noncentral chi-square law as a Poisson mixture.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};

/// Starting values below `compensator_band(dt)` get an explicit compensator
/// increment; above it the increment is below `e^{-40}` relative.
pub(crate) fn compensator_band(dt: f64) -> f64 {
    80.0 * dt
}

pub(crate) fn besq_step<R: Rng + ?Sized>(half_delta: f64, z: f64, dt: f64, rng: &mut R) -> f64 {
    let lambda = z / (2.0 * dt);
    let n = if lambda > 0.0 {
        Poisson::new(lambda).expect("finite positive mean").sample(rng)
    } else {
        0.0
    };
    let g = Gamma::new(half_delta + n, 1.0).expect("positive shape").sample(rng);
    2.0 * dt * g
}

/// One exact draw of `Z_t` for a squared Bessel process of dimension `delta` from `x0`.
pub fn sim_besq_exact<R: Rng + ?Sized>(delta: f64, x0: f64, t: f64, rng: &mut R) -> Result<f64> {
    if !(delta > 0.0 && delta < 2.0) {
        return Err(Error::Domain(format!("dimension must lie in (0, 2), got {delta}")));
    }
    if !(x0 >= 0.0 && x0.is_finite()) || !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("need x0 ≥ 0 and t > 0, got x0 = {x0}, t = {t}")));
    }
    Ok(besq_step(0.5 * delta, x0, t, rng))
}

/// Precomputed `Γ(δ/2 + μ) / Γ(δ/2)` for the conditional moment below.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerMoment {
    half_delta: f64,
    mu: f64,
    ratio0: f64,
}

impl PowerMoment {
    pub(crate) fn new(half_delta: f64, mu: f64) -> Self {
        use statrs::function::gamma::ln_gamma;
        let ratio0 = (ln_gamma(half_delta + mu) - ln_gamma(half_delta)).exp();
        Self { half_delta, mu, ratio0 }
    }

    /// `E[Z_dt^μ | Z_0 = z]`.
    pub(crate) fn conditional(&self, z: f64, dt: f64) -> f64 {
        let lambda = z / (2.0 * dt);
        let mut p = (-lambda).exp();
        let mut r = self.ratio0;
        let mut sum = p * r;
        let mut j = 0.0;
        loop {
            let shape = self.half_delta + j;
            r *= (shape + self.mu) / shape;
            j += 1.0;
            p *= lambda / j;
            let term = p * r;
            sum += term;
            if j > lambda && term <= 1e-17 * sum {
                break;
            }
        }
        (2.0 * dt).powf(self.mu) * sum
    }
}

/// `E[Z_dt^μ | Z_0 = z]` for a squared Bessel process of dimension `delta`.
pub fn besq_compensated_power(delta: f64, mu: f64, z: f64, dt: f64) -> f64 {
    PowerMoment::new(0.5 * delta, mu).conditional(z, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn chi_square_mean() {
        let mut rng = RngStream::new(11, 0).rng();
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sim_besq_exact(1.0, 0.0, 1.0, &mut rng).unwrap()).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0).abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn mean_is_delta_t_plus_start() {
        let mut rng = RngStream::new(12, 0).rng();
        for (delta, x0, t) in [(0.5, 0.0, 2.0), (1.5, 0.3, 0.7)] {
            let n = 50_000;
            let draws: Vec<f64> = (0..n).map(|_| sim_besq_exact(delta, x0, t, &mut rng).unwrap()).collect();
            let mean = draws.iter().sum::<f64>() / n as f64;
            let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - (x0 + delta * t)).abs() < 4.0 * se, "delta {delta}: mean {mean}");
        }
    }

    #[test]
    fn dimension_out_of_range() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(matches!(sim_besq_exact(2.5, 0.0, 1.0, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(sim_besq_exact(0.0, 0.0, 1.0, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn conditional_moment_limits() {
        // From 0 the law is 2dt·Gamma(δ/2).
        let m = besq_compensated_power(1.0, 0.5, 0.0, 0.5);
        let expected = (statrs::function::gamma::ln_gamma(1.0) - statrs::function::gamma::ln_gamma(0.5)).exp();
        assert!((m - expected).abs() < 1e-14);
        // Far from 0 the power is a martingale to within e^{-λ}.
        let (z, dt) = (1.0, 1e-3);
        assert!((besq_compensated_power(0.5, 0.75, z, dt) - z.powf(0.75)).abs() < 1e-12);
        // Monte Carlo check at an intermediate start.
        let mut rng = RngStream::new(5, 0).rng();
        let (delta, mu, z, dt) = (0.5, 0.75, 0.01, 0.01);
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| besq_step(0.5 * delta, z, dt, &mut rng).powf(mu)).collect();
        let mc = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mc).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        let exact = besq_compensated_power(delta, mu, z, dt);
        assert!((mc - exact).abs() < 4.0 * se, "mc {mc} exact {exact} se {se}");
        assert!(exact > z.powf(mu));
    }
}
