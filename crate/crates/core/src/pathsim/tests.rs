#![allow(clippy::needless_range_loop)]

use super::*;
use crate::func::RealFn;

fn horizon_model(kind: ModelKind, dt: f64, horizon: f64) -> Model {
    Model::new(kind, dt, Window::Horizon(horizon), None, None).unwrap()
}

#[test]
fn reflected_bm_path_shape() {
    let m = horizon_model(ModelKind::ReflectedBm, 0.01, 1.0);
    let p = sim_reflected_bm(&m, RngStream::new(1, 0)).unwrap();
    assert_eq!(p.len(), 101);
    assert!((p.t[100] - 1.0).abs() < 1e-12);
    p.check_invariants().unwrap();
    for k in 1..p.len() {
        if p.a[k] > p.a[k - 1] {
            assert!(p.x[k] <= 8.0 * 0.1);
        }
    }
}

#[test]
fn zero_horizon_is_a_single_point() {
    for kind in [ModelKind::ReflectedBm, ModelKind::BesselPower { mu: 0.25 }] {
        let m = horizon_model(kind, 0.01, 0.0);
        let p = m.simulate(RngStream::new(1, 0)).unwrap();
        assert_eq!((p.t.as_slice(), p.x.as_slice(), p.a.as_slice()), (&[0.0][..], &[0.0][..], &[0.0][..]));
    }
}

#[test]
fn continuous_maximum_dominates_grid_maximum() {
    let m = horizon_model(ModelKind::ReflectedBm, 0.001, 2.0);
    let p = m.simulate(RngStream::new(3, 9)).unwrap();
    let n = p.n();
    let mut run = 0.0_f64;
    for k in 0..p.len() {
        run = run.max(-n[k]);
        assert!(p.a[k] >= run);
        assert!(p.a[k] - run <= 8.0 * 0.001f64.sqrt());
    }
}

#[test]
fn paths_are_reproducible() {
    let m = horizon_model(ModelKind::AgeProcess { mu: 0.5 }, 0.001, 1.0);
    let a = m.simulate(RngStream::new(42, 5)).unwrap();
    let b = m.simulate(RngStream::new(42, 5)).unwrap();
    let c = m.simulate(RngStream::new(42, 6)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.x, c.x);
}

#[test]
fn bessel_power_paths_satisfy_invariants() {
    for mu in [0.25, 0.5, 0.75] {
        let m = horizon_model(ModelKind::BesselPower { mu }, 1e-3, 2.0);
        for i in 0..20 {
            let p = sim_bessel_power(&m, RngStream::new(8, i)).unwrap();
            p.check_invariants().unwrap();
            assert!(p.a[p.len() - 1] > 0.0);
        }
    }
}

#[test]
fn age_process_drops_only_at_detected_zeros() {
    let mu = 0.5;
    let m = horizon_model(ModelKind::AgeProcess { mu }, 1e-3, 3.0);
    let p = sim_age_process(&m, RngStream::new(2, 1)).unwrap();
    p.check_invariants().unwrap();
    let band = 1e-3f64.powf(mu) + 1e-12;
    let mut zeros = 0;
    for k in 1..p.len() {
        let aged = (p.x[k].powf(1.0 / mu) - p.x[k - 1].powf(1.0 / mu) - 1e-3).abs() < 1e-9;
        if !aged {
            zeros += 1;
            assert!(p.x[k] <= band);
        } else {
            assert_eq!(p.a[k], p.a[k - 1]);
        }
        let age = p.x[k].powf(1.0 / mu);
        assert!(age <= p.t[k] + 1e-12);
    }
    assert!(zeros > 0);
}

#[test]
fn zero_threshold_zero_counts_a_warning() {
    let before = degenerate_threshold_warnings();
    let m = Model::new(ModelKind::AgeProcess { mu: 0.5 }, 0.1, Window::Horizon(1.0), Some(0.0), None).unwrap();
    let p = m.simulate(RngStream::new(1, 0)).unwrap();
    assert!(degenerate_threshold_warnings() > before);
    // No zero is ever detected: X is the plain clock.
    for k in 0..p.len() {
        assert!((p.x[k] - p.t[k].sqrt()).abs() < 1e-12);
    }
}

#[test]
fn reflected_sde_pushes_only_at_zero() {
    let kind = ModelKind::ReflectedSde { drift: RealFn::constant(0.5), diffusion: RealFn::constant(1.0) };
    let m = horizon_model(kind, 1e-3, 2.0);
    let p = sim_reflected_sde(&m, RngStream::new(4, 0)).unwrap();
    p.check_invariants().unwrap();
    let mut pushes = 0;
    for k in 1..p.len() {
        if p.a[k] > p.a[k - 1] {
            pushes += 1;
            assert!(p.x[k] <= 8.0 * 0.001f64.sqrt());
        }
    }
    assert!(pushes > 0);
}

#[test]
fn reflected_sde_with_constant_coefficients_is_exact_at_one() {
    // With b ≡ 0 and σ ≡ 1 the reflected process is |B|, and E[L_1] = E[S_1] = √(2/π) even on a coarse grid.
    let kind = ModelKind::ReflectedSde { drift: RealFn::constant(0.0), diffusion: RealFn::constant(1.0) };
    let m = horizon_model(kind, 0.1, 1.0);
    let n = 40_000;
    let l: Vec<f64> = (0..n).map(|i| *m.simulate(RngStream::new(21, i)).unwrap().a.last().unwrap()).collect();
    let mean = l.iter().sum::<f64>() / n as f64;
    let var = l.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean - expected).abs() < 4.0 * se, "mean {mean} expected {expected} se {se}");
}

#[test]
fn diffusion_with_max_shape() {
    let kind = ModelKind::DiffusionWithMax { drift: RealFn::new("-y", |y| -y), diffusion: RealFn::constant(1.0), y0: 0.0 };
    let m = horizon_model(kind, 1e-3, 2.0);
    let p = sim_diffusion_with_max(&m, RngStream::new(4, 1)).unwrap();
    p.check_invariants().unwrap();
    let c = p.companion.as_ref().unwrap();
    assert!(c.windows(2).all(|w| w[1] >= w[0]));
    assert!(p.x.iter().all(|&x| x >= 0.0));
}

#[test]
fn brownian_drawdown_model_matches_reflected_bm() {
    let bm = horizon_model(ModelKind::ReflectedBm, 0.01, 1.0);
    let kind = ModelKind::DiffusionWithMax { drift: RealFn::constant(0.0), diffusion: RealFn::constant(1.0), y0: 0.0 };
    let dm = horizon_model(kind, 0.01, 1.0);
    let a = bm.simulate(RngStream::new(9, 0)).unwrap();
    let b = dm.simulate(RngStream::new(9, 0)).unwrap();
    for k in 0..a.len() {
        assert!((a.x[k] - b.x[k]).abs() < 1e-12);
        assert!((a.a[k] - b.a[k]).abs() < 1e-12);
    }
}

#[test]
fn exponential_martingale_shape() {
    let m = horizon_model(ModelKind::ExponentialMartingale { x0: 1.0 }, 0.01, 20.0);
    let p = sim_exponential_martingale(&m, RngStream::new(5, 0)).unwrap();
    p.check_invariants().unwrap();
    let c = p.companion.as_ref().unwrap();
    for k in 0..p.len() {
        let martingale = p.a[k] + 1.0 - p.x[k];
        assert!(martingale > 0.0);
        assert!(c[k] >= p.a[k] + 1.0 - 1e-12);
    }
    assert!(c[0] == 1.0);
}

#[test]
fn running_maximum_mean_is_exact() {
    let dt = 1e-2;
    let m = horizon_model(ModelKind::ReflectedBm, dt, 1.0);
    let n = 100_000;
    let a: Vec<f64> = (0..n).map(|i| *m.simulate(RngStream::new(77, i)).unwrap().a.last().unwrap()).collect();
    let mean = a.iter().sum::<f64>() / n as f64;
    let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    let expected = (2.0 / std::f64::consts::PI).sqrt();
    assert!((mean - expected).abs() < 3.0 * se, "mean {mean} expected {expected} se {se}");
}

#[test]
fn wrong_model_is_rejected() {
    let m = horizon_model(ModelKind::ReflectedBm, 0.01, 1.0);
    assert!(matches!(sim_bessel_power(&m, RngStream::new(1, 0)), Err(Error::InvalidSpec(_))));
    assert!(Model::new(ModelKind::BesselPower { mu: 1.5 }, 0.01, Window::Horizon(1.0), None, None).is_err());
    assert!(Model::new(ModelKind::ReflectedBm, 0.0, Window::Horizon(1.0), None, None).is_err());
}

#[test]
fn unstable_drift_is_reported() {
    let kind = ModelKind::ReflectedSde { drift: RealFn::new("1e9", |_| 1e9), diffusion: RealFn::constant(1.0) };
    let m = horizon_model(kind, 0.01, 1.0);
    assert!(matches!(m.simulate(RngStream::new(1, 0)), Err(Error::UnstableStep { .. })));
}

#[test]
fn spec_round_trip_and_window_validation() {
    let spec = ModelSpec::new(
        Variant::DiffusionWithMax {
            drift: crate::func::FnSpec::Affine { slope: -1.0, intercept: 0.0 },
            diffusion: crate::func::FnSpec::Constant { value: 1.0 },
            y0: 0.0,
        },
        5e-4,
    )
    .with_horizon(10.0);
    let text = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<ModelSpec>(&text).unwrap(), spec);
    assert!(spec.compile(None).is_ok());
    let mut both = spec.clone();
    both.u_cap = Some(1.0);
    assert!(both.compile(None).is_err());
}

#[test]
fn u_cap_window_stops_once_a_exceeds_level() {
    let m = Model::reflected_bm(1e-3, Window::UCap(0.5)).unwrap();
    let p = m.simulate(RngStream::new(3, 3)).unwrap();
    let n = p.len();
    assert!(p.a[n - 1] > 0.5);
    assert!(p.a[n - 2] <= 0.5);
}

#[test]
fn csv_dump_has_header_and_rows() {
    let m = horizon_model(ModelKind::ReflectedBm, 0.1, 1.0);
    let p = m.simulate(RngStream::new(1, 0)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("p.csv");
    p.write_csv(&f).unwrap();
    let text = std::fs::read_to_string(&f).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,X,A"));
    assert_eq!(lines.count(), p.len());
}
