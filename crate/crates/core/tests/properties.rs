#![allow(clippy::needless_range_loop)]

use proptest::prelude::*;

use sigmalab::func::{BarrierFunction, ConditionalMean, FnSpec, RealFn};
use sigmalab::lawlib::{self, ClosedForm, ScaleFunction};
use sigmalab::measure::{MeasureKind, MeasureOnHalfLine};
use sigmalab::pathsim::{ClassSigmaPath, Model, ModelKind, Window};
use sigmalab::rng::RngStream;
use sigmalab::stoprule::{first_crossing, StoppingRule};
use sigmalab::verify::{ks_against, EmpiricalSample};

fn measure() -> impl Strategy<Value = MeasureOnHalfLine> {
    prop_oneof![
        (0.2..5.0f64).prop_map(|r| MeasureOnHalfLine::exponential(r).unwrap()),
        (0.2..5.0f64).prop_map(|b| MeasureOnHalfLine::uniform(b).unwrap()),
        (1.2..6.0f64).prop_map(|a| MeasureOnHalfLine::new(MeasureKind::Lomax { alpha: a }).unwrap()),
    ]
}

fn model() -> impl Strategy<Value = Model> {
    let w = Window::Horizon(0.5);
    prop_oneof![
        Just(Model::reflected_bm(1e-2, w).unwrap()),
        (0.1..0.9f64).prop_map(move |mu| Model::new(ModelKind::BesselPower { mu }, 1e-2, w, None, None).unwrap()),
        (0.1..0.9f64).prop_map(move |mu| Model::new(ModelKind::AgeProcess { mu }, 1e-2, w, None, None).unwrap()),
        (-1.0..1.0f64, 0.5..2.0f64).prop_map(move |(b, s)| Model::new(
            ModelKind::ReflectedSde { drift: RealFn::constant(b), diffusion: RealFn::constant(s) },
            1e-2,
            w,
            None,
            None
        )
        .unwrap()),
        (0.5..2.0f64).prop_map(move |x0| Model::new(ModelKind::ExponentialMartingale { x0 }, 1e-2, w, None, None).unwrap()),
    ]
}

fn path(m: &Model, seed: u64, index: u64) -> ClassSigmaPath {
    m.simulate(RngStream::new(seed, index)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn barrier_is_a_generalised_inverse(m in measure(), p in 0.01..0.95f64, eps in 1e-6..1.0f64) {
        let x = m.quantile(p);
        let z = m.dual_hl_psi(x).unwrap();
        prop_assert!(m.dual_hl_phi(z + eps).unwrap() >= x - 1e-9);
        if z > eps {
            prop_assert!(m.dual_hl_phi(z - eps).unwrap() <= x + 1e-9);
        }
    }

    #[test]
    fn psi_is_nondecreasing(m in measure(), p in 0.0..0.95f64, q in 0.0..0.95f64) {
        let (lo, hi) = (m.quantile(p.min(q)), m.quantile(p.max(q)));
        prop_assert!(m.dual_hl_psi(lo).unwrap() <= m.dual_hl_psi(hi).unwrap() + 1e-12);
    }

    #[test]
    fn exponential_closed_forms(rate in 0.1..10.0f64, log_z in -6.0..3.0f64) {
        let m = MeasureOnHalfLine::exponential(rate).unwrap();
        let z = 10f64.powf(log_z);
        let x = (2.0 * z / rate).sqrt();
        prop_assert!((m.dual_hl_phi(z).unwrap() - x).abs() <= 1e-8 * (1.0 + x));
        prop_assert!((m.dual_hl_psi(x).unwrap() - z).abs() <= 1e-8 * (1.0 + z));
    }

    #[test]
    fn uniform_bar_closed_form(b in 0.1..10.0f64, f in 0.0..0.999f64) {
        let m = MeasureOnHalfLine::uniform(b).unwrap();
        let x = f * b;
        prop_assert!((m.dual_hl_psi_bar(x).unwrap() - (b - x)).abs() <= 1e-8 * b);
    }

    #[test]
    fn hitting_probability_grows_to_its_limit(coef in 0.2..3.0f64, rate in 1.0..3.0f64) {
        let phi = BarrierFunction::new(FnSpec::Exp { coef, rate, offset: 0.0 }.compile(None).unwrap()).unwrap();
        let limit = lawlib::hitting_prob(&phi).unwrap();
        let mut last = 0.0;
        for u in [1.0, 2.0, 4.0, 8.0, 16.0] {
            let p = lawlib::hitting_prob_up_to(&phi, u).unwrap();
            prop_assert!(p >= last - 1e-12 && p <= limit + 1e-10);
            last = p;
        }
        prop_assert!((limit - last).abs() < 1e-5);
    }

    #[test]
    fn constant_conditional_mean_gives_exponential(a in 0.1..5.0f64, x in 0.0..10.0f64) {
        let lam = ConditionalMean::new(RealFn::constant(a)).unwrap();
        let s = lawlib::law_a_infty_survival(&lam, x).unwrap();
        prop_assert!((s - (-x / a).exp()).abs() < 1e-9);
    }

    #[test]
    fn spq_change_of_variables(p in 0.3..3.0f64, dq in 0.3..3.0f64, a in 0.1..5.0f64) {
        let q = p + dq;
        let direct = lawlib::law_spq_survival(p, q, a).unwrap();
        let closed = lawlib::law_spq_survival_closed(p, q, a).unwrap();
        prop_assert!((direct - closed).abs() < 1e-8, "{} vs {}", direct, closed);
    }

    #[test]
    fn scale_function_inverts(slope in -1.0..1.0f64, sigma in 0.5..2.0f64, y in -5.0..5.0f64) {
        let sf = ScaleFunction::new(
            FnSpec::Affine { slope, intercept: 0.1 }.compile(None).unwrap(),
            RealFn::constant(sigma),
        )
        .unwrap();
        // Where s' underflows, s is flat to double precision and has no usable inverse.
        prop_assume!(sf.s_prime(y).unwrap() > 1e-6);
        let s = lawlib::scale_eval(&sf, y).unwrap();
        prop_assert!((lawlib::scale_inverse(&sf, s).unwrap() - y).abs() < 1e-8);
    }

    #[test]
    fn simulated_paths_satisfy_invariants_and_are_deterministic(m in model(), seed in any::<u64>(), index in 0..1000u64) {
        let p = path(&m, seed, index);
        prop_assert!(p.check_invariants().is_ok(), "{:?}", p.check_invariants());
        prop_assert_eq!(p, path(&m, seed, index));
    }

    #[test]
    fn reflected_bm_local_time_dominates_grid_supremum(seed in any::<u64>()) {
        let p = path(&Model::reflected_bm(1e-2, Window::Horizon(2.0)).unwrap(), seed, 0);
        let n = p.n();
        let mut sup = 0.0f64;
        for k in 0..p.len() {
            sup = sup.max(-n[k]);
            prop_assert!(p.a[k] >= sup - 1e-12);
            prop_assert!(k == 0 || p.a[k] >= p.a[k - 1]);
        }
    }

    #[test]
    fn stopping_is_minimal(seed in any::<u64>(), level in 0.1..1.5f64, coef in 0.3..2.0f64) {
        let p = path(&Model::reflected_bm(1e-2, Window::Horizon(3.0)).unwrap(), seed, 0);
        let rules = [
            StoppingRule::HittingLevel(level),
            StoppingRule::FunctionBarrier(FnSpec::Exp { coef, rate: 1.0, offset: 0.0 }.compile(None).unwrap()),
            StoppingRule::AnyOf(vec![StoppingRule::HittingLevel(level), StoppingRule::InverseA(coef)]),
        ];
        for rule in &rules {
            let rec = first_crossing(&p, rule).unwrap();
            let end = if rec.stopped { rec.index as usize } else { p.len() };
            for k in 0..end {
                prop_assert!(!rule.holds(&p.state(k)).unwrap());
            }
            if rec.stopped {
                prop_assert!(rule.holds(&p.state(end)).unwrap());
            }
        }
    }

    #[test]
    fn inverse_local_time_is_monotone(seed in any::<u64>(), u in 0.05..1.0f64, du in 0.0..1.0f64) {
        let p = path(&Model::reflected_bm(1e-2, Window::Horizon(4.0)).unwrap(), seed, 0);
        let a = first_crossing(&p, &StoppingRule::InverseA(u)).unwrap();
        let b = first_crossing(&p, &StoppingRule::InverseA(u + du)).unwrap();
        prop_assert!(a.index <= b.index);
    }

    #[test]
    fn ks_is_invariant_under_increasing_maps(seed in any::<u64>(), power in 0.3..3.0f64) {
        let mut rng = RngStream::new(seed, 0).rng();
        let v: Vec<f64> = (0..500).map(|_| -(1.0 - rand::Rng::random::<f64>(&mut rng)).ln()).collect();
        let s1 = EmpiricalSample::new(v.clone(), 0).unwrap();
        let s2 = EmpiricalSample::new(v.iter().map(|x| x.powf(power)).collect(), 0).unwrap();
        let l1 = ClosedForm(|x: f64| if x <= 0.0 { 1.0 } else { (-x).exp() });
        let l2 = ClosedForm(move |y: f64| if y <= 0.0 { 1.0 } else { (-y.powf(1.0 / power)).exp() });
        let k1 = ks_against(&s1, &l1, 0.01, 0.0).unwrap().ks;
        let k2 = ks_against(&s2, &l2, 0.01, 0.0).unwrap().ks;
        prop_assert!((k1 - k2).abs() < 1e-6, "{} vs {}", k1, k2);
    }

    #[test]
    fn comparisons_ignore_order_and_merge(mut v in prop::collection::vec(0.0..5.0f64, 2..200), split in 0usize..200) {
        let law = ClosedForm(|x: f64| if x <= 0.0 { 1.0 } else { (-x).exp() });
        let whole = EmpiricalSample::new(v.clone(), 0).unwrap();
        let cut = split.min(v.len() - 1).max(1);
        let right = v.split_off(cut);
        let merged = EmpiricalSample::new(right, 0).unwrap().merge(EmpiricalSample::new(v, 0).unwrap());
        prop_assert_eq!(whole.values(), merged.values());
        let (a, b) = (ks_against(&whole, &law, 0.01, 0.0).unwrap(), ks_against(&merged, &law, 0.01, 0.0).unwrap());
        prop_assert_eq!(a.ks.to_bits(), b.ks.to_bits());
        prop_assert!(a.empirical.windows(2).all(|w| w[1] <= w[0]));
    }
}
