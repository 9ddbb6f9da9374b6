use proptest::prelude::*;
use varfit::analytics::MeanFunction;
use varfit::estimators::{pair_threshold_for_lags, BandwidthRule};
use varfit::simulation::{replicate_seed, EstimatorKind, SimReport};
use varfit::{
    build_ms_matrix, build_tw_matrix, exact_mse, general_domain, muller_stadtmuller, quad_form,
    tong_wang, LsMethod, MsCoefficients, NoiseMoments, Sample1D,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Responses of length `n` and a lag count in `2..=n/2`.
fn design() -> impl Strategy<Value = (Vec<f64>, usize)> {
    (6usize..=120).prop_flat_map(|n| (prop::collection::vec(-50.0f64..50.0, n), 2usize..=n / 2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn tw_equals_its_quadratic_form((y, m) in design()) {
        let s = Sample1D::equally_spaced(y.clone()).unwrap();
        let direct = tong_wang(&s, m, LsMethod::Wls).unwrap().raw_value;
        let form = quad_form(&build_tw_matrix(y.len(), m).unwrap(), &y).unwrap();
        prop_assert!(close(direct, form, 1e-10), "{direct} vs {form}");
    }

    #[test]
    fn ms_equals_its_quadratic_form((y, m) in design()) {
        let l = m.max(3);
        prop_assume!(2 * l <= y.len());
        let s = Sample1D::equally_spaced(y.clone()).unwrap();
        let direct = muller_stadtmuller(&s, l).unwrap().raw_value;
        let form = quad_form(&build_ms_matrix(y.len(), l).unwrap(), &y).unwrap();
        prop_assert!(close(direct, form, 1e-10), "{direct} vs {form}");
    }

    #[test]
    fn shift_invariance_and_scaling((y, m) in design(), shift in -1e3f64..1e3, c in 0.01f64..100.0) {
        let base = Sample1D::equally_spaced(y.clone()).unwrap();
        let shifted = Sample1D::equally_spaced(y.iter().map(|v| v + shift).collect()).unwrap();
        let scaled = Sample1D::equally_spaced(y.iter().map(|v| c * v).collect()).unwrap();
        let v = tong_wang(&base, m, LsMethod::Wls).unwrap().raw_value;
        let vs = tong_wang(&shifted, m, LsMethod::Wls).unwrap().raw_value;
        let vc = tong_wang(&scaled, m, LsMethod::Wls).unwrap().raw_value;
        prop_assert!(close(v, vs, 1e-12), "{v} vs {vs}");
        prop_assert!(close(c * c * v, vc, 1e-12), "{} vs {vc}", c * c * v);
    }

    #[test]
    fn gls_coincides_with_ols((y, m) in design(), g4 in 1.05f64..20.0, s2 in 0.01f64..10.0) {
        let s = Sample1D::equally_spaced(y).unwrap();
        let noise = NoiseMoments::new(s2, 0.0, g4).unwrap();
        let ols = tong_wang(&s, m, LsMethod::Ols).unwrap().raw_value;
        let gls = tong_wang(&s, m, LsMethod::Gls(noise)).unwrap().raw_value;
        prop_assert!(close(ols, gls, 1e-12), "{ols} vs {gls}");
    }

    #[test]
    fn general_domain_matches_tw_on_a_grid(y in prop::collection::vec(-10.0f64..10.0, 4..60), m in 2usize..10) {
        let n = y.len();
        let m = m.min(n - 1);
        let s = Sample1D::equally_spaced(y.clone()).unwrap();
        let points: Vec<Vec<f64>> = s.x().iter().map(|&x| vec![x]).collect();
        let t = pair_threshold_for_lags(&points, m).unwrap();
        let g = general_domain(&points, &y, t).unwrap().raw_value;
        let tw = tong_wang(&s, m, LsMethod::Wls).unwrap().raw_value;
        prop_assert!(close(g, tw, 1e-10), "{g} vs {tw}");
    }

    #[test]
    fn ms_weights_sum_to_one(l in 3usize..5000) {
        let total: f64 = MsCoefficients::new(l).unwrap().weights().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn exact_mse_is_even_in_the_mean((g, m) in design(), s2 in 0.01f64..10.0) {
        let n = g.len();
        let noise = NoiseMoments::normal(s2).unwrap();
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        for a in [build_tw_matrix(n, m).unwrap(), build_ms_matrix(n, m.max(3).min(n / 2)).unwrap()] {
            let plus = exact_mse(&a, &g, &noise).unwrap();
            let minus = exact_mse(&a, &neg, &noise).unwrap();
            prop_assert!(close(plus.mse, minus.mse, 1e-12));
            prop_assert!(close(plus.mse, plus.bias * plus.bias + plus.variance, 1e-12));
        }
    }

    #[test]
    fn replicate_seeds_do_not_collide(master in any::<u64>(), r in 0u64..1_000_000, gap in 1u64..1_000_000) {
        prop_assert_ne!(replicate_seed(master, r), replicate_seed(master, r + gap));
    }

    #[test]
    fn report_json_round_trip(
        n in 3usize..5000,
        s2 in 1e-6f64..1e6,
        rel_mse in 0.0f64..1e3,
        neg in 0usize..1000,
        raw in prop::option::of(prop::collection::vec(-1e6f64..1e6, 0..20)),
    ) {
        let report = SimReport {
            n,
            sigma2: s2,
            g: MeanFunction::G3.name().to_string(),
            estimator: EstimatorKind::Ms,
            bandwidth_rule: BandwidthRule::Fixed(7),
            bandwidth: 7,
            reps: 1000,
            master_seed: 42,
            rel_mse,
            mse: rel_mse * 2.0 * s2 * s2 / n as f64,
            bias: -s2 / 3.0,
            variance: s2 / 7.0,
            negative_count: neg,
            ci_coverage: Some(0.951),
            raw_estimates: raw,
        };
        let text = serde_json::to_string(&report).unwrap();
        let back: SimReport = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, report);
    }
}
