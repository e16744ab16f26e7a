use proptest::prelude::*;

use polelab::profile::cone_tanh_source;
use polelab::theorem::extrapolate_limit;
use polelab::{builtin_profile, parse_profile, WarpedManifold};

fn cone(alpha: f64) -> WarpedManifold {
    WarpedManifold::new(builtin_profile("cone_tanh", &[alpha]).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn slope_and_jacobian_bounds(alpha in 0.0f64..=1.0, log_t in -2.0f64..3.0) {
        let t = 10f64.powf(log_t);
        let (j, j1, _) = cone(alpha).jacobian_data(t).unwrap();
        let slope = j1 / j;
        prop_assert!(t * slope >= -1e-9);
        prop_assert!(t * (2.0 / t - slope) >= -1e-9);
        prop_assert!(j <= t * t * (1.0 + 1e-12));
    }

    #[test]
    fn ricci_nonnegative_and_codazzi_exact(alpha in 0.0f64..=1.0, log_t in -2.0f64..3.0) {
        let t = 10f64.powf(log_t);
        let m = cone(alpha);
        let q = m.point_curvatures(t).unwrap();
        prop_assert!(q.ric_radial >= -1e-10);
        prop_assert!(q.ric_tangential >= -1e-10);
        let res = m.gauss_codazzi_residual(t).unwrap();
        prop_assert!(res.abs() <= 1e-10 * (1.0 + q.scalar.abs()));
    }

    #[test]
    fn jacobian_ratio_monotone(alpha in 0.0f64..=1.0, log_t in -1.0f64..3.0, k in 1.0f64..10.0) {
        let m = cone(alpha);
        let t = 10f64.powf(log_t);
        let s = t * k;
        prop_assume!(s <= m.t_max());
        let (jt, _, _) = m.jacobian_data(t).unwrap();
        let (js, _, _) = m.jacobian_data(s).unwrap();
        prop_assert!(js / jt <= k * k * (1.0 + 1e-9));
    }

    #[test]
    fn unparse_round_trips(alpha in 0.0f64..=1.0) {
        let e = parse_profile(&cone_tanh_source(alpha)).unwrap();
        let again = parse_profile(&e.unparse()).unwrap();
        prop_assert_eq!(&again, &e);
    }

    #[test]
    fn rescaling_is_homothety(alpha in 0.0f64..=1.0, c in 0.1f64..10.0, t in 0.01f64..50.0) {
        let e = parse_profile(&cone_tanh_source(alpha)).unwrap();
        let base = e.eval_jet2(t).unwrap();
        let scaled = e.rescaled(c).eval_jet2(c * t).unwrap();
        prop_assert!((scaled.v - c * base.v).abs() <= 1e-12 * (1.0 + c * base.v.abs()));
        prop_assert!((scaled.d1 - base.d1).abs() <= 1e-12);
        prop_assert!((scaled.d2 * c - base.d2).abs() <= 1e-12 * (1.0 + base.d2.abs()));
    }

    #[test]
    fn extrapolation_is_exact_on_model(l in -100.0f64..100.0, c in -50.0f64..50.0, n in 4usize..12) {
        let samples: Vec<(f64, f64)> =
            (0..n).map(|k| 10.0 * 2f64.powi(k as i32)).map(|r| (r, l + c / r)).collect();
        let fit = extrapolate_limit(&samples).unwrap();
        prop_assert!((fit.limit - l).abs() <= 1e-10 * (1.0 + l.abs()));
        prop_assert!(fit.error_estimate <= 1e-9 * (1.0 + l.abs() + c.abs()));
    }
}
