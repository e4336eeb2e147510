use bernoulli_core::curve::{curve_from_fourier, sample_geometry, BoundaryCurve};
use bernoulli_core::flow::SymbolPreconditioner;
use bernoulli_core::moments::{harmonic_test_basis, HarmonicFunction};
use bernoulli_core::spectral;
use proptest::prelude::*;

fn small_curve() -> impl Strategy<Value = BoundaryCurve> {
    (0.2f64..0.8, prop::collection::vec(-0.02f64..0.02, 4), prop::collection::vec(-0.02f64..0.02, 4), -0.1f64..0.1, -0.1f64..0.1)
        .prop_map(|(a0, c, s, x, y)| {
            let decay = |v: Vec<f64>| v.iter().enumerate().map(|(k, x)| x / (k + 1) as f64).collect::<Vec<_>>();
            curve_from_fourier([x, y], a0, &decay(c), &decay(s)).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sampled_geometry_is_consistent(curve in small_curve()) {
        let s = sample_geometry(&curve, 64).unwrap();
        for i in 0..s.len() {
            let nu = s.normal[i];
            prop_assert!((nu[0].hypot(nu[1]) - 1.0).abs() < 1e-12);
            let inside = [s.points[i][0] + 1e-3 * nu[0], s.points[i][1] + 1e-3 * nu[1]];
            prop_assert!(curve.contains(inside));
            prop_assert!(s.metric[i] > 0.0 && s.metric[i] <= 1.0);
        }
        prop_assert!(curve.area() > 0.0);
    }

    #[test]
    fn curve_json_roundtrip(curve in small_curve()) {
        let json = serde_json::to_string(&curve).unwrap();
        let back: BoundaryCurve = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, curve);
    }

    #[test]
    fn zero_displacement_is_identity(curve in small_curve()) {
        prop_assert_eq!(curve.displaced(&[0.0; 64]).unwrap(), curve);
    }

    #[test]
    fn modes_roundtrip(a0 in -1.0f64..1.0, c in prop::collection::vec(-1.0f64..1.0, 6), s in prop::collection::vec(-1.0f64..1.0, 6)) {
        let samples = spectral::synthesize(a0, &c, &s, 32, 0);
        let (b0, bc, bs) = spectral::real_modes(&samples, 6);
        prop_assert!((a0 - b0).abs() < 1e-13);
        for k in 0..6 {
            prop_assert!((c[k] - bc[k]).abs() < 1e-13 && (s[k] - bs[k]).abs() < 1e-13);
        }
    }

    #[test]
    fn basis_vanishes_on_unit_circle(angle in 0.0f64..std::f64::consts::TAU) {
        for h in harmonic_test_basis(8) {
            prop_assert!(h.value([angle.cos(), angle.sin()]).abs() < 1e-12);
        }
    }

    #[test]
    fn multiplier_is_positive(mu in 1e-3f64..50.0, k in -500i64..500) {
        let pre = SymbolPreconditioner::new(mu, 1.0, -1.0, 16).unwrap();
        prop_assert!(pre.multiplier(k) > 0.0);
        prop_assert_eq!(pre.multiplier(k), pre.multiplier(-k));
    }
}
