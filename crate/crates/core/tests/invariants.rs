use proptest::prelude::*;

use lsi_core::density::{make_bump_family, make_heavytail_family, make_shifted_gaussian};
use lsi_core::functionals::{lsi_deficit, pinsker_check, rel_entropy};
use lsi_core::transport::{hwi_chain, moment_sandwich_check, wasserstein_p};
use lsi_core::uncertainty::{optimizer_norm_closed_form, weighted_lp_norm, OptimizerParams, WeightSpec};

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn bumps_satisfy_the_chain(s in 0.3f64..3.0, t in 0.3f64..2.5, k in 2.0f64..30.0) {
        let f = make_bump_family(s, t, k).unwrap();
        let r = hwi_chain(&f).unwrap();
        prop_assert!(r.holds, "{r:?}");
        prop_assert!(r.lsi_deficit >= -1e-9);
        prop_assert!(r.talagrand_deficit >= -1e-9);
        prop_assert!(pinsker_check(&f).unwrap().holds);
        prop_assert!(moment_sandwich_check(&f, 2.0).unwrap().holds);
    }

    #[test]
    fn quantile_inverts_cdf(s in 0.3f64..3.0, t in 0.3f64..2.5, k in 2.0f64..30.0, u in 0.001f64..0.999) {
        let f = make_bump_family(s, t, k).unwrap();
        let x = f.quantile(u).unwrap();
        prop_assert!((f.cdf(x).unwrap() - u).abs() <= 1e-10);
    }

    #[test]
    fn tilts_are_optimal(b in -4.0f64..4.0) {
        let g = make_shifted_gaussian(b).unwrap();
        prop_assert!(lsi_deficit(&g).unwrap().abs() <= 1e-10);
        prop_assert!((rel_entropy(&g).unwrap() - b * b / 2.0).abs() <= 1e-10);
        // translation by b
        prop_assert!((wasserstein_p(&g, &lsi_core::density::PiecewiseLogDensity::standard_gaussian(), 1.5).unwrap() - b.abs()).abs() <= 1e-8);
    }

    #[test]
    fn heavytail_entropy_is_nonnegative(k in 1.0f64..40.0) {
        let f = make_heavytail_family(k).unwrap();
        prop_assert!(rel_entropy(&f).unwrap() >= -1e-12);
        prop_assert!(lsi_deficit(&f).unwrap() >= -1e-9);
    }

    #[test]
    fn gaussian_norms_match_closed_forms(a in 0.5f64..20.0, p in 1.0f64..6.0, lambda in 0.0f64..3.0) {
        let g = OptimizerParams::new(a, 0.0).unwrap();
        let w = WeightSpec::Power(lambda);
        let exact = optimizer_norm_closed_form(&g, p, w).unwrap().ln();
        let quad = weighted_lp_norm(&g, p, w).unwrap().ln();
        prop_assert!((exact - quad).abs() <= 1e-9, "{exact} vs {quad}");
    }
}
