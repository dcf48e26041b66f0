use std::f64::consts::PI;

use imreg::freqdomain::{
    bound_constants, high_gain_magnitude, internal_model_magnitude, transfer_gain, transfer_gain_polynomial,
    transfer_gain_rational, transfer_gain_resolvent,
};
use imreg::verify::{certify, check_hurwitz, check_sequence};
use imreg::{CoefficientSequence, OscillatorBank, RegulatorConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn canonical_sequences_satisfy_ordering(n_o in 0usize..200, eps in 0.01f64..=1.0) {
        let seq = CoefficientSequence::canonical(n_o, eps).unwrap();
        prop_assert!(check_sequence(seq.values()).is_empty());
        prop_assert!(seq.partial_sum() < 3.0 + 1.0 / eps);
    }

    #[test]
    fn swapping_two_terms_is_detected(n_o in 2usize..40, i in 1usize..39) {
        let i = i.min(n_o - 1);
        let mut v = CoefficientSequence::canonical(n_o, 0.5).unwrap().values().to_vec();
        v.swap(i, i + 1);
        prop_assert!(!check_sequence(&v).is_empty());
    }

    #[test]
    fn canonical_regulators_certify(n_o in 0usize..24, mu in 0.1f64..5.0, sigma in 0.1f64..50.0, eps in 0.1f64..=1.0) {
        let cfg = RegulatorConfig::canonical(n_o, sigma, mu, 2.0 * PI, eps).unwrap();
        let report = certify(&cfg);
        prop_assert!(report.passed(), "{}", report);
        prop_assert!(report.worst_eig_real < 0.0);
    }

    #[test]
    fn transfer_gain_forms_agree(
        n_o in 0usize..16,
        mu in 0.2f64..4.0,
        omega_hat in 0.5f64..10.0,
        x in 0.0f64..18.0,
    ) {
        let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, omega_hat, 0.5).unwrap();
        let bank = OscillatorBank::build(&cfg).unwrap();
        let w = x * omega_hat;
        let t = transfer_gain(&cfg, w);
        prop_assert!(t >= 0.0 && t.is_finite());
        let oracle = transfer_gain_resolvent(&bank, mu, w).unwrap();
        prop_assert!((t - oracle).abs() <= 1e-8 * oracle, "{t} vs {oracle}");
        let omegas = &cfg.frequencies();
        let poly = transfer_gain_polynomial(omegas, cfg.coefficients.values(), mu, w);
        prop_assert!((poly - oracle).abs() <= 1e-8 * oracle);
        if (x - x.round()).abs() > 1e-3 {
            let rat = transfer_gain_rational(omegas, cfg.coefficients.values(), mu, w);
            prop_assert!((rat - oracle).abs() <= 1e-8 * oracle);
        }
    }

    #[test]
    fn envelope_holds_off_grid(n_o in 1usize..32, mu in 0.5f64..4.0, eps in 0.25f64..=1.0, x in 0.0f64..80.0) {
        let cfg = RegulatorConfig::canonical(n_o, 2.0, mu, 2.0 * PI, eps).unwrap();
        let b = bound_constants(&cfg.coefficients, mu).unwrap();
        prop_assert!(transfer_gain(&cfg, x * cfg.omega_hat) <= b.kappa0 + b.kappa1 * x * x);
    }

    #[test]
    fn internal_model_never_amplifies_relative_to_high_gain(n_o in 0usize..12, w in 0.0f64..500.0) {
        let cfg = RegulatorConfig::canonical(n_o, 2.0, 1.0, 2.0 * PI, 0.5).unwrap();
        prop_assert!(internal_model_magnitude(&cfg, w) <= high_gain_magnitude(cfg.sigma, w) * (1.0 + 1e-12));
    }

    #[test]
    fn hurwitz_margin_shrinks_with_mu_to_zero(n_o in 1usize..10) {
        let cfg = RegulatorConfig::canonical(n_o, 2.0, 1.0, 2.0 * PI, 0.5).unwrap();
        let bank = OscillatorBank::build(&cfg).unwrap();
        let strong = check_hurwitz(&bank, 1.0).unwrap().worst_real_part;
        let weak = check_hurwitz(&bank, 1e-3).unwrap().worst_real_part;
        prop_assert!(strong < weak && weak < 0.0);
    }
}
