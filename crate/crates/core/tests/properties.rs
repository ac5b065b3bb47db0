use covert_core::budget::{converse_log_ratio, gamma_achievable};
use covert_core::colored::{gaussian_kl, whiten};
use covert_core::decomp::{atom_mass, decompose};
use covert_core::ggdist::{kl_from_log_ratio, kl_gg};
use covert_core::nalgebra::{DMatrix, DVector};
use covert_core::simkit::run_experiment;
use covert_core::stats::Proportion;
use covert_core::{BudgetSpec, CodingExperiment, ColoredNoiseModel, Decoder, GGParams};
use proptest::prelude::*;

fn shape() -> impl Strategy<Value = f64> {
    prop_oneof![0.05f64..=10.0, Just(1.0), Just(2.0)]
}

proptest! {
    #[test]
    fn divergence_is_nonnegative_and_grows_with_scale(p in shape(), alpha in 0.1f64..10.0, u in 0.0f64..2.0, du in 1e-6f64..1.0) {
        let noise = GGParams::new(p, alpha).unwrap();
        let lo = kl_gg(alpha * u.exp(), &noise).unwrap();
        let hi = kl_gg(alpha * (u + du).exp(), &noise).unwrap();
        prop_assert!(lo >= 0.0);
        prop_assert!(hi >= lo);
        prop_assert_eq!(kl_gg(alpha, &noise).unwrap(), 0.0);
    }

    #[test]
    fn divergence_is_convex_in_log_scale(p in shape(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mid = kl_from_log_ratio(p, 0.5 * (a + b));
        let chord = 0.5 * (kl_from_log_ratio(p, a) + kl_from_log_ratio(p, b));
        prop_assert!(mid <= chord * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn budget_is_respected(p in shape(), delta in 1e-4f64..10.0, n in 1u64..1_000_000_000) {
        let spec = BudgetSpec::new(GGParams::new(p, 1.0).unwrap(), delta, n).unwrap();
        let r = gamma_achievable(&spec);
        prop_assert!(r.total_kl <= delta * (1.0 + 1e-12), "n D = {} > {}", r.total_kl, delta);
        prop_assert!(r.gamma_n >= 1.0);
        prop_assert!(converse_log_ratio(&spec) >= r.log_ratio);
    }

    #[test]
    fn closed_form_decompositions_conserve_mass_and_power(beta in 1.0f64..5.0, alpha in 0.2f64..5.0, laplace in any::<bool>()) {
        let p = if laplace { 1.0 } else { 2.0 };
        let noise = GGParams::new(p, alpha).unwrap();
        let spec = decompose(&noise, beta).unwrap();
        let atom = spec.atom_at_zero;
        prop_assert!((0.0..=1.0).contains(&atom));
        prop_assert_eq!(atom, if beta == 1.0 { 1.0 } else { atom_mass(p, beta) });
        // E X^2 + E Z^2 = E Y^2 for independent zero-mean X and Z
        let input_power = spec.closed_form_continuous().map_or(0.0, |law| (1.0 - atom) * law.second_moment());
        let total = input_power + noise.second_moment();
        let target = spec.output_law().second_moment();
        prop_assert!((total - target).abs() <= 1e-12 * target);
    }

    #[test]
    fn wilson_interval_stays_in_unit_range(trials in 1u64..1_000_000, frac in 0.0f64..=1.0) {
        let successes = ((trials as f64) * frac).floor() as u64;
        let prop = Proportion::new(successes, trials);
        prop_assert!(0.0 <= prop.ci_lo && prop.ci_lo <= prop.estimate);
        prop_assert!(prop.estimate <= prop.ci_hi && prop.ci_hi <= 1.0);
    }

    #[test]
    fn whitening_round_trips(n in 1usize..24, rho in -0.95f64..0.95, seed in any::<u64>()) {
        let t = whiten(&ColoredNoiseModel::ar1(n, rho).unwrap()).unwrap();
        let y: Vec<f64> = (0..n).map(|i| ((seed.wrapping_add(i as u64) % 1000) as f64 - 500.0) / 100.0).collect();
        let back = t.inverse_decoder(&t.transport_decoder(&y).unwrap()).unwrap();
        for (a, b) in y.iter().zip(&back) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
        let x = t.inverse_encoder(&t.transport_encoder(&y).unwrap()).unwrap();
        for (a, b) in y.iter().zip(&x) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn gaussian_divergence_is_nonnegative(n in 1usize..8, rho in -0.9f64..0.9, scale in 0.5f64..2.0, shift in -1.0f64..1.0) {
        let s0 = ColoredNoiseModel::ar1(n, rho).unwrap().covariance();
        let s1 = DMatrix::<f64>::identity(n, n) * scale;
        let mu0 = DVector::<f64>::zeros(n);
        let mu1 = DVector::<f64>::from_element(n, shift);
        prop_assert!(gaussian_kl(&mu1, &s1, &mu0, &s0).unwrap() >= -1e-12);
        prop_assert!(gaussian_kl(&mu0, &s0, &mu0, &s0).unwrap().abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn experiments_are_reproducible(seed in any::<u64>(), m in 1u64..64, ml in any::<bool>()) {
        let budget = BudgetSpec::new(GGParams::new(1.0, 1.0).unwrap(), 0.5, 64).unwrap();
        let decoder = if ml { Decoder::MaximumLikelihood } else { Decoder::Threshold };
        let exp = CodingExperiment::new(budget, m, 40, seed).unwrap().with_decoder(decoder);
        let a = run_experiment(&exp).unwrap();
        let b = run_experiment(&exp).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(a.error_rate.estimate <= 1.0);
    }
}
