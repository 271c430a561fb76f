use proptest::prelude::*;

use surface17::circuit::NoiseSite;
use surface17::code_model::{build_surface17, CodeLayout, StabilizerSet, Variant};
use surface17::decoders::{lut_fidelity, marginalize_to_final_round, ts_fidelity};
use surface17::experiment::{
    evaluate_counts, simulate_counts, single_qubit_fidelity, DecoderKind, ExperimentConfig,
};
use surface17::noise::{
    depolarizing_lindblad_ops, depolarizing_probs, lindblad_rates, solve_lindblad_channel,
    NoiseParams, CPTP_TOLERANCE,
};
use surface17::pauli::{Basis, PauliString};
use surface17::trajectory::{ChannelMode, TrajectoryConfig};

const VARIANTS: [Variant; 2] = [Variant::Fig1a, Variant::Fig1b];
const SETS: [StabilizerSet; 3] = [
    StabilizerSet::All8,
    StabilizerSet::Relevant4,
    StabilizerSet::Bulk4,
];

fn layouts() -> Vec<CodeLayout> {
    VARIANTS
        .iter()
        .flat_map(|&v| SETS.iter().map(move |&s| build_surface17(v, s)))
        .collect()
}

fn params() -> impl Strategy<Value = NoiseParams> {
    (
        0.0..0.05f64,
        0.0..0.05f64,
        0.0..0.05f64,
        0.5..1e4f64,
        0.0..0.01f64,
    )
        .prop_map(|(p, m, g, t1, t)| NoiseParams::new(p, m, g, t1, t))
}

#[test]
fn every_layout_validates() {
    for layout in layouts() {
        let report = layout.validate();
        assert!(report.passed(), "{:?}", report.failures);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn stabilizer_products_are_invisible(mask in 0u8..=255, variant in 0usize..2) {
        let layout = build_surface17(VARIANTS[variant], StabilizerSet::All8);
        let mut product = PauliString::default();
        for s in layout.stabilizers().iter().filter(|s| mask >> s.id & 1 == 1) {
            product = product.mul(&s.pauli_string());
        }
        for basis in Basis::BOTH {
            let action = layout.pauli_action(&product, basis);
            prop_assert_eq!(action.syndrome, 0);
            prop_assert!(!action.logical_flip);
        }
    }

    #[test]
    fn logicals_commute_with_stabilizers_and_anticommute_with_each_other(variant in 0usize..2) {
        let layout = build_surface17(VARIANTS[variant], StabilizerSet::All8);
        let lx = layout.measured_logical(Basis::X).pauli_string();
        let lz = layout.measured_logical(Basis::Z).pauli_string();
        prop_assert!(lx.anticommutes(&lz));
        for s in layout.stabilizers() {
            prop_assert!(!s.pauli_string().anticommutes(&lx));
            prop_assert!(!s.pauli_string().anticommutes(&lz));
        }
    }

    #[test]
    fn every_channel_is_cptp(params in params()) {
        for mode in [ChannelMode::Pauli, ChannelMode::General] {
            let config = TrajectoryConfig::for_mode(&params, mode).unwrap();
            for site in [NoiseSite::Prep, NoiseSite::Gate, NoiseSite::Idle, NoiseSite::Meas] {
                let ch = config.channel(site);
                prop_assert!(ch.check_cptp(CPTP_TOLERANCE).is_ok(), "{mode} {site:?}");
            }
        }
    }

    #[test]
    fn depolarizing_rate_twirls_to_g_over_three(g in 0.0..0.74f64) {
        let rates = lindblad_rates(&NoiseParams::new(0.0, 0.0, g, 1e4, 1e-3)).unwrap();
        let ch = solve_lindblad_channel(&depolarizing_lindblad_ops(rates.omega), rates.duration)
            .unwrap();
        let twirl = ch.pauli_twirl().unwrap();
        prop_assert!(twirl.max_abs_diff(&depolarizing_probs(g).unwrap()) < 1e-8, "{twirl:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn decoder_orderings_hold_on_shared_counts(
        params in params(),
        variant in 0usize..2,
        seed in any::<u64>(),
    ) {
        let layout = build_surface17(VARIANTS[variant], StabilizerSet::All8);
        for basis in Basis::BOTH {
            let counts =
                simulate_counts(&layout, &params, basis, ChannelMode::Pauli, 4000, seed, None)
                    .unwrap();
            let lut = lut_fidelity(&counts).unwrap();
            // The optimal table beats any fixed rule on the data it was built from.
            prop_assert!(lut >= ts_fidelity(&counts, &layout).unwrap());
            // Forgetting the ancilla round cannot help.
            prop_assert!(lut >= lut_fidelity(&marginalize_to_final_round(&counts)).unwrap());
        }
    }

    #[test]
    fn worker_count_never_changes_results(seed in any::<u64>(), workers in 2usize..5) {
        let layout = build_surface17(Variant::Fig1b, StabilizerSet::All8);
        let params = NoiseParams::new(0.01, 0.01, 0.01, 1e4, 1e-3);
        for (mode, n) in [(ChannelMode::Pauli, 20_000), (ChannelMode::General, 300)] {
            let one = simulate_counts(&layout, &params, Basis::X, mode, n, seed, Some(1)).unwrap();
            let many =
                simulate_counts(&layout, &params, Basis::X, mode, n, seed, Some(workers)).unwrap();
            prop_assert_eq!(one, many);
        }
    }
}

#[test]
fn zero_noise_gives_perfect_fidelity() {
    let clean = NoiseParams::noiseless();
    for layout in layouts() {
        for mode in [ChannelMode::Pauli, ChannelMode::General] {
            let n = if mode == ChannelMode::Pauli {
                2000
            } else {
                200
            };
            let z = simulate_counts(&layout, &clean, Basis::Z, mode, n, 1, None).unwrap();
            let x = simulate_counts(&layout, &clean, Basis::X, mode, n, 1, None).unwrap();
            for decoder in [DecoderKind::Lut, DecoderKind::TomitaSvore] {
                let config = ExperimentConfig {
                    channel_mode: mode,
                    decoder,
                    ..ExperimentConfig::default()
                };
                let r = evaluate_counts(&layout, [&z, &x], &config).unwrap();
                assert_eq!((r.f_code1, r.f_code2, r.f_single), (1.0, 1.0, 1.0));
                for b in Basis::BOTH {
                    assert_eq!(single_qubit_fidelity(&clean, b, mode).unwrap(), 1.0);
                }
            }
        }
    }
}
