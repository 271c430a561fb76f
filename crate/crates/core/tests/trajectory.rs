use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use surface17::code_model::{build_surface17, QubitId, StabilizerSet, Variant, NUM_DATA};
use surface17::frame::{sample_many, JointCounts, RunRecord};
use surface17::noise::{
    idle_lindblad_ops, sigma_minus, solve_lindblad_channel, LindbladRates, NoiseParams, PauliProbs,
    QuantumChannel,
};
use surface17::pauli::Basis;
use surface17::trajectory::{
    apply_kraus_stochastic, dense_channel_oracle, estimate_joint, ChannelMode, DenseOp,
    StateVector, TrajectoryConfig, TrajectorySimulator,
};

type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Two-sample chi-square p-value over 512 cells, pooling sparse cells.
fn two_sample_p_value(a: &JointCounts, b: &JointCounts) -> f64 {
    let (na, nb) = (a.total() as f64, b.total() as f64);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pooled = (0.0, 0.0);
    for s in 0..=255u8 {
        for f in 0..2 {
            let (x, y) = (a.get(s)[f] as f64, b.get(s)[f] as f64);
            if x + y < 10.0 {
                pooled.0 += x;
                pooled.1 += y;
            } else {
                cells.push((x, y));
            }
        }
    }
    if pooled.0 + pooled.1 > 0.0 {
        cells.push(pooled);
    }
    let stat: f64 = cells
        .iter()
        .map(|&(x, y)| {
            let e = x + y;
            let (ea, eb) = (e * na / (na + nb), e * nb / (na + nb));
            (x - ea).powi(2) / ea + (y - eb).powi(2) / eb
        })
        .sum();
    let dof = (cells.len() - 1).max(1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

#[test]
fn dephasing_decays_coherence_at_the_closed_form_rate() {
    let (phi, tau) = (0.4, 0.9);
    let rates = LindbladRates {
        gamma: 0.0,
        phi,
        omega: 0.0,
        duration: tau,
    };
    let ch = solve_lindblad_channel(&idle_lindblad_ops(&rates), tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 20_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let mut s = StateVector::product(1, 1);
        apply_kraus_stochastic(&mut s, &ch, &[0], &mut rng).unwrap();
        sum += 2.0 * s.reduced_density(&[0])[(0, 1)].re;
    }
    let mean = sum / n as f64;
    let expected = (-2.0 * phi * tau).exp();
    // Each trajectory gives <X> = +-1.
    let sigma = ((1.0 - expected * expected) / n as f64).sqrt();
    assert!(
        (mean - expected).abs() < 4.0 * sigma,
        "{mean} vs {expected}"
    );
}

#[test]
fn amplitude_damping_uses_state_dependent_branches() {
    let (gamma, tau): (f64, f64) = (0.7, 1.0);
    let ch = solve_lindblad_channel(&[sigma_minus() * c(gamma.sqrt())], tau).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 20_000;
    let mut excited = 0;
    for _ in 0..n {
        let mut s = StateVector::zero(1);
        s.apply_pauli(0, surface17::pauli::Pauli::X);
        apply_kraus_stochastic(&mut s, &ch, &[0], &mut rng).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        if s.measure_qubit(0, &mut rng).unwrap() {
            excited += 1;
        }
    }
    let p = (-gamma * tau).exp();
    let freq = excited as f64 / n as f64;
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    assert!((freq - p).abs() < 4.0 * sigma, "{freq} vs {p}");
}

#[test]
fn trajectory_average_matches_dense_oracle() {
    // |+0>, idle noise on both, CNOT, depolarizing-like Pauli noise on the target.
    let idle = solve_lindblad_channel(
        &idle_lindblad_ops(&LindbladRates {
            gamma: 0.05,
            phi: 0.1,
            omega: 0.0,
            duration: 1.0,
        }),
        1.0,
    )
    .unwrap();
    let depol = QuantumChannel::pauli(PauliProbs::new(0.05, 0.03, 0.08).unwrap());
    let damp = QuantumChannel::new(
        1,
        vec![
            CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.8f64.sqrt())]),
            CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.2f64.sqrt()), c(0.0), c(0.0)]),
        ],
    )
    .unwrap();
    let mut cnot = CMatrix::zeros(4, 4);
    for (r, col) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
        cnot[(r, col)] = c(1.0);
    }
    let ops = vec![
        DenseOp::Channel {
            channel: idle.clone(),
            targets: vec![0],
        },
        DenseOp::Channel {
            channel: idle.clone(),
            targets: vec![1],
        },
        DenseOp::Unitary {
            matrix: cnot.clone(),
            targets: vec![0, 1],
        },
        DenseOp::Channel {
            channel: depol.clone(),
            targets: vec![1],
        },
        DenseOp::Channel {
            channel: damp.clone(),
            targets: vec![0],
        },
    ];
    let start = StateVector::product(2, 0b01);
    let psi = DMatrix::from_column_slice(4, 1, &start.to_dense());
    let exact = dense_channel_oracle(2, &ops, &(&psi * psi.adjoint())).unwrap();
    assert!((exact.trace().re - 1.0).abs() < 1e-12);

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let n = 40_000;
    let mut avg = CMatrix::zeros(4, 4);
    for _ in 0..n {
        let mut s = start.clone();
        apply_kraus_stochastic(&mut s, &idle, &[0], &mut rng).unwrap();
        apply_kraus_stochastic(&mut s, &idle, &[1], &mut rng).unwrap();
        s.apply_cnot(0, 1);
        apply_kraus_stochastic(&mut s, &depol, &[1], &mut rng).unwrap();
        apply_kraus_stochastic(&mut s, &damp, &[0], &mut rng).unwrap();
        avg += s.reduced_density(&[0, 1]);
    }
    avg /= c(n as f64);
    // Entries are bounded by 1, so the standard error is at most 1/sqrt(n).
    let worst = (&avg - &exact).camax();
    assert!(worst < 4.0 / (n as f64).sqrt(), "max deviation {worst}");
}

#[test]
fn dense_oracle_agrees_with_single_channel_action() {
    let ch = QuantumChannel::new(
        1,
        vec![
            CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(0.6f64.sqrt())]),
            CMatrix::from_row_slice(2, 2, &[c(0.0), c(0.4f64.sqrt()), c(0.0), c(0.0)]),
        ],
    )
    .unwrap();
    let rho = CMatrix::from_row_slice(
        2,
        2,
        &[
            c(0.3),
            Complex64::new(0.1, 0.2),
            Complex64::new(0.1, -0.2),
            c(0.7),
        ],
    );
    let via_oracle = dense_channel_oracle(
        1,
        &[DenseOp::Channel {
            channel: ch.clone(),
            targets: vec![0],
        }],
        &rho,
    )
    .unwrap();
    assert!((via_oracle - ch.apply(&rho)).camax() < 1e-15);
}

#[test]
fn noiseless_run_reads_quiet_syndrome_and_random_other_ancillas() {
    let layout = build_surface17(Variant::Fig1a, StabilizerSet::All8);
    let cfg = TrajectoryConfig::pauli(&NoiseParams::noiseless()).unwrap();
    let sim = TrajectorySimulator::new(&layout, &cfg, Basis::Z).unwrap();
    let mut state = sim.new_state();
    let n = 2000;
    let mut ones = [0u32; 8];
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(i);
        let raw = sim.run_raw(&mut state, &mut rng).unwrap();
        // White ancillas and the Z-type parities of the data are deterministic.
        assert_eq!(sim.circuit().readout().record(raw), RunRecord::default());
        for k in 0..8 {
            ones[k] += raw >> QubitId::ancilla(k).index() & 1;
        }
    }
    for k in 0..4 {
        assert_eq!(ones[k], 0, "white ancilla {k}");
    }
    let sigma = (0.25 / n as f64).sqrt();
    for k in 4..8 {
        let freq = ones[k] as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * sigma, "blue ancilla {k}: {freq}");
    }
}

#[test]
fn readout_order_does_not_matter() {
    let layout = build_surface17(Variant::Fig1b, StabilizerSet::All8);
    let params = NoiseParams::new(0.05, 0.05, 0.03, 1e4, 1e-2);
    let cfg = TrajectoryConfig::general(&params).unwrap();
    let sim = TrajectorySimulator::new(&layout, &cfg, Basis::X).unwrap();
    let ancillas_first: Vec<usize> = (NUM_DATA..17).chain(0..NUM_DATA).collect();
    let data_first: Vec<usize> = (0..17).collect();
    let n = 3000;
    let mut state = sim.new_state();
    let mut hist = |order: &[usize], seed: u64| {
        let mut counts = JointCounts::new(Basis::X, params, seed);
        for i in 0..n {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i << 20);
            let raw = sim.run_sequential(&mut state, order, &mut rng).unwrap();
            counts.add(sim.circuit().readout().record(raw));
        }
        counts
    };
    let a = hist(&ancillas_first, 1);
    let b = hist(&data_first, 2);
    let p = two_sample_p_value(&a, &b);
    assert!(p > 1e-3, "p = {p}");
}

#[test]
fn pauli_trajectories_match_the_frame_simulator() {
    let params = NoiseParams::new(0.02, 0.02, 0.01, 1e4, 1e-3);
    for variant in [Variant::Fig1a, Variant::Fig1b] {
        let layout = build_surface17(variant, StabilizerSet::All8);
        for basis in Basis::BOTH {
            let frame = sample_many(&layout, &params, basis, 100_000, 21).unwrap();
            let traj =
                estimate_joint(&layout, &params, ChannelMode::Pauli, basis, 100_000, 22).unwrap();
            let p = two_sample_p_value(&frame, &traj);
            assert!(p > 0.01, "{variant:?} {basis}: p = {p}");
        }
    }
}
