//! Quantum-trajectory simulation of the 17-qubit experiment with arbitrary
//! single-qubit noise channels.
//!
//! The state vector is stored in a Hadamard-rotated frame: a fixed set of
//! qubits carries a Hadamard relative to the physical state. The frame is
//! chosen so that every entangling gate becomes a plain CNOT, i.e. an
//! amplitude permutation, and every recorded qubit is prepared and measured
//! in the computational basis. Noise channels on rotated qubits are
//! conjugated by a Hadamard before use.
//!
//! Each noise location draws exactly one `u64` from the trajectory stream to
//! pick a Kraus branch, so draws line up across parameter points.

use std::collections::BTreeMap;
use std::ops::Range;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::RngCore;

use crate::circuit::{ExperimentCircuit, NoiseSite, Op};
use crate::code_model::{CodeLayout, GateKind, QubitId, NUM_QUBITS};
use crate::error::{invalid, Error, Result};
use crate::frame::{Hist, JointCounts, RunRecord};
use crate::noise::{
    depolarizing_lindblad_ops, idle_lindblad_ops, lindblad_rates, solve_lindblad_channel,
    NoiseParams, PauliNoiseModel, QuantumChannel, SuperoperatorTensor,
};
use crate::parallel::map_chunks;
use crate::pauli::{Basis, Pauli};
use crate::rng::{threshold, Domain, StreamFamily};

type CMatrix = DMatrix<Complex64>;

/// Branches lighter than this are treated as impossible.
pub const MIN_BRANCH_WEIGHT: f64 = 1e-14;

/// Allowed drift of the state norm from one.
pub const NORM_TOLERANCE: f64 = 1e-10;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Pure state of `n` qubits; bit `q` of a basis index is qubit `q`.
///
/// Only nonzero amplitudes are stored, sorted by basis index. Permutation
/// gates and Pauli errors keep the support size fixed, so stabilizer-like
/// states of many qubits stay cheap.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<(usize, Complex64)>,
}

/// Amplitudes below this magnitude squared are exact cancellations up to
/// round-off and are dropped.
const PRUNE: f64 = 1e-30;

impl StateVector {
    /// `|0...0>`.
    pub fn zero(n: usize) -> Self {
        StateVector::product(n, 0)
    }

    /// Product state with `|+>` on the qubits in `plus_mask` and `|0>`
    /// elsewhere.
    pub fn product(n: usize, plus_mask: u32) -> Self {
        assert!(n <= 30, "state of {n} qubits is too large");
        let mut s = StateVector {
            n,
            amps: Vec::new(),
        };
        s.reset_product(plus_mask);
        s
    }

    pub fn reset_product(&mut self, plus_mask: u32) {
        let plus_mask = (plus_mask as usize) & ((1usize << self.n) - 1);
        self.amps.clear();
        let amp = Complex64::new(FRAC_1_SQRT_2.powi(plus_mask.count_ones() as i32), 0.0);
        // Subsets of plus_mask in increasing order.
        let mut sub = 0usize;
        loop {
            self.amps.push((sub, amp));
            sub = sub.wrapping_sub(plus_mask) & plus_mask;
            if sub == 0 {
                break;
            }
        }
    }

    /// From a dense amplitude vector of length `2^n`.
    pub fn from_amplitudes(dense: &[Complex64]) -> Result<Self> {
        if !dense.len().is_power_of_two() {
            return Err(invalid(
                "amplitudes",
                format!("length {} is not 2^n", dense.len()),
            ));
        }
        let n = dense.len().trailing_zeros() as usize;
        let amps = dense
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        Ok(StateVector { n, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Number of nonzero amplitudes.
    pub fn support_size(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps
            .binary_search_by_key(&index, |&(i, _)| i)
            .map_or(Complex64::default(), |pos| self.amps[pos].1)
    }

    pub fn to_dense(&self) -> Vec<Complex64> {
        let mut dense = vec![Complex64::default(); 1 << self.n];
        for &(i, a) in &self.amps {
            dense[i] = a;
        }
        dense
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|(_, a)| a.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for (_, a) in &mut self.amps {
            *a *= factor;
        }
    }

    pub fn normalize(&mut self) -> Result<()> {
        let norm = self.norm_sqr();
        if norm < MIN_BRANCH_WEIGHT {
            return Err(Error::NormCollapse(MIN_BRANCH_WEIGHT));
        }
        self.scale(1.0 / norm.sqrt());
        Ok(())
    }

    fn check_qubit(&self, q: usize) {
        assert!(q < self.n, "qubit {q} out of range for {} qubits", self.n);
    }

    fn sort(&mut self) {
        self.amps.sort_unstable_by_key(|&(i, _)| i);
    }

    pub fn apply_pauli(&mut self, q: usize, p: Pauli) {
        self.check_qubit(q);
        let bit = 1usize << q;
        // Y = i X Z; the global phase is dropped.
        for (i, a) in &mut self.amps {
            if p.z_bit() && *i & bit != 0 {
                *a = -*a;
            }
            if p.x_bit() {
                *i ^= bit;
            }
        }
        if p.x_bit() {
            self.sort();
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        self.check_qubit(control);
        self.check_qubit(target);
        assert_ne!(control, target);
        let (c, t) = (1usize << control, 1usize << target);
        for (i, _) in &mut self.amps {
            if *i & c != 0 {
                *i ^= t;
            }
        }
        self.sort();
    }

    pub fn apply_h(&mut self, q: usize) {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        self.apply_matrix(&[q], &CMatrix::from_row_slice(2, 2, &[h, h, h, -h]));
    }

    /// Group amplitudes by the index with the target bits cleared; each
    /// group holds the local amplitude vector.
    fn grouped(&self, offsets: &[usize]) -> BTreeMap<usize, Vec<Complex64>> {
        let mask = offsets[offsets.len() - 1];
        let mut groups: BTreeMap<usize, Vec<Complex64>> = BTreeMap::new();
        for &(i, a) in &self.amps {
            let local = offsets.iter().position(|&o| o == i & mask).expect("offset");
            groups
                .entry(i & !mask)
                .or_insert_with(|| vec![Complex64::default(); offsets.len()])[local] = a;
        }
        groups
    }

    /// Apply a `2^k x 2^k` matrix; local index bit `j` is qubit `targets[j]`.
    pub fn apply_matrix(&mut self, targets: &[usize], m: &CMatrix) {
        for &q in targets {
            self.check_qubit(q);
        }
        let dim = 1 << targets.len();
        assert_eq!(
            m.shape(),
            (dim, dim),
            "matrix does not match {} targets",
            targets.len()
        );
        let offsets = local_offsets(targets);
        let groups = self.grouped(&offsets);
        self.amps.clear();
        for (base, v) in groups {
            for (r, o) in offsets.iter().enumerate() {
                let a: Complex64 = (0..dim).map(|c| m[(r, c)] * v[c]).sum();
                if a.norm_sqr() > PRUNE {
                    self.amps.push((base | o, a));
                }
            }
        }
        self.sort();
    }

    /// Reduced density matrix of `targets`, with the same local ordering as
    /// [`StateVector::apply_matrix`].
    pub fn reduced_density(&self, targets: &[usize]) -> CMatrix {
        let dim = 1 << targets.len();
        let offsets = local_offsets(targets);
        let mut rho = CMatrix::zeros(dim, dim);
        for v in self.grouped(&offsets).values() {
            for r in 0..dim {
                for c in 0..dim {
                    rho[(r, c)] += v[r] * v[c].conj();
                }
            }
        }
        rho
    }

    pub fn prob_one(&self, q: usize) -> f64 {
        self.check_qubit(q);
        let bit = 1usize << q;
        self.amps
            .iter()
            .filter(|(i, _)| i & bit != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum::<f64>()
            / self.norm_sqr()
    }

    /// Projective Z measurement of one qubit with collapse.
    pub fn measure_qubit(&mut self, q: usize, rng: &mut impl RngCore) -> Result<bool> {
        let p1 = self.prob_one(q);
        let outcome = uniform(rng) < p1;
        let bit = 1usize << q;
        self.amps.retain(|(i, _)| (i & bit != 0) == outcome);
        self.normalize()?;
        Ok(outcome)
    }

    /// Sample all qubits in the computational basis at once, without
    /// collapsing the state.
    pub fn sample_index(&self, rng: &mut impl RngCore) -> usize {
        let target = uniform(rng) * self.norm_sqr();
        let mut acc = 0.0;
        for &(i, a) in &self.amps {
            acc += a.norm_sqr();
            if target < acc {
                return i;
            }
        }
        self.amps.last().map_or(0, |&(i, _)| i)
    }
}

fn local_offsets(targets: &[usize]) -> Vec<usize> {
    (0..1usize << targets.len())
        .map(|j| {
            targets
                .iter()
                .enumerate()
                .filter(|(t, _)| j >> t & 1 == 1)
                .fold(0, |acc, (_, &q)| acc | 1 << q)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
enum Branch {
    Identity,
    /// Pauli product up to a global phase, one entry per local target.
    Pauli(Vec<Pauli>),
    /// Unitary up to the scale already divided out.
    Unitary(CMatrix),
}

#[derive(Clone, Debug, PartialEq)]
enum Sampler {
    /// `K^dag K` is a multiple of the identity for every branch, so the
    /// branch probabilities are fixed.
    Fixed {
        cumulative: Vec<u64>,
        branches: Vec<Branch>,
    },
    General,
}

/// A channel with its sampling strategy worked out once.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedChannel {
    channel: QuantumChannel,
    sampler: Sampler,
}

impl PreparedChannel {
    pub fn new(channel: QuantumChannel) -> Self {
        let sampler = match channel.branch_weights_if_state_independent(1e-12) {
            Some(weights) => {
                let total: f64 = weights.iter().sum();
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        threshold(acc)
                    })
                    .collect();
                let branches = channel
                    .kraus()
                    .iter()
                    .zip(&weights)
                    .map(|(k, &w)| classify(k, w, channel.arity()))
                    .collect();
                Sampler::Fixed {
                    cumulative,
                    branches,
                }
            }
            None => Sampler::General,
        };
        PreparedChannel { channel, sampler }
    }

    pub fn channel(&self) -> &QuantumChannel {
        &self.channel
    }

    /// Whether branch probabilities are independent of the state.
    pub fn is_state_independent(&self) -> bool {
        matches!(self.sampler, Sampler::Fixed { .. })
    }

    /// Pick and apply one Kraus branch; returns its index.
    pub fn apply(
        &self,
        state: &mut StateVector,
        targets: &[usize],
        rng: &mut impl RngCore,
    ) -> Result<usize> {
        if targets.len() != self.channel.arity() {
            return Err(Error::ArityMismatch {
                expected: self.channel.arity(),
                found: targets.len(),
            });
        }
        let draw = rng.next_u64();
        match &self.sampler {
            Sampler::Fixed {
                cumulative,
                branches,
            } => {
                let k = cumulative
                    .iter()
                    .position(|&c| draw < c)
                    .unwrap_or(branches.len() - 1);
                match &branches[k] {
                    Branch::Identity => {}
                    Branch::Pauli(ps) => {
                        for (&q, &p) in targets.iter().zip(ps) {
                            state.apply_pauli(q, p);
                        }
                    }
                    Branch::Unitary(u) => state.apply_matrix(targets, u),
                }
                Ok(k)
            }
            Sampler::General => {
                let rho = state.reduced_density(targets);
                let weights: Vec<f64> = self
                    .channel
                    .kraus()
                    .iter()
                    .map(|k| (k * &rho * k.adjoint()).trace().re.max(0.0))
                    .collect();
                let total: f64 = weights.iter().sum();
                if weights.iter().all(|&w| w < MIN_BRANCH_WEIGHT) {
                    return Err(Error::NormCollapse(MIN_BRANCH_WEIGHT));
                }
                let target = (draw >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
                let mut acc = 0.0;
                let mut chosen = weights.len() - 1;
                for (i, &w) in weights.iter().enumerate() {
                    acc += w;
                    if target < acc && w >= MIN_BRANCH_WEIGHT {
                        chosen = i;
                        break;
                    }
                }
                while weights[chosen] < MIN_BRANCH_WEIGHT {
                    chosen -= 1;
                }
                state.apply_matrix(targets, &self.channel.kraus()[chosen]);
                state.scale(1.0 / weights[chosen].sqrt());
                Ok(chosen)
            }
        }
    }
}

fn classify(k: &CMatrix, weight: f64, arity: usize) -> Branch {
    let dim = 1 << arity;
    let u = k * Complex64::new(1.0 / weight.sqrt(), 0.0);
    for index in 0..1usize << (2 * arity) {
        let paulis = pauli_digits(index, arity);
        let p = pauli_product(&paulis);
        // |tr(P^dag U)| = dim iff U = phase * P for unitary U.
        let overlap = (p.adjoint() * &u).trace().norm() / dim as f64;
        if (overlap - 1.0).abs() < 1e-12 {
            return if index == 0 {
                Branch::Identity
            } else {
                Branch::Pauli(paulis)
            };
        }
    }
    Branch::Unitary(u)
}

fn pauli_digits(mut index: usize, arity: usize) -> Vec<Pauli> {
    const ORDER: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    (0..arity)
        .map(|_| {
            let p = ORDER[index % 4];
            index /= 4;
            p
        })
        .collect()
}

fn pauli_single(p: Pauli) -> CMatrix {
    let (o, l, i) = (
        Complex64::default(),
        Complex64::new(1.0, 0.0),
        Complex64::i(),
    );
    let e = match p {
        Pauli::I => [l, o, o, l],
        Pauli::X => [o, l, l, o],
        Pauli::Y => [o, -i, i, o],
        Pauli::Z => [l, o, o, -l],
    };
    CMatrix::from_row_slice(2, 2, &e)
}

fn pauli_product(paulis: &[Pauli]) -> CMatrix {
    paulis
        .iter()
        .rev()
        .fold(CMatrix::identity(1, 1), |acc, &p| {
            acc.kronecker(&pauli_single(p))
        })
}

fn hadamard() -> CMatrix {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    CMatrix::from_row_slice(2, 2, &[h, h, h, -h])
}

/// Sample and apply one Kraus branch of `channel` on `targets`.
pub fn apply_kraus_stochastic(
    state: &mut StateVector,
    channel: &QuantumChannel,
    targets: &[usize],
    rng: &mut impl RngCore,
) -> Result<usize> {
    PreparedChannel::new(channel.clone()).apply(state, targets, rng)
}

/// Which noise model drives the simulation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ChannelMode {
    /// Pauli approximations of decoherence and depolarization.
    #[default]
    Pauli,
    /// Channels obtained by integrating the Lindblad equation.
    General,
}

impl ChannelMode {
    pub fn name(self) -> &'static str {
        match self {
            ChannelMode::Pauli => "pauli",
            ChannelMode::General => "general",
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ChannelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pauli" => Ok(ChannelMode::Pauli),
            "general" => Ok(ChannelMode::General),
            other => Err(invalid(
                "channel mode",
                format!("`{other}` (expected pauli or general)"),
            )),
        }
    }
}

/// Physical-frame channels of each noise site.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub prep: QuantumChannel,
    pub gate: QuantumChannel,
    pub idle: QuantumChannel,
    pub meas: QuantumChannel,
}

impl TrajectoryConfig {
    /// Pauli channels identical to those of the frame simulator.
    pub fn pauli(params: &NoiseParams) -> Result<Self> {
        let model = PauliNoiseModel::from_params(params)?;
        Ok(TrajectoryConfig {
            prep: QuantumChannel::pauli(model.prep),
            gate: QuantumChannel::pauli(model.gate),
            idle: QuantumChannel::pauli(model.idle),
            meas: QuantumChannel::pauli(model.meas),
        })
    }

    /// Lindblad-integrated idle and gate channels over the calibrated
    /// duration; preparation and readout stay Pauli flips.
    pub fn general(params: &NoiseParams) -> Result<Self> {
        let model = PauliNoiseModel::from_params(params)?;
        let rates = lindblad_rates(params)?;
        Ok(TrajectoryConfig {
            prep: QuantumChannel::pauli(model.prep),
            gate: solve_lindblad_channel(&depolarizing_lindblad_ops(rates.omega), rates.duration)?,
            idle: solve_lindblad_channel(&idle_lindblad_ops(&rates), rates.duration)?,
            meas: QuantumChannel::pauli(model.meas),
        })
    }

    pub fn for_mode(params: &NoiseParams, mode: ChannelMode) -> Result<Self> {
        match mode {
            ChannelMode::Pauli => TrajectoryConfig::pauli(params),
            ChannelMode::General => TrajectoryConfig::general(params),
        }
    }

    pub fn channel(&self, site: NoiseSite) -> &QuantumChannel {
        match site {
            NoiseSite::Prep => &self.prep,
            NoiseSite::Gate => &self.gate,
            NoiseSite::Idle => &self.idle,
            NoiseSite::Meas => &self.meas,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Step {
    /// Prepared channel index and qubit.
    Noise(usize, usize),
    Cnot(usize, usize),
}

/// Trajectory simulator for one measured basis.
#[derive(Clone, Debug)]
pub struct TrajectorySimulator {
    circuit: ExperimentCircuit,
    steps: Vec<Step>,
    channels: Vec<PreparedChannel>,
    /// Qubits stored with a Hadamard relative to the physical state.
    hadamard_frame: u32,
    /// Qubits whose stored preparation and measurement basis is X.
    plus_mask: u32,
    /// Recorded qubits that need a Hadamard before the final sample.
    recorded_plus: u32,
}

impl TrajectorySimulator {
    pub fn new(layout: &CodeLayout, config: &TrajectoryConfig, basis: Basis) -> Result<Self> {
        let circuit = ExperimentCircuit::new(layout, basis);

        // Data qubits measured in X physically are stored rotated, and each
        // ancilla follows its data partners so every gate is a CNOT.
        let mut frame = 0u32;
        for q in 0..NUM_QUBITS {
            let id = QubitId::new(q).expect("qubit index");
            if id.is_data() && circuit.qubit_basis(id) == Basis::X {
                frame |= 1 << q;
            }
        }
        let mut ancilla_frame: [Option<bool>; NUM_QUBITS] = [None; NUM_QUBITS];
        let mut steps = Vec::new();
        let mut prepared: Vec<(NoiseSite, bool)> = Vec::new();
        for op in circuit.ops() {
            if let Op::Gate(g) = op {
                let (d, a) = (g.data.index(), g.ancilla.index());
                let s_d = frame >> d & 1 == 1;
                let s_a = s_d ^ (g.kind == GateKind::ConjugatedCnot);
                match ancilla_frame[a] {
                    Some(prev) if prev != s_a => {
                        return Err(invalid(
                            "layout",
                            format!(
                                "ancilla {} mixes gate kinds inconsistently; no Hadamard frame turns its gates into CNOTs",
                                g.ancilla.label()
                            ),
                        ))
                    }
                    _ => ancilla_frame[a] = Some(s_a),
                }
            }
        }
        for (q, s) in ancilla_frame.iter().enumerate() {
            if *s == Some(true) {
                frame |= 1 << q;
            }
        }

        let mut plus_mask = 0u32;
        for q in 0..NUM_QUBITS {
            let id = QubitId::new(q).expect("qubit index");
            let rotated = frame >> q & 1 == 1;
            let stored = if rotated {
                circuit.qubit_basis(id).conjugate()
            } else {
                circuit.qubit_basis(id)
            };
            if stored == Basis::X {
                plus_mask |= 1 << q;
            }
        }

        for op in circuit.ops() {
            match op {
                Op::Noise(i) => {
                    let loc = circuit.locations()[*i];
                    let q = loc.qubit.index();
                    let key = (loc.site, frame >> q & 1 == 1);
                    let idx = match prepared.iter().position(|k| *k == key) {
                        Some(idx) => idx,
                        None => {
                            prepared.push(key);
                            prepared.len() - 1
                        }
                    };
                    steps.push(Step::Noise(idx, q));
                }
                Op::Gate(g) => {
                    let (d, a) = (g.data.index(), g.ancilla.index());
                    if frame >> a & 1 == 0 {
                        steps.push(Step::Cnot(d, a));
                    } else {
                        steps.push(Step::Cnot(a, d));
                    }
                }
            }
        }

        let h = hadamard();
        let channels = prepared
            .iter()
            .map(|&(site, rotated)| {
                let ch = config.channel(site);
                if !rotated {
                    return Ok(PreparedChannel::new(ch.clone()));
                }
                let kraus = ch.kraus().iter().map(|k| &h * k * &h).collect();
                Ok(PreparedChannel::new(QuantumChannel::new(
                    ch.arity(),
                    kraus,
                )?))
            })
            .collect::<Result<Vec<_>>>()?;

        let readout = circuit.readout();
        let mut recorded = (1u32 << crate::code_model::NUM_DATA) - 1;
        for a in readout.ancillas.iter().flatten() {
            recorded |= 1 << a.index();
        }

        Ok(TrajectorySimulator {
            steps,
            channels,
            hadamard_frame: frame,
            plus_mask,
            recorded_plus: plus_mask & recorded,
            circuit,
        })
    }

    pub fn circuit(&self) -> &ExperimentCircuit {
        &self.circuit
    }

    pub fn hadamard_frame(&self) -> u32 {
        self.hadamard_frame
    }

    pub fn new_state(&self) -> StateVector {
        StateVector::product(NUM_QUBITS, self.plus_mask)
    }

    /// Evolve `state` from preparation up to (not including) readout.
    pub fn evolve(&self, state: &mut StateVector, rng: &mut impl RngCore) -> Result<()> {
        state.reset_product(self.plus_mask);
        for step in &self.steps {
            match *step {
                Step::Noise(ch, q) => {
                    self.channels[ch].apply(state, &[q], rng)?;
                }
                Step::Cnot(c, t) => state.apply_cnot(c, t),
            }
        }
        let drift = (state.norm_sqr() - 1.0).abs();
        if drift > NORM_TOLERANCE {
            state.normalize()?;
        }
        Ok(())
    }

    /// Rotate the qubits in `mask` into the computational basis and sample
    /// all outcomes at once; outcomes of the other qubits are meaningless.
    fn readout(&self, state: &mut StateVector, mask: u32, rng: &mut impl RngCore) -> u32 {
        for q in (0..NUM_QUBITS).filter(|q| mask >> q & 1 == 1) {
            state.apply_h(q);
        }
        state.sample_index(rng) as u32
    }

    /// One trajectory: only the recorded qubits are read out, the rest are
    /// traced out.
    pub fn run(&self, state: &mut StateVector, rng: &mut impl RngCore) -> Result<RunRecord> {
        self.evolve(state, rng)?;
        let outcomes = self.readout(state, self.recorded_plus, rng);
        Ok(self.circuit.readout().record(outcomes))
    }

    /// One trajectory with every qubit measured in its physical basis;
    /// bit `q` is qubit `q`, 1 meaning the -1 eigenvalue.
    pub fn run_raw(&self, state: &mut StateVector, rng: &mut impl RngCore) -> Result<u32> {
        self.evolve(state, rng)?;
        Ok(self.readout(state, self.plus_mask, rng))
    }

    /// Like [`TrajectorySimulator::run_raw`] but measuring one qubit at a
    /// time in the given order, collapsing after each outcome.
    pub fn run_sequential(
        &self,
        state: &mut StateVector,
        order: &[usize],
        rng: &mut impl RngCore,
    ) -> Result<u32> {
        self.evolve(state, rng)?;
        for q in (0..NUM_QUBITS).filter(|q| self.plus_mask >> q & 1 == 1) {
            state.apply_h(q);
        }
        let mut outcomes = 0u32;
        for &q in order {
            if state.measure_qubit(q, rng)? {
                outcomes |= 1 << q;
            }
        }
        Ok(outcomes)
    }

    fn sample_range(&self, family: &StreamFamily, range: Range<u64>) -> Result<Hist> {
        let mut state = self.new_state();
        let mut hist = Hist::default();
        for i in range {
            let mut rng = family.stream(i);
            let rec = self.run(&mut state, &mut rng)?;
            hist.0[rec.index()] += 1;
        }
        Ok(hist)
    }

    pub fn sample_many(
        &self,
        params: &NoiseParams,
        n_samples: u64,
        master_seed: u64,
        workers: Option<usize>,
    ) -> Result<JointCounts> {
        if n_samples == 0 {
            return Err(invalid("n_samples", "must be at least 1"));
        }
        let basis = self.circuit.basis();
        let family = StreamFamily::new(master_seed, Domain::Trajectory(basis));
        let hist = map_chunks(
            n_samples,
            workers,
            |range| Tally(self.sample_range(&family, range)),
            |a, b| match (a.0, b.0) {
                (Ok(a), Ok(b)) => Tally(Ok(a.merge(b))),
                (Err(e), _) | (_, Err(e)) => Tally(Err(e)),
            },
        )
        .0?;
        Ok(hist.into_counts(basis, *params, master_seed))
    }
}

/// Chunk result; the first error in chunk order wins.
struct Tally(Result<Hist>);

impl Default for Tally {
    fn default() -> Self {
        Tally(Ok(Hist::default()))
    }
}

/// Joint counts from `n_samples` trajectories.
pub fn estimate_joint(
    layout: &CodeLayout,
    params: &NoiseParams,
    mode: ChannelMode,
    basis: Basis,
    n_samples: u64,
    master_seed: u64,
) -> Result<JointCounts> {
    let config = TrajectoryConfig::for_mode(params, mode)?;
    let sim = TrajectorySimulator::new(layout, &config, basis)?;
    let mut counts = sim.sample_many(params, n_samples, master_seed, None)?;
    counts.meta.push("variant", layout.variant().name());
    counts
        .meta
        .push("stabilizers", layout.measured_set().name());
    counts.meta.push("simulator", "trajectory");
    counts.meta.push("channel_mode", mode.name());
    Ok(counts)
}

/// One step of a small dense-matrix circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum DenseOp {
    Unitary {
        matrix: CMatrix,
        targets: Vec<usize>,
    },
    Channel {
        channel: QuantumChannel,
        targets: Vec<usize>,
    },
}

/// Exact density-matrix evolution of up to six qubits, contracting each
/// channel's superoperator tensor with the density matrix.
pub fn dense_channel_oracle(n: usize, ops: &[DenseOp], initial: &CMatrix) -> Result<CMatrix> {
    if n == 0 || n > 6 {
        return Err(invalid("qubits", format!("{n} outside 1..=6")));
    }
    let dim = 1usize << n;
    if initial.shape() != (dim, dim) {
        return Err(invalid(
            "initial state",
            format!("shape {:?}", initial.shape()),
        ));
    }
    let mut rho = initial.clone();
    for op in ops {
        let (targets, tensor) = match op {
            DenseOp::Unitary { matrix, targets } => (
                targets,
                SuperoperatorTensor::from_kraus(targets.len(), &[matrix.clone()]),
            ),
            DenseOp::Channel { channel, targets } => {
                if channel.arity() != targets.len() {
                    return Err(Error::ArityMismatch {
                        expected: channel.arity(),
                        found: targets.len(),
                    });
                }
                (
                    targets,
                    SuperoperatorTensor::from_kraus(channel.arity(), channel.kraus()),
                )
            }
        };
        if targets.iter().any(|&t| t >= n) {
            return Err(invalid(
                "targets",
                format!("{targets:?} outside {n} qubits"),
            ));
        }
        let offsets = local_offsets(targets);
        let mask = offsets[offsets.len() - 1];
        let local = offsets.len();
        let mut out = CMatrix::zeros(dim, dim);
        for r in (0..dim).filter(|i| i & mask == 0) {
            for rp in (0..dim).filter(|i| i & mask == 0) {
                for i in 0..local {
                    for ip in 0..local {
                        let mut acc = Complex64::default();
                        for j in 0..local {
                            for jp in 0..local {
                                acc += tensor.get(i, j, jp, ip)
                                    * rho[(r | offsets[j], rp | offsets[jp])];
                            }
                        }
                        out[(r | offsets[i], rp | offsets[ip])] = acc;
                    }
                }
            }
        }
        rho = out;
    }
    Ok(rho)
}
