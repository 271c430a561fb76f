//! Pauli-frame Monte Carlo for Pauli-channel noise.
//!
//! The frame records the Pauli error accumulated on each of the 17 qubits
//! relative to the noiseless circuit. Entangling gates conjugate it, and a
//! measurement outcome is flipped iff the frame anticommutes with the
//! measured Pauli. Only deterministic parities (relevant stabilizers and
//! the logical) reach the [`RunRecord`], so frame elements that stabilize
//! the noiseless state never show up.
//!
//! Propagation is linear, so [`FrameSimulator`] also precomputes the
//! outcome of every single fault and samples by XOR-ing those effects.
//! [`FrameSimulator::run`] walks the circuit explicitly and consumes the
//! same draws, which keeps the two paths comparable sample by sample.

use std::fmt::Write as _;
use std::ops::Range;

use rand::RngCore;

use crate::circuit::{ExperimentCircuit, Op};
use crate::code_model::{CodeLayout, GateKind, QubitId, ScheduledGate, NUM_QUBITS};
use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseParams, PauliNoiseModel};
use crate::parallel::map_chunks;
use crate::pauli::{Basis, Pauli};
use crate::rng::{threshold, Domain, StreamFamily};
use crate::textfmt::{field, split_header, Header};

/// Accumulated Pauli error on the 17 qubits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliFrame {
    pub x_mask: u32,
    pub z_mask: u32,
}

impl PauliFrame {
    pub fn apply(&mut self, qubit: usize, pauli: Pauli) {
        if pauli.x_bit() {
            self.x_mask ^= 1 << qubit;
        }
        if pauli.z_bit() {
            self.z_mask ^= 1 << qubit;
        }
    }

    /// Conjugate the frame through a perfect entangling gate.
    pub fn conjugate(&mut self, gate: &ScheduledGate) {
        let d = gate.data.index();
        let a = gate.ancilla.index();
        let bit = |m: u32, q: usize| m >> q & 1;
        match gate.kind {
            GateKind::Cnot => {
                self.x_mask ^= bit(self.x_mask, d) << a;
                self.z_mask ^= bit(self.z_mask, a) << d;
            }
            GateKind::ConjugatedCnot => {
                self.x_mask ^= bit(self.z_mask, d) << a;
                self.x_mask ^= bit(self.z_mask, a) << d;
            }
        }
    }

    /// Whether a measurement of `qubit` in `basis` is flipped.
    pub fn flips(&self, qubit: usize, basis: Basis) -> bool {
        let mask = match basis {
            Basis::Z => self.x_mask,
            Basis::X => self.z_mask,
        };
        mask >> qubit & 1 == 1
    }
}

/// Outcome of one experiment: 8 syndrome bits and the logical flip.
///
/// Bits 0-3 hold the ancilla round for the relevant stabilizers in
/// ascending id order; bits 4-7 the same stabilizers inferred from the
/// final data readout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RunRecord {
    pub syndrome: u8,
    pub logical_flip: bool,
}

impl RunRecord {
    /// Packed as `syndrome | flip << 8`.
    pub fn index(self) -> usize {
        self.syndrome as usize | (self.logical_flip as usize) << 8
    }

    pub fn from_index(index: usize) -> Self {
        RunRecord {
            syndrome: (index & 0xff) as u8,
            logical_flip: index >> 8 & 1 == 1,
        }
    }
}

/// Empirical joint distribution of (syndrome, logical flip).
#[derive(Clone, Debug, PartialEq)]
pub struct JointCounts {
    counts: [[u64; 2]; 256],
    total: u64,
    pub basis: Basis,
    pub params: NoiseParams,
    pub seed: u64,
    /// Further provenance written to the file header.
    pub meta: Header,
}

impl JointCounts {
    pub fn new(basis: Basis, params: NoiseParams, seed: u64) -> Self {
        JointCounts {
            counts: [[0; 2]; 256],
            total: 0,
            basis,
            params,
            seed,
            meta: Header::default(),
        }
    }

    pub fn add(&mut self, record: RunRecord) {
        self.add_count(record.syndrome, record.logical_flip, 1);
    }

    pub fn add_count(&mut self, syndrome: u8, flip: bool, n: u64) {
        self.counts[syndrome as usize][flip as usize] += n;
        self.total += n;
    }

    /// `[no-flip, flip]` counts for `syndrome`.
    pub fn get(&self, syndrome: u8) -> [u64; 2] {
        self.counts[syndrome as usize]
    }

    pub fn rows(&self) -> &[[u64; 2]; 256] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn flips(&self) -> u64 {
        self.counts.iter().map(|c| c[1]).sum()
    }

    /// Add another table's counts; provenance of `self` is kept.
    pub fn merge_counts(&mut self, other: &JointCounts) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            a[0] += b[0];
            a[1] += b[1];
        }
        self.total += other.total;
    }

    pub fn header(&self) -> Header {
        let mut h = Header::new("surface17 joint counts");
        h.push("basis", self.basis).push_params(&self.params);
        h.push("seed", self.seed).push("samples", self.total);
        for (k, v) in &self.meta.entries {
            h.push(k.clone(), v);
        }
        h
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header().render();
        out.push_str("syndrome,count_noflip,count_flip\n");
        for (s, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{s},{},{}", c[0], c[1]);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, body) = split_header(text)?;
        let mut counts = JointCounts::new(
            header.parse("basis")?,
            header.params()?,
            header.parse("seed")?,
        );
        let standard = [
            "basis",
            "p",
            "m",
            "g",
            "t1_over_t2",
            "t_over_t2",
            "seed",
            "samples",
        ];
        for (k, v) in &header.entries {
            if !standard.contains(&k.as_str()) {
                counts.meta.push(k.clone(), v);
            }
        }
        let mut rows = body.into_iter();
        match rows.next() {
            Some((_, l)) if l.starts_with("syndrome") => {}
            Some((line, _)) => {
                return Err(Error::Parse {
                    line,
                    reason: "expected column header `syndrome,count_noflip,count_flip`".into(),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    reason: "no table".into(),
                })
            }
        }
        for (line, row) in rows {
            let mut cols = row.split(',');
            let s: usize = field(line, cols.next(), "syndrome")?;
            if s > 255 {
                return Err(Error::Parse {
                    line,
                    reason: format!("syndrome {s} out of range"),
                });
            }
            let keep: u64 = field(line, cols.next(), "count_noflip")?;
            let flip: u64 = field(line, cols.next(), "count_flip")?;
            counts.add_count(s as u8, false, keep);
            counts.add_count(s as u8, true, flip);
        }
        if header.get("samples").is_some() {
            let declared: u64 = header.parse("samples")?;
            if declared != counts.total {
                return Err(Error::Parse {
                    line: 0,
                    reason: format!(
                        "header declares {declared} samples, table sums to {}",
                        counts.total
                    ),
                });
            }
        }
        Ok(counts)
    }
}

/// Frame simulator for one layout, readout basis and Pauli noise model.
#[derive(Clone, Debug)]
pub struct FrameSimulator {
    circuit: ExperimentCircuit,
    /// Cumulative thresholds for X, X+Y, X+Y+Z per location.
    thresholds: Vec<[u64; 3]>,
    /// Packed record of a lone X, Y, Z fault per location.
    effects: Vec<[u16; 3]>,
}

impl FrameSimulator {
    pub fn new(layout: &CodeLayout, params: &NoiseParams, basis: Basis) -> Result<Self> {
        Ok(Self::from_model(
            layout,
            &PauliNoiseModel::from_params(params)?,
            basis,
        ))
    }

    pub fn from_model(layout: &CodeLayout, model: &PauliNoiseModel, basis: Basis) -> Self {
        let circuit = ExperimentCircuit::new(layout, basis);
        let thresholds = circuit
            .locations()
            .iter()
            .map(|l| {
                let p = model.probs_at(l.site);
                [
                    threshold(p.px),
                    threshold(p.px + p.py),
                    threshold(p.px + p.py + p.pz),
                ]
            })
            .collect();
        let mut sim = FrameSimulator {
            circuit,
            thresholds,
            effects: Vec::new(),
        };
        sim.effects = (0..sim.circuit.locations().len())
            .map(|l| Pauli::NON_IDENTITY.map(|p| sim.run_with_faults(&[(l, p)]).index() as u16))
            .collect();
        sim
    }

    pub fn circuit(&self) -> &ExperimentCircuit {
        &self.circuit
    }

    /// Record produced by a lone `pauli` fault at location `loc`.
    pub fn fault_effect(&self, loc: usize, pauli: Pauli) -> RunRecord {
        match pauli {
            Pauli::I => RunRecord::default(),
            Pauli::X => RunRecord::from_index(self.effects[loc][0] as usize),
            Pauli::Y => RunRecord::from_index(self.effects[loc][1] as usize),
            Pauli::Z => RunRecord::from_index(self.effects[loc][2] as usize),
        }
    }

    fn draw(&self, loc: usize, u: u64) -> Pauli {
        let t = &self.thresholds[loc];
        if u >= t[2] {
            Pauli::I
        } else if u < t[0] {
            Pauli::X
        } else if u < t[1] {
            Pauli::Y
        } else {
            Pauli::Z
        }
    }

    fn propagate(&self, mut fault: impl FnMut(usize) -> Pauli) -> RunRecord {
        let mut frame = PauliFrame::default();
        for op in self.circuit.ops() {
            match op {
                Op::Noise(l) => {
                    let q = self.circuit.locations()[*l].qubit.index();
                    frame.apply(q, fault(*l));
                }
                Op::Gate(g) => frame.conjugate(g),
            }
        }
        let mut outcomes = 0u32;
        for q in 0..NUM_QUBITS {
            let basis = self.circuit.qubit_basis(QubitId::new(q).unwrap());
            outcomes |= (frame.flips(q, basis) as u32) << q;
        }
        self.circuit.readout().record(outcomes)
    }

    /// One run, propagating the frame gate by gate.
    pub fn run<R: RngCore>(&self, rng: &mut R) -> RunRecord {
        self.propagate(|l| self.draw(l, rng.next_u64()))
    }

    /// One run from the precomputed fault effects; consumes the same draws
    /// as [`run`](Self::run) and returns the same record.
    pub fn run_compiled<R: RngCore>(&self, rng: &mut R) -> RunRecord {
        let mut acc = 0u16;
        for (t, e) in self.thresholds.iter().zip(&self.effects) {
            let u = rng.next_u64();
            if u < t[2] {
                acc ^= if u < t[0] {
                    e[0]
                } else if u < t[1] {
                    e[1]
                } else {
                    e[2]
                };
            }
        }
        RunRecord::from_index(acc as usize)
    }

    /// Deterministic run with the given faults and no other noise.
    pub fn run_with_faults(&self, faults: &[(usize, Pauli)]) -> RunRecord {
        self.propagate(|l| {
            faults
                .iter()
                .filter(|&&(at, _)| at == l)
                .fold(Pauli::I, |acc, &(_, p)| {
                    Pauli::from_bits(acc.x_bit() ^ p.x_bit(), acc.z_bit() ^ p.z_bit())
                })
        })
    }

    /// Raw counts for samples `range` of the given stream family.
    pub fn sample_range(&self, family: &StreamFamily, range: Range<u64>) -> [u64; 512] {
        let mut hist = [0u64; 512];
        for i in range {
            let mut rng = family.stream(i);
            hist[self.run_compiled(&mut rng).index()] += 1;
        }
        hist
    }

    /// `n_samples` runs keyed by `master_seed`, split over `workers` threads
    /// (or the environment default). The result does not depend on the
    /// worker count.
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
        let family = StreamFamily::new(master_seed, Domain::Frame(self.circuit.basis()));
        let hist = map_chunks(
            n_samples,
            workers,
            |range| Hist(self.sample_range(&family, range)),
            Hist::merge,
        );
        Ok(hist.into_counts(self.circuit.basis(), *params, master_seed))
    }
}

/// 512-bin histogram indexed by [`RunRecord::index`].
#[derive(Clone)]
pub(crate) struct Hist(pub [u64; 512]);

impl Default for Hist {
    fn default() -> Self {
        Hist([0; 512])
    }
}

impl Hist {
    pub(crate) fn merge(mut self, other: Hist) -> Hist {
        for (a, b) in self.0.iter_mut().zip(other.0) {
            *a += b;
        }
        self
    }

    pub(crate) fn into_counts(self, basis: Basis, params: NoiseParams, seed: u64) -> JointCounts {
        let mut counts = JointCounts::new(basis, params, seed);
        for (i, &n) in self.0.iter().enumerate() {
            if n > 0 {
                let r = RunRecord::from_index(i);
                counts.add_count(r.syndrome, r.logical_flip, n);
            }
        }
        counts
    }
}

/// One run of the experiment with Pauli-approximated noise. Does not check
/// the gate/idle ordering constraint; callers that need it validate first.
pub fn sample_run<R: RngCore>(
    layout: &CodeLayout,
    params: &NoiseParams,
    basis: Basis,
    rng: &mut R,
) -> Result<RunRecord> {
    Ok(FrameSimulator::new(layout, params, basis)?.run(rng))
}

/// Aggregate `n_samples` runs into joint counts.
pub fn sample_many(
    layout: &CodeLayout,
    params: &NoiseParams,
    basis: Basis,
    n_samples: u64,
    master_seed: u64,
) -> Result<JointCounts> {
    let sim = FrameSimulator::new(layout, params, basis)?;
    let mut counts = sim.sample_many(params, n_samples, master_seed, None)?;
    counts.meta.push("variant", layout.variant().name());
    counts
        .meta
        .push("stabilizers", layout.measured_set().name());
    counts.meta.push("simulator", "frame");
    Ok(counts)
}

/// Exact distribution restricted to at most `max_weight` faulty locations.
#[derive(Clone, Debug, PartialEq)]
pub struct EnumeratedDistribution {
    /// Probability of each (syndrome, flip) pair, indexed like [`JointCounts`].
    pub probs: [[f64; 2]; 256],
    /// Upper bound on the probability of all configurations left out.
    pub neglected_mass: f64,
    pub configurations: u64,
}

impl EnumeratedDistribution {
    pub fn prob(&self, syndrome: u8, flip: bool) -> f64 {
        self.probs[syndrome as usize][flip as usize]
    }
}

/// Enumerate every configuration with up to `max_weight` (at most 3) faulty
/// locations and accumulate its exact probability.
pub fn truncated_enumeration_oracle(
    layout: &CodeLayout,
    params: &NoiseParams,
    basis: Basis,
    max_weight: usize,
) -> Result<EnumeratedDistribution> {
    if max_weight > 3 {
        return Err(invalid(
            "max_weight",
            format!("{max_weight} exceeds the supported 3"),
        ));
    }
    let model = PauliNoiseModel::from_params(params)?;
    let sim = FrameSimulator::from_model(layout, &model, basis);
    let mut base = 1.0;
    let mut options: Vec<Vec<(u16, f64)>> = Vec::new();
    for (l, loc) in sim.circuit.locations().iter().enumerate() {
        let p = model.probs_at(loc.site);
        let none = 1.0 - p.total();
        base *= none;
        let opts: Vec<(u16, f64)> = [(Pauli::X, p.px), (Pauli::Y, p.py), (Pauli::Z, p.pz)]
            .into_iter()
            .filter(|&(_, q)| q > 0.0)
            .map(|(pauli, q)| (sim.fault_effect(l, pauli).index() as u16, q / none))
            .collect();
        if !opts.is_empty() {
            options.push(opts);
        }
    }

    let mut out = EnumeratedDistribution {
        probs: [[0.0; 2]; 256],
        neglected_mass: 0.0,
        configurations: 0,
    };
    enumerate(&options, 0, max_weight, 0, 1.0, base, &mut out);
    let total: f64 = out.probs.iter().map(|p| p[0] + p[1]).sum();
    out.neglected_mass = (1.0 - total).max(0.0);
    Ok(out)
}

fn enumerate(
    options: &[Vec<(u16, f64)>],
    start: usize,
    remaining: usize,
    effect: u16,
    ratio: f64,
    base: f64,
    out: &mut EnumeratedDistribution,
) {
    let r = RunRecord::from_index(effect as usize);
    out.probs[r.syndrome as usize][r.logical_flip as usize] += base * ratio;
    out.configurations += 1;
    if remaining == 0 {
        return;
    }
    for (l, opts) in options.iter().enumerate().skip(start) {
        for &(e, q) in opts {
            enumerate(
                options,
                l + 1,
                remaining - 1,
                effect ^ e,
                ratio * q,
                base,
                out,
            );
        }
    }
}
