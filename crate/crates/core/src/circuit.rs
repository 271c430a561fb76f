//! The experiment as a flat list of operations: preparation noise on every
//! qubit, four gate rounds with per-qubit gate or idle noise, readout noise.
//! Both simulators walk the same list, so they agree on where noise enters.

use crate::code_model::{CodeLayout, QubitId, ScheduledGate, NUM_DATA, NUM_QUBITS};
use crate::frame::RunRecord;
use crate::pauli::Basis;

/// What kind of noise acts at a location.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseSite {
    Prep,
    Gate,
    Idle,
    Meas,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NoiseLocation {
    pub qubit: QubitId,
    pub site: NoiseSite,
    /// Gate round for `Gate` and `Idle` sites.
    pub round: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// Index into [`ExperimentCircuit::locations`].
    Noise(usize),
    Gate(ScheduledGate),
}

/// How raw measurement outcomes turn into a [`RunRecord`].
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    /// Ancilla of each relevant stabilizer, if it is gated at all.
    pub ancillas: [Option<QubitId>; 4],
    /// Data-qubit support of each relevant stabilizer (bit = data index).
    pub stabilizer_masks: [u32; 4],
    pub logical_mask: u32,
}

impl Readout {
    /// Assemble a record from a 17-bit outcome word (bit `q` = outcome of
    /// qubit `q`, 1 meaning the -1 eigenvalue of its measured basis).
    pub fn record(&self, outcomes: u32) -> RunRecord {
        let mut syndrome = 0u8;
        for k in 0..4 {
            if let Some(a) = self.ancillas[k] {
                syndrome |= ((outcomes >> a.index() & 1) as u8) << k;
            }
            let parity = (outcomes & self.stabilizer_masks[k]).count_ones() & 1;
            syndrome |= (parity as u8) << (k + 4);
        }
        RunRecord {
            syndrome,
            logical_flip: (outcomes & self.logical_mask).count_ones() & 1 == 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentCircuit {
    basis: Basis,
    /// Physical basis each qubit is prepared and measured in.
    bases: [Basis; NUM_QUBITS],
    ops: Vec<Op>,
    locations: Vec<NoiseLocation>,
    readout: Readout,
}

impl ExperimentCircuit {
    pub fn new(layout: &CodeLayout, basis: Basis) -> Self {
        let mut bases = [Basis::Z; NUM_QUBITS];
        for (q, b) in bases.iter_mut().enumerate().take(NUM_DATA) {
            *b = layout.data_basis(basis, QubitId::data(q + 1));
        }

        let mut ops = Vec::new();
        let mut locations = Vec::new();
        let mut noise = |ops: &mut Vec<Op>, qubit: QubitId, site, round| {
            ops.push(Op::Noise(locations.len()));
            locations.push(NoiseLocation { qubit, site, round });
        };

        for q in 0..NUM_QUBITS {
            noise(&mut ops, qid(q), NoiseSite::Prep, None);
        }
        let schedule = layout.active_schedule(basis);
        for (r, round) in schedule.rounds.iter().enumerate() {
            let mut busy = 0u32;
            for g in round {
                noise(&mut ops, g.data, NoiseSite::Gate, Some(r));
                noise(&mut ops, g.ancilla, NoiseSite::Gate, Some(r));
                ops.push(Op::Gate(*g));
                busy |= 1 << g.data.index() | 1 << g.ancilla.index();
            }
            for q in (0..NUM_QUBITS).filter(|q| busy >> q & 1 == 0) {
                noise(&mut ops, qid(q), NoiseSite::Idle, Some(r));
            }
        }
        for q in 0..NUM_QUBITS {
            noise(&mut ops, qid(q), NoiseSite::Meas, None);
        }

        let relevant = layout.relevant_stabilizers(basis);
        let mask_of = |support: &mut dyn Iterator<Item = QubitId>| {
            support.fold(0u32, |m, q| m | 1 << q.index())
        };
        let readout = Readout {
            ancillas: relevant.map(|id| {
                layout
                    .is_gated(id, basis)
                    .then(|| layout.stabilizer(id).ancilla)
            }),
            stabilizer_masks: relevant
                .map(|id| mask_of(&mut layout.stabilizer(id).support.iter().map(|&(q, _)| q))),
            logical_mask: mask_of(
                &mut layout
                    .measured_logical(basis)
                    .support
                    .iter()
                    .map(|&(q, _)| q),
            ),
        };

        ExperimentCircuit {
            basis,
            bases,
            ops,
            locations,
            readout,
        }
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn qubit_basis(&self, q: QubitId) -> Basis {
        self.bases[q.index()]
    }

    pub fn ops(&self) -> &[Op] {
        &self.ops
    }

    pub fn locations(&self) -> &[NoiseLocation] {
        &self.locations
    }

    pub fn readout(&self) -> &Readout {
        &self.readout
    }

    /// Index of the noise location at `site` on `qubit` (in `round` for
    /// gate and idle sites).
    pub fn find_location(
        &self,
        site: NoiseSite,
        qubit: QubitId,
        round: Option<usize>,
    ) -> Option<usize> {
        self.locations
            .iter()
            .position(|l| l.site == site && l.qubit == qubit && l.round == round)
    }
}

fn qid(q: usize) -> QubitId {
    QubitId::new(q).expect("qubit index in range")
}
