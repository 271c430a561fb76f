//! Surface-17 geometry: data and ancilla qubits, the two stabilizer
//! variants, logical operators and the four-round entangling schedule.
//!
//! Data qubits sit on a 3x3 grid numbered row-major `1..=9` (stored as
//! indices `0..9`):
//!
//! ```text
//!     1 2 3
//!     4 5 6
//!     7 8 9
//! ```
//!
//! Each stabilizer is a plaquette whose centre lives on the dual lattice; its
//! ancilla is qubit `9 + id`. Stabilizer ids `0..4` are the white plaquettes,
//! `4..8` the blue ones, each group ordered boundary, bulk, bulk, boundary.

use std::fmt::Write as _;

use crate::pauli::{Basis, Pauli, PauliString};

pub const NUM_DATA: usize = 9;
pub const NUM_ANCILLA: usize = 8;
pub const NUM_QUBITS: usize = NUM_DATA + NUM_ANCILLA;
pub const NUM_ROUNDS: usize = 4;

/// Qubit index in `0..17`; data first, then ancillas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QubitId(u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Data,
    Ancilla,
}

impl QubitId {
    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_QUBITS).then_some(QubitId(index as u8))
    }

    /// Data qubit by its grid label `1..=9`.
    pub fn data(label: usize) -> Self {
        assert!(
            (1..=NUM_DATA).contains(&label),
            "data label {label} out of range"
        );
        QubitId((label - 1) as u8)
    }

    /// Ancilla belonging to stabilizer `id`.
    pub fn ancilla(id: usize) -> Self {
        assert!(id < NUM_ANCILLA, "stabilizer id {id} out of range");
        QubitId((NUM_DATA + id) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn role(self) -> Role {
        if self.index() < NUM_DATA {
            Role::Data
        } else {
            Role::Ancilla
        }
    }

    pub fn is_data(self) -> bool {
        self.role() == Role::Data
    }

    /// Human label: `d1..d9` for data, `a0..a7` for ancillas.
    pub fn label(self) -> String {
        match self.role() {
            Role::Data => format!("d{}", self.index() + 1),
            Role::Ancilla => format!("a{}", self.index() - NUM_DATA),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StabilizerKind {
    White,
    Blue,
}

impl StabilizerKind {
    /// The plaquette kind whose outcomes are used for a readout in `basis`.
    pub fn relevant_to(basis: Basis) -> Self {
        match basis {
            Basis::Z => StabilizerKind::White,
            Basis::X => StabilizerKind::Blue,
        }
    }

    /// Pauli label of every support qubit in the unrotated variant.
    fn base_pauli(self) -> Pauli {
        match self {
            StabilizerKind::White => Pauli::Z,
            StabilizerKind::Blue => Pauli::X,
        }
    }

    /// Order in which the four plaquette corners are entangled. White
    /// plaquettes sweep NW, NE, SW, SE; blue ones NW, SW, NE, SE, so that a
    /// mid-measurement ancilla fault spreads onto a pair of data qubits lying
    /// perpendicular to the logical string it could otherwise complete.
    fn corner_order(self) -> [Corner; 4] {
        use Corner::*;
        match self {
            StabilizerKind::White => [NorthWest, NorthEast, SouthWest, SouthEast],
            StabilizerKind::Blue => [NorthWest, SouthWest, NorthEast, SouthEast],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Corner {
    NorthWest,
    NorthEast,
    SouthWest,
    SouthEast,
}

impl Corner {
    fn offset(self) -> (i32, i32) {
        match self {
            Corner::NorthWest => (-1, -1),
            Corner::NorthEast => (-1, 1),
            Corner::SouthWest => (1, -1),
            Corner::SouthEast => (1, 1),
        }
    }
}

/// Which stabilizer definition is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    /// White plaquettes all-Z, blue plaquettes all-X.
    Fig1a,
    /// The same plaquettes conjugated by Hadamards on the data qubits with
    /// odd grid parity (`2, 4, 6, 8`), so every stabilizer mixes X and Z.
    Fig1b,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Fig1a => "fig1a",
            Variant::Fig1b => "fig1b",
        }
    }

    /// Whether data qubit `index` (0-based) carries a Hadamard in this variant.
    pub fn is_rotated(self, index: usize) -> bool {
        match self {
            Variant::Fig1a => false,
            Variant::Fig1b => index < NUM_DATA && (index / 3 + index % 3) % 2 == 1,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fig1a" | "a" => Ok(Variant::Fig1a),
            "fig1b" | "b" => Ok(Variant::Fig1b),
            other => Err(format!(
                "unknown variant `{other}` (expected fig1a or fig1b)"
            )),
        }
    }
}

/// Which stabilizers are actually entangled with their ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StabilizerSet {
    All8,
    Relevant4,
    Bulk4,
}

impl StabilizerSet {
    pub fn name(self) -> &'static str {
        match self {
            StabilizerSet::All8 => "all8",
            StabilizerSet::Relevant4 => "relevant4",
            StabilizerSet::Bulk4 => "bulk4",
        }
    }
}

impl std::str::FromStr for StabilizerSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "all8" => Ok(StabilizerSet::All8),
            "relevant4" => Ok(StabilizerSet::Relevant4),
            "bulk4" => Ok(StabilizerSet::Bulk4),
            other => Err(format!(
                "unknown stabilizer set `{other}` (expected all8, relevant4 or bulk4)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Stabilizer {
    pub id: usize,
    pub kind: StabilizerKind,
    pub ancilla: QubitId,
    /// Support qubits in ascending order with their Pauli labels.
    pub support: Vec<(QubitId, Pauli)>,
    /// Plaquette centre in doubled grid coordinates (data qubits at even
    /// coordinates `(2 row, 2 col)`).
    center: (i32, i32),
}

impl Stabilizer {
    pub fn weight(&self) -> usize {
        self.support.len()
    }

    pub fn is_bulk(&self) -> bool {
        self.weight() == 4
    }

    pub fn pauli_string(&self) -> PauliString {
        PauliString::from_terms(self.support.iter().map(|&(q, p)| (q.index(), p)))
    }

    pub fn contains(&self, qubit: QubitId) -> bool {
        self.support.iter().any(|&(q, _)| q == qubit)
    }

    pub fn label_on(&self, qubit: QubitId) -> Option<Pauli> {
        self.support
            .iter()
            .find(|&&(q, _)| q == qubit)
            .map(|&(_, p)| p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LogicalLabel {
    X,
    Z,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogicalOperator {
    pub label: LogicalLabel,
    pub support: Vec<(QubitId, Pauli)>,
}

impl LogicalOperator {
    pub fn pauli_string(&self) -> PauliString {
        PauliString::from_terms(self.support.iter().map(|&(q, p)| (q.index(), p)))
    }
}

/// Two-qubit entangling gate between a data qubit and an ancilla.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    /// Controlled-NOT with the data qubit as control in the Z basis.
    Cnot,
    /// Controlled-NOT controlled on the `|+>`/`|->` states of the data qubit
    /// (a CNOT conjugated by Hadamards on the control).
    ConjugatedCnot,
}

impl GateKind {
    /// The gate that copies the given data-qubit Pauli label onto the ancilla.
    pub fn for_label(label: Pauli) -> Self {
        match label {
            Pauli::Z => GateKind::Cnot,
            Pauli::X => GateKind::ConjugatedCnot,
            other => panic!("no entangling gate for support label {other}"),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Cnot => "cnot",
            GateKind::ConjugatedCnot => "xcnot",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ScheduledGate {
    pub stabilizer: usize,
    pub ancilla: QubitId,
    pub data: QubitId,
    pub kind: GateKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateSchedule {
    pub rounds: [Vec<ScheduledGate>; NUM_ROUNDS],
}

impl GateSchedule {
    pub fn gate_count(&self) -> usize {
        self.rounds.iter().map(Vec::len).sum()
    }

    /// Round in which `stabilizer` touches `data`, if it does.
    pub fn round_of(&self, stabilizer: usize, data: QubitId) -> Option<usize> {
        self.rounds.iter().position(|round| {
            round
                .iter()
                .any(|g| g.stabilizer == stabilizer && g.data == data)
        })
    }

    fn retain(&self, mut keep: impl FnMut(&ScheduledGate) -> bool) -> GateSchedule {
        let mut out = GateSchedule::default();
        for (dst, src) in out.rounds.iter_mut().zip(&self.rounds) {
            *dst = src.iter().copied().filter(|g| keep(g)).collect();
        }
        out
    }
}

/// Result of a consistency check. Empty `failures` means the check passed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub checked: usize,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn record(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok {
            self.failures.push(describe());
        }
    }

    pub fn merge(mut self, other: ValidationReport) -> ValidationReport {
        self.checked += other.checked;
        self.failures.extend(other.failures);
        self
    }
}

/// Effect of a data-qubit Pauli on the relevant syndrome and logical readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PauliAction {
    /// Bit `i` set iff the `i`-th relevant stabilizer (ascending id) flips.
    pub syndrome: u8,
    pub logical_flip: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CodeLayout {
    variant: Variant,
    measured: StabilizerSet,
    stabilizers: Vec<Stabilizer>,
    logical_x: LogicalOperator,
    logical_z: LogicalOperator,
    schedule: GateSchedule,
}

/// Plaquette centres in doubled coordinates, by stabilizer id.
const CENTERS: [(StabilizerKind, (i32, i32)); NUM_ANCILLA] = [
    (StabilizerKind::White, (-1, 3)),
    (StabilizerKind::White, (1, 1)),
    (StabilizerKind::White, (3, 3)),
    (StabilizerKind::White, (5, 1)),
    (StabilizerKind::Blue, (1, -1)),
    (StabilizerKind::Blue, (1, 3)),
    (StabilizerKind::Blue, (3, 1)),
    (StabilizerKind::Blue, (3, 5)),
];

fn data_at(coord: (i32, i32)) -> Option<QubitId> {
    let (r, c) = coord;
    let in_grid = (0..=4).contains(&r) && (0..=4).contains(&c) && r % 2 == 0 && c % 2 == 0;
    in_grid.then(|| QubitId((3 * (r / 2) + c / 2) as u8))
}

/// Build the canonical Surface-17 layout.
pub fn build_surface17(variant: Variant, measured: StabilizerSet) -> CodeLayout {
    let frame = |q: QubitId, p: Pauli| {
        if variant.is_rotated(q.index()) {
            p.hadamard()
        } else {
            p
        }
    };

    let mut stabilizers = Vec::with_capacity(NUM_ANCILLA);
    let mut schedule = GateSchedule::default();
    for (id, &(kind, center)) in CENTERS.iter().enumerate() {
        let mut support = Vec::new();
        for (round, corner) in kind.corner_order().into_iter().enumerate() {
            let (dr, dc) = corner.offset();
            let Some(q) = data_at((center.0 + dr, center.1 + dc)) else {
                continue;
            };
            let label = frame(q, kind.base_pauli());
            support.push((q, label));
            schedule.rounds[round].push(ScheduledGate {
                stabilizer: id,
                ancilla: QubitId::ancilla(id),
                data: q,
                kind: GateKind::for_label(label),
            });
        }
        support.sort_by_key(|&(q, _)| q);
        stabilizers.push(Stabilizer {
            id,
            kind,
            ancilla: QubitId::ancilla(id),
            support,
            center,
        });
    }
    for round in &mut schedule.rounds {
        round.sort_by_key(|g| (g.stabilizer, g.data));
    }

    let logical = |label, paulis: [usize; 3], base: Pauli| LogicalOperator {
        label,
        support: paulis
            .iter()
            .map(|&l| {
                let q = QubitId::data(l);
                (q, frame(q, base))
            })
            .collect(),
    };

    CodeLayout {
        variant,
        measured,
        stabilizers,
        // Top row crosses left to right; left column crosses top to bottom.
        logical_x: logical(LogicalLabel::X, [1, 2, 3], Pauli::X),
        logical_z: logical(LogicalLabel::Z, [1, 4, 7], Pauli::Z),
        schedule,
    }
}

impl CodeLayout {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn measured_set(&self) -> StabilizerSet {
        self.measured
    }

    pub fn stabilizers(&self) -> &[Stabilizer] {
        &self.stabilizers
    }

    pub fn stabilizer(&self, id: usize) -> &Stabilizer {
        &self.stabilizers[id]
    }

    pub fn logical(&self, label: LogicalLabel) -> &LogicalOperator {
        match label {
            LogicalLabel::X => &self.logical_x,
            LogicalLabel::Z => &self.logical_z,
        }
    }

    /// The logical operator whose value a readout in `basis` reports.
    pub fn measured_logical(&self, basis: Basis) -> &LogicalOperator {
        match basis {
            Basis::Z => &self.logical_z,
            Basis::X => &self.logical_x,
        }
    }

    /// Full 24-gate schedule, independent of which stabilizers are gated.
    pub fn full_schedule(&self) -> &GateSchedule {
        &self.schedule
    }

    /// Ids of the four stabilizers whose outcomes decode a `basis` readout.
    pub fn relevant_stabilizers(&self, basis: Basis) -> [usize; 4] {
        let kind = StabilizerKind::relevant_to(basis);
        let mut out = [0; 4];
        for (slot, s) in out
            .iter_mut()
            .zip(self.stabilizers.iter().filter(|s| s.kind == kind))
        {
            *slot = s.id;
        }
        out
    }

    /// Whether stabilizer `id` is entangled with its ancilla in a run whose
    /// logical readout is in `basis`.
    pub fn is_gated(&self, id: usize, basis: Basis) -> bool {
        let s = &self.stabilizers[id];
        match self.measured {
            StabilizerSet::All8 => true,
            StabilizerSet::Relevant4 => s.kind == StabilizerKind::relevant_to(basis),
            StabilizerSet::Bulk4 => s.is_bulk(),
        }
    }

    /// Gates actually applied for a readout in `basis`.
    pub fn active_schedule(&self, basis: Basis) -> GateSchedule {
        self.schedule.retain(|g| self.is_gated(g.stabilizer, basis))
    }

    /// Number of entangling gates for the configured stabilizer set
    /// (24, 12 or 16).
    pub fn scheduled_gate_count(&self) -> usize {
        self.active_schedule(Basis::Z).gate_count()
    }

    /// Basis in which data qubit `q` is prepared and read out for a logical
    /// state in `basis`: the label it carries in the relevant plaquettes.
    pub fn data_basis(&self, basis: Basis, q: QubitId) -> Basis {
        if self.variant.is_rotated(q.index()) {
            basis.conjugate()
        } else {
            basis
        }
    }

    /// Replace the support of one stabilizer. Schedule entries are left as
    /// they were; intended for exercising the validators.
    pub fn with_support(mut self, id: usize, support: Vec<(QubitId, Pauli)>) -> Self {
        self.stabilizers[id].support = support;
        self
    }

    /// Syndrome and logical effect of a Pauli error on the data qubits.
    pub fn pauli_action(&self, error: &PauliString, basis: Basis) -> PauliAction {
        let mut syndrome = 0u8;
        for (bit, id) in self.relevant_stabilizers(basis).into_iter().enumerate() {
            if self.stabilizers[id].pauli_string().anticommutes(error) {
                syndrome |= 1 << bit;
            }
        }
        // A readout in `basis` is flipped by errors anticommuting with the
        // measured logical operator.
        let logical_flip = self
            .measured_logical(basis)
            .pauli_string()
            .anticommutes(error);
        PauliAction {
            syndrome,
            logical_flip,
        }
    }

    /// Symplectic checks: stabilizers commute pairwise and with both
    /// logicals; the two logicals anticommute.
    pub fn check_commutation(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (i, a) in self.stabilizers.iter().enumerate() {
            for b in &self.stabilizers[i + 1..] {
                let anti = a.pauli_string().anticommutes(&b.pauli_string());
                report.record(!anti, || {
                    format!("stabilizers S{} and S{} anticommute", a.id, b.id)
                });
            }
            for logical in [&self.logical_x, &self.logical_z] {
                let anti = a.pauli_string().anticommutes(&logical.pauli_string());
                report.record(!anti, || {
                    format!(
                        "stabilizer S{} anticommutes with logical {:?}",
                        a.id, logical.label
                    )
                });
            }
        }
        let anti = self
            .logical_x
            .pauli_string()
            .anticommutes(&self.logical_z.pauli_string());
        report.record(anti, || "logical X and logical Z commute".to_string());
        report
    }

    /// Schedule checks: transversal rounds and exact coverage of every
    /// (stabilizer, support qubit) pair by a gate of the matching kind.
    pub fn check_schedule(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        for (r, round) in self.schedule.rounds.iter().enumerate() {
            let mut used = 0u32;
            for g in round {
                let mask = 1 << g.ancilla.index() | 1 << g.data.index();
                report.record(used & mask == 0, || {
                    format!(
                        "round {r}: {} or {} already busy",
                        g.ancilla.label(),
                        g.data.label()
                    )
                });
                used |= mask;
            }
        }
        for s in &self.stabilizers {
            for &(q, label) in &s.support {
                let gates: Vec<_> = self
                    .schedule
                    .rounds
                    .iter()
                    .flatten()
                    .filter(|g| g.stabilizer == s.id && g.data == q)
                    .collect();
                report.record(gates.len() == 1, || {
                    format!(
                        "S{} on {}: {} gates scheduled",
                        s.id,
                        q.label(),
                        gates.len()
                    )
                });
                if let [g] = gates.as_slice() {
                    report.record(g.kind == GateKind::for_label(label), || {
                        format!("S{} on {}: gate kind mismatch", s.id, q.label())
                    });
                }
            }
        }
        report
    }

    pub fn validate(&self) -> ValidationReport {
        self.check_commutation().merge(self.check_schedule())
    }

    /// Stable textual description: stabilizers by id, rounds in order,
    /// then logical supports.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# surface17 layout variant={} stabilizers={} gates={}",
            self.variant.name(),
            self.measured.name(),
            self.scheduled_gate_count()
        );
        for s in &self.stabilizers {
            let support: Vec<String> = s
                .support
                .iter()
                .map(|(q, p)| format!("{p}{}", q.index() + 1))
                .collect();
            let _ = writeln!(
                out,
                "stabilizer {} kind={} ancilla={} weight={} support={}",
                s.id,
                match s.kind {
                    StabilizerKind::White => "white",
                    StabilizerKind::Blue => "blue",
                },
                s.ancilla.label(),
                s.weight(),
                support.join(",")
            );
        }
        for (r, round) in self.schedule.rounds.iter().enumerate() {
            let gates: Vec<String> = round
                .iter()
                .map(|g| format!("{}-{}:{}", g.ancilla.label(), g.data.label(), g.kind.name()))
                .collect();
            let _ = writeln!(out, "round {r} {}", gates.join(" "));
        }
        for l in [&self.logical_x, &self.logical_z] {
            let support: Vec<String> = l
                .support
                .iter()
                .map(|(q, p)| format!("{p}{}", q.index() + 1))
                .collect();
            let _ = writeln!(out, "logical {:?} support={}", l.label, support.join(","));
        }
        out
    }
}

impl Basis {
    /// Readout basis whose decoding uses plaquettes of `kind`.
    pub fn relevant_basis(kind: StabilizerKind) -> Basis {
        match kind {
            StabilizerKind::White => Basis::Z,
            StabilizerKind::Blue => Basis::X,
        }
    }
}
