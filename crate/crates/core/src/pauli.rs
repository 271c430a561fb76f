//! Single-qubit Pauli labels and bit-packed Pauli strings.
//!
//! A Pauli on qubit `q` is stored as the pair of bits `(x, z)` at position
//! `q`; `Y` carries both. Phases are dropped throughout: every consumer only
//! needs commutation relations and measurement flips.

use std::fmt;

/// Measurement / preparation basis of a qubit or of the logical readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Basis {
    Z,
    X,
}

impl Basis {
    pub const BOTH: [Basis; 2] = [Basis::Z, Basis::X];

    pub fn name(self) -> &'static str {
        match self {
            Basis::Z => "z",
            Basis::X => "x",
        }
    }

    /// The basis exchanged under a Hadamard.
    pub fn conjugate(self) -> Basis {
        match self {
            Basis::Z => Basis::X,
            Basis::X => Basis::Z,
        }
    }

    /// The Pauli whose eigenstates span this basis.
    pub fn pauli(self) -> Pauli {
        match self {
            Basis::Z => Pauli::Z,
            Basis::X => Pauli::X,
        }
    }
}

impl fmt::Display for Basis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Basis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "z" => Ok(Basis::Z),
            "x" => Ok(Basis::X),
            other => Err(format!("unknown basis `{other}` (expected z or x)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub const NON_IDENTITY: [Pauli; 3] = [Pauli::X, Pauli::Y, Pauli::Z];

    pub fn from_bits(x: bool, z: bool) -> Pauli {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn x_bit(self) -> bool {
        matches!(self, Pauli::X | Pauli::Y)
    }

    pub fn z_bit(self) -> bool {
        matches!(self, Pauli::Z | Pauli::Y)
    }

    /// Conjugation by a Hadamard (`X <-> Z`, `Y` fixed up to sign).
    pub fn hadamard(self) -> Pauli {
        Pauli::from_bits(self.z_bit(), self.x_bit())
    }

    pub fn anticommutes(self, other: Pauli) -> bool {
        (self.x_bit() & other.z_bit()) ^ (self.z_bit() & other.x_bit())
    }

    /// Whether this error flips the outcome of a measurement in `basis`.
    pub fn flips(self, basis: Basis) -> bool {
        self.anticommutes(basis.pauli())
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

impl fmt::Display for Pauli {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// A phase-free Pauli string on up to 32 qubits.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct PauliString {
    pub x: u32,
    pub z: u32,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn single(qubit: usize, pauli: Pauli) -> Self {
        let mut s = Self::IDENTITY;
        s.set(qubit, pauli);
        s
    }

    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (usize, Pauli)>,
    {
        let mut s = Self::IDENTITY;
        for (q, p) in terms {
            s.mul_assign_single(q, p);
        }
        s
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, pauli: Pauli) {
        let bit = 1u32 << qubit;
        self.x = (self.x & !bit) | if pauli.x_bit() { bit } else { 0 };
        self.z = (self.z & !bit) | if pauli.z_bit() { bit } else { 0 };
    }

    pub fn mul_assign_single(&mut self, qubit: usize, pauli: Pauli) {
        if pauli.x_bit() {
            self.x ^= 1 << qubit;
        }
        if pauli.z_bit() {
            self.z ^= 1 << qubit;
        }
    }

    /// Product up to phase.
    pub fn mul(&self, other: &PauliString) -> PauliString {
        PauliString {
            x: self.x ^ other.x,
            z: self.z ^ other.z,
        }
    }

    /// Symplectic inner product: `true` iff the two strings anticommute.
    pub fn anticommutes(&self, other: &PauliString) -> bool {
        ((self.x & other.z).count_ones() + (self.z & other.x).count_ones()) % 2 == 1
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Render the first `n` qubits as a string of `IXYZ` symbols.
    pub fn render(&self, n: usize) -> String {
        (0..n).map(|q| self.get(q).symbol()).collect()
    }
}
