use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use super::PauliProbs;
use crate::error::{Error, Result};
use crate::pauli::Pauli;

/// Tolerance for trace preservation and Choi positivity.
pub const CPTP_TOLERANCE: f64 = 1e-10;

/// Choi eigenvalues in `[-CLIP, 0)` are integrator noise and clipped to zero.
const EIGEN_CLIP: f64 = 1e-12;

type CMatrix = DMatrix<Complex64>;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub(crate) fn pauli_matrix(p: Pauli) -> CMatrix {
    let (o, l, i) = (c(0.0), c(1.0), Complex64::i());
    let entries = match p {
        Pauli::I => [l, o, o, l],
        Pauli::X => [o, l, l, o],
        Pauli::Y => [o, -i, i, o],
        Pauli::Z => [l, o, o, -l],
    };
    DMatrix::from_row_slice(2, 2, &entries)
}

/// Matrix of a Pauli product where `paulis[k]` acts on local target `k`
/// (bit `k` of the basis index).
pub(crate) fn pauli_product_matrix(paulis: &[Pauli]) -> CMatrix {
    paulis
        .iter()
        .rev()
        .fold(DMatrix::identity(1, 1), |acc, &p| {
            acc.kronecker(&pauli_matrix(p))
        })
}

/// `index` in base 4, least significant digit on target 0.
fn pauli_from_index(mut index: usize, arity: usize) -> Vec<Pauli> {
    const ORDER: [Pauli; 4] = [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z];
    (0..arity)
        .map(|_| {
            let p = ORDER[index % 4];
            index /= 4;
            p
        })
        .collect()
}

fn paulis_anticommute(a: &[Pauli], b: &[Pauli]) -> bool {
    a.iter().zip(b).filter(|(x, y)| x.anticommutes(**y)).count() % 2 == 1
}

/// A completely positive trace-preserving map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumChannel {
    arity: usize,
    kraus: Vec<CMatrix>,
}

impl QuantumChannel {
    /// Build a channel and verify it is CPTP within [`CPTP_TOLERANCE`].
    pub fn new(arity: usize, kraus: Vec<CMatrix>) -> Result<Self> {
        let dim = 1 << arity;
        if arity == 0 || kraus.is_empty() {
            return Err(Error::NotCptp("no Kraus operators".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dim, dim)) {
            return Err(Error::NotCptp(format!(
                "Kraus operator of shape {:?} on {arity} qubit(s)",
                k.shape()
            )));
        }
        let channel = QuantumChannel { arity, kraus };
        channel.check_cptp(CPTP_TOLERANCE)?;
        Ok(channel)
    }

    pub fn identity(arity: usize) -> Self {
        let dim = 1 << arity;
        QuantumChannel {
            arity,
            kraus: vec![DMatrix::identity(dim, dim)],
        }
    }

    /// Single-qubit Pauli channel.
    pub fn pauli(probs: PauliProbs) -> Self {
        let pi = (1.0 - probs.total()).max(0.0);
        let kraus = [
            (pi, Pauli::I),
            (probs.px, Pauli::X),
            (probs.py, Pauli::Y),
            (probs.pz, Pauli::Z),
        ]
        .into_iter()
        .filter(|&(w, _)| w > 0.0)
        .map(|(w, p)| pauli_matrix(p) * c(w.sqrt()))
        .collect();
        QuantumChannel { arity: 1, kraus }
    }

    pub fn unitary(arity: usize, u: CMatrix) -> Result<Self> {
        QuantumChannel::new(arity, vec![u])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        1 << self.arity
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Trace preservation (`sum K^dag K = I`) and Choi positivity.
    pub fn check_cptp(&self, tol: f64) -> Result<()> {
        let dim = self.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for k in &self.kraus {
            sum += k.adjoint() * k;
        }
        let dev = (sum - CMatrix::identity(dim, dim)).camax();
        if dev > tol {
            return Err(Error::NotCptp(format!(
                "trace preservation violated by {dev:.3e}"
            )));
        }
        let min_eig = SymmetricEigen::new(self.choi())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -tol {
            return Err(Error::NotCptp(format!(
                "Choi matrix has eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }

    /// Column-stacking superoperator `S = sum conj(K) (x) K`.
    pub fn superoperator(&self) -> CMatrix {
        let d2 = self.dim() * self.dim();
        let mut s = CMatrix::zeros(d2, d2);
        for k in &self.kraus {
            s += k.conjugate().kronecker(k);
        }
        s
    }

    /// Choi matrix with entries `C[(j,i),(j',i')] = <i|E(|j><j'|)|i'>`.
    pub fn choi(&self) -> CMatrix {
        self.tensor().choi()
    }

    pub fn tensor(&self) -> SuperoperatorTensor {
        SuperoperatorTensor::from_kraus(self.arity, &self.kraus)
    }

    /// Kraus form of the map with column-stacking superoperator `s`, via the
    /// eigendecomposition of its Choi matrix.
    pub fn from_superoperator(arity: usize, s: &CMatrix) -> Result<Self> {
        SuperoperatorTensor::from_superoperator(arity, s).to_channel()
    }

    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(rho.nrows(), rho.ncols());
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    /// Composition: `self` first, then `next`.
    pub fn then(&self, next: &QuantumChannel) -> Result<QuantumChannel> {
        if self.arity != next.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: next.arity,
            });
        }
        let s = next.superoperator() * self.superoperator();
        QuantumChannel::from_superoperator(self.arity, &s)
    }

    /// Pauli transfer matrix `R[a][b] = tr(P_a E(P_b)) / d`, Paulis indexed
    /// in base 4 with digits `I, X, Y, Z` and target 0 least significant.
    pub fn pauli_transfer_matrix(&self) -> DMatrix<f64> {
        let n = 1usize << (2 * self.arity);
        let d = self.dim() as f64;
        let basis: Vec<CMatrix> = (0..n)
            .map(|i| pauli_product_matrix(&pauli_from_index(i, self.arity)))
            .collect();
        let images: Vec<CMatrix> = basis.iter().map(|p| self.apply(p)).collect();
        DMatrix::from_fn(n, n, |a, b| (basis[a].clone() * &images[b]).trace().re / d)
    }

    /// Probabilities of the Pauli channel obtained by twirling, one entry per
    /// Pauli product (same indexing as [`Self::pauli_transfer_matrix`]).
    pub fn twirl_probabilities(&self) -> Vec<f64> {
        let ptm = self.pauli_transfer_matrix();
        let n = ptm.nrows();
        let paulis: Vec<Vec<Pauli>> = (0..n).map(|i| pauli_from_index(i, self.arity)).collect();
        (0..n)
            .map(|p| {
                (0..n)
                    .map(|q| {
                        let sign = if paulis_anticommute(&paulis[p], &paulis[q]) {
                            -1.0
                        } else {
                            1.0
                        };
                        sign * ptm[(q, q)]
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .collect()
    }

    /// Pauli twirl of a single-qubit channel.
    pub fn pauli_twirl(&self) -> Result<PauliProbs> {
        if self.arity != 1 {
            return Err(Error::ArityMismatch {
                expected: 1,
                found: self.arity,
            });
        }
        let p = self.twirl_probabilities();
        Ok(PauliProbs {
            px: p[1],
            py: p[2],
            pz: p[3],
        })
    }

    /// If the transfer matrix is diagonal within `tol`, the channel is a
    /// Pauli channel; return it with weighted Pauli Kraus operators.
    pub fn to_pauli_form(&self, tol: f64) -> Option<QuantumChannel> {
        let ptm = self.pauli_transfer_matrix();
        let n = ptm.nrows();
        let off_diagonal = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .filter(|(a, b)| a != b)
            .map(|(a, b)| ptm[(a, b)].abs())
            .fold(0.0, f64::max);
        if off_diagonal > tol {
            return None;
        }
        let kraus: Vec<CMatrix> = self
            .twirl_probabilities()
            .into_iter()
            .enumerate()
            .filter(|&(_, w)| w > 0.0)
            .map(|(i, w)| pauli_product_matrix(&pauli_from_index(i, self.arity)) * c(w.sqrt()))
            .collect();
        Some(QuantumChannel {
            arity: self.arity,
            kraus,
        })
    }

    /// Whether every `K^dag K` is a multiple of the identity, in which case
    /// branch probabilities do not depend on the state.
    pub fn branch_weights_if_state_independent(&self, tol: f64) -> Option<Vec<f64>> {
        let dim = self.dim();
        self.kraus
            .iter()
            .map(|k| {
                let kk = k.adjoint() * k;
                let w = kk[(0, 0)].re;
                let dev = (kk - CMatrix::identity(dim, dim) * c(w)).camax();
                (dev <= tol).then_some(w)
            })
            .collect()
    }

    /// Fixed-precision listing of Kraus operators and the transfer matrix.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# channel arity={} kraus={}",
            self.arity,
            self.kraus.len()
        );
        for (i, k) in self.kraus.iter().enumerate() {
            let _ = writeln!(out, "kraus {i}");
            for r in 0..k.nrows() {
                let row: Vec<String> = (0..k.ncols())
                    .map(|col| {
                        let z = k[(r, col)];
                        format!("{:+.10e}{:+.10e}i", z.re, z.im)
                    })
                    .collect();
                let _ = writeln!(out, "  {}", row.join(" "));
            }
        }
        let ptm = self.pauli_transfer_matrix();
        let _ = writeln!(out, "ptm");
        for r in 0..ptm.nrows() {
            let row: Vec<String> = (0..ptm.ncols())
                .map(|col| format!("{:+.10e}", ptm[(r, col)]))
                .collect();
            let _ = writeln!(out, "  {}", row.join(" "));
        }
        out
    }
}

/// Channel entries `E_{i j j' i'} = <i| E(|j><j'|) |i'>`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperoperatorTensor {
    arity: usize,
    dim: usize,
    entries: Vec<Complex64>,
}

impl SuperoperatorTensor {
    fn offset(&self, i: usize, j: usize, jp: usize, ip: usize) -> usize {
        ((i * self.dim + j) * self.dim + jp) * self.dim + ip
    }

    pub fn from_kraus(arity: usize, kraus: &[CMatrix]) -> Self {
        let dim = 1 << arity;
        let mut t = SuperoperatorTensor {
            arity,
            dim,
            entries: vec![Complex64::default(); dim.pow(4)],
        };
        for k in kraus {
            for i in 0..dim {
                for j in 0..dim {
                    for jp in 0..dim {
                        for ip in 0..dim {
                            let o = t.offset(i, j, jp, ip);
                            t.entries[o] += k[(i, j)] * k[(ip, jp)].conj();
                        }
                    }
                }
            }
        }
        t
    }

    /// From a column-stacking superoperator: `E_{ijj'i'} = S[i + d i', j + d j']`.
    pub fn from_superoperator(arity: usize, s: &CMatrix) -> Self {
        let dim = 1 << arity;
        let mut t = SuperoperatorTensor {
            arity,
            dim,
            entries: vec![Complex64::default(); dim.pow(4)],
        };
        for i in 0..dim {
            for j in 0..dim {
                for jp in 0..dim {
                    for ip in 0..dim {
                        let o = t.offset(i, j, jp, ip);
                        t.entries[o] = s[(i + dim * ip, j + dim * jp)];
                    }
                }
            }
        }
        t
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize, jp: usize, ip: usize) -> Complex64 {
        self.entries[self.offset(i, j, jp, ip)]
    }

    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        DMatrix::from_fn(d * d, d * d, |row, col| {
            let (j, i) = (row / d, row % d);
            let (jp, ip) = (col / d, col % d);
            self.get(i, j, jp, ip)
        })
    }

    /// Kraus reconstruction from the Choi eigendecomposition.
    pub fn to_channel(&self) -> Result<QuantumChannel> {
        let d = self.dim;
        let choi = self.choi();
        // Hermitize to remove antisymmetric round-off before diagonalizing.
        let choi = (&choi + choi.adjoint()) * c(0.5);
        let eig = SymmetricEigen::new(choi);
        let mut kraus = Vec::new();
        for (idx, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda < -CPTP_TOLERANCE {
                return Err(Error::NotCptp(format!(
                    "Choi eigenvalue {lambda:.3e} below tolerance"
                )));
            }
            let lambda = if lambda < EIGEN_CLIP { 0.0 } else { lambda };
            if lambda == 0.0 {
                continue;
            }
            let v = eig.eigenvectors.column(idx);
            let scale = c(lambda.sqrt());
            kraus.push(DMatrix::from_fn(d, d, |i, j| v[j * d + i] * scale));
        }
        QuantumChannel::new(self.arity, kraus)
    }

    /// Action on a `d x d` operator through the tensor contraction
    /// `out_{i i'} = sum_{j j'} E_{i j j' i'} rho_{j j'}`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, ip| {
            let mut acc = Complex64::default();
            for j in 0..d {
                for jp in 0..d {
                    acc += self.get(i, j, jp, ip) * rho[(j, jp)];
                }
            }
            acc
        })
    }

    pub fn max_abs_diff(&self, other: &SuperoperatorTensor) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn basis_op(d: usize, j: usize, jp: usize) -> CMatrix {
        let mut m = CMatrix::zeros(d, d);
        m[(j, jp)] = c(1.0);
        m
    }

    #[test]
    fn identity_tensor_is_delta() {
        let t = QuantumChannel::identity(1).tensor();
        for i in 0..2 {
            for j in 0..2 {
                for jp in 0..2 {
                    for ip in 0..2 {
                        let expected = if i == j && ip == jp { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(t.get(i, j, jp, ip).re, expected);
                        assert_abs_diff_eq!(t.get(i, j, jp, ip).im, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn bit_flip_tensor_permutes_labels() {
        let flip = QuantumChannel::pauli(PauliProbs {
            px: 1.0,
            py: 0.0,
            pz: 0.0,
        });
        let t = flip.tensor();
        for i in 0..2 {
            for j in 0..2 {
                for jp in 0..2 {
                    for ip in 0..2 {
                        let expected = if i == 1 - j && ip == 1 - jp { 1.0 } else { 0.0 };
                        assert_abs_diff_eq!(t.get(i, j, jp, ip).re, expected);
                    }
                }
            }
        }
    }

    #[test]
    fn near_full_depolarizing_maps_to_maximally_mixed() {
        let g = 0.75 - 1e-12;
        let ch = QuantumChannel::pauli(PauliProbs {
            px: g / 3.0,
            py: g / 3.0,
            pz: g / 3.0,
        });
        let t = ch.tensor();
        // Analytic depolarizing: E(rho) = (1 - 4g/3) rho + (4g/3) tr(rho) I/2.
        let lambda = 1.0 - 4.0 * g / 3.0;
        for j in 0..2 {
            for jp in 0..2 {
                let out = t.apply(&basis_op(2, j, jp));
                for i in 0..2 {
                    for ip in 0..2 {
                        let mut expected = 0.0;
                        if i == j && ip == jp {
                            expected += lambda;
                        }
                        if j == jp && i == ip {
                            expected += (1.0 - lambda) / 2.0;
                        }
                        assert_abs_diff_eq!(out[(i, ip)].re, expected, epsilon = 1e-11);
                        if j == jp {
                            assert_abs_diff_eq!(
                                out[(i, ip)].re,
                                if i == ip { 0.5 } else { 0.0 },
                                epsilon = 1e-11
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn tensor_matches_direct_application() {
        let ch = QuantumChannel::pauli(PauliProbs {
            px: 0.1,
            py: 0.05,
            pz: 0.2,
        });
        let t = ch.tensor();
        let rho = DMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.7),
                Complex64::new(0.1, 0.2),
                Complex64::new(0.1, -0.2),
                c(0.3),
            ],
        );
        assert!((t.apply(&rho) - ch.apply(&rho)).camax() < 1e-14);
    }

    #[test]
    fn superoperator_and_tensor_agree() {
        let ch = QuantumChannel::pauli(PauliProbs {
            px: 0.03,
            py: 0.0,
            pz: 0.11,
        });
        let a = ch.tensor();
        let b = SuperoperatorTensor::from_superoperator(1, &ch.superoperator());
        assert!(a.max_abs_diff(&b) < 1e-15);
    }

    #[test]
    fn kraus_reconstruction_round_trips() {
        let ch = QuantumChannel::pauli(PauliProbs {
            px: 0.02,
            py: 0.01,
            pz: 0.3,
        });
        let t = ch.tensor();
        let rebuilt = t.to_channel().unwrap();
        assert!(rebuilt.tensor().max_abs_diff(&t) < 1e-12);
    }

    #[test]
    fn non_tp_map_is_rejected() {
        let k = pauli_matrix(Pauli::X) * c(0.9);
        assert!(matches!(
            QuantumChannel::new(1, vec![k]),
            Err(Error::NotCptp(_))
        ));
    }

    #[test]
    fn twirl_of_pauli_channel_is_exact() {
        let probs = PauliProbs {
            px: 0.013,
            py: 0.002,
            pz: 0.07,
        };
        let tw = QuantumChannel::pauli(probs).pauli_twirl().unwrap();
        assert!(tw.max_abs_diff(&probs) < 1e-15);
        assert_eq!(
            QuantumChannel::identity(1).pauli_twirl().unwrap(),
            PauliProbs::ZERO
        );
    }

    #[test]
    fn two_qubit_twirl_indexing() {
        // X on target 0 only.
        let x0 = pauli_product_matrix(&[Pauli::X, Pauli::I]);
        let ch = QuantumChannel::unitary(2, x0).unwrap();
        let probs = ch.twirl_probabilities();
        assert_abs_diff_eq!(probs[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(probs.iter().sum::<f64>(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn dump_lists_kraus_and_ptm() {
        let text = QuantumChannel::identity(1).dump();
        assert!(text.starts_with("# channel arity=1 kraus=1"));
        assert!(text.contains("ptm"));
        assert_eq!(text.lines().count(), 1 + 1 + 2 + 1 + 4);
    }
}
