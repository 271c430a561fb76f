//! Noise processes: Pauli approximations of idle decoherence and gate
//! depolarization, Lindblad-derived general channels, and tools to inspect
//! channels (CPTP checks, superoperator tensor, Pauli transfer matrix, twirl).
//!
//! Times are measured in units of the total storage time `t`, so a parameter
//! point is fully described by the dimensionless ratios `t/T2` and `T1/T2`.

mod channel;
mod lindblad;

pub use channel::{QuantumChannel, SuperoperatorTensor, CPTP_TOLERANCE};
pub use lindblad::{
    depolarizing_lindblad_ops, idle_lindblad_ops, lindblad_superoperator, sigma_minus, sigma_plus,
    solve_lindblad_channel, time_calibration, TimeCalibration,
};

use crate::circuit::NoiseSite;
use crate::code_model::ValidationReport;
use crate::error::{invalid, Error, Result};

/// Physical noise parameters of one experiment point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseParams {
    /// Preparation flip probability (bit and phase flips each with `p`).
    pub p: f64,
    /// Measurement flip probability (bit and phase flips each with `m`).
    pub m: f64,
    /// Per-qubit depolarizing strength at each entangling gate.
    pub g: f64,
    pub t1_over_t2: f64,
    pub t_over_t2: f64,
}

impl NoiseParams {
    pub const fn new(p: f64, m: f64, g: f64, t1_over_t2: f64, t_over_t2: f64) -> Self {
        NoiseParams {
            p,
            m,
            g,
            t1_over_t2,
            t_over_t2,
        }
    }

    /// Noiseless point (no flips, no gate noise, no storage time).
    pub const fn noiseless() -> Self {
        NoiseParams::new(0.0, 0.0, 0.0, 1.0, 0.0)
    }

    pub fn with_g(self, g: f64) -> Self {
        NoiseParams { g, ..self }
    }

    pub fn with_pm(self, pm: f64) -> Self {
        NoiseParams {
            p: pm,
            m: pm,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("m", self.m), ("g", self.g)] {
            if !(0.0..1.0).contains(&v) {
                return Err(invalid(name, format!("{v} is not a probability in [0, 1)")));
            }
        }
        if self.g >= 0.75 {
            return Err(invalid(
                "g",
                format!(
                    "{} >= 3/4: the depolarizing rate -(1/8) ln(1 - 4g/3) is undefined",
                    self.g
                ),
            ));
        }
        if !(self.t1_over_t2 > 0.0) || !self.t1_over_t2.is_finite() {
            return Err(invalid(
                "t1_over_t2",
                format!("{} must be positive", self.t1_over_t2),
            ));
        }
        if !(self.t_over_t2 >= 0.0) || !self.t_over_t2.is_finite() {
            return Err(invalid(
                "t_over_t2",
                format!("{} must be non-negative", self.t_over_t2),
            ));
        }
        Ok(())
    }

    /// Pauli probabilities of one idle segment of length `t/4`.
    pub fn idle_probs(&self) -> Result<PauliProbs> {
        pauli_idle_probs(self.t_over_t2, self.t1_over_t2)
    }
}

/// Probabilities of applying X, Y and Z.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PauliProbs {
    pub px: f64,
    pub py: f64,
    pub pz: f64,
}

impl PauliProbs {
    pub const ZERO: PauliProbs = PauliProbs {
        px: 0.0,
        py: 0.0,
        pz: 0.0,
    };

    pub fn new(px: f64, py: f64, pz: f64) -> Result<Self> {
        let probs = PauliProbs { px, py, pz };
        for (name, v) in [("px", px), ("py", py), ("pz", pz)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("{v} outside [0, 1]")));
            }
        }
        if probs.total() > 1.0 + 1e-12 {
            return Err(invalid(
                "pauli probabilities",
                format!("sum {} > 1", probs.total()),
            ));
        }
        Ok(probs)
    }

    /// Total error probability `d = px + py + pz`.
    pub fn total(&self) -> f64 {
        self.px + self.py + self.pz
    }

    /// Independent bit flip and phase flip, each with probability `q`.
    pub fn independent_flips(q: f64) -> Self {
        PauliProbs {
            px: q * (1.0 - q),
            py: q * q,
            pz: q * (1.0 - q),
        }
    }

    /// Probability that this error flips a measurement in `basis`.
    pub fn flip_probability(&self, basis: crate::pauli::Basis) -> f64 {
        match basis {
            crate::pauli::Basis::Z => self.px + self.py,
            crate::pauli::Basis::X => self.pz + self.py,
        }
    }

    /// Conjugation by a Hadamard exchanges the X and Z probabilities.
    pub fn hadamard(&self) -> Self {
        PauliProbs {
            px: self.pz,
            py: self.py,
            pz: self.px,
        }
    }

    pub fn max_abs_diff(&self, other: &PauliProbs) -> f64 {
        (self.px - other.px)
            .abs()
            .max((self.py - other.py).abs())
            .max((self.pz - other.pz).abs())
    }
}

/// Pauli approximation of amplitude damping plus dephasing over one of the
/// four storage segments:
/// `dx = dy = (1 - exp(-t/(4 T1)))/4`, `dz = (1 - exp(-t/(4 T2)))/2 - dx`.
pub fn pauli_idle_probs(t_over_t2: f64, t1_over_t2: f64) -> Result<PauliProbs> {
    if !(t_over_t2 >= 0.0) || !(t1_over_t2 > 0.0) {
        return Err(invalid(
            "idle ratios",
            format!("t/T2 = {t_over_t2}, T1/T2 = {t1_over_t2}"),
        ));
    }
    // -expm1 keeps full precision for the tiny exponents of fast gates.
    let dx = -(-t_over_t2 / (4.0 * t1_over_t2)).exp_m1() / 4.0;
    let dz = -(-t_over_t2 / 4.0).exp_m1() / 2.0 - dx;
    if dz < 0.0 {
        return Err(invalid(
            "t1_over_t2",
            format!("dz = {dz:.3e} < 0: T1/T2 = {t1_over_t2} is outside the physical regime"),
        ));
    }
    Ok(PauliProbs {
        px: dx,
        py: dx,
        pz: dz,
    })
}

/// Single-qubit depolarizing noise: each Pauli with probability `g/3`.
pub fn depolarizing_probs(g: f64) -> Result<PauliProbs> {
    if !(0.0..0.75).contains(&g) {
        return Err(invalid("g", format!("{g} outside [0, 3/4)")));
    }
    let q = g / 3.0;
    Ok(PauliProbs {
        px: q,
        py: q,
        pz: q,
    })
}

/// Lindblad rates reproducing the Pauli model, with the evolution time of
/// every idle segment and gate-noise application.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LindbladRates {
    pub gamma: f64,
    pub phi: f64,
    pub omega: f64,
    /// Evolution duration in units of `t`.
    pub duration: f64,
}

/// `gamma = 1/(16 T1)`, `phi = (1/(8 T2) - gamma)/2`,
/// `omega = -(1/8) ln(1 - 4g/3)`, all in units of `1/t`.
pub fn lindblad_rates(params: &NoiseParams) -> Result<LindbladRates> {
    params.validate()?;
    if params.t1_over_t2 < 0.5 {
        return Err(invalid(
            "t1_over_t2",
            format!(
                "{} < 1/2 makes the dephasing rate negative",
                params.t1_over_t2
            ),
        ));
    }
    // In units of t: 1/T2 = t/T2, 1/T1 = (t/T2)/(T1/T2).
    let inv_t2 = params.t_over_t2;
    let inv_t1 = params.t_over_t2 / params.t1_over_t2;
    let gamma = inv_t1 / 16.0;
    let phi = 0.5 * (inv_t2 / 8.0 - gamma);
    let omega = -(-4.0 * params.g / 3.0).ln_1p() / 8.0;
    Ok(LindbladRates {
        gamma,
        phi: phi.max(0.0),
        omega,
        duration: time_calibration().duration,
    })
}

/// Passes iff the idle error per segment does not exceed the gate error,
/// `d <= g`, so gated qubits never see less noise than idle ones.
pub fn validate_noise_ordering(params: &NoiseParams) -> ValidationReport {
    let mut report = ValidationReport {
        checked: 1,
        failures: Vec::new(),
    };
    match params.idle_probs() {
        Ok(idle) if idle.total() <= params.g => {}
        Ok(idle) => report.failures.push(
            Error::NoiseOrdering {
                idle: idle.total(),
                gate: params.g,
            }
            .to_string(),
        ),
        Err(e) => report.failures.push(e.to_string()),
    }
    report
}

/// Pauli-channel description of every noise location in the circuit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliNoiseModel {
    pub prep: PauliProbs,
    pub gate: PauliProbs,
    pub idle: PauliProbs,
    pub meas: PauliProbs,
}

impl PauliNoiseModel {
    pub fn from_params(params: &NoiseParams) -> Result<Self> {
        params.validate()?;
        Ok(PauliNoiseModel {
            prep: PauliProbs::independent_flips(params.p),
            gate: depolarizing_probs(params.g)?,
            idle: params.idle_probs()?,
            meas: PauliProbs::independent_flips(params.m),
        })
    }

    pub fn probs_at(&self, site: NoiseSite) -> PauliProbs {
        match site {
            NoiseSite::Prep => self.prep,
            NoiseSite::Gate => self.gate,
            NoiseSite::Idle => self.idle,
            NoiseSite::Meas => self.meas,
        }
    }

    pub fn noiseless() -> Self {
        PauliNoiseModel {
            prep: PauliProbs::ZERO,
            gate: PauliProbs::ZERO,
            idle: PauliProbs::ZERO,
            meas: PauliProbs::ZERO,
        }
    }
}
