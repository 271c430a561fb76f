use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::channel::pauli_matrix;
use super::{pauli_idle_probs, LindbladRates, QuantumChannel};
use crate::error::{Error, Result};
use crate::pauli::Pauli;

type CMatrix = DMatrix<Complex64>;

/// Lowering operator `|0><1|`.
pub fn sigma_minus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(0, 1)] = Complex64::new(1.0, 0.0);
    m
}

/// Raising operator `|1><0|`.
pub fn sigma_plus() -> CMatrix {
    let mut m = CMatrix::zeros(2, 2);
    m[(1, 0)] = Complex64::new(1.0, 0.0);
    m
}

fn scaled(m: CMatrix, rate: f64) -> CMatrix {
    m * Complex64::new(rate.sqrt(), 0.0)
}

/// Amplitude damping in both directions plus dephasing:
/// `sqrt(gamma) s+`, `sqrt(gamma) s-`, `sqrt(phi) sz`.
pub fn idle_lindblad_ops(rates: &LindbladRates) -> Vec<CMatrix> {
    vec![
        scaled(sigma_plus(), rates.gamma),
        scaled(sigma_minus(), rates.gamma),
        scaled(pauli_matrix(Pauli::Z), rates.phi),
    ]
}

/// `sqrt(omega) s_i` for `i` in x, y, z.
pub fn depolarizing_lindblad_ops(omega: f64) -> Vec<CMatrix> {
    [Pauli::X, Pauli::Y, Pauli::Z]
        .into_iter()
        .map(|p| scaled(pauli_matrix(p), omega))
        .collect()
}

/// Generator of `d rho/dt = sum_k L rho L^dag - {L^dag L, rho}/2` acting on
/// column-stacked density matrices; the Hamiltonian is zero.
pub fn lindblad_superoperator(ops: &[CMatrix]) -> Result<CMatrix> {
    let dim = ops.first().map_or(0, |l| l.nrows());
    if dim == 0 || ops.iter().any(|l| l.shape() != (dim, dim)) {
        return Err(Error::InvalidParameter {
            name: "lindblad operators",
            reason: "operators must be non-empty and share one square shape".into(),
        });
    }
    let id = CMatrix::identity(dim, dim);
    let mut gen = CMatrix::zeros(dim * dim, dim * dim);
    for l in ops {
        let ldl = l.adjoint() * l;
        gen += l.conjugate().kronecker(l);
        gen -= id.kronecker(&ldl) * Complex64::new(0.5, 0.0);
        gen -= ldl.transpose().kronecker(&id) * Complex64::new(0.5, 0.0);
    }
    Ok(gen)
}

/// Integrate the Lindblad equation for `duration` and return the resulting
/// channel in Kraus form. Channels whose transfer matrix is diagonal are
/// returned with weighted Pauli Kraus operators.
pub fn solve_lindblad_channel(ops: &[CMatrix], duration: f64) -> Result<QuantumChannel> {
    if !(duration >= 0.0) || !duration.is_finite() {
        return Err(Error::InvalidParameter {
            name: "duration",
            reason: format!("{duration} is not a finite non-negative time"),
        });
    }
    let gen = lindblad_superoperator(ops)?;
    let arity = gen.nrows().trailing_zeros() as usize / 2;
    let propagator = (gen * Complex64::new(duration, 0.0)).exp();
    if propagator
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NotCptp("matrix exponential did not converge".into()));
    }
    let channel = QuantumChannel::from_superoperator(arity, &propagator)?;
    Ok(channel.to_pauli_form(1e-12).unwrap_or(channel))
}

/// Evolution time per channel application that makes the Lindblad rates
/// reproduce the Pauli-approximation probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeCalibration {
    /// Duration in units of `t` actually used for every application.
    pub duration: f64,
    /// Factor applied to the initial guess `tau = t`.
    pub scale: f64,
    /// Worst relative twirl mismatch at `tau = t`.
    pub error_unscaled: f64,
    /// Worst relative twirl mismatch at the calibrated duration.
    pub error_calibrated: f64,
}

const CALIBRATION_T_OVER_T2: f64 = 1e-3;
const CALIBRATION_T1_OVER_T2: f64 = 1e4;
const CALIBRATION_TOLERANCE: f64 = 0.05;

fn idle_twirl_error(duration: f64) -> Result<(f64, f64)> {
    let target = pauli_idle_probs(CALIBRATION_T_OVER_T2, CALIBRATION_T1_OVER_T2)?;
    let inv_t2 = CALIBRATION_T_OVER_T2;
    let gamma = inv_t2 / CALIBRATION_T1_OVER_T2 / 16.0;
    let rates = LindbladRates {
        gamma,
        phi: 0.5 * (inv_t2 / 8.0 - gamma),
        omega: 0.0,
        duration,
    };
    let twirl = solve_lindblad_channel(&idle_lindblad_ops(&rates), duration)?.pauli_twirl()?;
    let rel = |a: f64, b: f64| (a - b).abs() / b;
    let error = rel(twirl.px, target.px)
        .max(rel(twirl.py, target.py))
        .max(rel(twirl.pz, target.pz));
    // Transverse coherence left by the channel: 1 - 2 (px + pz).
    let coherence = -2.0 * (twirl.px + twirl.pz);
    Ok((error, coherence))
}

fn calibrate() -> Result<TimeCalibration> {
    let (error_unscaled, log_coherence_guess) = idle_twirl_error(1.0)?;
    if error_unscaled <= CALIBRATION_TOLERANCE {
        return Ok(TimeCalibration {
            duration: 1.0,
            scale: 1.0,
            error_unscaled,
            error_calibrated: error_unscaled,
        });
    }
    // Coherence decays as exp(-k tau); match the target exp(-t/(4 T2)).
    let target_log = -CALIBRATION_T_OVER_T2 / 4.0;
    let scale = target_log / log_coherence_guess.ln_1p();
    let (error_calibrated, _) = idle_twirl_error(scale)?;
    if error_calibrated > CALIBRATION_TOLERANCE {
        return Err(Error::NotCptp(format!(
            "time calibration failed: residual mismatch {error_calibrated:.3e}"
        )));
    }
    Ok(TimeCalibration {
        duration: scale,
        scale,
        error_unscaled,
        error_calibrated,
    })
}

/// Calibrated evolution time, computed once per process.
pub fn time_calibration() -> TimeCalibration {
    static CALIBRATION: OnceLock<TimeCalibration> = OnceLock::new();
    *CALIBRATION.get_or_init(|| calibrate().expect("idle-channel time calibration"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::{depolarizing_probs, lindblad_rates, NoiseParams, CPTP_TOLERANCE};
    use approx::assert_relative_eq;

    #[test]
    fn zero_rates_give_identity() {
        let rates = LindbladRates {
            gamma: 0.0,
            phi: 0.0,
            omega: 0.0,
            duration: 3.0,
        };
        let ch = solve_lindblad_channel(&idle_lindblad_ops(&rates), 3.0).unwrap();
        let tw = ch.pauli_twirl().unwrap();
        assert!(tw.total() < 1e-15);
        let rho = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.6, 0.0),
                Complex64::new(0.2, 0.3),
                Complex64::new(0.2, -0.3),
                Complex64::new(0.4, 0.0),
            ],
        );
        assert!((ch.apply(&rho) - &rho).camax() < 1e-14);
    }

    #[test]
    fn pure_dephasing_matches_closed_form() {
        let phi = 0.37;
        let tau = 0.8;
        let ops = vec![scaled(pauli_matrix(Pauli::Z), phi)];
        let ch = solve_lindblad_channel(&ops, tau).unwrap();
        let rho = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0.5, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.5, 0.0),
            ],
        );
        let out = ch.apply(&rho);
        let decay = (-2.0 * phi * tau).exp();
        assert_relative_eq!(out[(0, 1)].re, 0.5 * decay, max_relative = 1e-12);
        assert_relative_eq!(out[(0, 0)].re, 0.5, max_relative = 1e-12);
        assert_relative_eq!(out[(1, 1)].re, 0.5, max_relative = 1e-12);

        let tw = ch.pauli_twirl().unwrap();
        assert_relative_eq!(tw.pz, (1.0 - decay) / 2.0, max_relative = 1e-12);
        assert!(tw.px.abs() < 1e-15);
    }

    #[test]
    fn calibration_rescales_to_match_pauli_model() {
        let cal = time_calibration();
        assert!(cal.error_unscaled > 0.05, "tau = t should not match");
        assert!(cal.error_calibrated < 1e-6);
        assert_relative_eq!(cal.scale, 2.0, max_relative = 1e-8);
    }

    #[test]
    fn depolarizing_twirl_calibration_identity() {
        for g in [0.0, 1e-4, 0.001, 0.007, 0.02, 0.1, 0.5] {
            let params = NoiseParams::new(0.0, 0.0, g, 1e4, 1e-3);
            let rates = lindblad_rates(&params).unwrap();
            let ch =
                solve_lindblad_channel(&depolarizing_lindblad_ops(rates.omega), rates.duration)
                    .unwrap();
            ch.check_cptp(CPTP_TOLERANCE).unwrap();
            let tw = ch.pauli_twirl().unwrap();
            let want = depolarizing_probs(g).unwrap();
            assert!(tw.max_abs_diff(&want) < 1e-8, "g = {g}: {tw:?}");
        }
    }

    #[test]
    fn idle_twirl_matches_pauli_approximation() {
        for (t, t1) in [(1e-3, 1e4), (1e-3, 1e2), (1e-2, 3.0), (1e-4, 0.75)] {
            let params = NoiseParams::new(0.0, 0.0, 0.0, t1, t);
            let rates = lindblad_rates(&params).unwrap();
            let ch = solve_lindblad_channel(&idle_lindblad_ops(&rates), rates.duration).unwrap();
            ch.check_cptp(CPTP_TOLERANCE).unwrap();
            let tw = ch.pauli_twirl().unwrap();
            let want = params.idle_probs().unwrap();
            assert_relative_eq!(tw.px, want.px, max_relative = 0.05);
            assert_relative_eq!(tw.pz, want.pz, max_relative = 0.05);
        }
    }

    #[test]
    fn damping_only_channel_relaxes_populations() {
        // One-sided decay as a sanity check of the generator convention.
        let ops = vec![scaled(sigma_minus(), 2.0)];
        let ch = solve_lindblad_channel(&ops, 5.0).unwrap();
        let mut excited = DMatrix::zeros(2, 2);
        excited[(1, 1)] = Complex64::new(1.0, 0.0);
        let out = ch.apply(&excited);
        assert_relative_eq!(out[(1, 1)].re, (-10.0f64).exp(), max_relative = 1e-9);
        assert!(ch.to_pauli_form(1e-12).is_none());
    }
}
