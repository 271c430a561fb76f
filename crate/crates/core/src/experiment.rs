//! Fidelities, the two-part success test, threshold search over the gate
//! noise and parameter sweeps.
//!
//! The single-qubit baseline is computed exactly. Code fidelities come from
//! sampled joint counts in both bases; every reported fidelity is the
//! minimum over the two bases. The ratio `f = (1 - F_code2) / (1 - F_code1)`
//! compares decoding both syndrome rounds with decoding the final one only.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::code_model::CodeLayout;
use crate::decoders::{lut_fidelity, marginalize_to_final_round, LookupTable, TomitaSvoreDecoder};
use crate::error::{invalid, Error, Result};
use crate::frame::{FrameSimulator, JointCounts};
use crate::noise::{validate_noise_ordering, NoiseParams, PauliNoiseModel};
use crate::pauli::Basis;
use crate::stats::{
    bootstrap, percentile_interval, quantile, wilson_interval, wilson_lower_bound, Interval,
};
use crate::textfmt::{field, split_header, Header};
pub use crate::trajectory::ChannelMode;
use crate::trajectory::{TrajectoryConfig, TrajectorySimulator};

/// Decoder used for the two-round fidelity.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DecoderKind {
    /// Lookup table built from the sampled distribution (optimal).
    #[default]
    Lut,
    /// Minimum-weight matching on the space-time defect graph.
    TomitaSvore,
}

impl DecoderKind {
    pub fn name(self) -> &'static str {
        match self {
            DecoderKind::Lut => "lut",
            DecoderKind::TomitaSvore => "tomita_svore",
        }
    }
}

impl std::fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lut" => Ok(DecoderKind::Lut),
            "ts" | "tomita_svore" | "tomita-svore" => Ok(DecoderKind::TomitaSvore),
            other => Err(invalid(
                "decoder",
                format!("`{other}` (expected lut or ts)"),
            )),
        }
    }
}

/// Which parts of the success test apply.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SuccessRule {
    /// Beat the single qubit and show a significant two-round advantage.
    #[default]
    Full,
    /// Only beat the single qubit.
    FidelityOnly,
}

impl SuccessRule {
    pub fn name(self) -> &'static str {
        match self {
            SuccessRule::Full => "full",
            SuccessRule::FidelityOnly => "fidelity_only",
        }
    }
}

impl std::str::FromStr for SuccessRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(SuccessRule::Full),
            "fidelity_only" => Ok(SuccessRule::FidelityOnly),
            other => Err(invalid(
                "success rule",
                format!("`{other}` (expected full or fidelity_only)"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SuccessCriteria {
    /// Required margin below one for the ratio.
    pub delta: f64,
    /// Significance level of both tests.
    pub alpha: f64,
    pub rule: SuccessRule,
}

impl Default for SuccessCriteria {
    fn default() -> Self {
        SuccessCriteria {
            delta: 0.02,
            alpha: 0.01,
            rule: SuccessRule::Full,
        }
    }
}

/// Outcome of the success test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Success,
    /// The code does not beat the single qubit significantly.
    NotBetterThanSingle,
    /// The ratio is not significantly below `1 - delta`.
    NoRoundAdvantage,
    /// `F_code1 = 1`, so the ratio is undefined.
    UndefinedRatio,
}

impl Verdict {
    pub fn is_success(&self) -> bool {
        *self == Verdict::Success
    }

    pub fn code(&self) -> &'static str {
        match self {
            Verdict::Success => "success",
            Verdict::NotBetterThanSingle => "fail_fidelity",
            Verdict::NoRoundAdvantage => "fail_ratio",
            Verdict::UndefinedRatio => "undefined_ratio",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        [
            Verdict::Success,
            Verdict::NotBetterThanSingle,
            Verdict::NoRoundAdvantage,
            Verdict::UndefinedRatio,
        ]
        .into_iter()
        .find(|v| v.code() == code)
    }
}

/// Settings shared by every fidelity evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub channel_mode: ChannelMode,
    pub decoder: DecoderKind,
    /// Samples per basis.
    pub n_samples: u64,
    pub seed: u64,
    pub criteria: SuccessCriteria,
    pub bootstrap_replicates: usize,
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            channel_mode: ChannelMode::Pauli,
            decoder: DecoderKind::Lut,
            n_samples: 1_000_000,
            seed: 0,
            criteria: SuccessCriteria::default(),
            bootstrap_replicates: 400,
            workers: None,
        }
    }
}

/// Probability that one stored qubit is read out in the eigenstate it was
/// prepared in: preparation flip, four storage segments, readout flip.
pub fn single_qubit_fidelity(params: &NoiseParams, basis: Basis, mode: ChannelMode) -> Result<f64> {
    params.validate()?;
    match mode {
        ChannelMode::Pauli => {
            let model = PauliNoiseModel::from_params(params)?;
            let idle = model.idle.flip_probability(basis);
            let flips = [
                model.prep.flip_probability(basis),
                idle,
                idle,
                idle,
                idle,
                model.meas.flip_probability(basis),
            ];
            // Probability of an even number of independent flips.
            let bias: f64 = flips.iter().map(|q| 1.0 - 2.0 * q).product();
            Ok((1.0 + bias) / 2.0)
        }
        ChannelMode::General => {
            let config = TrajectoryConfig::general(params)?;
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let psi = match basis {
                Basis::Z => [1.0, 0.0],
                Basis::X => [h, h],
            };
            let psi = DMatrix::from_fn(2, 1, |r, _| Complex64::new(psi[r], 0.0));
            let mut rho = &psi * psi.adjoint();
            rho = config.prep.apply(&rho);
            for _ in 0..4 {
                rho = config.idle.apply(&rho);
            }
            rho = config.meas.apply(&rho);
            Ok((psi.adjoint() * rho * &psi)[(0, 0)].re.clamp(0.0, 1.0))
        }
    }
}

/// `min` over both bases.
pub fn single_qubit_fidelity_min(params: &NoiseParams, mode: ChannelMode) -> Result<f64> {
    Ok(
        single_qubit_fidelity(params, Basis::Z, mode)?.min(single_qubit_fidelity(
            params,
            Basis::X,
            mode,
        )?),
    )
}

/// Joint counts from the simulator matching `mode`: the Pauli frame for
/// Pauli channels, trajectories otherwise.
pub fn simulate_counts(
    layout: &CodeLayout,
    params: &NoiseParams,
    basis: Basis,
    mode: ChannelMode,
    n_samples: u64,
    seed: u64,
    workers: Option<usize>,
) -> Result<JointCounts> {
    let mut counts = match mode {
        ChannelMode::Pauli => FrameSimulator::new(layout, params, basis)?
            .sample_many(params, n_samples, seed, workers)?,
        ChannelMode::General => {
            let config = TrajectoryConfig::general(params)?;
            TrajectorySimulator::new(layout, &config, basis)?
                .sample_many(params, n_samples, seed, workers)?
        }
    };
    counts.meta.push("variant", layout.variant().name());
    counts
        .meta
        .push("stabilizers", layout.measured_set().name());
    counts.meta.push("channel_mode", mode.name());
    Ok(counts)
}

/// Two-round scoring: the in-sample optimal table, fixed tables loaded from
/// elsewhere, or the matching decoders built once per basis.
enum TwoRound {
    Optimal,
    Fixed(Vec<LookupTable>),
    Matching([TomitaSvoreDecoder; 2]),
}

impl TwoRound {
    fn new(layout: &CodeLayout, decoder: DecoderKind) -> Self {
        match decoder {
            DecoderKind::Lut => TwoRound::Optimal,
            DecoderKind::TomitaSvore => {
                TwoRound::Matching(Basis::BOTH.map(|b| TomitaSvoreDecoder::new(layout, b)))
            }
        }
    }

    fn fidelity(&self, counts: &JointCounts) -> Result<f64> {
        match self {
            TwoRound::Optimal => lut_fidelity(counts),
            TwoRound::Fixed(tables) => tables
                .iter()
                .find(|t| t.basis() == counts.basis)
                .ok_or_else(|| invalid("tables", format!("no table for basis {}", counts.basis)))?
                .fidelity_on(counts),
            TwoRound::Matching(ds) => ds[(counts.basis == Basis::X) as usize].fidelity(counts),
        }
    }
}

/// Fidelities of one basis with two-sided Wilson intervals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisFidelities {
    pub basis: Basis,
    pub f_single: f64,
    pub f_code1: f64,
    pub f_code2: f64,
    pub code1_ci: Interval,
    pub code2_ci: Interval,
    pub n_samples: u64,
}

fn hits(fidelity: f64, n: u64) -> u64 {
    (fidelity * n as f64).round() as u64
}

impl BasisFidelities {
    /// Score sampled counts. `F_code1` always uses the optimal table on the
    /// final-round marginal.
    pub fn from_counts(
        counts: &JointCounts,
        layout: &CodeLayout,
        f_single: f64,
        decoder: DecoderKind,
        confidence: f64,
    ) -> Result<Self> {
        Self::score(
            counts,
            f_single,
            &TwoRound::new(layout, decoder),
            confidence,
        )
    }

    fn score(
        counts: &JointCounts,
        f_single: f64,
        scorer: &TwoRound,
        confidence: f64,
    ) -> Result<Self> {
        let n = counts.total();
        let f_code2 = scorer.fidelity(counts)?;
        let f_code1 = lut_fidelity(&marginalize_to_final_round(counts))?;
        Ok(BasisFidelities {
            basis: counts.basis,
            f_single,
            f_code1,
            f_code2,
            code1_ci: wilson_interval(hits(f_code1, n), n, confidence)?,
            code2_ci: wilson_interval(hits(f_code2, n), n, confidence)?,
            n_samples: n,
        })
    }

    /// One-sided lower confidence bound on `F_code2`.
    pub fn code2_lower_bound(&self, confidence: f64) -> Result<f64> {
        wilson_lower_bound(
            hits(self.f_code2, self.n_samples),
            self.n_samples,
            confidence,
        )
    }
}

/// Simulate one basis and score it.
pub fn code_fidelity(
    layout: &CodeLayout,
    params: &NoiseParams,
    basis: Basis,
    mode: ChannelMode,
    decoder: DecoderKind,
    n_samples: u64,
    seed: u64,
) -> Result<BasisFidelities> {
    let counts = simulate_counts(layout, params, basis, mode, n_samples, seed, None)?;
    let f_single = single_qubit_fidelity(params, basis, mode)?;
    BasisFidelities::from_counts(&counts, layout, f_single, decoder, 0.99)
}

/// `(1 - F_code2) / (1 - F_code1)`, undefined when `F_code1 = 1`.
pub fn ratio(f_code2: f64, f_code1: f64) -> Option<f64> {
    (f_code1 < 1.0).then(|| (1.0 - f_code2) / (1.0 - f_code1))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub params: NoiseParams,
    pub channel_mode: ChannelMode,
    pub decoder: DecoderKind,
    pub seed: u64,
    pub per_basis: Vec<BasisFidelities>,
    pub f_single: f64,
    pub f_code1: f64,
    pub f_code2: f64,
    pub f: Option<f64>,
    /// Two-sided bootstrap interval of `f` at confidence `1 - alpha`.
    pub f_ci: Option<Interval>,
    /// Sorted bootstrap replicates of `f`.
    pub f_replicates: Vec<f64>,
    pub verdict: Verdict,
}

impl ExperimentResult {
    /// Samples per basis.
    pub fn n_samples(&self) -> u64 {
        self.per_basis
            .iter()
            .map(|b| b.n_samples)
            .min()
            .unwrap_or(0)
    }

    /// Upper one-sided bound on `f` at the given confidence.
    pub fn f_upper_bound(&self, confidence: f64) -> Option<f64> {
        quantile(&self.f_replicates, confidence)
    }

    /// Lower one-sided bound on the basis-minimum `F_code2`.
    pub fn code2_lower_bound(&self, confidence: f64) -> Result<f64> {
        self.per_basis
            .iter()
            .map(|b| b.code2_lower_bound(confidence))
            .try_fold(f64::INFINITY, |acc, x| Ok(acc.min(x?)))
    }
}

/// Apply the success test to a scored result.
pub fn success_predicate(result: &ExperimentResult, criteria: &SuccessCriteria) -> Result<Verdict> {
    let confidence = 1.0 - criteria.alpha;
    if criteria.rule == SuccessRule::Full && result.f.is_none() {
        return Ok(Verdict::UndefinedRatio);
    }
    if result.code2_lower_bound(confidence)? <= result.f_single {
        return Ok(Verdict::NotBetterThanSingle);
    }
    if criteria.rule == SuccessRule::FidelityOnly {
        return Ok(Verdict::Success);
    }
    match result.f_upper_bound(confidence) {
        Some(upper) if upper < 1.0 - criteria.delta => Ok(Verdict::Success),
        _ => Ok(Verdict::NoRoundAdvantage),
    }
}

/// Score counts of both bases (in either order) as one experiment point.
pub fn evaluate_counts(
    layout: &CodeLayout,
    counts: [&JointCounts; 2],
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    evaluate_scored(counts, config, TwoRound::new(layout, config.decoder))
}

/// Like [`evaluate_counts`], but decode both rounds with previously built
/// lookup tables (one per basis) instead of tables fitted to `counts`.
/// With tables built from the same counts this reproduces the in-sample
/// result; with tables from an independent sample it gives the held-out one.
pub fn evaluate_counts_with_tables(
    counts: [&JointCounts; 2],
    tables: Vec<LookupTable>,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    let config = ExperimentConfig {
        decoder: DecoderKind::Lut,
        ..*config
    };
    evaluate_scored(counts, &config, TwoRound::Fixed(tables))
}

fn evaluate_scored(
    counts: [&JointCounts; 2],
    config: &ExperimentConfig,
    scorer: TwoRound,
) -> Result<ExperimentResult> {
    if counts[0].basis == counts[1].basis {
        return Err(invalid("counts", "need one data set per basis"));
    }
    let params = counts[0].params;
    let confidence = 1.0 - config.criteria.alpha;
    let per_basis = counts
        .iter()
        .map(|c| {
            let f_single = single_qubit_fidelity(&params, c.basis, config.channel_mode)?;
            BasisFidelities::score(c, f_single, &scorer, confidence)
        })
        .collect::<Result<Vec<_>>>()?;
    let min =
        |get: fn(&BasisFidelities) -> f64| per_basis.iter().map(get).fold(f64::INFINITY, f64::min);
    let (f_single, f_code1, f_code2) =
        (min(|b| b.f_single), min(|b| b.f_code1), min(|b| b.f_code2));
    let f = ratio(f_code2, f_code1);

    let decoder = config.decoder;
    let f_replicates = if f.is_some() && config.bootstrap_replicates > 0 {
        bootstrap(
            &counts,
            config.bootstrap_replicates,
            config.seed,
            |resampled| {
                let mut f1 = f64::INFINITY;
                let mut f2 = f64::INFINITY;
                for c in resampled {
                    f1 = f1.min(lut_fidelity(&marginalize_to_final_round(c)).ok()?);
                    f2 = f2.min(scorer.fidelity(c).ok()?);
                }
                ratio(f2, f1)
            },
        )
    } else {
        Vec::new()
    };
    let f_ci = percentile_interval(&f_replicates, confidence);

    let mut result = ExperimentResult {
        params,
        channel_mode: config.channel_mode,
        decoder,
        seed: config.seed,
        per_basis,
        f_single,
        f_code1,
        f_code2,
        f,
        f_ci,
        f_replicates,
        verdict: Verdict::UndefinedRatio,
    };
    result.verdict = success_predicate(&result, &config.criteria)?;
    Ok(result)
}

/// Simulate both bases at `params` and score them. Points where idle noise
/// exceeds gate noise are rejected with [`Error::NoiseOrdering`].
pub fn evaluate(
    layout: &CodeLayout,
    params: &NoiseParams,
    config: &ExperimentConfig,
) -> Result<ExperimentResult> {
    params.validate()?;
    let idle = params.idle_probs()?.total();
    if !validate_noise_ordering(params).passed() {
        return Err(Error::NoiseOrdering {
            idle,
            gate: params.g,
        });
    }
    let z = simulate_counts(
        layout,
        params,
        Basis::Z,
        config.channel_mode,
        config.n_samples,
        config.seed,
        config.workers,
    )?;
    let x = simulate_counts(
        layout,
        params,
        Basis::X,
        config.channel_mode,
        config.n_samples,
        config.seed,
        config.workers,
    )?;
    evaluate_counts(layout, [&z, &x], config)
}

/// Bracket and resolution of a threshold search.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchConfig {
    /// Lower end of the bracket; raised to the idle error if smaller.
    pub g_lo: f64,
    pub g_hi: f64,
    pub resolution: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            g_lo: 0.0,
            g_hi: 0.03,
            resolution: 5e-4,
        }
    }
}

/// One evaluated gate-noise value during a search.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe {
    pub g: f64,
    pub verdict: Verdict,
    pub f_code2: f64,
    pub f: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdPoint {
    pub p_equals_m: f64,
    /// Largest gate noise with success, to the search resolution.
    pub g_star: Option<f64>,
    /// Result at `g_star`.
    pub at_threshold: Option<ExperimentResult>,
    /// Final bracket: success at the low end, failure at the high end.
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub probes: Vec<Probe>,
    /// Failure at the lower end but success further up.
    pub non_monotone: bool,
    /// Success at the upper end of the bracket.
    pub saturated: bool,
}

/// Highest gate noise for which the experiment succeeds at `p = m`.
pub fn threshold_search(
    layout: &CodeLayout,
    p_equals_m: f64,
    template: &NoiseParams,
    config: &ExperimentConfig,
    search: &SearchConfig,
) -> Result<ThresholdPoint> {
    if !(search.resolution > 0.0) || !(search.g_hi > search.g_lo) {
        return Err(invalid(
            "search",
            format!(
                "bracket [{}, {}] at resolution {}",
                search.g_lo, search.g_hi, search.resolution
            ),
        ));
    }
    let base = template.with_pm(p_equals_m);
    let idle = base.with_g(search.g_hi).idle_probs()?.total();
    let mut lo = search.g_lo.max(idle);
    let mut hi = search.g_hi;
    let mut probes = Vec::new();
    let mut point = ThresholdPoint {
        p_equals_m,
        g_star: None,
        at_threshold: None,
        bracket: (lo, hi),
        iterations: 0,
        probes: Vec::new(),
        non_monotone: false,
        saturated: false,
    };
    if lo > hi {
        return Ok(point);
    }
    let mut probe = |g: f64| -> Result<ExperimentResult> {
        let r = evaluate(layout, &base.with_g(g), config)?;
        probes.push(Probe {
            g,
            verdict: r.verdict.clone(),
            f_code2: r.f_code2,
            f: r.f,
        });
        Ok(r)
    };

    let mut best = probe(lo)?;
    if !best.verdict.is_success() {
        // Success is not monotone here: scan upwards at the resolution and
        // keep the highest success. F_code2 only falls as g grows, so once
        // it is significantly below F_single nothing further can succeed.
        let steps = ((hi - lo) / search.resolution).floor() as usize;
        let mut found = None;
        for k in 1..=steps {
            let g = lo + k as f64 * search.resolution;
            let r = probe(g)?;
            let code2_high = r
                .per_basis
                .iter()
                .map(|b| b.code2_ci.high)
                .fold(f64::INFINITY, f64::min);
            if r.verdict.is_success() {
                found = Some((g, r));
            } else if code2_high < r.f_single {
                break;
            }
        }
        match found {
            None => {
                point.probes = probes;
                return Ok(point);
            }
            Some((g, r)) => {
                point.non_monotone = true;
                point.saturated = g + search.resolution > hi;
                lo = g;
                hi = (g + search.resolution).min(hi);
                best = r;
            }
        }
    } else {
        let top = probe(hi)?;
        if top.verdict.is_success() {
            point.saturated = true;
            lo = hi;
            best = top;
        }
    }

    if !point.saturated {
        while hi - lo > search.resolution {
            let mid = 0.5 * (lo + hi);
            let r = probe(mid)?;
            point.iterations += 1;
            if r.verdict.is_success() {
                lo = mid;
                best = r;
            } else {
                hi = mid;
            }
        }
    }
    point.g_star = Some(lo);
    point.bracket = (lo, hi);
    point.at_threshold = Some(best);
    point.probes = probes;
    Ok(point)
}

/// What a sweep computes at each grid point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SweepMode {
    /// Threshold in `g` against `p = m` (threshold curve).
    Fig3,
    /// Same search, reporting the ratio at threshold.
    Fig4,
    /// `p = m = g` with both decoders.
    Fig5,
}

impl SweepMode {
    pub fn name(self) -> &'static str {
        match self {
            SweepMode::Fig3 => "fig3",
            SweepMode::Fig4 => "fig4",
            SweepMode::Fig5 => "fig5",
        }
    }
}

impl std::str::FromStr for SweepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig3" => Ok(SweepMode::Fig3),
            "fig4" => Ok(SweepMode::Fig4),
            "fig5" => Ok(SweepMode::Fig5),
            other => Err(invalid(
                "sweep mode",
                format!("`{other}` (expected fig3, fig4 or fig5)"),
            )),
        }
    }
}

/// One line of a results table.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub params: NoiseParams,
    pub channel_mode: ChannelMode,
    pub decoder: DecoderKind,
    /// `z`, `x` or `min`.
    pub basis: String,
    pub f_single: Option<f64>,
    pub f_code1: Option<f64>,
    pub f_code2: Option<f64>,
    pub f: Option<f64>,
    pub f_ci: Option<Interval>,
    pub code2_ci: Option<Interval>,
    pub verdict: Option<Verdict>,
    pub g_star: Option<f64>,
    pub seed: u64,
    pub n_samples: u64,
    /// Free text, used for per-point errors.
    pub note: String,
}

pub const RESULT_COLUMNS: &str = "p,m,g,T1_over_T2,t_over_T2,channel_mode,decoder,basis,F_single,F_code1,F_code2,f,f_ci_low,f_ci_high,F_code2_ci_low,F_code2_ci_high,success,g_star,seed,n_samples,note";

impl ResultRow {
    fn empty(params: NoiseParams, config: &ExperimentConfig) -> Self {
        ResultRow {
            params,
            channel_mode: config.channel_mode,
            decoder: config.decoder,
            basis: "min".into(),
            f_single: None,
            f_code1: None,
            f_code2: None,
            f: None,
            f_ci: None,
            code2_ci: None,
            verdict: None,
            g_star: None,
            seed: config.seed,
            n_samples: config.n_samples,
            note: String::new(),
        }
    }

    /// Rows for each basis followed by the `min` row.
    pub fn from_result(result: &ExperimentResult) -> Vec<ResultRow> {
        let base = ResultRow {
            params: result.params,
            channel_mode: result.channel_mode,
            decoder: result.decoder,
            basis: String::new(),
            f_single: None,
            f_code1: None,
            f_code2: None,
            f: None,
            f_ci: None,
            code2_ci: None,
            verdict: None,
            g_star: None,
            seed: result.seed,
            n_samples: result.n_samples(),
            note: String::new(),
        };
        let mut rows: Vec<ResultRow> = result
            .per_basis
            .iter()
            .map(|b| ResultRow {
                basis: b.basis.name().to_ascii_lowercase(),
                f_single: Some(b.f_single),
                f_code1: Some(b.f_code1),
                f_code2: Some(b.f_code2),
                f: ratio(b.f_code2, b.f_code1),
                code2_ci: Some(b.code2_ci),
                n_samples: b.n_samples,
                ..base.clone()
            })
            .collect();
        rows.push(ResultRow::summary(result));
        rows
    }

    /// The basis-minimum row of a result.
    pub fn summary(result: &ExperimentResult) -> ResultRow {
        let worst = result
            .per_basis
            .iter()
            .min_by(|a, b| a.f_code2.total_cmp(&b.f_code2));
        ResultRow {
            params: result.params,
            channel_mode: result.channel_mode,
            decoder: result.decoder,
            basis: "min".into(),
            f_single: Some(result.f_single),
            f_code1: Some(result.f_code1),
            f_code2: Some(result.f_code2),
            f: result.f,
            f_ci: result.f_ci,
            code2_ci: worst.map(|b| b.code2_ci),
            verdict: Some(result.verdict.clone()),
            g_star: None,
            seed: result.seed,
            n_samples: result.n_samples(),
            note: String::new(),
        }
    }

    fn render(&self) -> String {
        // Shortest round-trip formatting keeps tables lossless.
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let p = &self.params;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            p.p,
            p.m,
            p.g,
            p.t1_over_t2,
            p.t_over_t2,
            self.channel_mode,
            self.decoder,
            self.basis,
            opt(self.f_single),
            opt(self.f_code1),
            opt(self.f_code2),
            opt(self.f),
            opt(self.f_ci.map(|i| i.low)),
            opt(self.f_ci.map(|i| i.high)),
            opt(self.code2_ci.map(|i| i.low)),
            opt(self.code2_ci.map(|i| i.high)),
            self.verdict.as_ref().map(Verdict::code).unwrap_or(""),
            self.g_star.map(|g| g.to_string()).unwrap_or_default(),
            self.seed,
            self.n_samples,
            self.note.replace([',', '\n'], ";"),
        )
    }

    fn parse(line_no: usize, line: &str) -> Result<ResultRow> {
        let cols: Vec<&str> = line.splitn(21, ',').collect();
        let col = |i: usize| cols.get(i).copied();
        let opt = |i: usize, what: &str| -> Result<Option<f64>> {
            match col(i).map(str::trim) {
                None | Some("") => Ok(None),
                raw => field(line_no, raw, what).map(Some),
            }
        };
        let interval = |lo: Option<f64>, hi: Option<f64>| match (lo, hi) {
            (Some(low), Some(high)) => Some(Interval { low, high }),
            _ => None,
        };
        let parse_enum = |i: usize, what: &str| -> Result<String> {
            col(i)
                .map(|s| s.trim().to_string())
                .ok_or_else(|| Error::Parse {
                    line: line_no,
                    reason: format!("missing column `{what}`"),
                })
        };
        let verdict = match col(16).map(str::trim) {
            None | Some("") => None,
            Some(code) => Some(Verdict::from_code(code).ok_or_else(|| Error::Parse {
                line: line_no,
                reason: format!("unknown success code `{code}`"),
            })?),
        };
        let bad = |what: &str, e: Error| Error::Parse {
            line: line_no,
            reason: format!("column `{what}`: {e}"),
        };
        Ok(ResultRow {
            params: NoiseParams::new(
                field(line_no, col(0), "p")?,
                field(line_no, col(1), "m")?,
                field(line_no, col(2), "g")?,
                field(line_no, col(3), "T1_over_T2")?,
                field(line_no, col(4), "t_over_T2")?,
            ),
            channel_mode: parse_enum(5, "channel_mode")?
                .parse()
                .map_err(|e| bad("channel_mode", e))?,
            decoder: parse_enum(6, "decoder")?
                .parse()
                .map_err(|e| bad("decoder", e))?,
            basis: parse_enum(7, "basis")?,
            f_single: opt(8, "F_single")?,
            f_code1: opt(9, "F_code1")?,
            f_code2: opt(10, "F_code2")?,
            f: opt(11, "f")?,
            f_ci: interval(opt(12, "f_ci_low")?, opt(13, "f_ci_high")?),
            code2_ci: interval(opt(14, "F_code2_ci_low")?, opt(15, "F_code2_ci_high")?),
            verdict,
            g_star: opt(17, "g_star")?,
            seed: field(line_no, col(18), "seed")?,
            n_samples: field(line_no, col(19), "n_samples")?,
            note: col(20).unwrap_or("").trim().to_string(),
        })
    }
}

/// Header plus rows, in grid order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultsTable {
    pub header: Header,
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn new(header: Header) -> Self {
        ResultsTable {
            header,
            rows: Vec::new(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = self.header.render();
        out.push_str(RESULT_COLUMNS);
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.render());
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, body) = split_header(text)?;
        let mut lines = body.into_iter();
        match lines.next() {
            Some((_, cols)) if cols == RESULT_COLUMNS => {}
            Some((line, cols)) => {
                return Err(Error::Parse {
                    line,
                    reason: format!("unexpected column line `{cols}`"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 0,
                    reason: "missing column line".into(),
                })
            }
        }
        let rows = lines
            .map(|(n, line)| ResultRow::parse(n, line))
            .collect::<Result<Vec<_>>>()?;
        Ok(ResultsTable { header, rows })
    }
}

/// Settings of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub mode: SweepMode,
    /// Values of `p = m` (and of `g` in [`SweepMode::Fig5`]).
    pub grid: Vec<f64>,
    pub template: NoiseParams,
    pub experiment: ExperimentConfig,
    pub search: SearchConfig,
}

/// Run a sweep; errors at individual grid points go into the row notes.
pub fn sweep(layout: &CodeLayout, config: &SweepConfig) -> Result<ResultsTable> {
    if config.grid.is_empty() {
        return Err(invalid("grid", "sweep grid is empty"));
    }
    let mut header = Header::new("surface17 results");
    header
        .push("sweep", config.mode.name())
        .push("variant", layout.variant().name())
        .push("stabilizers", layout.measured_set().name())
        .push("t1_over_t2", config.template.t1_over_t2)
        .push("t_over_t2", config.template.t_over_t2)
        .push("channel_mode", config.experiment.channel_mode)
        .push("decoder", config.experiment.decoder)
        .push("seed", config.experiment.seed)
        .push("samples", config.experiment.n_samples)
        .push("alpha", config.experiment.criteria.alpha)
        .push("delta", config.experiment.criteria.delta)
        .push("rule", config.experiment.criteria.rule.name())
        .push("bootstrap", config.experiment.bootstrap_replicates)
        .push("grid", join(&config.grid));
    if config.mode != SweepMode::Fig5 {
        header
            .push("g_lo", config.search.g_lo)
            .push("g_hi", config.search.g_hi)
            .push("resolution", config.search.resolution);
    }
    let mut table = ResultsTable::new(header);

    for &x in &config.grid {
        match config.mode {
            SweepMode::Fig3 | SweepMode::Fig4 => {
                let params = config.template.with_pm(x);
                match threshold_search(
                    layout,
                    x,
                    &config.template,
                    &config.experiment,
                    &config.search,
                ) {
                    Ok(point) => {
                        let mut row = match &point.at_threshold {
                            Some(r) => ResultRow::summary(r),
                            None => {
                                let mut row = ResultRow::empty(params, &config.experiment);
                                row.note = "no success in bracket".into();
                                row
                            }
                        };
                        row.g_star = point.g_star;
                        let mut notes = vec![format!("probes={}", point.probes.len())];
                        if point.non_monotone {
                            notes.push("non_monotone".into());
                        }
                        if point.saturated {
                            notes.push("saturated".into());
                        }
                        if !row.note.is_empty() {
                            notes.insert(0, row.note.clone());
                        }
                        row.note = notes.join(" ");
                        table.rows.push(row);
                    }
                    Err(e) => {
                        let mut row = ResultRow::empty(params, &config.experiment);
                        row.note = format!("error: {e}");
                        table.rows.push(row);
                    }
                }
            }
            SweepMode::Fig5 => {
                let params = config.template.with_pm(x).with_g(x);
                for decoder in [DecoderKind::Lut, DecoderKind::TomitaSvore] {
                    let cfg = ExperimentConfig {
                        decoder,
                        ..config.experiment
                    };
                    match evaluate(layout, &params, &cfg) {
                        Ok(r) => table.rows.push(ResultRow::summary(&r)),
                        Err(e) => {
                            let mut row = ResultRow::empty(params, &cfg);
                            row.note = format!("error: {e}");
                            table.rows.push(row);
                        }
                    }
                }
            }
        }
    }
    Ok(table)
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

/// One plotted point: `y` with its interval.
#[derive(Clone, Debug, PartialEq)]
pub struct SeriesPoint {
    pub x: f64,
    pub y: f64,
    pub y_low: f64,
    pub y_high: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<SeriesPoint>,
}

/// Plot series for a figure from a sweep table.
///
/// * `fig3`: `g_star` against `p = m`, interval up to the next resolution step.
/// * `fig4`: `f` at threshold against `p = m`.
/// * `fig5`: `f` against `p = m = g`, one series per decoder.
pub fn plot_series(table: &ResultsTable, mode: SweepMode) -> Result<Vec<Series>> {
    let rows = table.rows.iter().filter(|r| r.basis == "min");
    match mode {
        SweepMode::Fig3 => {
            let resolution: f64 = table.header.parse("resolution")?;
            let points = rows
                .filter_map(|r| {
                    r.g_star.map(|g| SeriesPoint {
                        x: r.params.p,
                        y: g,
                        y_low: g,
                        y_high: g + resolution,
                    })
                })
                .collect();
            Ok(vec![Series {
                name: "g_star".into(),
                points,
            }])
        }
        SweepMode::Fig4 => {
            let points = rows
                .filter(|r| r.g_star.is_some())
                .filter_map(|r| ratio_point(r, r.params.p))
                .collect();
            Ok(vec![Series {
                name: "f".into(),
                points,
            }])
        }
        SweepMode::Fig5 => {
            let rows: Vec<&ResultRow> = rows.collect();
            Ok([DecoderKind::Lut, DecoderKind::TomitaSvore]
                .into_iter()
                .map(|d| Series {
                    name: d.name().into(),
                    points: rows
                        .iter()
                        .filter(|r| r.decoder == d)
                        .filter_map(|r| ratio_point(r, r.params.p))
                        .collect(),
                })
                .collect())
        }
    }
}

fn ratio_point(row: &ResultRow, x: f64) -> Option<SeriesPoint> {
    let f = row.f?;
    let ci = row.f_ci.unwrap_or(Interval { low: f, high: f });
    Some(SeriesPoint {
        x,
        y: f,
        y_low: ci.low,
        y_high: ci.high,
    })
}

/// Plain-text rendering of plot series.
pub fn render_series(series: &[Series], header: &Header) -> String {
    let mut out = header.render();
    for s in series {
        let _ = writeln!(out, "# series = {}", s.name);
        out.push_str("x,y,y_low,y_high\n");
        for p in &s.points {
            let _ = writeln!(out, "{},{:.8},{:.8},{:.8}", p.x, p.y, p.y_low, p.y_high);
        }
    }
    out
}
