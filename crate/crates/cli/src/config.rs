//! Run configuration: a TOML file (every key optional) overlaid by
//! command-line flags, then validated into typed settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surface17::code_model::{build_surface17, CodeLayout, StabilizerSet, Variant};
use surface17::experiment::{
    DecoderKind, ExperimentConfig, SearchConfig, SuccessCriteria, SuccessRule, SweepConfig,
    SweepMode,
};
use surface17::noise::{validate_noise_ordering, NoiseParams};
use surface17::textfmt::Header;
use surface17::trajectory::ChannelMode;

use crate::error::CliError;

/// Prefix of header lines that echo the effective configuration.
pub const ECHO_PREFIX: &str = "config.";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub p: f64,
    pub m: f64,
    pub g: f64,
    pub t1_over_t2: f64,
    pub t_over_t2: f64,
    /// Accept points where the idle error exceeds the gate error.
    pub allow_ordering_violation: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            p: 0.0125,
            m: 0.0125,
            g: 0.007,
            t1_over_t2: 1e4,
            t_over_t2: 1e-3,
            allow_ordering_violation: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSection {
    pub variant: String,
    pub stabilizers: String,
}

impl Default for LayoutSection {
    fn default() -> Self {
        LayoutSection {
            variant: "fig1b".into(),
            stabilizers: "all8".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub mode: String,
    pub decoder: String,
    /// Samples per basis; defaults depend on the mode.
    pub samples: Option<u64>,
    pub seed: u64,
    pub bootstrap: usize,
    pub alpha: f64,
    pub delta: f64,
    pub rule: String,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let criteria = SuccessCriteria::default();
        SimulationSection {
            mode: "pauli".into(),
            decoder: "lut".into(),
            samples: None,
            seed: 0,
            bootstrap: ExperimentConfig::default().bootstrap_replicates,
            alpha: criteria.alpha,
            delta: criteria.delta,
            rule: criteria.rule.name().into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSection {
    pub g_lo: f64,
    pub g_hi: f64,
    pub resolution: f64,
}

impl Default for SearchSection {
    fn default() -> Self {
        let s = SearchConfig::default();
        SearchSection {
            g_lo: s.g_lo,
            g_hi: s.g_hi,
            resolution: s.resolution,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub mode: String,
    pub grid: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            mode: "fig3".into(),
            grid: vec![0.0, 0.005, 0.0125, 0.02, 0.03, 0.04],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

/// Everything a command may need, as written in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub noise: NoiseSection,
    pub layout: LayoutSection,
    pub simulation: SimulationSection,
    pub search: SearchSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

/// Flag values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub samples: Option<u64>,
    pub mode: Option<String>,
    pub decoder: Option<String>,
    pub variant: Option<String>,
    pub stabilizers: Option<String>,
    pub out: Option<PathBuf>,
    pub p: Option<f64>,
    pub m: Option<f64>,
    pub pm: Option<f64>,
    pub g: Option<f64>,
    pub t1_over_t2: Option<f64>,
    pub t_over_t2: Option<f64>,
    pub allow_ordering_violation: bool,
    pub sweep_mode: Option<String>,
    pub grid: Option<Vec<f64>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl RunConfig {
    /// Parse TOML text. Output files are accepted too: their echoed
    /// `# config.section.key = value` lines are turned back into TOML.
    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let toml_text = if text.lines().any(|l| echo_line(l).is_some()) {
            echoed_to_toml(text)
        } else {
            text.to_string()
        };
        toml::from_str(&toml_text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_text(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        let sim = &mut self.simulation;
        set(&mut sim.seed, o.seed);
        if o.samples.is_some() {
            sim.samples = o.samples;
        }
        set(&mut sim.mode, o.mode.clone());
        set(&mut sim.decoder, o.decoder.clone());
        set(&mut self.layout.variant, o.variant.clone());
        set(&mut self.layout.stabilizers, o.stabilizers.clone());
        if o.out.is_some() {
            self.output.path = o.out.clone();
        }
        let noise = &mut self.noise;
        set(&mut noise.p, o.pm.or(o.p));
        set(&mut noise.m, o.pm.or(o.m));
        set(&mut noise.g, o.g);
        set(&mut noise.t1_over_t2, o.t1_over_t2);
        set(&mut noise.t_over_t2, o.t_over_t2);
        noise.allow_ordering_violation |= o.allow_ordering_violation;
        set(&mut self.sweep.mode, o.sweep_mode.clone());
        set(&mut self.sweep.grid, o.grid.clone());
    }

    /// Check every invariant and produce typed settings.
    pub fn validate(&self) -> Result<Settings, CliError> {
        let bad = |key: &str, why: String| CliError::Config(format!("{key}: {why}"));
        let enum_field = |key: &str, e: String| bad(key, e);

        let params = NoiseParams::new(
            self.noise.p,
            self.noise.m,
            self.noise.g,
            self.noise.t1_over_t2,
            self.noise.t_over_t2,
        );
        params.validate().map_err(|e| bad("noise", e.to_string()))?;
        let ordering = validate_noise_ordering(&params);
        if !ordering.passed() && !self.noise.allow_ordering_violation {
            return Err(bad(
                "noise",
                format!(
                    "idle error exceeds gate error ({}); set noise.allow_ordering_violation to proceed",
                    ordering.failures.join("; ")
                ),
            ));
        }

        let variant: Variant = self
            .layout
            .variant
            .parse()
            .map_err(|e| enum_field("layout.variant", e))?;
        let stabilizers: StabilizerSet = self
            .layout
            .stabilizers
            .parse()
            .map_err(|e| enum_field("layout.stabilizers", e))?;

        let sim = &self.simulation;
        let mode: ChannelMode = sim
            .mode
            .parse()
            .map_err(|e: surface17::Error| bad("simulation.mode", e.to_string()))?;
        let decoder: DecoderKind = sim
            .decoder
            .parse()
            .map_err(|e: surface17::Error| bad("simulation.decoder", e.to_string()))?;
        let rule: SuccessRule = sim
            .rule
            .parse()
            .map_err(|e: surface17::Error| bad("simulation.rule", e.to_string()))?;
        let samples = sim.samples.unwrap_or(match mode {
            ChannelMode::Pauli => 1_000_000,
            ChannelMode::General => 100_000,
        });
        if samples == 0 {
            return Err(bad("simulation.samples", "must be positive".into()));
        }
        if !(sim.alpha > 0.0 && sim.alpha < 1.0) {
            return Err(bad(
                "simulation.alpha",
                format!("{} outside (0, 1)", sim.alpha),
            ));
        }
        if !(0.0..1.0).contains(&sim.delta) {
            return Err(bad(
                "simulation.delta",
                format!("{} outside [0, 1)", sim.delta),
            ));
        }

        let s = &self.search;
        if !(s.resolution > 0.0) {
            return Err(bad("search.resolution", "must be positive".into()));
        }
        if !(0.0 <= s.g_lo && s.g_lo < s.g_hi && s.g_hi < 0.75) {
            return Err(bad(
                "search",
                format!(
                    "bracket [{}, {}] must satisfy 0 <= g_lo < g_hi < 3/4",
                    s.g_lo, s.g_hi
                ),
            ));
        }

        let sweep_mode: SweepMode = self
            .sweep
            .mode
            .parse()
            .map_err(|e: surface17::Error| bad("sweep.mode", e.to_string()))?;
        if self.sweep.grid.is_empty() {
            return Err(bad("sweep.grid", "grid is empty".into()));
        }
        if let Some(x) = self.sweep.grid.iter().find(|x| !(0.0..1.0).contains(*x)) {
            return Err(bad("sweep.grid", format!("{x} is not a probability")));
        }
        if sweep_mode == SweepMode::Fig5 {
            if let Some(x) = self.sweep.grid.iter().find(|&&x| x >= 0.75) {
                return Err(bad("sweep.grid", format!("g = {x} >= 3/4")));
            }
        }

        let experiment = ExperimentConfig {
            channel_mode: mode,
            decoder,
            n_samples: samples,
            seed: sim.seed,
            criteria: SuccessCriteria {
                delta: sim.delta,
                alpha: sim.alpha,
                rule,
            },
            bootstrap_replicates: sim.bootstrap,
            workers: None,
        };
        let search = SearchConfig {
            g_lo: s.g_lo,
            g_hi: s.g_hi,
            resolution: s.resolution,
        };
        Ok(Settings {
            params,
            variant,
            stabilizers,
            experiment,
            sweep: SweepConfig {
                mode: sweep_mode,
                grid: self.sweep.grid.clone(),
                template: params,
                experiment,
                search,
            },
            out: self.output.path.clone(),
            echo: self.clone(),
        })
    }

    /// Effective configuration as `config.section.key` header entries.
    pub fn echo_into(&self, header: &mut Header) {
        let text = toml::to_string(self).unwrap_or_default();
        let mut section = String::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.to_string();
            } else if let Some((k, v)) = line.split_once('=') {
                header.push(format!("{ECHO_PREFIX}{section}.{}", k.trim()), v.trim());
            }
        }
    }
}

fn echo_line(line: &str) -> Option<(&str, &str, &str)> {
    let rest = line.trim().strip_prefix('#')?.trim();
    let (key, value) = rest.split_once('=')?;
    let (section, key) = key.trim().strip_prefix(ECHO_PREFIX)?.split_once('.')?;
    Some((section, key, value.trim()))
}

fn echoed_to_toml(text: &str) -> String {
    let mut sections: Vec<(String, Vec<String>)> = Vec::new();
    for (section, key, value) in text.lines().filter_map(echo_line) {
        let line = format!("{key} = {value}");
        match sections.iter_mut().find(|(s, _)| s == section) {
            Some((_, lines)) => lines.push(line),
            None => sections.push((section.to_string(), vec![line])),
        }
    }
    sections
        .into_iter()
        .map(|(s, lines)| format!("[{s}]\n{}\n", lines.join("\n")))
        .collect()
}

/// Validated, typed configuration.
#[derive(Clone, Debug)]
pub struct Settings {
    pub params: NoiseParams,
    pub variant: Variant,
    pub stabilizers: StabilizerSet,
    pub experiment: ExperimentConfig,
    pub sweep: SweepConfig,
    pub out: Option<PathBuf>,
    /// The configuration these settings came from, for output headers.
    pub echo: RunConfig,
}

impl Settings {
    pub fn layout(&self) -> CodeLayout {
        build_surface17(self.variant, self.stabilizers)
    }
}
