use std::fmt::Write as _;
use std::path::Path;

use surface17::circuit::NoiseSite;
use surface17::code_model::{build_surface17, CodeLayout};
use surface17::decoders::{self, LookupTable};
use surface17::experiment::{
    evaluate_counts, evaluate_counts_with_tables, plot_series, render_series, simulate_counts,
    sweep as run_sweep, ResultRow, ResultsTable, SweepConfig, SweepMode,
};
use surface17::frame::JointCounts;
use surface17::noise::CPTP_TOLERANCE;
use surface17::pauli::Basis;
use surface17::textfmt::Header;
use surface17::trajectory::{ChannelMode, TrajectoryConfig};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::{emit, read, with_suffix};

pub struct Context {
    pub settings: Settings,
    /// Arguments of this invocation, shell-quoted.
    pub invocation: String,
}

impl Context {
    fn stamp(&self, header: &mut Header) {
        header.push("command", format!("surface17 {}", self.invocation));
        self.settings.echo.echo_into(header);
    }

    fn header(&self, title: &str) -> Header {
        let mut h = Header::new(title);
        self.stamp(&mut h);
        h
    }

    fn out(&self) -> Option<&Path> {
        self.settings.out.as_deref()
    }
}

fn load_counts(path: &Path) -> Result<JointCounts, CliError> {
    JointCounts::from_text(&read(path)?).map_err(|e| CliError::in_file(path, e))
}

/// Layout recorded in a counts file, falling back to the configured one.
fn layout_of(ctx: &Context, counts: &JointCounts) -> Result<CodeLayout, CliError> {
    let s = &ctx.settings;
    let variant = match counts.meta.get("variant") {
        Some(v) => v.parse().map_err(CliError::Parse)?,
        None => s.variant,
    };
    let stabilizers = match counts.meta.get("stabilizers") {
        Some(v) => v.parse().map_err(CliError::Parse)?,
        None => s.stabilizers,
    };
    Ok(build_surface17(variant, stabilizers))
}

pub fn simulate(ctx: &Context, bases: Vec<Basis>) -> Result<(), CliError> {
    let s = &ctx.settings;
    if bases.len() > 1 && ctx.out().is_none() {
        return Err(CliError::Config(
            "simulating both bases needs --out (files get _z and _x suffixes)".into(),
        ));
    }
    let layout = s.layout();
    for basis in bases.iter().copied() {
        let e = &s.experiment;
        let mut counts = simulate_counts(
            &layout,
            &s.params,
            basis,
            e.channel_mode,
            e.n_samples,
            e.seed,
            e.workers,
        )?;
        ctx.stamp(&mut counts.meta);
        let path = match ctx.out() {
            Some(p) if bases.len() > 1 => Some(with_suffix(p, basis.name())),
            other => other.map(Path::to_path_buf),
        };
        emit(path.as_deref(), &counts.to_text())?;
    }
    Ok(())
}

pub fn build_lut(ctx: &Context, counts_path: &Path) -> Result<(), CliError> {
    let mut table = decoders::build_lut(&load_counts(counts_path)?);
    table
        .source
        .meta
        .push("source", counts_path.display().to_string());
    ctx.stamp(&mut table.source.meta);
    emit(ctx.out(), &table.to_text())
}

fn load_lut(path: &Path) -> Result<LookupTable, CliError> {
    LookupTable::from_text(&read(path)?).map_err(|e| CliError::in_file(path, e))
}

fn result_table(ctx: &Context, rows: Vec<ResultRow>, extra: &[(&str, String)]) -> ResultsTable {
    let mut header = ctx.header("surface17 results");
    for (k, v) in extra {
        header.push(*k, v);
    }
    ResultsTable { header, rows }
}

pub fn fidelity(
    ctx: &Context,
    counts: Option<&[std::path::PathBuf]>,
    luts: Option<&[std::path::PathBuf]>,
) -> Result<(), CliError> {
    let s = &ctx.settings;
    let (result, sources) = match counts {
        Some(paths) => {
            let loaded = paths
                .iter()
                .map(|p| load_counts(p))
                .collect::<Result<Vec<_>, _>>()?;
            let [a, b] = [&loaded[0], &loaded[1]];
            if a.basis == b.basis {
                return Err(CliError::Config(format!(
                    "both counts files hold basis {}; need one z and one x",
                    a.basis
                )));
            }
            if a.params != b.params {
                return Err(CliError::Config(
                    "counts files were sampled at different noise parameters".into(),
                ));
            }
            // Score with the mode and seed the counts were produced with.
            let mut config = s.experiment;
            if let Some(mode) = a.meta.get("channel_mode") {
                config.channel_mode = mode.parse::<ChannelMode>()?;
            }
            config.seed = a.seed;
            let result = match luts {
                Some(lut_paths) => {
                    let tables = lut_paths
                        .iter()
                        .map(|p| load_lut(p))
                        .collect::<Result<Vec<_>, _>>()?;
                    evaluate_counts_with_tables([a, b], tables, &config)?
                }
                None => evaluate_counts(&layout_of(ctx, a)?, [a, b], &config)?,
            };
            let mut sources: Vec<(&str, String)> = vec![
                (
                    "counts_z",
                    paths[(a.basis == Basis::X) as usize].display().to_string(),
                ),
                (
                    "counts_x",
                    paths[(a.basis == Basis::Z) as usize].display().to_string(),
                ),
            ];
            if let Some(l) = luts {
                let names: Vec<String> = l.iter().map(|p| p.display().to_string()).collect();
                sources.push(("luts", names.join(" ")));
            }
            (result, sources)
        }
        None => {
            let layout = s.layout();
            let e = &s.experiment;
            let sample = |basis| {
                simulate_counts(
                    &layout,
                    &s.params,
                    basis,
                    e.channel_mode,
                    e.n_samples,
                    e.seed,
                    e.workers,
                )
            };
            let (z, x) = (sample(Basis::Z)?, sample(Basis::X)?);
            (evaluate_counts(&layout, [&z, &x], e)?, Vec::new())
        }
    };
    let table = result_table(ctx, ResultRow::from_result(&result), &sources);
    emit(ctx.out(), &table.to_text())
}

fn sweep_with(ctx: &Context, config: &SweepConfig) -> Result<(), CliError> {
    let mut table = run_sweep(&ctx.settings.layout(), config)?;
    ctx.stamp(&mut table.header);
    emit(ctx.out(), &table.to_text())
}

pub fn threshold(ctx: &Context) -> Result<(), CliError> {
    let s = &ctx.settings;
    if s.params.p != s.params.m {
        return Err(CliError::Config(format!(
            "threshold searches run at p = m, got p = {} and m = {} (use --pm)",
            s.params.p, s.params.m
        )));
    }
    let config = SweepConfig {
        mode: SweepMode::Fig3,
        grid: vec![s.params.p],
        ..s.sweep.clone()
    };
    sweep_with(ctx, &config)
}

pub fn sweep(ctx: &Context) -> Result<(), CliError> {
    sweep_with(ctx, &ctx.settings.sweep)
}

pub fn plot_data(ctx: &Context, table_path: &Path, figure: Option<String>) -> Result<(), CliError> {
    let table = ResultsTable::from_text(&read(table_path)?)
        .map_err(|e| CliError::in_file(table_path, e))?;
    let figure = match figure.as_deref().or(table.header.get("sweep")) {
        Some(f) => f
            .parse::<SweepMode>()
            .map_err(|e| CliError::Config(e.to_string()))?,
        None => {
            return Err(CliError::Config(
                "table header names no sweep; pass --figure".into(),
            ))
        }
    };
    let series = plot_series(&table, figure)?;
    let mut header = Header::new("surface17 plot data");
    header
        .push("figure", figure.name())
        .push("table", table_path.display().to_string());
    // The producing table's provenance travels along.
    for (k, v) in &table.header.entries {
        header.push(format!("table.{k}"), v);
    }
    emit(ctx.out(), &render_series(&series, &header))
}

pub fn inspect_channel(ctx: &Context, sites: &[NoiseSite]) -> Result<(), CliError> {
    let s = &ctx.settings;
    let mode = s.experiment.channel_mode;
    let channels = TrajectoryConfig::for_mode(&s.params, mode)?;
    let mut out = ctx.header("surface17 channels").render();
    for &site in sites {
        let ch = channels.channel(site);
        let name = match site {
            NoiseSite::Prep => "prep",
            NoiseSite::Gate => "gate",
            NoiseSite::Idle => "idle",
            NoiseSite::Meas => "meas",
        };
        let _ = writeln!(out, "# site = {name}");
        let cptp = match ch.check_cptp(CPTP_TOLERANCE) {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        };
        let _ = writeln!(out, "# cptp = {cptp}");
        let twirl: Vec<String> = ch
            .twirl_probabilities()
            .iter()
            .map(|p| format!("{p:.10e}"))
            .collect();
        let _ = writeln!(out, "# twirl = {}", twirl.join(" "));
        out.push_str(&ch.dump());
    }
    emit(ctx.out(), &out)
}

pub fn validate_layout(ctx: &Context) -> Result<(), CliError> {
    let layout = ctx.settings.layout();
    let report = layout.validate();
    let mut out = ctx.header("surface17 layout report").render();
    let _ = writeln!(
        out,
        "checks = {}\nfailures = {}",
        report.checked,
        report.failures.len()
    );
    for f in &report.failures {
        let _ = writeln!(out, "failure: {f}");
    }
    out.push_str(&layout.dump());
    emit(ctx.out(), &out)?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Domain(surface17::Error::InvalidParameter {
            name: "layout",
            reason: format!("{} validation failures", report.failures.len()),
        }))
    }
}
