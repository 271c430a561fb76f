mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

/// Simulate the two-round Surface-17 experiment and search for the gate
/// noise at which it still beats a bare qubit.
#[derive(Parser, Debug)]
#[command(name = "surface17", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// TOML configuration, or any file written by this tool (its header
    /// carries the configuration that produced it).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Samples (or trajectories) per basis.
    #[arg(long, global = true)]
    samples: Option<u64>,
    /// Noise channels: pauli or general.
    #[arg(long, global = true)]
    mode: Option<String>,
    /// Two-round decoder: lut or ts.
    #[arg(long, global = true)]
    decoder: Option<String>,
    /// Stabilizer variant: fig1a or fig1b.
    #[arg(long, global = true)]
    variant: Option<String>,
    /// Entangled stabilizers: all8, relevant4 or bulk4.
    #[arg(long, global = true)]
    stabilizers: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    m: Option<f64>,
    /// Sets both p and m.
    #[arg(long, global = true)]
    pm: Option<f64>,
    #[arg(long, global = true)]
    g: Option<f64>,
    #[arg(long = "t1-over-t2", global = true)]
    t1_over_t2: Option<f64>,
    #[arg(long = "t-over-t2", global = true)]
    t_over_t2: Option<f64>,
    /// Accept idle error larger than gate error.
    #[arg(long, global = true)]
    allow_ordering_violation: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample joint syndrome/flip counts.
    Simulate {
        #[arg(long, value_enum, default_value_t = BasisChoice::Both)]
        basis: BasisChoice,
    },
    /// Build a lookup table from a counts file.
    BuildLut {
        #[arg(long)]
        counts: PathBuf,
    },
    /// Fidelities, the ratio f and the success verdict at one point.
    Fidelity {
        /// Counts files for both bases; simulate when absent.
        #[arg(long, num_args = 2, value_names = ["Z", "X"])]
        counts: Option<Vec<PathBuf>>,
        /// Lookup tables (one per basis) to decode with instead of tables
        /// fitted to the counts.
        #[arg(long, num_args = 2, value_names = ["LUT", "LUT"], requires = "counts")]
        lut: Option<Vec<PathBuf>>,
    },
    /// Highest gate noise that still succeeds at p = m.
    Threshold,
    /// Threshold or ratio sweep over p = m.
    Sweep {
        /// fig3, fig4 or fig5.
        #[arg(long = "sweep-mode")]
        sweep_mode: Option<String>,
        /// Comma-separated grid of p = m values.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
    },
    /// Extract plot series from a results table.
    PlotData {
        #[arg(long)]
        table: PathBuf,
        /// fig3, fig4 or fig5; taken from the table header when absent.
        #[arg(long)]
        figure: Option<String>,
    },
    /// Dump the channels used at each noise site.
    InspectChannel {
        #[arg(long, value_enum, default_value_t = SiteChoice::All)]
        site: SiteChoice,
    },
    /// Check stabilizer commutation and the gate schedule.
    ValidateLayout,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum BasisChoice {
    Z,
    X,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum SiteChoice {
    Prep,
    Gate,
    Idle,
    Meas,
    All,
}

fn shell_word(arg: &str) -> String {
    let plain = !arg.is_empty()
        && arg
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "-_=.,/:+".contains(c));
    if plain {
        arg.to_string()
    } else {
        format!("'{}'", arg.replace('\'', r"'\''"))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let mut run_config = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let (sweep_mode, grid) = match &cli.command {
        Command::Sweep { sweep_mode, grid } => (sweep_mode.clone(), grid.clone()),
        _ => (None, None),
    };
    run_config.apply(&Overrides {
        seed: g.seed,
        samples: g.samples,
        mode: g.mode,
        decoder: g.decoder,
        variant: g.variant,
        stabilizers: g.stabilizers,
        out: g.out,
        p: g.p,
        m: g.m,
        pm: g.pm,
        g: g.g,
        t1_over_t2: g.t1_over_t2,
        t_over_t2: g.t_over_t2,
        allow_ordering_violation: g.allow_ordering_violation,
        sweep_mode,
        grid,
    });
    let settings = run_config.validate()?;
    let invocation: Vec<String> = std::env::args().skip(1).map(|a| shell_word(&a)).collect();
    let ctx = commands::Context {
        settings,
        invocation: invocation.join(" "),
    };

    match cli.command {
        Command::Simulate { basis } => commands::simulate(
            &ctx,
            match basis {
                BasisChoice::Z => vec![surface17::pauli::Basis::Z],
                BasisChoice::X => vec![surface17::pauli::Basis::X],
                BasisChoice::Both => surface17::pauli::Basis::BOTH.to_vec(),
            },
        ),
        Command::BuildLut { counts } => commands::build_lut(&ctx, &counts),
        Command::Fidelity { counts, lut } => {
            commands::fidelity(&ctx, counts.as_deref(), lut.as_deref())
        }
        Command::Threshold => commands::threshold(&ctx),
        Command::Sweep { .. } => commands::sweep(&ctx),
        Command::PlotData { table, figure } => commands::plot_data(&ctx, &table, figure),
        Command::InspectChannel { site } => {
            use surface17::circuit::NoiseSite;
            let sites = match site {
                SiteChoice::Prep => vec![NoiseSite::Prep],
                SiteChoice::Gate => vec![NoiseSite::Gate],
                SiteChoice::Idle => vec![NoiseSite::Idle],
                SiteChoice::Meas => vec![NoiseSite::Meas],
                SiteChoice::All => vec![
                    NoiseSite::Prep,
                    NoiseSite::Gate,
                    NoiseSite::Idle,
                    NoiseSite::Meas,
                ],
            };
            commands::inspect_channel(&ctx, &sites)
        }
        Command::ValidateLayout => commands::validate_layout(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("surface17: {err}");
            err.exit_code()
        }
    }
}
