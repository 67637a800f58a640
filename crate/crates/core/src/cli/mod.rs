//! The `dshift` command line.
//!
//! Exit status is 0 on success, 1 when a verified property fails and 2 on
//! input errors.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use self::config::{Format, RunConfig};
use self::output::CommandOutput;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dshift", version, about = "Scans and identity checks for Dirichlet-space eigenvector bundles")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Override a config field, e.g. `--set grid.radii=8`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,

    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Dirichlet truncation of the tensor ambient space.
    #[arg(long, global = true)]
    pub truncation: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Kernel norms and inner products against their series.
    KernelTable,
    /// Rank-one curvature by finite differences and by the Laplacian route.
    CurvatureScan,
    /// Projection-derivative additivity over the random frame ensemble.
    Thm32Verify,
    /// Green potential of a named density with a boundedness probe.
    GreenPotential,
    /// Müller sum for a named operator and weight sequence.
    MuellerCheck,
    /// End-to-end similarity criterion for a frame.
    SimilarityScan,
    /// Every identity check with its residual and tolerance.
    IdentitySuite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::KernelTable => "kernel-table",
            Command::CurvatureScan => "curvature-scan",
            Command::Thm32Verify => "thm32-verify",
            Command::GreenPotential => "green-potential",
            Command::MuellerCheck => "mueller-check",
            Command::SimilarityScan => "similarity-scan",
            Command::IdentitySuite => "identity-suite",
        }
    }
}

/// Final configuration: file, then `--set`, then explicit flags.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut cfg = config::load(cli.config.as_deref(), &cli.overrides).map_err(|e| e.to_string())?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(o) = &cli.output {
        cfg.output = Some(o.clone());
    }
    if let Some(n) = cli.truncation {
        cfg.truncation = n;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn execute(command: Command, cfg: &RunConfig) -> crate::Result<CommandOutput> {
    match command {
        Command::KernelTable => commands::kernel_table(cfg),
        Command::CurvatureScan => commands::curvature_scan(cfg),
        Command::Thm32Verify => commands::thm32_verify(cfg),
        Command::GreenPotential => commands::green_potential_cmd(cfg),
        Command::MuellerCheck => commands::mueller_check(cfg),
        Command::SimilarityScan => commands::similarity_scan(cfg),
        Command::IdentitySuite => commands::identity_suite(cfg),
    }
}

fn emit(command: Command, cfg: &RunConfig, out: &CommandOutput) -> std::io::Result<()> {
    let mut buf = Vec::new();
    match cfg.format {
        Format::Csv => output::write_csv(&mut buf, command.name(), cfg, out)?,
        Format::Json => output::write_json(&mut buf, command.name(), cfg, out)?,
    }
    match &cfg.output {
        Some(path) => std::fs::write(path, &buf),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&buf)?;
            stdout.flush()
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let cfg = match resolve_config(&cli) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("dshift: {msg}");
            return EXIT_INPUT;
        }
    };
    let out = match execute(cli.command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("dshift {}: {e}", cli.command.name());
            return EXIT_INPUT;
        }
    };
    if let Err(e) = emit(cli.command, &cfg, &out) {
        eprintln!("dshift: cannot write output: {e}");
        return EXIT_INPUT;
    }
    if out.violation {
        eprintln!("dshift {}: verified violation, see summary", cli.command.name());
        EXIT_VIOLATION
    } else {
        EXIT_OK
    }
}
