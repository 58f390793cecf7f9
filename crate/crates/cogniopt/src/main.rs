use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cogniopt::commands::{self, RunContext};
use cogniopt::config::{self, LawName};
use cogniopt::{Error, Result};

/// Sensing-threshold and power optimization for a sensing-based cognitive
/// radio link.
#[derive(Debug, Parser)]
#[command(name = "cogniopt", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON). Built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir` of the scenario.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for the Monte-Carlo and random-pair checks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for sweeps and simulations.
    #[arg(long, global = true, env = "COGNIOPT_THREADS")]
    threads: Option<usize>,

    /// Primary-link rate formula.
    #[arg(long, global = true, value_enum)]
    capacity_law: Option<LawName>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Detector operating characteristics over the threshold grid.
    Roc,
    /// Joint threshold and power optimization.
    Optimize,
    /// Primary-user capacity loss over the threshold grid.
    Ploss,
    /// Cross-check the solver against independent oracles.
    Validate,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Roc => "roc",
            Self::Optimize => "optimize",
            Self::Ploss => "ploss",
            Self::Validate => "validate",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config {
                field: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        // Only fails when a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let mut resolved = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::defaults(),
    };
    if let Some(law) = cli.capacity_law {
        resolved = resolved.with_capacity_law(law);
    }
    if let Some(seed) = cli.seed {
        resolved = resolved.with_seed(seed);
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| resolved.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = RunContext {
        resolved: &resolved,
        scenario_path: cli.config.as_deref(),
        out_dir,
    };

    let written = match cli.command {
        Command::Roc => commands::cmd_roc(&ctx)?,
        Command::Optimize => commands::cmd_optimize(&ctx)?,
        Command::Ploss => {
            let laws = match cli.capacity_law {
                Some(law) => vec![law],
                None => vec![LawName::Shannon, LawName::Paper],
            };
            commands::cmd_ploss(&ctx, &laws)?
        }
        Command::Validate => {
            let (report, written) = commands::cmd_validate(&ctx)?;
            print!("{}", report.render());
            for p in &written {
                eprintln!("wrote {}", p.display());
            }
            if !report.passed() {
                return Err(Error::Validation {
                    failed: report.failed(),
                });
            }
            return Ok(());
        }
    };
    for p in &written {
        eprintln!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cogniopt {name}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
