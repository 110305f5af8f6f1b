use std::path::PathBuf;
use std::process::ExitCode;

use affine_cs::par::set_threads;
use affine_cs::runner::{run, Budget, Experiment, ExperimentConfig};
use affine_cs::Error;
use clap::{Parser, Subcommand, ValueEnum};

/// Exit status for a run whose checks did not all pass.
const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for malformed configuration or arguments.
const EXIT_CONFIG: u8 = 2;
/// Exit status for numerical errors raised while running.
const EXIT_RUNTIME: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "affcs", version, about = "Numerical verification of affine coherent states")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration; flags given on the command line take precedence.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed for every Monte Carlo stream.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, env = "AFFCS_THREADS", value_name = "N")]
    threads: Option<usize>,

    /// Report path; the CSV companion is written next to it.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    budget: Option<BudgetArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BudgetArg {
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Normalization, closed form against grid quadrature, worked examples.
    Overlap,
    /// Minimum uncertainty, commutation relations, dilation unitarity.
    CheckAlgebra,
    /// Three routes to the cone integral K_n.
    Kn,
    /// Admissibility constants and resolution of unity.
    Resolution,
    /// Polar decomposition, Jacobians and the pushforward identity.
    Jacobian,
    /// Polarization identity with Richardson differentiation.
    Polarization,
    /// Symplectic potential and ray metric from the log-overlap.
    Geometry,
    /// Time-sliced and grid propagators against the analytic kernel.
    Propagate,
    /// Lower symbol of the generators.
    LowerSymbol,
    /// Every experiment above.
    VerifyAll,
}

impl Command {
    fn experiment(self) -> Experiment {
        match self {
            Command::Overlap => Experiment::Overlap,
            Command::CheckAlgebra => Experiment::CheckAlgebra,
            Command::Kn => Experiment::Kn,
            Command::Resolution => Experiment::Resolution,
            Command::Jacobian => Experiment::Jacobian,
            Command::Polarization => Experiment::Polarization,
            Command::Geometry => Experiment::Geometry,
            Command::Propagate => Experiment::Propagate,
            Command::LowerSymbol => Experiment::LowerSymbol,
            Command::VerifyAll => Experiment::VerifyAll,
        }
    }
}

fn resolve(cli: &Cli) -> Result<ExperimentConfig, Error> {
    let experiment = cli.command.experiment();
    let mut cfg = match &cli.config {
        Some(path) => {
            let cfg = ExperimentConfig::load(path)?;
            if cfg.experiment != experiment {
                return Err(Error::Config(format!(
                    "config is for `{}` but the subcommand is `{experiment}`",
                    cfg.experiment
                )));
            }
            cfg
        }
        None => ExperimentConfig::new(experiment),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = Some(seed);
    }
    if let Some(b) = cli.budget {
        cfg.budget = match b {
            BudgetArg::Quick => Budget::Quick,
            BudgetArg::Full => Budget::Full,
        };
    }
    if let Some(out) = &cli.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match resolve(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("affcs: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("affcs: config error: --threads must be at least 1");
            return ExitCode::from(EXIT_CONFIG);
        }
        if let Err(e) = set_threads(t) {
            eprintln!("affcs: cannot start {t} threads: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    }
    let report = match run(&cfg) {
        Ok(r) => r,
        Err(e @ Error::Config(_)) => {
            eprintln!("affcs: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("affcs: {e}");
            return ExitCode::from(EXIT_RUNTIME);
        }
    };
    for c in &report.checks {
        println!("{}", c.summary());
    }
    let out = cfg.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}-report.json", cfg.experiment)));
    if let Err(e) = report.write(&out) {
        eprintln!("affcs: {e}");
        return ExitCode::from(EXIT_RUNTIME);
    }
    println!("report: {} ({:.1} s)", out.display(), report.timing.wall_seconds);
    if report.all_passed {
        ExitCode::SUCCESS
    } else {
        let names: Vec<&str> = report.failing().map(|c| c.name.as_str()).collect();
        eprintln!("affcs: check failed: {}", names.join(", "));
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
