//! Command-line front end: assemble a [`RunConfig`] from an optional TOML
//! file plus flag overrides, execute it, and map outcomes to exit codes —
//! 0 success, 1 a Violated verdict (or replay mismatch), 2 usage error,
//! 3 internal error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chfs_lab::error::Error;
use chfs_lab::harness::{self, Command as LabCommand, ParamValue, RunConfig, DEFAULT_SEED};

#[derive(Parser)]
#[command(
    name = "chfs-lab",
    version,
    about = "Desk-scale experiments on seeded Haar-state families",
    propagate_version = true
)]
struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Root seed for all randomness (default: $CHFS_LAB_SEED, then 427).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for records and summaries.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Worker threads; 0 means one per logical core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify one analytic claim, or the whole default grid.
    Lemma(LemmaArgs),
    /// Distinguishing attack against a keyed-unitary candidate.
    AttackPru(AttackPruArgs),
    /// Distinguishing attack against a keyed state-generator candidate.
    AttackPrsg(AttackPrsgArgs),
    /// Cap-geometry checks behind the separation argument.
    Conjecture(ConjectureArgs),
    /// Security game against the keyed state family.
    PrfsgGame(PrfsgGameArgs),
    /// Summarize the records already in the output directory.
    Report(ReportArgs),
    /// Re-execute a stored record and compare summaries byte for byte.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct LemmaArgs {
    /// Claim to check: all, lubkin, haar-projection, overlap, product-test,
    /// decomposition, gentle, structure, gentle-subsystem, lipschitz.
    #[arg(long)]
    id: Option<String>,
    /// Dimension or qubit count, as the claim defines it.
    #[arg(long)]
    n: Option<u64>,
    /// Projector rank (haar-projection).
    #[arg(long)]
    d: Option<u64>,
    /// Number of single-qubit parts (product-test).
    #[arg(long)]
    m: Option<u64>,
    /// Number of measurements (decomposition).
    #[arg(long)]
    t: Option<u64>,
    /// Query count of the tested family (lipschitz).
    #[arg(long)]
    queries: Option<u64>,
    /// Projector rank (gentle).
    #[arg(long)]
    rank: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    /// Number of randomized instances for per-instance claims.
    #[arg(long)]
    instances: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Contamination weight (structure).
    #[arg(long)]
    p: Option<f64>,
    /// Structure constant C (structure).
    #[arg(long)]
    c: Option<f64>,
    /// Maximum per-measurement tilt (decomposition).
    #[arg(long)]
    tilt: Option<f64>,
    /// Tail threshold shift t (lipschitz).
    #[arg(long)]
    shift: Option<f64>,
}

#[derive(Args)]
struct AttackPruArgs {
    /// Qubits the candidate acts on (oracle states use one fewer).
    #[arg(long)]
    n: Option<u64>,
    /// Key bits of the candidate family.
    #[arg(long)]
    kappa: Option<u64>,
    /// Oracle-query layers in the candidate.
    #[arg(long)]
    m: Option<u64>,
    /// Truncation length the attack learns up to.
    #[arg(long)]
    tau: Option<u64>,
    /// Swap-test repetitions per key.
    #[arg(long)]
    r: Option<u64>,
    /// Trials per game arm.
    #[arg(long)]
    trials: Option<u64>,
    /// Security parameter of the scoring rule.
    #[arg(long)]
    lambda: Option<u64>,
}

#[derive(Args)]
struct AttackPrsgArgs {
    /// Output qubits of the generator candidate.
    #[arg(long)]
    d: Option<u64>,
    /// Binary measurements inside the candidate.
    #[arg(long)]
    t: Option<u64>,
    /// Key bits of the candidate family.
    #[arg(long)]
    kappa: Option<u64>,
    /// Product-test repetitions per key.
    #[arg(long)]
    r: Option<u64>,
    /// Trials per game arm.
    #[arg(long)]
    trials: Option<u64>,
    /// Security parameter of the scoring rule.
    #[arg(long)]
    lambda: Option<u64>,
}

#[derive(Args)]
struct ConjectureArgs {
    /// Cell to check: grid (default), near, far, product.
    #[arg(long)]
    case: Option<String>,
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Args)]
struct PrfsgGameArgs {
    /// Key bits of the defended family.
    #[arg(long)]
    kappa: Option<u64>,
    /// Input bits of the defended family.
    #[arg(long)]
    m: Option<u64>,
    /// Qubits per output state.
    #[arg(long)]
    ell: Option<u64>,
    /// Classical query budget per adversary.
    #[arg(long)]
    queries: Option<u64>,
    /// Trials per game arm.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory to scan (alias for --output-dir).
    #[arg(long, value_name = "DIR")]
    dir: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Path to a stored ExperimentRecord (.json).
    record: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match drive(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::InvalidArgument(_) | Error::InvalidBitString(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn drive(cli: Cli) -> Result<ExitCode, Error> {
    if let Cmd::Replay(args) = &cli.command {
        let outcome = harness::replay(&args.record)?;
        for warning in &outcome.warnings {
            eprintln!("warning: {warning}");
        }
        println!("{}", outcome.fresh.summary.headline);
        return if outcome.matches {
            println!("replay reproduced the stored summary byte for byte");
            Ok(ExitCode::SUCCESS)
        } else {
            eprintln!("replay DIVERGED from the stored summary");
            Ok(ExitCode::from(1))
        };
    }

    let command = match &cli.command {
        Cmd::Lemma(_) => LabCommand::Lemma,
        Cmd::AttackPru(_) => LabCommand::AttackPru,
        Cmd::AttackPrsg(_) => LabCommand::AttackPrsg,
        Cmd::Conjecture(_) => LabCommand::Conjecture,
        Cmd::PrfsgGame(_) => LabCommand::PrfsgGame,
        Cmd::Report(_) => LabCommand::Report,
        Cmd::Replay(_) => unreachable!("handled above"),
    };

    // Precedence: flags over config file over environment over built-in.
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::InvalidArgument(format!("cannot read {}: {e}", path.display()))
            })?;
            let file = RunConfig::from_toml(&text)?;
            if file.command != command {
                return Err(Error::InvalidArgument(format!(
                    "config file runs `{}` but the command line says `{command}`",
                    file.command
                )));
            }
            file
        }
        None => RunConfig::new(command, env_seed()?),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(dir) = cli.output_dir {
        config.output_dir = dir;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }

    macro_rules! set_params {
        ($args:expr; ints: $($int:ident),*; floats: $($float:ident),*; texts: $($text:ident),*) => {{
            $(if let Some(v) = $args.$int {
                config.set(&stringify!($int).replace('_', "-"), ParamValue::Int(v as i64))?;
            })*
            $(if let Some(v) = $args.$float {
                config.set(&stringify!($float).replace('_', "-"), ParamValue::Float(v))?;
            })*
            $(if let Some(v) = &$args.$text {
                config.set(&stringify!($text).replace('_', "-"), ParamValue::Text(v.clone()))?;
            })*
        }};
    }

    match &cli.command {
        Cmd::Lemma(args) => {
            set_params!(args;
                ints: n, d, m, t, queries, rank, samples, instances;
                floats: epsilon, delta, p, c, tilt, shift;
                texts: id);
        }
        Cmd::AttackPru(args) => {
            set_params!(args; ints: n, kappa, m, tau, r, trials, lambda; floats: ; texts: );
        }
        Cmd::AttackPrsg(args) => {
            set_params!(args; ints: d, t, kappa, r, trials, lambda; floats: ; texts: );
        }
        Cmd::Conjecture(args) => {
            set_params!(args; ints: n, samples; floats: epsilon, delta; texts: case);
        }
        Cmd::PrfsgGame(args) => {
            set_params!(args; ints: kappa, m, ell, queries, trials; floats: ; texts: );
        }
        Cmd::Report(args) => {
            if let Some(dir) = &args.dir {
                config.output_dir = dir.clone();
            }
        }
        Cmd::Replay(_) => unreachable!("handled above"),
    }

    let record = harness::run(&config)?;
    println!("{}", record.summary.headline);
    for line in &record.summary.details {
        println!("  {line}");
    }
    println!(
        "record written to {}",
        config.output_dir.join(format!("{}.*", record.basename())).display()
    );
    if record.summary.any_violation() {
        Ok(ExitCode::from(1))
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

/// Default seed: `CHFS_LAB_SEED` when set (decimal), else the built-in.
fn env_seed() -> Result<u64, Error> {
    match std::env::var("CHFS_LAB_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Error::InvalidArgument(format!("CHFS_LAB_SEED must be a decimal u64, got `{text}`"))
        }),
        Err(_) => Ok(DEFAULT_SEED),
    }
}
