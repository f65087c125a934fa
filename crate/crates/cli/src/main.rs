use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptbec_cli::repro::{recipe, FIGURES};
use ptbec_cli::{run, CliError, Command, RunConfig};
use serde_json::json;

/// Variational and grid solvers for a dipolar condensate in a PT-symmetric
/// double well.
///
/// Exit codes: 0 success, 1 I/O error, 2 usage error, 3 solver failure,
/// 4 collapse detected. Errors are also printed to stderr as JSON.
#[derive(Parser)]
#[command(name = "ptbec", version)]
struct Cli {
    /// Worker threads for censuses, sweeps and spectra.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "ptbec-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// TOML run configuration; unknown keys are rejected.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides such as `na=-0.03` or `sweep.target=0.4`.
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Labelled stationary states (census.csv, states.json).
    Census(ConfigArgs),
    /// Continue every selected state in gamma or Na ([sweep] section).
    Sweep(ConfigArgs),
    /// Linear stability spectra of census states.
    Stability(ConfigArgs),
    /// Real-time evolution of a census state ([evolve] section).
    Evolve(ConfigArgs),
    /// Absorption images of census states.
    Image(ConfigArgs),
    /// Compare against the independent oracles ([oracle] section).
    Oracle(ConfigArgs),
    /// Regenerate the data behind a figure: fig2 .. fig6, or all.
    Repro {
        figure: String,
        /// Print the bundled configurations instead of running them.
        #[arg(long)]
        dump: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let (command, args) = match &cli.command {
        Cmd::Census(a) => (Command::Census, a),
        Cmd::Sweep(a) => (Command::Sweep, a),
        Cmd::Stability(a) => (Command::Stability, a),
        Cmd::Evolve(a) => (Command::Evolve, a),
        Cmd::Image(a) => (Command::Image, a),
        Cmd::Oracle(a) => (Command::Oracle, a),
        Cmd::Repro { figure, dump } => return repro(cli, figure, *dump),
    };
    let cfg = RunConfig::load(args.config.as_deref(), &args.overrides)?;
    let summary = run(command, &cfg, &cli.out, cli.jobs)?;
    println!("{summary}");
    Ok(())
}

fn repro(cli: &Cli, figure: &str, dump: bool) -> Result<(), CliError> {
    let figures: Vec<&str> = if figure == "all" { FIGURES.to_vec() } else { vec![figure] };
    let mut first_error = None;
    for f in figures {
        let steps = recipe(f)
            .ok_or_else(|| CliError::Usage(format!("unknown figure {f}; expected one of {FIGURES:?} or all")))?;
        for s in steps {
            if dump {
                println!("# {f}/{} ({:?})\n{}", s.name, s.command, s.config.to_toml());
                continue;
            }
            let dir = cli.out.join(f).join(&s.name);
            // Keep going so that one failing step leaves the others' output.
            match run(s.command, &s.config, &dir, cli.jobs) {
                Ok(v) => println!("{}", json!({ "figure": f, "step": s.name, "result": v })),
                Err(e) => {
                    eprintln!("{}", json!({ "figure": f, "step": s.name, "error": e.kind(), "message": e.to_string() }));
                    first_error.get_or_insert(e);
                }
            }
        }
    }
    first_error.map_or(Ok(()), Err)
}
