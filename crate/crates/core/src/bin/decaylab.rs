use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use decaylab::cli::{parse_config, run, Command};

#[derive(Parser)]
#[command(name = "decaylab", version, about = "Frequencies, Steklov spectra and interior decay profiles on 2D domains")]
struct Args {
    /// What to compute
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration file
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out` in the config; default `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// No progress messages
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.config.display());
            return ExitCode::from(1);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("{}: {e}", args.config.display());
            }
            return ExitCode::from(1);
        }
    };
    let out = args.out.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let quiet = args.quiet;
    let mut log = |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    match run(&config, args.command, &out, &mut log) {
        Ok((_, status)) => ExitCode::from(status.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
