use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use blender_forge::{parse_config, run, write_outcome, CliError, Command};
use clap::Parser;

/// Simulator and certified verifier for co-index-one heterodimensional
/// cycles and their cu-blenders.
#[derive(Parser, Debug)]
#[command(name = "blender-forge", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// Run configuration (`[model]`, `[solver]`, `[blender]`, `[output]`).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for strips and robustness samples; overrides `[blender] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("blender-forge: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config).map_err(|source| CliError::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = args.seed {
        cfg.blender.seed = seed;
    }
    let dir = args.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let start = Instant::now();
    let (outcome, err) = run(args.command, &cfg);
    let files = write_outcome(&dir, &outcome)?;
    print!("{}", outcome.report.to_text());
    println!();
    for f in &files {
        println!("wrote {}", f.display());
    }
    println!("elapsed {:.3} s", start.elapsed().as_secs_f64());
    err.map_or(Ok(()), Err)
}
