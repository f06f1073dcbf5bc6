use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fsi_core::mesh::{sphere_volume, write_volume};
use fsi_core::pipeline::{run, Mode, RunConfig};

/// Time-domain acoustic scattering by an elastic body.
#[derive(Parser)]
#[command(name = "fsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the mode given in the config file.
    Run { config: PathBuf },
    /// Run only the verification suite.
    Verify { config: PathBuf },
    /// Write a projected-octahedron sphere volume mesh.
    Mesh {
        #[arg(long)]
        sphere_level: usize,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> fsi_core::Result<i32> {
    match cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(&config)?;
            finish(run(&cfg)?)
        }
        Command::Verify { config } => {
            let mut cfg = RunConfig::load(&config)?;
            cfg.mode = Mode::Verify;
            finish(run(&cfg)?)
        }
        Command::Mesh { sphere_level, radius, out } => {
            let (_, volume) = sphere_volume(sphere_level, radius)?;
            std::fs::write(&out, write_volume(&volume))
                .map_err(|e| fsi_core::FsiError::Config(format!("{}: {e}", out.display())))?;
            println!("wrote {}", out.display());
            Ok(0)
        }
    }
}

fn finish(outcome: fsi_core::pipeline::RunOutcome) -> fsi_core::Result<i32> {
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    match outcome.verified {
        Some(true) => println!("verification: all-pass"),
        Some(false) => println!("verification: FAIL"),
        None => {}
    }
    Ok(outcome.exit_code())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
