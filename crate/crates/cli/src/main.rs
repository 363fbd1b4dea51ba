//! `esn-mor`: generate, train, reduce and benchmark echo state networks.
//!
//! Exit codes: 0 success, 2 usage error, 3 invalid config or input,
//! 4 numerical failure (divergence, singular system), 5 IO failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::*;
use crate::config::{CommandConfig, Overrides};
use crate::error::{exit, Result};
use crate::output::Run;

#[derive(Parser, Debug)]
#[command(name = "esn-mor", version, about = "Echo state network model order reduction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Clone)]
struct Common {
    /// TOML config file (or a manifest from an earlier run).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` and replaces any explicit `seeds` list.
    #[arg(long)]
    seed: Option<u64>,
    /// Use the full experiment grids instead of the desk-scale ones.
    #[arg(long)]
    paper_scale: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate untrained networks.
    GenEsn(Common),
    /// Fit a readout on a builtin task or a dataset CSV.
    Train(Common),
    /// POD / POD-DEIM reduction of a trained network.
    Reduce(Common),
    /// Memory capacity of model files or of a generated grid.
    Mc(Common),
    /// NARMA10 R² of a network, its POD reductions and same-size networks.
    NarmaBench(Common),
    /// Singular-value energy profiles under different driving signals.
    SvdProfile(Common),
    /// Per-step timing of model files.
    Timing(Common),
    /// Jacobian spectral radii of full and reduced models.
    Stability(Common),
}

fn execute<C: CommandConfig>(common: &Common, body: fn(&C, &Run) -> Result<()>) -> Result<()> {
    let ov = Overrides {
        out: common.out.clone(),
        seed: common.seed,
        paper_scale: common.paper_scale,
    };
    let loaded = config::load::<C>(&common.config, &ov)?;
    let run = Run::new(&loaded)?;
    log::info!("{} → {} (config {})", C::NAME, run.dir().display(), &loaded.hash[..12]);
    let outcome = body(&loaded.config, &run);
    run.finish(&loaded.config, &outcome)?;
    outcome
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::GenEsn(c) => execute(c, gen_esn::run),
        Command::Train(c) => execute(c, train::run),
        Command::Reduce(c) => execute(c, reduce::run),
        Command::Mc(c) => execute(c, mc::run),
        Command::NarmaBench(c) => execute(c, narma::run),
        Command::SvdProfile(c) => execute(c, profile::run),
        Command::Timing(c) => execute(c, timing::run),
        Command::Stability(c) => execute(c, stability::run),
    };
    match res {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
