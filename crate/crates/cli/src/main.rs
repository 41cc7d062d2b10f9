mod commands;
mod config;
mod recipes;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;
use config::{Command, RawConfig};

#[derive(Parser)]
#[command(name = "fnls", version, about = "Solitary waves of the fractional NLS equation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Seeded {
    #[command(flatten)]
    common: Common,
    /// Profile snapshot to start from instead of solving.
    #[arg(long)]
    seed_profile: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute a travelling-wave profile.
    Solve(Common),
    /// Evolve a profile in time.
    Evolve(Seeded),
    /// Amplitude against speed.
    Scan(Common),
    /// Decay rate, evenness and phase-plane data of a profile.
    Analyze(Seeded),
    /// Dominant multiplier of the iteration map at a computed profile.
    Probe(Common),
    /// Regenerate one figure data set.
    Reproduce {
        /// fig1 .. fig7
        #[arg(long)]
        recipe: String,
        #[arg(long)]
        out: PathBuf,
        /// Optional grid and solver overrides.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>, command: Command) -> Result<config::RunConfig, CliError> {
    let raw = match path {
        Some(p) => config::load(p).map_err(CliError::Config)?,
        None => RawConfig::default(),
    };
    raw.resolve(command)
        .map_err(|e| CliError::Config(e.to_string()))
}

fn out_dir(flag: Option<PathBuf>, rc: &config::RunConfig) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| rc.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: pass --out or set output_dir".into()))?;
    commands::prepare_out(&dir)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Cmd::Solve(c) => {
            let rc = load(Some(&c.config), Command::Solve)?;
            commands::solve(&rc, &out_dir(c.out, &rc)?)
        }
        Cmd::Evolve(s) => {
            let rc = load(Some(&s.common.config), Command::Evolve)?;
            let out = out_dir(s.common.out, &rc)?;
            commands::evolve(&rc, &out, s.seed_profile.as_deref())
        }
        Cmd::Scan(c) => {
            let rc = load(Some(&c.config), Command::Scan)?;
            commands::scan(&rc, &out_dir(c.out, &rc)?)
        }
        Cmd::Analyze(s) => {
            let rc = load(Some(&s.common.config), Command::Analyze)?;
            let out = out_dir(s.common.out, &rc)?;
            commands::analyze(&rc, &out, s.seed_profile.as_deref())
        }
        Cmd::Probe(c) => {
            let rc = load(Some(&c.config), Command::Probe)?;
            commands::probe(&rc, &out_dir(c.out, &rc)?)
        }
        Cmd::Reproduce {
            recipe,
            out,
            config,
        } => {
            if !recipes::RECIPES.contains(&recipe.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown recipe `{recipe}`; available: {}",
                    recipes::RECIPES.join(", ")
                )));
            }
            let rc = load(config.as_deref(), Command::Reproduce)?;
            let out = commands::prepare_out(&out)?;
            recipes::reproduce(&recipe, &rc, &out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
