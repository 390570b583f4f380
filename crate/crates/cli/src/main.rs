use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hicontrol::cli::{
    cmd_convergence, cmd_follower, cmd_leader, cmd_simulate, cmd_verify, parse_levels, FollowerArgs, LeaderArgs,
    RunConfig,
};
use hicontrol::{Error, Result};

#[derive(Parser)]
#[command(name = "hicontrol", version, about = "Leader/follower boundary control of a wave equation on a scaling domain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to `output_dir` of the config, then `out`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized checks
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// March the state forward
    Simulate(Common),
    /// Solve for the follower control
    Follower {
        #[command(flatten)]
        common: Common,
        /// Leader control CSV (zero when omitted)
        #[arg(long)]
        w1: Option<PathBuf>,
        /// Re-check the Nash property on random perturbations
        #[arg(long)]
        audit: bool,
    },
    /// Solve for the leader control
    Leader {
        #[command(flatten)]
        common: Common,
        /// Run even if the time condition T > 2d fails
        #[arg(long)]
        override_holmgren: bool,
    },
    /// Re-run the diagnostics on stored artifacts
    Verify {
        #[command(flatten)]
        common: Common,
        /// Directory holding the artifacts (defaults to the output directory)
        #[arg(long)]
        artifacts: Option<PathBuf>,
    },
    /// Refinement study on a manufactured solution
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Levels as NXxNT pairs, e.g. 32x160,64x320
        #[arg(long)]
        levels: Option<String>,
    },
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf, PathBuf)> {
    let cfg = RunConfig::load(&common.config)?;
    let base = common.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
        .unwrap_or_else(|| PathBuf::from("out"));
    Ok((cfg, base, out))
}

fn run(cli: Cli) -> Result<PathBuf> {
    match cli.command {
        Command::Simulate(common) => {
            let (cfg, base, out) = load(&common)?;
            cmd_simulate(&cfg, &base, &out)?;
            Ok(out)
        }
        Command::Follower { common, w1, audit } => {
            let (cfg, base, out) = load(&common)?;
            let args = FollowerArgs {
                w1,
                audit,
                seed: common.seed,
            };
            cmd_follower(&cfg, &base, &out, &args)?;
            Ok(out)
        }
        Command::Leader {
            common,
            override_holmgren,
        } => {
            let (cfg, base, out) = load(&common)?;
            cmd_leader(&cfg, &base, &out, &LeaderArgs { override_holmgren })?;
            Ok(out)
        }
        Command::Verify { common, artifacts } => {
            let (cfg, base, out) = load(&common)?;
            let dir = artifacts.unwrap_or_else(|| out.clone());
            cmd_verify(&cfg, &base, &dir, &out, common.seed)?;
            Ok(out)
        }
        Command::Convergence { common, levels } => {
            let (cfg, _, out) = load(&common)?;
            let levels = levels.as_deref().map(parse_levels).transpose()?;
            cmd_convergence(&cfg, levels, &out)?;
            Ok(out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::HolmgrenViolation { .. } = e {
                eprintln!("hint: pass --override-holmgren to run anyway");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
