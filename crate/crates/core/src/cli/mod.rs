//! Batch front end: configuration, subcommands and their artifacts.
//!
//! Exit codes: 0 ok, 2 configuration, 3 stability (CFL or hyperbolicity),
//! 4 solver or check failure, 5 time/mode gate of the leader.

mod commands;
mod config;

pub use commands::{
    cmd_convergence, cmd_follower, cmd_leader, cmd_simulate, cmd_verify, parse_levels, FollowerArgs, LeaderArgs,
    VerifySummary,
};
pub use config::{
    ConvergenceConfig, FunctionSpec, GeometryConfig, GridConfig, ProblemConfig, RunConfig, ScaleConfig, SimulateConfig,
    SolverConfig, TargetConfig,
};
