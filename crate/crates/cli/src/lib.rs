//! Command implementations behind the `moclqr` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod simulate;

pub use commands::{cmd_oracle, cmd_plan, cmd_simulate, cmd_table1, exit_code, OracleReport};
pub use config::{Budget, CommandKind, Overrides, RunConfig};
pub use output::{validate_tree_file, TreeCheck, TreeFile};
pub use simulate::{simulate_rollouts, RolloutRecord, SimulationSummary};
