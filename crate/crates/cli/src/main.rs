use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use moclqr_cli::config::parse_accuracy;
use moclqr_cli::{
    cmd_oracle, cmd_plan, cmd_simulate, cmd_table1, exit_code, Budget, CommandKind, Overrides,
    RunConfig,
};

#[derive(Parser)]
#[command(
    name = "moclqr",
    version,
    about = "Trajectory-tree planner for mixed-observable LQR problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a scenario and write the trajectory tree.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Tree JSON output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for several branching periods and write `Nb,P,cost,time_s,gap`.
    Table1 {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "12,15,20,30")]
        nb_list: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan, then run seeded closed-loop rollouts of the tree.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        rollouts: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare branch-and-bound against exhaustive enumeration.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long, hide = true)]
        corrupt_weight: Option<f64>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Branching period N_b.
    #[arg(long)]
    nb: Option<usize>,
    /// Horizon N.
    #[arg(long)]
    horizon: Option<usize>,
    /// Region accuracy override, `REGION=P` (0-based region), repeatable.
    #[arg(long = "p", value_parser = parse_accuracy)]
    accuracies: Vec<(usize, f64)>,
    /// Initial belief, comma separated.
    #[arg(long, value_delimiter = ',')]
    b0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Wall-clock budget per solve in seconds.
    #[arg(long)]
    budget_s: Option<f64>,
    /// Branch-and-bound node budget per solve.
    #[arg(long)]
    max_nodes: Option<usize>,
}

impl Common {
    fn into_config(self, command: CommandKind) -> RunConfig {
        let mut cfg = RunConfig::new(command, self.scenario);
        cfg.overrides = Overrides {
            horizon: self.horizon,
            period: self.nb,
            accuracies: self.accuracies,
            b0: self.b0,
        };
        cfg.workers = self.workers;
        cfg.budget = Budget {
            time_s: self.budget_s,
            max_nodes: self.max_nodes,
        };
        cfg
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan { common, out } => {
            let mut cfg = common.into_config(CommandKind::Plan);
            cfg.out = out;
            cmd_plan(&cfg).map(|_| 0)
        }
        Command::Table1 {
            common,
            nb_list,
            out,
        } => {
            let mut cfg = common.into_config(CommandKind::Table1);
            cfg.nb_list = nb_list;
            cfg.out = out;
            cmd_table1(&cfg).map(|_| 0)
        }
        Command::Simulate {
            common,
            rollouts,
            seed,
            out,
        } => {
            let mut cfg = common.into_config(CommandKind::Simulate);
            cfg.rollouts = rollouts;
            cfg.seed = seed;
            cfg.out = out;
            cmd_simulate(&cfg).map(|_| 0)
        }
        Command::Oracle {
            common,
            corrupt_weight,
        } => {
            let mut cfg = common.into_config(CommandKind::Oracle);
            cfg.corrupt_weight = corrupt_weight;
            cmd_oracle(&cfg).map(|r| if r.passed() { 0 } else { 1 })
        }
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
