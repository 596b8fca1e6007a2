//! `gcbf`: run closed loops, feasibility sweeps and solver benchmarks from
//! JSON scenario files.
//!
//! Exit codes: 0 completed, 2 safety violation, 3 infeasible OCP,
//! 4 configuration error, 5 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gcbf_core::harness::{cmd_bench, cmd_map, cmd_run, error_exit_code, Overrides};
use gcbf_core::ConstraintStrategy;

#[derive(Parser, Debug)]
#[command(
    name = "gcbf",
    version,
    about = "Receding-horizon control with horizon-level safety constraints"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one closed loop.
    Run(Common),
    /// Sweep the scenario's initial-state grid.
    Map(Common),
    /// Time the solver per strategy.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 5)]
        repetitions: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file.
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Real steps to simulate.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    tol_feas: Option<f64>,
    #[arg(long)]
    tol_opt: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Apply the minimum-violation plan when a solve is infeasible.
    #[arg(long)]
    relax: bool,
    /// Sweep threads; 0 uses every core.
    #[arg(long)]
    workers: Option<usize>,
    /// e.g. `gcbf:lambda=0.01,m=2`, `pointwise:n_c=50`. Repeatable.
    #[arg(long = "strategy")]
    strategies: Vec<ConstraintStrategy>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            steps: self.steps,
            tol_feas: self.tol_feas,
            tol_opt: self.tol_opt,
            max_iter: self.max_iter,
            relax: self.relax,
            workers: self.workers,
            strategies: self.strategies.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(c) => cmd_run(&c.scenario, &c.out_dir, &c.overrides()),
        Command::Map(c) => cmd_map(&c.scenario, &c.out_dir, &c.overrides()),
        Command::Bench {
            common,
            repetitions,
        } => cmd_bench(
            &common.scenario,
            &common.out_dir,
            &common.overrides(),
            *repetitions,
        ),
    };
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
