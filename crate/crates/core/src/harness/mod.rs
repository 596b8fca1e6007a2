//! File-driven entry points shared by the command-line tool and the tests.

pub mod bench;
pub mod commands;
pub mod scenario_file;

pub use bench::{bench, bench_with, BenchReport, StrategyBench, BENCH_HEADER};
pub use commands::{
    cmd_bench, cmd_map, cmd_run, error_exit_code, exit_code_for, CommandOutcome, Overrides,
};
pub use scenario_file::{PlantSection, ScenarioFile, SimulationSection};
