//! Receding-horizon control with horizon-level safety constraints.
//!
//! The crate models two discrete-time plants (adaptive cruise control and an
//! emergency-braking double integrator), builds constraint sets over a
//! prediction horizon under several strategies, solves the resulting
//! single-shooting optimal control problems with an SQP method and runs
//! closed-loop simulations and feasibility sweeps on top of them.

pub mod constraints;
pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod harness;
pub mod ocp;
pub mod sim;

pub use constraints::{
    acc_h, braking_h, build_constraints, gcbf_decay_bound, AccSafeDistance, BrakingDistance,
    ConstraintFunction, ConstraintParams, ConstraintStrategy, HorizonConstraintSet,
    HorizonInequality,
};
pub use dynamics::{
    acc_jacobians, acc_step, braking_jacobians, braking_step, AccParams, AccPlant, AccState,
    BrakingPlant, BrakingState, DisturbanceProfile, DisturbanceSpec, Exogenous, Plant,
};
pub use error::{Error, Result};
pub use feasibility::{
    compare_regions, sweep, CellLabel, FeasibilityMap, GridSpec, RegionComparison,
};
pub use harness::{
    cmd_bench, cmd_map, cmd_run, BenchReport, CommandOutcome, Overrides, ScenarioFile,
};
pub use ocp::{
    assemble, brute_force_solve, rollout, solve_sqp, ControlModel, CostSpec, FiniteHorizonOcp,
    OcpResult, Rollout, SolverSettings, Verdict,
};
pub use sim::{
    compare_strategies, run_scenario, run_scenario_with, OcpSolver, PlantKind, RunOutcome,
    RunStatus, Scenario, SimLog, SqpSolver,
};
