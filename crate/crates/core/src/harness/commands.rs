//! The `run`, `map` and `bench` commands, independent of argument parsing.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use super::bench::bench;
use super::scenario_file::ScenarioFile;
use crate::constraints::ConstraintStrategy;
use crate::error::{Error, Result};
use crate::feasibility::{compare_regions, sweep};
use crate::sim::{run_scenario, RunStatus, Scenario};

/// Command-line values that take precedence over the scenario file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    /// Run length; for `map`, the length of each cell's run.
    pub steps: Option<usize>,
    pub tol_feas: Option<f64>,
    pub tol_opt: Option<f64>,
    pub max_iter: Option<usize>,
    pub relax: bool,
    pub workers: Option<usize>,
    /// Replaces the file's strategy. `run` uses the first entry.
    pub strategies: Vec<ConstraintStrategy>,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.steps {
            s.steps = v;
        }
        if let Some(v) = self.tol_feas {
            s.solver.tol_feas = v;
        }
        if let Some(v) = self.tol_opt {
            s.solver.tol_opt = v;
        }
        if let Some(v) = self.max_iter {
            s.solver.max_iter = v;
        }
        s.relax |= self.relax;
        if let Some(&first) = self.strategies.first() {
            s.strategy = first;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub written: Vec<PathBuf>,
    /// One-line human summary.
    pub summary: String,
}

pub fn exit_code_for(status: &RunStatus) -> i32 {
    match status {
        RunStatus::Completed => 0,
        RunStatus::ViolatedAt { .. } | RunStatus::StartupViolation { .. } => 2,
        RunStatus::InfeasibleAt { .. } => 3,
        RunStatus::SolverFailureAt { .. } => 5,
    }
}

pub fn error_exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) | Error::RolloutDiverged { .. } => 5,
        _ => 4,
    }
}

fn load(path: &Path, ov: &Overrides) -> Result<(ScenarioFile, Scenario, String)> {
    let file = ScenarioFile::load(path)?;
    let mut s = file.to_scenario()?;
    ov.apply(&mut s);
    s.validate()?;
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    Ok((file, s, stem))
}

fn create(out_dir: &Path, name: String, written: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join(name);
    let f = File::create(&path)?;
    written.push(path);
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(
    out_dir: &Path,
    name: String,
    value: &T,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let w = create(out_dir, name, written)?;
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

/// Runs one closed loop; writes `<stem>_simlog.csv` and `<stem>_summary.json`.
pub fn cmd_run(path: &Path, out_dir: &Path, ov: &Overrides) -> Result<CommandOutcome> {
    let (_, s, stem) = load(path, ov)?;
    info!(
        "running {} with {} for {} steps",
        s.plant, s.strategy, s.steps
    );
    let (log, outcome) = run_scenario(&s)?;
    let mut written = Vec::new();
    log.write_csv(create(out_dir, format!("{stem}_simlog.csv"), &mut written)?)?;
    write_json(
        out_dir,
        format!("{stem}_summary.json"),
        &outcome,
        &mut written,
    )?;
    Ok(CommandOutcome {
        exit_code: exit_code_for(&outcome.status),
        written,
        summary: format!(
            "{} {}: {} after {} steps, max h {:.4}, mean solve {:.3} ms",
            outcome.plant,
            outcome.strategy,
            outcome.status,
            outcome.summary.steps_completed,
            outcome.summary.max_h,
            outcome.summary.mean_solve_ms
        ),
    })
}

/// Sweeps the file's grid for each strategy and compares every later
/// strategy against the first.
pub fn cmd_map(path: &Path, out_dir: &Path, ov: &Overrides) -> Result<CommandOutcome> {
    let (file, s, stem) = load(path, ov)?;
    let mut grid = file
        .grid
        .clone()
        .ok_or_else(|| Error::Config(format!("{} has no grid section", path.display())))?;
    if let Some(w) = ov.workers {
        grid.workers = w;
    }
    if let Some(n) = ov.steps {
        grid.steps = n;
    }
    let strategies = if ov.strategies.is_empty() {
        vec![s.strategy]
    } else {
        ov.strategies.clone()
    };
    let mut written = Vec::new();
    let mut maps = Vec::with_capacity(strategies.len());
    let mut parts = Vec::new();
    for &strategy in &strategies {
        info!("sweeping {} cells with {strategy}", grid.len());
        let map = sweep(&grid, &s, strategy)?;
        let label = strategy.label();
        map.write_csv(create(
            out_dir,
            format!("{stem}_map_{label}.csv"),
            &mut written,
        )?)?;
        map.write_grid(create(
            out_dir,
            format!("{stem}_map_{label}.dat"),
            &mut written,
        )?)?;
        parts.push(format!("{label} {}/{}", map.feasible_count(), grid.len()));
        maps.push(map);
    }
    if let Some((first, rest)) = maps.split_first() {
        let a = first.strategy.label();
        for other in rest {
            let b = other.strategy.label();
            let cmp = compare_regions(first, other)?;
            write_json(
                out_dir,
                format!("{stem}_compare_{a}_vs_{b}.json"),
                &cmp,
                &mut written,
            )?;
            cmp.write_diff_csv(
                first,
                other,
                create(out_dir, format!("{stem}_diff_{a}_vs_{b}.csv"), &mut written)?,
            )?;
        }
    }
    Ok(CommandOutcome {
        exit_code: 0,
        written,
        summary: format!("feasible cells: {}", parts.join(", ")),
    })
}

/// Times the solver for each strategy. Without explicit strategies the
/// baseline is pointwise over the full horizon, compared with the file's
/// strategy.
pub fn cmd_bench(
    path: &Path,
    out_dir: &Path,
    ov: &Overrides,
    repetitions: usize,
) -> Result<CommandOutcome> {
    let (file, mut s, stem) = load(path, ov)?;
    let strategies = if ov.strategies.is_empty() {
        let base = ConstraintStrategy::Pointwise { n_c: s.horizon };
        s.strategy = file.strategy;
        if file.strategy == base {
            vec![base]
        } else {
            vec![base, file.strategy]
        }
    } else {
        ov.strategies.clone()
    };
    let report = bench(&s, &strategies, repetitions)?;
    let mut written = Vec::new();
    write_json(out_dir, format!("{stem}_bench.json"), &report, &mut written)?;
    report.write_csv(create(out_dir, format!("{stem}_bench.csv"), &mut written)?)?;
    let parts: Vec<String> = report
        .strategies
        .iter()
        .map(|r| match (r.mean_ms, r.reduction) {
            (Some(m), Some(red)) => format!("{} {m:.3} ms ({:+.1}%)", r.strategy, 100.0 * red),
            _ => format!("{} unavailable", r.strategy),
        })
        .collect();
    Ok(CommandOutcome {
        exit_code: 0,
        written,
        summary: format!(
            "mean solve time vs {}: {}",
            report.baseline,
            parts.join(", ")
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for(&RunStatus::Completed), 0);
        assert_eq!(exit_code_for(&RunStatus::ViolatedAt { t: 1 }), 2);
        assert_eq!(exit_code_for(&RunStatus::StartupViolation { t: 1 }), 2);
        assert_eq!(exit_code_for(&RunStatus::InfeasibleAt { t: 1 }), 3);
        assert_eq!(error_exit_code(&Error::Config("x".into())), 4);
        assert_eq!(error_exit_code(&Error::Solver("x".into())), 5);
    }

    #[test]
    fn overrides_take_precedence() {
        let mut s = Scenario::braking_default();
        let ov = Overrides {
            steps: Some(7),
            max_iter: Some(9),
            relax: true,
            strategies: vec![ConstraintStrategy::Pointwise { n_c: 3 }],
            ..Overrides::default()
        };
        ov.apply(&mut s);
        assert_eq!((s.steps, s.solver.max_iter, s.relax), (7, 9, true));
        assert_eq!(s.strategy, ConstraintStrategy::Pointwise { n_c: 3 });
    }
}
