//! Empirical feasible regions over a grid of initial ACC states.
//!
//! Every cell runs the ordinary closed loop from its initial state; the sweep
//! only distributes cells over a worker pool and collects labels by index.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::ConstraintStrategy;
use crate::error::{Error, Result};
use crate::sim::{run_scenario, PlantKind, RunStatus, Scenario};

/// One grid axis: `points` values evenly spaced over `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| self.min + step * k as f64)
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.points < 2 {
            return Err(Error::Config(format!(
                "grid axis {name} needs at least 2 points"
            )));
        }
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(Error::Config(format!(
                "grid axis {name} needs a finite range with min < max"
            )));
        }
        Ok(())
    }
}

/// Treatment of the acceleration axis, which the map projects out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum AccelAxis {
    Fixed {
        value: f64,
    },
    /// A cell is feasible only if it is feasible for every listed value.
    Sweep {
        values: Vec<f64>,
    },
}

impl AccelAxis {
    fn values(&self) -> Vec<f64> {
        match self {
            AccelAxis::Fixed { value } => vec![*value],
            AccelAxis::Sweep { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub delta_d: Axis,
    pub delta_v: Axis,
    pub a_f: AccelAxis,
    /// Real steps per cell.
    pub steps: usize,
    /// Worker threads; 0 uses all available cores.
    pub workers: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            delta_d: Axis {
                min: -10.0,
                max: 10.0,
                points: 41,
            },
            delta_v: Axis {
                min: -5.0,
                max: 5.0,
                points: 41,
            },
            a_f: AccelAxis::Fixed { value: 0.0 },
            steps: 150,
            workers: 0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        self.delta_d.validate("delta_d")?;
        self.delta_v.validate("delta_v")?;
        let af = self.a_f.values();
        if af.is_empty() || af.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(
                "a_f axis needs at least one finite value".into(),
            ));
        }
        if self.steps == 0 {
            return Err(Error::Config(
                "grid cells need at least one real step".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.delta_d.points * self.delta_v.points
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same cells regardless of `workers`.
    fn same_cells(&self, other: &GridSpec) -> bool {
        self.delta_d == other.delta_d && self.delta_v == other.delta_v && self.a_f == other.a_f
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum CellLabel {
    Feasible,
    InfeasibleAt {
        t: usize,
    },
    ViolatedAt {
        t: usize,
    },
    StartupViolation {
        t: usize,
    },
    /// `h(x_0) > 0`; the loop is not run.
    UnsafeAtT0,
    SolverFailure {
        t: usize,
    },
}

impl CellLabel {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CellLabel::Feasible)
    }

    pub fn first_failure_step(&self) -> Option<usize> {
        match self {
            CellLabel::Feasible => None,
            CellLabel::UnsafeAtT0 => Some(0),
            CellLabel::InfeasibleAt { t }
            | CellLabel::ViolatedAt { t }
            | CellLabel::StartupViolation { t }
            | CellLabel::SolverFailure { t } => Some(*t),
        }
    }

    /// Integer code used in the plot grid.
    pub fn code(&self) -> u8 {
        match self {
            CellLabel::Feasible => 0,
            CellLabel::InfeasibleAt { .. } => 1,
            CellLabel::ViolatedAt { .. } => 2,
            CellLabel::StartupViolation { .. } => 3,
            CellLabel::UnsafeAtT0 => 4,
            CellLabel::SolverFailure { .. } => 5,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CellLabel::Feasible => "feasible",
            CellLabel::InfeasibleAt { .. } => "infeasible",
            CellLabel::ViolatedAt { .. } => "violated",
            CellLabel::StartupViolation { .. } => "startup_violation",
            CellLabel::UnsafeAtT0 => "unsafe_t0",
            CellLabel::SolverFailure { .. } => "solver_failure",
        }
    }

    pub fn from_status(status: &RunStatus) -> Self {
        match status {
            RunStatus::Completed => CellLabel::Feasible,
            RunStatus::InfeasibleAt { t } => CellLabel::InfeasibleAt { t: *t },
            RunStatus::ViolatedAt { t } => CellLabel::ViolatedAt { t: *t },
            RunStatus::StartupViolation { t } => CellLabel::StartupViolation { t: *t },
            RunStatus::SolverFailureAt { t, .. } => CellLabel::SolverFailure { t: *t },
        }
    }
}

impl fmt::Display for CellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.first_failure_step() {
            Some(t) if !matches!(self, CellLabel::UnsafeAtT0) => write!(f, "{}@{t}", self.name()),
            _ => f.write_str(self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub delta_d: f64,
    pub delta_v: f64,
    pub label: CellLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityMap {
    pub strategy: ConstraintStrategy,
    pub grid: GridSpec,
    /// Row-major with `delta_d` varying fastest.
    pub cells: Vec<Cell>,
}

pub const MAP_HEADER: [&str; 4] = ["delta_d", "delta_v", "label", "first_failure_step"];
pub const DIFF_HEADER: [&str; 5] = [
    "delta_d",
    "delta_v",
    "a_feasible",
    "b_feasible",
    "difference",
];

#[derive(Serialize)]
struct MapRow<'a> {
    delta_d: f64,
    delta_v: f64,
    label: &'a str,
    first_failure_step: Option<usize>,
}

#[derive(Serialize)]
struct DiffRow {
    delta_d: f64,
    delta_v: f64,
    a_feasible: u8,
    b_feasible: u8,
    difference: i8,
}

impl FeasibilityMap {
    pub fn feasible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.label.is_feasible()).count()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        w.write_record(MAP_HEADER)?;
        for c in &self.cells {
            w.serialize(MapRow {
                delta_d: c.delta_d,
                delta_v: c.delta_v,
                label: c.label.name(),
                first_failure_step: c.label.first_failure_step(),
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Gnuplot `nonuniform matrix` text: the first row holds the column count
    /// and `delta_d` values, each further row a `delta_v` value and the label
    /// codes of that row.
    pub fn write_grid<W: Write>(&self, mut out: W) -> Result<()> {
        let nd = self.grid.delta_d.points;
        writeln!(out, "# strategy {}", self.strategy)?;
        writeln!(
            out,
            "# codes: 0 feasible, 1 infeasible, 2 violated, 3 startup_violation, 4 unsafe_t0, 5 solver_failure"
        )?;
        write!(out, "{nd}")?;
        for d in self.grid.delta_d.values() {
            write!(out, " {d}")?;
        }
        writeln!(out)?;
        for row in self.cells.chunks(nd) {
            write!(out, "{}", row[0].delta_v)?;
            for c in row {
                write!(out, " {}", c.label.code())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn cell_label(
    template: &Scenario,
    strategy: ConstraintStrategy,
    steps: usize,
    x0: [f64; 3],
) -> CellLabel {
    let mut s = template
        .clone()
        .with_strategy(strategy)
        .with_initial_state(&x0);
    s.steps = steps;
    s.allow_unsafe_start = false;
    let h0 = s
        .model()
        .and_then(|m| s.profile().map(|p| m.barrier.value(&x0, p.at(0))));
    match h0 {
        Ok(h) if h > 0.0 => return CellLabel::UnsafeAtT0,
        Ok(_) => {}
        Err(_) => return CellLabel::SolverFailure { t: 0 },
    }
    match run_scenario(&s) {
        Ok((_, outcome)) => CellLabel::from_status(&outcome.status),
        Err(e) => {
            log::warn!("cell {x0:?} failed: {e}");
            CellLabel::SolverFailure { t: 0 }
        }
    }
}

/// Labels every grid cell under `strategy`, starting each run from
/// `template` with the cell's initial state.
pub fn sweep(
    grid: &GridSpec,
    template: &Scenario,
    strategy: ConstraintStrategy,
) -> Result<FeasibilityMap> {
    grid.validate()?;
    if template.plant != PlantKind::Acc {
        return Err(Error::Config(
            "feasibility maps are defined for the ACC plant".into(),
        ));
    }
    let probe = template.clone().with_strategy(strategy);
    probe.validate()?;
    probe.model()?;

    let dd = grid.delta_d.values();
    let dv = grid.delta_v.values();
    let af = grid.a_f.values();
    let starts: Vec<(f64, f64)> = dv
        .iter()
        .flat_map(|&v| dd.iter().map(move |&d| (d, v)))
        .collect();
    let label_of = |&(d, v): &(f64, f64)| {
        let label = af
            .iter()
            .map(|&a| cell_label(template, strategy, grid.steps, [d, v, a]))
            .find(|l| !l.is_feasible())
            .unwrap_or(CellLabel::Feasible);
        Cell {
            delta_d: d,
            delta_v: v,
            label,
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(grid.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let cells = pool.install(|| starts.par_iter().map(label_of).collect());
    Ok(FeasibilityMap {
        strategy,
        grid: grid.clone(),
        cells,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionComparison {
    pub strategy_a: String,
    pub strategy_b: String,
    pub cells: usize,
    pub feasible_a: usize,
    pub feasible_b: usize,
    pub only_a: usize,
    pub only_b: usize,
    /// `feasible_a − feasible_b`.
    pub difference: i64,
    /// Per cell: +1 feasible only in `a`, −1 only in `b`, 0 otherwise.
    #[serde(skip)]
    pub raster: Vec<i8>,
}

impl RegionComparison {
    pub fn write_diff_csv<W: Write>(
        &self,
        a: &FeasibilityMap,
        b: &FeasibilityMap,
        out: W,
    ) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        w.write_record(DIFF_HEADER)?;
        for ((ca, cb), d) in a.cells.iter().zip(&b.cells).zip(&self.raster) {
            w.serialize(DiffRow {
                delta_d: ca.delta_d,
                delta_v: ca.delta_v,
                a_feasible: ca.label.is_feasible() as u8,
                b_feasible: cb.label.is_feasible() as u8,
                difference: *d,
            })?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn compare_regions(a: &FeasibilityMap, b: &FeasibilityMap) -> Result<RegionComparison> {
    if !a.grid.same_cells(&b.grid) || a.cells.len() != b.cells.len() {
        return Err(Error::Config(
            "feasibility maps were built on different grids".into(),
        ));
    }
    let raster: Vec<i8> = a
        .cells
        .iter()
        .zip(&b.cells)
        .map(|(ca, cb)| ca.label.is_feasible() as i8 - cb.label.is_feasible() as i8)
        .collect();
    let (fa, fb) = (a.feasible_count(), b.feasible_count());
    Ok(RegionComparison {
        strategy_a: a.strategy.to_string(),
        strategy_b: b.strategy.to_string(),
        cells: a.cells.len(),
        feasible_a: fa,
        feasible_b: fb,
        only_a: raster.iter().filter(|d| **d > 0).count(),
        only_b: raster.iter().filter(|d| **d < 0).count(),
        difference: fa as i64 - fb as i64,
        raster,
    })
}

/// True when `h` is positive at step 1 or 2 whatever the controls: `x_1` does
/// not depend on `u_0`, and `h(x_2)` is concave in `u_0`, so checking the two
/// input bounds is exact.
pub fn violation_inevitable(template: &Scenario, x0: &[f64]) -> Result<bool> {
    let model = template.model()?;
    let profile = template.disturbance.sample(template.params.step, 2)?;
    let plant = model.plant.as_ref();
    let x1 = plant.step(x0, model.input_lower, profile.at(0));
    if model.barrier.value(&x1, profile.at(1)) > 0.0 {
        return Ok(true);
    }
    let best = [model.input_lower, model.input_upper]
        .into_iter()
        .map(|u| {
            let x1 = plant.step(x0, u, profile.at(0));
            let x2 = plant.step(&x1, 0.0, profile.at(1));
            model.barrier.value(&x2, profile.at(2))
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best > 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> GridSpec {
        GridSpec {
            delta_d: Axis {
                min: -10.0,
                max: 10.0,
                points: 3,
            },
            delta_v: Axis {
                min: -5.0,
                max: 5.0,
                points: 3,
            },
            steps: 20,
            workers: 2,
            ..GridSpec::default()
        }
    }

    #[test]
    fn axis_values_hit_both_ends() {
        let v = Axis {
            min: -1.0,
            max: 1.0,
            points: 5,
        }
        .values();
        assert_eq!(v, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    }

    #[test]
    fn grid_validation() {
        GridSpec::default().validate().unwrap();
        let mut g = small_grid();
        g.delta_v.points = 1;
        assert!(g.validate().is_err());
        let mut g = small_grid();
        g.a_f = AccelAxis::Sweep { values: vec![] };
        assert!(g.validate().is_err());
    }

    #[test]
    fn unsafe_cells_are_not_run() {
        let s = Scenario::acc_default();
        let map = sweep(&small_grid(), &s, ConstraintStrategy::Pointwise { n_c: 10 }).unwrap();
        assert_eq!(map.cells.len(), 9);
        let model = s.model().unwrap();
        let w = s.profile().unwrap().at(0);
        for c in &map.cells {
            let h = model.barrier.value(&[c.delta_d, c.delta_v, 0.0], w);
            assert_eq!(c.label == CellLabel::UnsafeAtT0, h > 0.0, "{c:?}");
        }
    }

    #[test]
    fn self_comparison_is_zero() {
        let map = sweep(
            &small_grid(),
            &Scenario::acc_default(),
            ConstraintStrategy::Pointwise { n_c: 10 },
        )
        .unwrap();
        let cmp = compare_regions(&map, &map).unwrap();
        assert_eq!((cmp.difference, cmp.only_a, cmp.only_b), (0, 0, 0));
        assert!(cmp.raster.iter().all(|d| *d == 0));
    }

    #[test]
    fn grid_mismatch_is_rejected() {
        let s = Scenario::acc_default();
        let a = sweep(&small_grid(), &s, ConstraintStrategy::Pointwise { n_c: 10 }).unwrap();
        let mut g = small_grid();
        g.delta_d.max = 8.0;
        let b = sweep(&g, &s, ConstraintStrategy::Pointwise { n_c: 10 }).unwrap();
        assert!(compare_regions(&a, &b).is_err());
    }

    #[test]
    fn grid_file_shape() {
        let map = sweep(
            &small_grid(),
            &Scenario::acc_default(),
            ConstraintStrategy::Pointwise { n_c: 10 },
        )
        .unwrap();
        let mut buf = Vec::new();
        map.write_grid(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0], "3 -10 0 10");
    }

    #[test]
    fn inevitable_violation_at_step_one() {
        // Leader pulling away with the gap already short: h(x_1) > 0.
        let s = Scenario::acc_default();
        assert!(violation_inevitable(&s, &[-10.0, 5.0, 0.0]).unwrap());
        assert!(!violation_inevitable(&s, &[5.0, 0.0, 0.0]).unwrap());
    }
}
