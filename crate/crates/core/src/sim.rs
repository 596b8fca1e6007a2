//! Closed-loop receding-horizon simulation.
//!
//! Each real step assembles the OCP at the measured state with a forecast
//! that holds the current preceding-vehicle acceleration, solves it, applies
//! only the first control to the real plant under the true disturbance and
//! logs the step.

use std::fmt;
use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::constraints::{
    gcbf_decay_bound, AccSafeDistance, BrakingDistance, ConstraintParams, ConstraintStrategy,
};
use crate::dynamics::{
    AccParams, AccPlant, BrakingPlant, DisturbanceProfile, DisturbanceSpec, Exogenous, Plant,
};
use crate::error::{Error, Result};
use crate::ocp::{
    assemble, solve_sqp, ControlModel, CostSpec, FiniteHorizonOcp, OcpResult, SolverSettings,
    Verdict,
};

/// Default violation tolerance on `h`.
pub const VIOLATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    Acc,
    Braking,
}

impl fmt::Display for PlantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlantKind::Acc => "acc",
            PlantKind::Braking => "braking",
        })
    }
}

/// Everything needed to run one closed loop.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub plant: PlantKind,
    /// ACC parameters; the braking plant uses only the sampling time `T`.
    pub params: AccParams,
    pub limits: ConstraintParams,
    pub initial_state: Vec<f64>,
    pub disturbance: DisturbanceSpec,
    pub cost: CostSpec,
    pub horizon: usize,
    pub strategy: ConstraintStrategy,
    pub solver: SolverSettings,
    /// Real steps to simulate.
    pub steps: usize,
    /// Recorded with the outputs; the loop itself is deterministic.
    pub seed: u64,
    pub violation_tol: f64,
    /// Keep going after an infeasible solve with the minimum-violation plan.
    pub relax: bool,
    /// Start outside the safe set; violations are reported only once the
    /// state has entered it.
    pub allow_unsafe_start: bool,
}

impl Scenario {
    /// ACC at the origin, default profile, GCBF{λ=0.01, m=2}, N=50, 30 s.
    pub fn acc_default() -> Self {
        Self {
            plant: PlantKind::Acc,
            params: AccParams::default(),
            limits: ConstraintParams::default(),
            initial_state: vec![0.0; 3],
            disturbance: DisturbanceSpec::default(),
            cost: CostSpec::acc(),
            horizon: 50,
            strategy: ConstraintStrategy::Gcbf { lambda: 0.01, m: 2 },
            solver: SolverSettings::default(),
            steps: 300,
            seed: 0,
            violation_tol: VIOLATION_TOL,
            relax: false,
            allow_unsafe_start: false,
        }
    }

    /// Braking plant 10 m from the obstacle closing at 2 m/s, GCBF{λ=0.2, m=2}.
    pub fn braking_default() -> Self {
        Self {
            plant: PlantKind::Braking,
            initial_state: vec![10.0, 2.0],
            disturbance: DisturbanceSpec::Constant { v_p: 0.0 },
            cost: CostSpec::braking(),
            horizon: 20,
            strategy: ConstraintStrategy::Gcbf { lambda: 0.2, m: 2 },
            steps: 200,
            ..Self::acc_default()
        }
    }

    pub fn with_strategy(mut self, strategy: ConstraintStrategy) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_initial_state(mut self, x0: &[f64]) -> Self {
        self.initial_state = x0.to_vec();
        self
    }

    pub fn state_dim(&self) -> usize {
        match self.plant {
            PlantKind::Acc => 3,
            PlantKind::Braking => 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config(
                "simulation length must be at least 1 step".into(),
            ));
        }
        if self.initial_state.len() != self.state_dim() {
            return Err(Error::Config(format!(
                "{} plant needs {} initial-state entries, got {}",
                self.plant,
                self.state_dim(),
                self.initial_state.len()
            )));
        }
        if let Some(v) = self.initial_state.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "initial state",
                value: *v,
            });
        }
        if !(self.violation_tol >= 0.0 && self.violation_tol.is_finite()) {
            return Err(Error::Config(
                "violation tolerance must be finite and nonnegative".into(),
            ));
        }
        self.params.validate()?;
        self.strategy.validate(self.horizon)?;
        self.solver.validate()?;
        self.cost.validate(self.state_dim())?;
        Ok(())
    }

    /// Plant, barrier and input box.
    pub fn model(&self) -> Result<ControlModel> {
        let limits = self.limits.normalized()?;
        let (lo, hi) = limits.input_bounds();
        match self.plant {
            PlantKind::Acc => ControlModel::new(
                Arc::new(AccPlant::new(self.params)?),
                Arc::new(AccSafeDistance::new(self.params, limits)),
                lo,
                hi,
            ),
            PlantKind::Braking => ControlModel::new(
                Arc::new(BrakingPlant::new(self.params.step)?),
                Arc::new(BrakingDistance),
                lo,
                hi,
            ),
        }
    }

    pub fn profile(&self) -> Result<DisturbanceProfile> {
        self.disturbance.sample(self.params.step, self.steps)
    }
}

/// Pluggable OCP solver for the closed loop.
pub trait OcpSolver {
    fn solve(&mut self, ocp: &FiniteHorizonOcp, warm_start: Option<&[f64]>) -> Result<OcpResult>;
}

/// The in-crate SQP method.
#[derive(Debug, Clone, Copy, Default)]
pub struct SqpSolver {
    pub settings: SolverSettings,
}

impl SqpSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

impl OcpSolver for SqpSolver {
    fn solve(&mut self, ocp: &FiniteHorizonOcp, warm_start: Option<&[f64]>) -> Result<OcpResult> {
        solve_sqp(ocp, warm_start, &self.settings)
    }
}

/// One real step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub state: Vec<f64>,
    pub exogenous: Exogenous,
    pub h: f64,
    pub verdict: Verdict,
    /// `u_{0|t}`, or `None` when nothing was applied.
    pub applied: Option<f64>,
    /// Full optimized control sequence.
    pub plan: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    /// Wall time of the solver call alone.
    pub solve_time: Duration,
    pub active_set: Vec<usize>,
    /// Applied from the minimum-violation plan of an infeasible solve.
    pub relaxed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub plant: PlantKind,
    pub params: AccParams,
    pub strategy: ConstraintStrategy,
    pub records: Vec<StepRecord>,
    /// State after the last applied control.
    pub final_state: Vec<f64>,
    pub final_exogenous: Exogenous,
    pub final_h: f64,
}

/// Fixed SimLog CSV header.
pub const SIMLOG_HEADER: [&str; 14] = [
    "t",
    "delta_d",
    "delta_v",
    "a_f",
    "v_p",
    "u_applied",
    "h",
    "d_true",
    "d_des",
    "verdict",
    "objective",
    "iterations",
    "solve_ms",
    "active_set",
];

#[derive(Serialize)]
struct CsvRow {
    t: f64,
    delta_d: f64,
    delta_v: f64,
    a_f: Option<f64>,
    v_p: Option<f64>,
    u_applied: Option<f64>,
    h: f64,
    d_true: f64,
    d_des: Option<f64>,
    verdict: &'static str,
    objective: f64,
    iterations: usize,
    solve_ms: f64,
    active_set: String,
}

impl SimLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `h(x_t)` for every logged step followed by the final state.
    pub fn h_series(&self) -> Vec<f64> {
        let mut h: Vec<f64> = self.records.iter().map(|r| r.h).collect();
        if self.records.last().is_some_and(|r| r.applied.is_some()) {
            h.push(self.final_h);
        }
        h
    }

    pub fn max_h(&self) -> f64 {
        self.h_series()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Ego speed `v_f = v_p − Δv` per step (ACC only).
    pub fn ego_speed(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| r.exogenous.v_p - r.state[1])
            .collect()
    }

    /// Desired distance per step (ACC only).
    pub fn desired_distance(&self) -> Vec<f64> {
        self.ego_speed()
            .into_iter()
            .map(|v| self.params.desired_distance(v))
            .collect()
    }

    /// True inter-vehicle distance per step; for the braking plant, `d`.
    pub fn true_distance(&self) -> Vec<f64> {
        match self.plant {
            PlantKind::Acc => self
                .records
                .iter()
                .zip(self.desired_distance())
                .map(|(r, dd)| r.state[0] + dd)
                .collect(),
            PlantKind::Braking => self.records.iter().map(|r| r.state[0]).collect(),
        }
    }

    /// Largest deviation when the logged controls are replayed through `plant`
    /// from the first logged state.
    pub fn replay_error(&self, plant: &dyn Plant) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let mut x = first.state.clone();
        let mut worst = 0.0f64;
        let mut next = vec![0.0; x.len()];
        for (k, r) in self.records.iter().enumerate() {
            for (a, b) in x.iter().zip(&r.state) {
                worst = worst.max((a - b).abs());
            }
            let Some(u) = r.applied else { break };
            plant.step_into(&x, u, r.exogenous, &mut next);
            std::mem::swap(&mut x, &mut next);
            if k + 1 == self.records.len() {
                for (a, b) in x.iter().zip(&self.final_state) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(out);
        w.write_record(SIMLOG_HEADER)?;
        let dt = self.params.step;
        let is_acc = self.plant == PlantKind::Acc;
        let dd = if is_acc {
            self.desired_distance()
        } else {
            Vec::new()
        };
        let d_true = self.true_distance();
        for (k, r) in self.records.iter().enumerate() {
            w.serialize(CsvRow {
                t: r.t as f64 * dt,
                delta_d: r.state[0],
                delta_v: r.state[1],
                a_f: is_acc.then(|| r.state[2]),
                v_p: is_acc.then_some(r.exogenous.v_p),
                u_applied: r.applied,
                h: r.h,
                d_true: d_true[k],
                d_des: dd.get(k).copied(),
                verdict: if r.relaxed {
                    "relaxed"
                } else {
                    r.verdict.as_str()
                },
                objective: r.objective,
                iterations: r.iterations,
                solve_ms: r.solve_time.as_secs_f64() * 1e3,
                active_set: r
                    .active_set
                    .iter()
                    .map(usize::to_string)
                    .collect::<Vec<_>>()
                    .join(";"),
            })?;
        }
        if self.records.is_empty() {
            w.write_record(SIMLOG_HEADER)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// The solver proved the OCP at real step `t` infeasible.
    InfeasibleAt {
        t: usize,
    },
    /// `h(x_t)` exceeded the violation tolerance.
    ViolatedAt {
        t: usize,
    },
    /// GCBF start-up hypothesis failed: `h(x_t) > 0` for some `1 ≤ t < m`.
    StartupViolation {
        t: usize,
    },
    /// The solver neither converged to a feasible point nor proved
    /// infeasibility, or broke down.
    SolverFailureAt {
        t: usize,
        message: String,
    },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    /// Real step at which the run stopped, if it stopped early.
    pub fn failure_step(&self) -> Option<usize> {
        match self {
            RunStatus::Completed => None,
            RunStatus::InfeasibleAt { t }
            | RunStatus::ViolatedAt { t }
            | RunStatus::StartupViolation { t }
            | RunStatus::SolverFailureAt { t, .. } => Some(*t),
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Completed => write!(f, "completed"),
            RunStatus::InfeasibleAt { t } => write!(f, "infeasible at t={t}"),
            RunStatus::ViolatedAt { t } => write!(f, "violated at t={t}"),
            RunStatus::StartupViolation { t } => write!(f, "start-up violation at t={t}"),
            RunStatus::SolverFailureAt { t, message } => {
                write!(f, "solver failure at t={t}: {message}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub steps_completed: usize,
    /// Mean realized stage cost over applied steps.
    pub mean_cost: f64,
    pub max_h: f64,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    pub mean_iterations: f64,
    pub relaxed_steps: usize,
    pub max_iteration_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub plant: PlantKind,
    pub strategy: String,
    pub seed: u64,
    #[serde(flatten)]
    pub status: RunStatus,
    #[serde(flatten)]
    pub summary: RunSummary,
}

/// Runs the closed loop with the SQP solver.
pub fn run_scenario(s: &Scenario) -> Result<(SimLog, RunOutcome)> {
    run_scenario_with(s, &mut SqpSolver::new(s.solver))
}

/// Runs the closed loop with any solver.
pub fn run_scenario_with(s: &Scenario, solver: &mut dyn OcpSolver) -> Result<(SimLog, RunOutcome)> {
    s.validate()?;
    let model = s.model()?;
    let profile = s.profile()?;
    let plant = model.plant.clone();
    let barrier = model.barrier.clone();
    let startup_until = match s.strategy {
        ConstraintStrategy::Gcbf { m, .. } => m,
        _ => 1,
    };

    let mut x = s.initial_state.clone();
    let mut next = vec![0.0; x.len()];
    let mut records: Vec<StepRecord> = Vec::with_capacity(s.steps);
    let mut warm: Option<Vec<f64>> = None;
    let mut entered_safe_set = !s.allow_unsafe_start;
    let mut status = RunStatus::Completed;
    let mut stage_cost = 0.0;

    let mut t = 0;
    while t < s.steps {
        let w = profile.at(t);
        let h = barrier.value(&x, w);
        if h <= s.violation_tol {
            entered_safe_set = true;
        } else if entered_safe_set {
            status = if t > 0 && t < startup_until {
                RunStatus::StartupViolation { t }
            } else {
                RunStatus::ViolatedAt { t }
            };
            break;
        }

        let ocp = assemble(
            &x,
            &model,
            &s.cost,
            s.strategy,
            s.horizon,
            profile.forecast(t, s.horizon),
        )?;
        let started = Instant::now();
        let solved = solver.solve(&ocp, warm.as_deref());
        let solve_time = started.elapsed();
        let r = match solved {
            Ok(r) => r,
            Err(e @ (Error::Solver(_) | Error::RolloutDiverged { .. })) => {
                status = RunStatus::SolverFailureAt {
                    t,
                    message: e.to_string(),
                };
                break;
            }
            Err(e) => return Err(e),
        };

        let mut relaxed = false;
        let apply = match r.verdict {
            Verdict::Optimal => true,
            Verdict::MaxIterations => r.max_violation <= s.solver.tol_feas,
            Verdict::Infeasible => {
                relaxed = s.relax;
                s.relax
            }
        };
        let u0 = r.controls.first().map(|u| ocp.clamp(*u));
        records.push(StepRecord {
            t,
            state: x.clone(),
            exogenous: w,
            h,
            verdict: r.verdict,
            applied: if apply { u0 } else { None },
            plan: r.controls.clone(),
            objective: r.objective,
            iterations: r.iterations,
            solve_time,
            active_set: r.active_set.clone(),
            relaxed,
        });
        if !apply {
            status = match r.verdict {
                Verdict::Infeasible => RunStatus::InfeasibleAt { t },
                _ => RunStatus::SolverFailureAt {
                    t,
                    message: format!("no feasible iterate after {} iterations", r.iterations),
                },
            };
            break;
        }
        let u = u0.expect("horizon is at least 1");
        stage_cost += s.cost.stage(&x, u);
        plant.step_into(&x, u, w, &mut next);
        if let Some(v) = next.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "real-domain state",
                value: *v,
            });
        }
        std::mem::swap(&mut x, &mut next);

        // Shift the plan by one step for the next warm start.
        let mut shifted = r.controls;
        shifted.rotate_left(1);
        if let (Some(last), Some(prev)) =
            (shifted.len().checked_sub(1), shifted.len().checked_sub(2))
        {
            shifted[last] = shifted[prev];
        }
        warm = Some(shifted);
        t += 1;
    }

    let final_exogenous = profile.at(t.min(s.steps));
    let final_h = barrier.value(&x, final_exogenous);
    if status.is_completed() && entered_safe_set && final_h > s.violation_tol {
        status = RunStatus::ViolatedAt { t: s.steps };
    }

    let log = SimLog {
        plant: s.plant,
        params: s.params,
        strategy: s.strategy,
        records,
        final_state: x,
        final_exogenous,
        final_h,
    };
    let applied = log.records.iter().filter(|r| r.applied.is_some()).count();
    let solve_ms: Vec<f64> = log
        .records
        .iter()
        .map(|r| r.solve_time.as_secs_f64() * 1e3)
        .collect();
    let summary = RunSummary {
        steps_completed: applied,
        mean_cost: if applied > 0 {
            stage_cost / applied as f64
        } else {
            0.0
        },
        max_h: log
            .max_h()
            .max(barrier.value(&s.initial_state, profile.at(0))),
        mean_solve_ms: mean(&solve_ms),
        max_solve_ms: solve_ms.iter().copied().fold(0.0, f64::max),
        mean_iterations: mean(
            &log.records
                .iter()
                .map(|r| r.iterations as f64)
                .collect::<Vec<_>>(),
        ),
        relaxed_steps: log.records.iter().filter(|r| r.relaxed).count(),
        max_iteration_steps: log
            .records
            .iter()
            .filter(|r| r.verdict == Verdict::MaxIterations)
            .count(),
    };
    let outcome = RunOutcome {
        plant: s.plant,
        strategy: s.strategy.to_string(),
        seed: s.seed,
        status,
        summary,
    };
    Ok((log, outcome))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One run of [`compare_strategies`].
#[derive(Debug)]
pub struct StrategyRun {
    pub strategy: ConstraintStrategy,
    pub result: Result<(SimLog, RunOutcome)>,
}

/// Runs the same scenario under each strategy. A failing run does not stop
/// the others.
pub fn compare_strategies(s: &Scenario, strategies: &[ConstraintStrategy]) -> Vec<StrategyRun> {
    strategies
        .iter()
        .map(|&strategy| StrategyRun {
            strategy,
            result: run_scenario(&s.clone().with_strategy(strategy)),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub status: String,
    pub mean_cost: Option<f64>,
    pub max_h: Option<f64>,
    pub mean_solve_ms: Option<f64>,
    pub error: Option<String>,
}

pub fn comparison_table(runs: &[StrategyRun]) -> Vec<ComparisonRow> {
    runs.iter()
        .map(|run| match &run.result {
            Ok((_, o)) => ComparisonRow {
                strategy: run.strategy.to_string(),
                status: o.status.to_string(),
                mean_cost: Some(o.summary.mean_cost),
                max_h: Some(o.summary.max_h),
                mean_solve_ms: Some(o.summary.mean_solve_ms),
                error: None,
            },
            Err(e) => ComparisonRow {
                strategy: run.strategy.to_string(),
                status: "error".into(),
                mean_cost: None,
                max_h: None,
                mean_solve_ms: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

/// First step `t` at which the realized series breaks the GCBF chain, either
/// `h_{t+m} ≤ (1−λ)^m h_t` or `h_t ≤ (1−λ)^{t − t mod m} h_{t mod m}`.
pub fn gcbf_chain_violation(h: &[f64], lambda: f64, m: usize, tol: f64) -> Option<usize> {
    let decay = (1.0 - lambda).powi(m as i32);
    for t in 0..h.len() {
        if t + m < h.len() && h[t + m] > decay * h[t] + tol {
            return Some(t + m);
        }
        if t >= m && h[t] > gcbf_decay_bound(h[t % m], lambda, m, t) + tol {
            return Some(t);
        }
    }
    None
}
