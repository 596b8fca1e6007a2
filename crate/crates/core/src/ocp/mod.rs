//! Finite-horizon optimal control in single-shooting form.
//!
//! The decision vector is the control sequence `u_{0..N−1|t}`; states are
//! recovered by rolling the plant forward, so the dynamics hold by
//! construction. Derivatives come from forward sensitivities
//! `S_i = ∂x_{i|t}/∂u` propagated through the exact plant Jacobians.

mod brute;
mod qp;
mod sqp;

pub use brute::{brute_force_solve, BRUTE_FORCE_MAX_HORIZON, BRUTE_FORCE_MAX_POINTS};
pub use sqp::{solve_sqp, SolverSettings};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Duration;

use crate::constraints::{
    build_constraints, ConstraintFunction, ConstraintStrategy, HorizonConstraintSet,
};
use crate::dynamics::{Exogenous, Plant};
use crate::error::{Error, Result};

/// Diagonal quadratic stage cost `Σ w_k·(x_k − ref_k)² + w_u·u²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub state_weights: Vec<f64>,
    #[serde(default)]
    pub state_reference: Vec<f64>,
    pub input_weight: f64,
}

impl CostSpec {
    /// The ACC utility `0.02·Δd² + 0.025·Δv² + 5·a_fdes²`.
    pub fn acc() -> Self {
        Self {
            state_weights: vec![0.02, 0.025, 0.0],
            state_reference: vec![0.0; 3],
            input_weight: 5.0,
        }
    }

    /// Braking cost: come to rest at the obstacle, lightly penalize effort.
    /// The regulator overshoots without constraints, so the barrier binds.
    pub fn braking() -> Self {
        Self {
            state_weights: vec![1.0, 1.0],
            state_reference: vec![0.0, 0.0],
            input_weight: 0.1,
        }
    }

    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.state_weights.len() != state_dim {
            return Err(Error::Config(format!(
                "cost has {} state weights for a {state_dim}-state plant",
                self.state_weights.len()
            )));
        }
        if !self.state_reference.is_empty() && self.state_reference.len() != state_dim {
            return Err(Error::Config(
                "cost reference has the wrong dimension".into(),
            ));
        }
        let weights = self
            .state_weights
            .iter()
            .chain(std::iter::once(&self.input_weight));
        if weights.clone().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(
                "cost weights must be finite and nonnegative".into(),
            ));
        }
        if weights.clone().all(|w| *w == 0.0) {
            return Err(Error::Config(
                "at least one cost weight must be positive".into(),
            ));
        }
        Ok(())
    }

    fn reference(&self, k: usize) -> f64 {
        self.state_reference.get(k).copied().unwrap_or(0.0)
    }

    pub fn stage(&self, x: &[f64], u: f64) -> f64 {
        let state: f64 = x
            .iter()
            .zip(&self.state_weights)
            .enumerate()
            .map(|(k, (xk, w))| w * (xk - self.reference(k)).powi(2))
            .sum();
        state + self.input_weight * u * u
    }
}

/// A plant, its constraint function and its input box.
#[derive(Debug, Clone)]
pub struct ControlModel {
    pub plant: Arc<dyn Plant>,
    pub barrier: Arc<dyn ConstraintFunction>,
    pub input_lower: f64,
    pub input_upper: f64,
}

impl ControlModel {
    pub fn new(
        plant: Arc<dyn Plant>,
        barrier: Arc<dyn ConstraintFunction>,
        input_lower: f64,
        input_upper: f64,
    ) -> Result<Self> {
        if !(input_lower.is_finite() && input_upper.is_finite() && input_lower < input_upper) {
            return Err(Error::Config(format!(
                "invalid input box [{input_lower}, {input_upper}]"
            )));
        }
        Ok(Self {
            plant,
            barrier,
            input_lower,
            input_upper,
        })
    }
}

/// One virtual-time-domain problem.
#[derive(Debug, Clone)]
pub struct FiniteHorizonOcp {
    pub x0: Vec<f64>,
    pub horizon: usize,
    pub model: ControlModel,
    pub cost: CostSpec,
    pub strategy: ConstraintStrategy,
    pub constraints: HorizonConstraintSet,
    /// Exogenous signal per virtual step, `horizon + 1` entries.
    pub forecast: Vec<Exogenous>,
}

impl FiniteHorizonOcp {
    pub fn state_dim(&self) -> usize {
        self.model.plant.state_dim()
    }

    /// Number of decision variables.
    pub fn dim(&self) -> usize {
        self.horizon
    }

    pub fn inequality_count(&self) -> usize {
        self.constraints.len()
    }

    pub fn clamp(&self, u: f64) -> f64 {
        u.clamp(self.model.input_lower, self.model.input_upper)
    }
}

/// Builds the single-shooting OCP at `x0`.
pub fn assemble(
    x0: &[f64],
    model: &ControlModel,
    cost: &CostSpec,
    strategy: ConstraintStrategy,
    horizon: usize,
    forecast: Vec<Exogenous>,
) -> Result<FiniteHorizonOcp> {
    let nx = model.plant.state_dim();
    if x0.len() != nx {
        return Err(Error::Config(format!(
            "initial state has {} entries, plant has {nx}",
            x0.len()
        )));
    }
    if let Some(v) = x0.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "initial state",
            value: *v,
        });
    }
    if forecast.len() != horizon + 1 {
        return Err(Error::Config(format!(
            "forecast has {} entries, expected {}",
            forecast.len(),
            horizon + 1
        )));
    }
    cost.validate(nx)?;
    let constraints = build_constraints(strategy, horizon)?;
    Ok(FiniteHorizonOcp {
        x0: x0.to_vec(),
        horizon,
        model: model.clone(),
        cost: cost.clone(),
        strategy,
        constraints,
        forecast,
    })
}

/// Trajectory, cost and constraint values of one control sequence, with
/// their gradients with respect to the controls.
#[derive(Debug, Clone)]
pub struct Rollout {
    /// `x_{0|t}, …, x_{N|t}`.
    pub states: Vec<Vec<f64>>,
    /// `h(x_{i|t})` per virtual step.
    pub h_values: Vec<f64>,
    pub cost: f64,
    pub cost_gradient: Vec<f64>,
    pub constraint_values: Vec<f64>,
    /// One row per inequality.
    pub constraint_gradients: Vec<Vec<f64>>,
}

/// Rolls `u` through the plant and returns values with exact gradients.
pub fn rollout(ocp: &FiniteHorizonOcp, u: &[f64]) -> Result<Rollout> {
    if u.len() != ocp.horizon {
        return Err(Error::Config(format!(
            "control sequence has {} entries, expected {}",
            u.len(),
            ocp.horizon
        )));
    }
    let mut ev = Evaluator::new(ocp);
    let mut d = Derivatives::new(ocp.horizon, ocp.inequality_count());
    let (cost, g) = ev.derivatives(u, &mut d, false)?;
    let nx = ev.nx;
    Ok(Rollout {
        states: ev.states.chunks(nx).map(<[f64]>::to_vec).collect(),
        h_values: ev.h.clone(),
        cost,
        cost_gradient: d.cost_gradient,
        constraint_values: g,
        constraint_gradients: d
            .jacobian
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect(),
    })
}

/// Solver outcome category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Optimal => "optimal",
            Verdict::Infeasible => "infeasible",
            Verdict::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OcpResult {
    pub verdict: Verdict,
    pub controls: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub objective: f64,
    /// `max(0, max_j g_j)`.
    pub max_violation: f64,
    /// `‖∇f + Σ μ_j ∇g_j + ν‖∞` at the returned controls.
    pub stationarity: f64,
    pub complementarity: f64,
    /// Multipliers of the horizon inequalities.
    pub multipliers: Vec<f64>,
    /// Multipliers of the input box: positive for an active upper bound,
    /// negative for an active lower bound.
    pub bound_multipliers: Vec<f64>,
    /// Indices of inequalities active at the solution.
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub qp_iterations: usize,
    /// General inequality rows in each QP subproblem.
    pub qp_rows: usize,
    pub solve_time: Duration,
}

impl OcpResult {
    /// Virtual steps touched last by each active inequality.
    pub fn active_steps(&self, ocp: &FiniteHorizonOcp) -> Vec<usize> {
        self.active_set
            .iter()
            .map(|&j| ocp.constraints.inequalities[j].last_step())
            .collect()
    }
}

/// Derivative buffers filled by [`Evaluator::derivatives`].
#[derive(Debug, Clone)]
pub(crate) struct Derivatives {
    pub cost_gradient: Vec<f64>,
    /// Gauss-Newton Hessian of the cost (filled only on request).
    pub hessian: DMatrix<f64>,
    /// Constraint Jacobian, one row per inequality.
    pub jacobian: DMatrix<f64>,
}

impl Derivatives {
    pub fn new(n: usize, m: usize) -> Self {
        Self {
            cost_gradient: vec![0.0; n],
            hessian: DMatrix::zeros(n, n),
            jacobian: DMatrix::zeros(m, n),
        }
    }
}

/// Reusable rollout workspace for one OCP.
pub(crate) struct Evaluator<'a> {
    ocp: &'a FiniteHorizonOcp,
    pub nx: usize,
    n: usize,
    /// `(n+1)·nx`, row-major by step.
    pub states: Vec<f64>,
    pub h: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    /// `∂x_i/∂u_j` at `((i·nx) + r)·n + j`.
    sens: Vec<f64>,
    grad_h: Vec<f64>,
    needs_h_grad: Vec<bool>,
}

impl<'a> Evaluator<'a> {
    pub fn new(ocp: &'a FiniteHorizonOcp) -> Self {
        let nx = ocp.state_dim();
        let n = ocp.horizon;
        let mut needs_h_grad = vec![false; n + 1];
        for g in &ocp.constraints.inequalities {
            for i in g.touched_steps() {
                needs_h_grad[i] = true;
            }
        }
        Self {
            ocp,
            nx,
            n,
            states: vec![0.0; (n + 1) * nx],
            h: vec![0.0; n + 1],
            a: vec![0.0; n * nx * nx],
            b: vec![0.0; n * nx],
            sens: vec![0.0; (n + 1) * nx * n],
            grad_h: vec![0.0; (n + 1) * nx],
            needs_h_grad,
        }
    }

    fn forward(&mut self, u: &[f64]) -> Result<f64> {
        let (nx, ocp) = (self.nx, self.ocp);
        let plant = ocp.model.plant.as_ref();
        self.states[..nx].copy_from_slice(&ocp.x0);
        let mut cost = 0.0;
        for i in 0..self.n {
            let (head, tail) = self.states.split_at_mut((i + 1) * nx);
            let x = &head[i * nx..];
            cost += ocp.cost.stage(x, u[i]);
            plant.step_into(x, u[i], ocp.forecast[i], &mut tail[..nx]);
            if tail[..nx].iter().any(|v| !v.is_finite()) {
                return Err(Error::RolloutDiverged { step: i + 1 });
            }
        }
        for i in 0..=self.n {
            self.h[i] = ocp
                .model
                .barrier
                .value(&self.states[i * nx..(i + 1) * nx], ocp.forecast[i]);
        }
        Ok(cost)
    }

    /// Cost and inequality values only.
    pub fn values(&mut self, u: &[f64]) -> Result<(f64, Vec<f64>)> {
        let cost = self.forward(u)?;
        Ok((cost, self.ocp.constraints.evaluate(&self.h)))
    }

    /// Values plus cost gradient, constraint Jacobian and, if `hessian` is
    /// set, the Gauss-Newton Hessian of the cost.
    pub fn derivatives(
        &mut self,
        u: &[f64],
        out: &mut Derivatives,
        hessian: bool,
    ) -> Result<(f64, Vec<f64>)> {
        let cost = self.forward(u)?;
        let (nx, n, ocp) = (self.nx, self.n, self.ocp);
        let plant = ocp.model.plant.as_ref();

        for (i, &ui) in u.iter().enumerate() {
            let x = &self.states[i * nx..(i + 1) * nx];
            plant.jacobians_into(
                x,
                ui,
                ocp.forecast[i],
                &mut self.a[i * nx * nx..(i + 1) * nx * nx],
                &mut self.b[i * nx..(i + 1) * nx],
            );
        }

        // S_{i+1} = A_i S_i + B_i e_iᵀ, with S_0 = 0.
        self.sens[..nx * n].fill(0.0);
        for i in 0..n {
            let (head, tail) = self.sens.split_at_mut((i + 1) * nx * n);
            let cur = &head[i * nx * n..];
            let next = &mut tail[..nx * n];
            let a = &self.a[i * nx * nx..(i + 1) * nx * nx];
            for r in 0..nx {
                let row = &mut next[r * n..(r + 1) * n];
                row.fill(0.0);
                for c in 0..nx {
                    let arc = a[r * nx + c];
                    if arc != 0.0 {
                        let src = &cur[c * n..c * n + i];
                        for (dst, s) in row[..i].iter_mut().zip(src) {
                            *dst += arc * s;
                        }
                    }
                }
                row[i] = self.b[i * nx + r];
            }
        }

        // ∇J = Σ_i 2 S_iᵀ W (x_i − ref) + 2 w_u u.
        let cost_spec = &ocp.cost;
        let grad = &mut out.cost_gradient;
        for (g, ui) in grad.iter_mut().zip(u) {
            *g = 2.0 * cost_spec.input_weight * ui;
        }
        for i in 1..n {
            for r in 0..nx {
                let w = cost_spec.state_weights[r];
                if w == 0.0 {
                    continue;
                }
                let coeff = 2.0 * w * (self.states[i * nx + r] - cost_spec.reference(r));
                let srow = &self.sens[(i * nx + r) * n..(i * nx + r) * n + i];
                for (g, s) in grad[..i].iter_mut().zip(srow) {
                    *g += coeff * s;
                }
            }
        }

        for i in 0..=n {
            if self.needs_h_grad[i] {
                ocp.model.barrier.gradient_into(
                    &self.states[i * nx..(i + 1) * nx],
                    ocp.forecast[i],
                    &mut self.grad_h[i * nx..(i + 1) * nx],
                );
            }
        }
        let jac = &mut out.jacobian;
        jac.fill(0.0);
        for (j, ineq) in ocp.constraints.inequalities.iter().enumerate() {
            for &(i, coeff) in &ineq.terms {
                for r in 0..nx {
                    let gh = coeff * self.grad_h[i * nx + r];
                    if gh == 0.0 {
                        continue;
                    }
                    for k in 0..i {
                        jac[(j, k)] += gh * self.sens[(i * nx + r) * n + k];
                    }
                }
            }
        }

        if hessian {
            self.gauss_newton(&mut out.hessian);
        }

        Ok((cost, ocp.constraints.evaluate(&self.h)))
    }

    /// `H = 2 Σ_{i=1}^{N−1} S_iᵀ W S_i + 2 w_u I`, assembled column by column
    /// with `P_k = W + A_kᵀ P_{k+1} A_k`, `P_N = 0`, and
    /// `H_{jk} = 2 S_{k+1}[:, j]ᵀ P_{k+1} B_k` for `j ≤ k`.
    fn gauss_newton(&self, hess: &mut DMatrix<f64>) {
        let (nx, n) = (self.nx, self.n);
        let weights = &self.ocp.cost.state_weights;
        hess.fill(0.0);
        let mut p = vec![0.0; nx * nx];
        let mut tmp = vec![0.0; nx * nx];
        let mut v = vec![0.0; nx];
        for k in (0..n).rev() {
            let bk = &self.b[k * nx..(k + 1) * nx];
            for r in 0..nx {
                v[r] = (0..nx).map(|c| p[r * nx + c] * bk[c]).sum();
            }
            let base = (k + 1) * nx * n;
            for j in 0..=k {
                let acc: f64 = v
                    .iter()
                    .enumerate()
                    .map(|(r, vr)| self.sens[base + r * n + j] * vr)
                    .sum();
                hess[(j, k)] = 2.0 * acc;
                hess[(k, j)] = 2.0 * acc;
            }
            // P_k = W + A_kᵀ P_{k+1} A_k
            let ak = &self.a[k * nx * nx..(k + 1) * nx * nx];
            for r in 0..nx {
                for c in 0..nx {
                    tmp[r * nx + c] = (0..nx).map(|l| p[r * nx + l] * ak[l * nx + c]).sum();
                }
            }
            for r in 0..nx {
                for c in 0..nx {
                    p[r * nx + c] = (0..nx).map(|l| ak[l * nx + r] * tmp[l * nx + c]).sum();
                }
                p[r * nx + r] += weights[r];
            }
        }
        for j in 0..n {
            hess[(j, j)] += 2.0 * self.ocp.cost.input_weight;
        }
    }
}
