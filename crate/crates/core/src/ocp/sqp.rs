//! Sequential quadratic programming for [`FiniteHorizonOcp`].
//!
//! Each iteration linearizes the inequalities, models the cost with its
//! Gauss-Newton Hessian (plus a small diagonal floor) and solves the QP
//! subproblem with the primal active-set method in [`super::qp`]. Steps are
//! globalized with an ℓ1 merit function and Armijo backtracking.
//!
//! When the linearized inequalities admit no solution, the solver switches to
//! a restoration phase that minimizes the summed constraint violation. If that
//! phase stalls above the feasibility tolerance the problem is reported
//! [`Verdict::Infeasible`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use super::qp::{self, QpProblem};
use super::{Derivatives, Evaluator, FiniteHorizonOcp, OcpResult, Verdict};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub tol_feas: f64,
    pub tol_opt: f64,
    pub max_iter: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    /// Backtracking factor.
    pub backtrack: f64,
    /// Smallest step length tried before the line search gives up.
    pub min_step: f64,
    /// Diagonal floor added to the Gauss-Newton Hessian.
    pub regularization: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_feas: 1e-6,
            tol_opt: 1e-6,
            max_iter: 100,
            armijo: 1e-4,
            backtrack: 0.5,
            min_step: 1e-10,
            regularization: 1e-8,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_feas > 0.0 && self.tol_opt > 0.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::Config("backtrack factor must lie in (0, 1)".into()));
        }
        if !(self.armijo > 0.0 && self.armijo < 0.5) {
            return Err(Error::Config("armijo constant must lie in (0, 0.5)".into()));
        }
        if !(self.regularization >= 0.0 && self.min_step > 0.0) {
            return Err(Error::Config(
                "regularization and min_step must be nonnegative/positive".into(),
            ));
        }
        Ok(())
    }
}

fn violation_sum(g: &[f64]) -> f64 {
    g.iter().map(|v| v.max(0.0)).sum()
}

fn violation_max(g: &[f64]) -> f64 {
    g.iter().fold(0.0f64, |acc, v| acc.max(*v))
}

enum StartPoint {
    Feasible(Vec<f64>),
    /// Linearization infeasible: phase-one step and its predicted violation.
    Infeasible {
        step: Vec<f64>,
        predicted: f64,
    },
}

/// Solves the OCP by SQP, optionally warm-started.
pub fn solve_sqp(
    ocp: &FiniteHorizonOcp,
    warm_start: Option<&[f64]>,
    settings: &SolverSettings,
) -> Result<OcpResult> {
    settings.validate()?;
    let started = Instant::now();
    let n = ocp.dim();
    let m = ocp.inequality_count();
    if let Some(w) = warm_start {
        if w.len() != n {
            return Err(Error::Config(format!(
                "warm start has {} entries, expected {n}",
                w.len()
            )));
        }
    }
    let (lo, hi) = (ocp.model.input_lower, ocp.model.input_upper);
    let mut u: Vec<f64> = match warm_start {
        Some(w) => w.iter().map(|&v| ocp.clamp(v)).collect(),
        None => vec![0.0f64.clamp(lo, hi); n],
    };

    let mut ev = Evaluator::new(ocp);
    let mut der = Derivatives::new(n, m);
    let mut penalty = 0.0f64;
    let mut qp_iterations = 0;
    let mut last_lambda = vec![0.0; m];
    let mut last_bounds = vec![0.0; n];
    let mut stationarity = f64::INFINITY;
    let mut complementarity = f64::INFINITY;
    let mut verdict = Verdict::MaxIterations;
    let mut iterations = 0;

    for iter in 1..=settings.max_iter {
        iterations = iter;
        let (f, g) = ev.derivatives(&u, &mut der, true)?;
        for j in 0..n {
            der.hessian[(j, j)] += settings.regularization;
        }
        let viol = violation_max(&g);
        let lower: Vec<f64> = u.iter().map(|v| lo - v).collect();
        let upper: Vec<f64> = u.iter().map(|v| hi - v).collect();
        // Rows violated within the tolerance are held, not corrected.
        let rhs: Vec<f64> = g
            .iter()
            .map(|&gj| {
                if gj > 0.0 && gj <= settings.tol_feas {
                    0.0
                } else {
                    -gj
                }
            })
            .collect();

        let start = phase_one(&der.jacobian, &rhs, &lower, &upper, &mut qp_iterations)?;
        let p0 = match start {
            StartPoint::Feasible(p0) => p0,
            StartPoint::Infeasible { step, predicted } => {
                let current = violation_sum(&g);
                match restoration_step(&mut ev, &u, &step, current, predicted, ocp, settings)? {
                    Some(next) => {
                        u = next;
                        continue;
                    }
                    None => {
                        debug_assert!(viol > settings.tol_feas);
                        verdict = Verdict::Infeasible;
                        break;
                    }
                }
            }
        };

        let problem = QpProblem {
            h: &der.hessian,
            c: &der.cost_gradient,
            a: &der.jacobian,
            b: &rhs,
            lower: &lower,
            upper: &upper,
        };
        let sol = qp::solve(&problem, &p0)
            .map_err(|e| Error::Solver(format!("QP subproblem failed: {e:?}")))?;
        qp_iterations += sol.iterations;

        // KKT residuals at u with the subproblem multipliers.
        stationarity = (0..n)
            .map(|i| {
                let mut r = der.cost_gradient[i] + sol.bound_mult[i];
                for j in 0..m {
                    r += sol.lambda[j] * der.jacobian[(j, i)];
                }
                r.abs()
            })
            .fold(0.0, f64::max);
        complementarity = g
            .iter()
            .zip(&sol.lambda)
            .map(|(gj, mu)| (gj * mu).abs())
            .chain((0..n).map(|i| {
                let b = sol.bound_mult[i];
                if b > 0.0 {
                    (b * (hi - u[i])).abs()
                } else {
                    (b * (u[i] - lo)).abs()
                }
            }))
            .fold(0.0, f64::max);
        last_lambda.clone_from(&sol.lambda);
        last_bounds.clone_from(&sol.bound_mult);

        if viol <= settings.tol_feas
            && stationarity <= settings.tol_opt
            && complementarity <= settings.tol_opt
        {
            verdict = Verdict::Optimal;
            break;
        }

        // ℓ1 merit line search.
        let max_mu = sol.lambda.iter().fold(0.0f64, |a, v| a.max(*v));
        if penalty < 1.1 * max_mu + 1e-3 {
            penalty = 2.0 * max_mu + 1e-3;
        }
        let p = &sol.x;
        let merit0 = f + penalty * violation_sum(&g);
        let slope: f64 = der
            .cost_gradient
            .iter()
            .zip(p)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            - penalty * violation_sum(&g);
        let mut alpha = 1.0;
        let mut trial = vec![0.0; n];
        let accepted = loop {
            for i in 0..n {
                trial[i] = (u[i] + alpha * p[i]).clamp(lo, hi);
            }
            let (ft, gt) = ev.values(&trial)?;
            let merit = ft + penalty * violation_sum(&gt);
            if merit <= merit0 + settings.armijo * alpha * slope.min(0.0) {
                break true;
            }
            alpha *= settings.backtrack;
            if alpha < settings.min_step {
                break false;
            }
        };
        if !accepted {
            // No merit decrease along a nonzero step: stop with the current iterate.
            break;
        }
        u.clone_from(&trial);
    }

    let (objective, g) = ev.values(&u)?;
    let max_violation = violation_max(&g);
    if verdict == Verdict::Optimal && max_violation > settings.tol_feas {
        verdict = Verdict::MaxIterations;
    }
    let active_set = (0..m)
        .filter(|&j| last_lambda[j] > 0.0 || g[j].abs() <= settings.tol_feas)
        .collect();
    let nx = ev.nx;
    Ok(OcpResult {
        verdict,
        controls: u,
        states: ev.states.chunks(nx).map(<[f64]>::to_vec).collect(),
        objective,
        max_violation,
        stationarity,
        complementarity,
        multipliers: last_lambda,
        bound_multipliers: last_bounds,
        active_set,
        iterations,
        qp_iterations,
        qp_rows: m,
        solve_time: started.elapsed(),
    })
}

/// Finds a point satisfying the linearized rows `A p ≤ b` inside the box, or
/// returns the minimum-violation step when none exists.
fn phase_one(
    a: &DMatrix<f64>,
    b: &[f64],
    lower: &[f64],
    upper: &[f64],
    qp_iterations: &mut usize,
) -> Result<StartPoint> {
    let n = lower.len();
    let violated: Vec<usize> = (0..b.len()).filter(|&j| b[j] < 0.0).collect();
    if violated.is_empty() {
        return Ok(StartPoint::Feasible(vec![0.0; n]));
    }
    // min Σ s + ½δ‖(p, s)‖²  s.t.  A p − E s ≤ b,  s ≥ 0,  box on p.
    const PROX: f64 = 1e-6;
    let nv = violated.len();
    let dim = n + nv;
    let h = DMatrix::from_diagonal_element(dim, dim, PROX);
    let mut c = vec![0.0; dim];
    c[n..].fill(1.0);
    let mut a1 = DMatrix::zeros(b.len(), dim);
    a1.view_mut((0, 0), (b.len(), n)).copy_from(a);
    for (k, &j) in violated.iter().enumerate() {
        a1[(j, n + k)] = -1.0;
    }
    let mut lo1 = lower.to_vec();
    lo1.extend(std::iter::repeat_n(0.0, nv));
    let mut hi1 = upper.to_vec();
    hi1.extend(std::iter::repeat_n(f64::INFINITY, nv));
    let mut z0 = vec![0.0; dim];
    for (k, &j) in violated.iter().enumerate() {
        z0[n + k] = -b[j];
    }
    let sol = qp::solve(
        &QpProblem {
            h: &h,
            c: &c,
            a: &a1,
            b,
            lower: &lo1,
            upper: &hi1,
        },
        &z0,
    )
    .map_err(|e| Error::Solver(format!("phase-one QP failed: {e:?}")))?;
    *qp_iterations += sol.iterations;
    let predicted: f64 = sol.x[n..].iter().sum();
    let initial: f64 = z0[n..].iter().sum();
    let step = sol.x[..n].to_vec();
    if predicted <= 1e-12 * (1.0 + initial) {
        Ok(StartPoint::Feasible(step))
    } else {
        Ok(StartPoint::Infeasible { step, predicted })
    }
}

/// One backtracking step on the summed violation. `None` once the
/// violation can no longer be reduced.
fn restoration_step(
    ev: &mut Evaluator<'_>,
    u: &[f64],
    step: &[f64],
    current: f64,
    predicted: f64,
    ocp: &FiniteHorizonOcp,
    settings: &SolverSettings,
) -> Result<Option<Vec<f64>>> {
    let expected = current - predicted;
    if expected <= 1e-9 * (1.0 + current) {
        return Ok(None);
    }
    let mut alpha = 1.0;
    let mut trial = vec![0.0; u.len()];
    while alpha >= settings.min_step {
        for i in 0..u.len() {
            trial[i] = ocp.clamp(u[i] + alpha * step[i]);
        }
        let (_, g) = ev.values(&trial)?;
        if violation_sum(&g) <= current - settings.armijo * alpha * expected {
            return Ok(Some(trial));
        }
        alpha *= settings.backtrack;
    }
    Ok(None)
}
