//! Exhaustive grid search over control sequences, used as an oracle for
//! small horizons.

use std::time::Instant;

use super::{Derivatives, Evaluator, FiniteHorizonOcp, OcpResult, Verdict};
use crate::error::{Error, Result};

pub const BRUTE_FORCE_MAX_HORIZON: usize = 4;
pub const BRUTE_FORCE_MAX_POINTS: usize = 31;

/// Evaluates every sequence on a uniform grid over the input box.
///
/// Returns the cheapest grid point that satisfies every inequality. When no
/// grid point does, the tolerance is loosened to grid resolution, so that
/// each inequality need only be within half a grid cell of zero to first
/// order, `g_j ≤ ½·Δu·‖∇g_j‖₁`; the cheapest such point is returned with its
/// residual violation in `max_violation`. Infeasible means no grid point
/// passes even the loosened test.
pub fn brute_force_solve(ocp: &FiniteHorizonOcp, points_per_step: usize) -> Result<OcpResult> {
    let n = ocp.dim();
    if n > BRUTE_FORCE_MAX_HORIZON || !(2..=BRUTE_FORCE_MAX_POINTS).contains(&points_per_step) {
        return Err(Error::BudgetExceeded {
            horizon: n,
            points: points_per_step,
        });
    }
    let started = Instant::now();
    let m = ocp.inequality_count();
    let (lo, hi) = (ocp.model.input_lower, ocp.model.input_upper);
    let spacing = (hi - lo) / (points_per_step - 1) as f64;
    let grid: Vec<f64> = (0..points_per_step)
        .map(|k| lo + spacing * k as f64)
        .collect();

    let mut ev = Evaluator::new(ocp);
    let mut der = Derivatives::new(n, m);
    let mut index = vec![0usize; n];
    let mut u = vec![0.0; n];
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut best_loose: Option<(f64, Vec<f64>, f64)> = None;
    let total = points_per_step.pow(n as u32);
    for _ in 0..total {
        for (ui, &k) in u.iter_mut().zip(&index) {
            *ui = grid[k];
        }
        let (cost, g) = ev.derivatives(&u, &mut der, false)?;
        let viol = g.iter().fold(0.0f64, |a, v| a.max(*v));
        if viol <= 1e-9 {
            if best.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best = Some((cost, u.clone(), viol));
            }
        } else if best.is_none() {
            let loose = g.iter().enumerate().all(|(j, &gj)| {
                let slack: f64 =
                    der.jacobian.row(j).iter().map(|v| v.abs()).sum::<f64>() * 0.5 * spacing;
                gj <= slack
            });
            if loose && best_loose.as_ref().is_none_or(|(c, _, _)| cost < *c) {
                best_loose = Some((cost, u.clone(), viol));
            }
        }
        // Odometer increment.
        for slot in index.iter_mut() {
            *slot += 1;
            if *slot < points_per_step {
                break;
            }
            *slot = 0;
        }
    }

    let (verdict, controls, objective, max_violation) = match best.or(best_loose) {
        Some((cost, u, viol)) => (Verdict::Optimal, u, cost, viol),
        None => (
            Verdict::Infeasible,
            vec![0.0; n],
            f64::INFINITY,
            f64::INFINITY,
        ),
    };
    let states = if verdict == Verdict::Optimal {
        ev.values(&controls)?;
        ev.states.chunks(ev.nx).map(<[f64]>::to_vec).collect()
    } else {
        Vec::new()
    };
    Ok(OcpResult {
        verdict,
        controls,
        states,
        objective,
        max_violation,
        stationarity: f64::NAN,
        complementarity: f64::NAN,
        multipliers: Vec::new(),
        bound_multipliers: Vec::new(),
        active_set: Vec::new(),
        iterations: total,
        qp_iterations: 0,
        qp_rows: m,
        solve_time: started.elapsed(),
    })
}
