//! Dense primal active-set QP solver.
//!
//! Solves
//!
//! ```text
//!     minimize    ½ xᵀHx + cᵀx
//!     subject to  A x ≤ b
//!                 lower ≤ x ≤ upper
//! ```
//!
//! for symmetric positive definite `H`, starting from a feasible point.
//! Active bounds are handled by fixing variables, so each equality-constrained
//! subproblem is solved on the free variables only: a Cholesky factor of
//! `H_FF` and a Schur complement over the active general rows. Ties in the
//! ratio test and in multiplier selection go to the lowest constraint index
//! (general rows first, then bounds by variable).

use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug)]
pub(crate) struct QpProblem<'a> {
    pub h: &'a DMatrix<f64>,
    pub c: &'a [f64],
    pub a: &'a DMatrix<f64>,
    pub b: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

#[derive(Debug, Clone)]
pub(crate) struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of the general rows.
    pub lambda: Vec<f64>,
    /// Positive for an active upper bound, negative for an active lower bound.
    pub bound_mult: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum QpError {
    NotPositiveDefinite,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Fixed {
    Free,
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy)]
enum Blocking {
    Row(usize),
    Bound(usize, Fixed),
}

pub(crate) fn solve(qp: &QpProblem<'_>, x0: &[f64]) -> Result<QpSolution, QpError> {
    let n = qp.c.len();
    let m = qp.b.len();
    let mut x = x0.to_vec();
    let mut fixed = vec![Fixed::Free; n];
    for i in 0..n {
        if x[i] <= qp.lower[i] {
            x[i] = qp.lower[i];
            fixed[i] = Fixed::Lower;
        } else if x[i] >= qp.upper[i] {
            x[i] = qp.upper[i];
            fixed[i] = Fixed::Upper;
        }
    }
    let mut working: Vec<usize> = Vec::new();
    let scale = 1.0 + qp.c.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mult_tol = 1e-11 * scale;
    let max_iter = 10 * (n + m) + 20;

    for iter in 1..=max_iter {
        let free: Vec<usize> = (0..n).filter(|&i| fixed[i] == Fixed::Free).collect();
        let nf = free.len();
        let k = working.len();

        let (z_free, lambda) = if nf == 0 {
            (Vec::new(), Vec::new())
        } else {
            let hff = DMatrix::from_fn(nf, nf, |r, c| qp.h[(free[r], free[c])]);
            let chol = Cholesky::new(hff).ok_or(QpError::NotPositiveDefinite)?;
            // r = −(c_F + H_FB x_B)
            let mut rhs = DVector::from_fn(nf, |r, _| -qp.c[free[r]]);
            for (bi, _) in fixed.iter().enumerate().filter(|(_, f)| **f != Fixed::Free) {
                for (r, &fi) in free.iter().enumerate() {
                    rhs[r] -= qp.h[(fi, bi)] * x[bi];
                }
            }
            let y = chol.solve(&rhs);
            if k == 0 {
                (y.iter().copied().collect(), Vec::new())
            } else {
                let aw = DMatrix::from_fn(k, nf, |r, c| qp.a[(working[r], free[c])]);
                let mut target = DVector::from_fn(k, |r, _| qp.b[working[r]]);
                for (bi, _) in fixed.iter().enumerate().filter(|(_, f)| **f != Fixed::Free) {
                    for (r, &j) in working.iter().enumerate() {
                        target[r] -= qp.a[(j, bi)] * x[bi];
                    }
                }
                let m_mat = chol.solve(&aw.transpose());
                let schur = &aw * &m_mat;
                let lam = match Cholesky::new(schur.clone()) {
                    Some(sc) => sc.solve(&(&aw * &y - target)),
                    None => schur
                        .lu()
                        .solve(&(&aw * &y - target))
                        .ok_or(QpError::NotPositiveDefinite)?,
                };
                let z = y - m_mat * &lam;
                (z.iter().copied().collect(), lam.iter().copied().collect())
            }
        };

        let mut d = vec![0.0; n];
        let mut dmax = 0.0f64;
        for (r, &fi) in free.iter().enumerate() {
            d[fi] = z_free[r] - x[fi];
            dmax = dmax.max(d[fi].abs());
        }
        let xmax = x.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

        if dmax <= 1e-13 * xmax {
            for (r, &fi) in free.iter().enumerate() {
                x[fi] = z_free[r];
            }
            // Multipliers of the working set at the EQP solution.
            let mut grad: Vec<f64> = (0..n)
                .map(|i| qp.c[i] + (0..n).map(|j| qp.h[(i, j)] * x[j]).sum::<f64>())
                .collect();
            for (r, &j) in working.iter().enumerate() {
                for (i, g) in grad.iter_mut().enumerate() {
                    *g += lambda[r] * qp.a[(j, i)];
                }
            }
            let mut worst: Option<(f64, Blocking)> = None;
            for (r, &j) in working.iter().enumerate() {
                if lambda[r] < -mult_tol && worst.is_none_or(|(w, _)| lambda[r] < w) {
                    worst = Some((lambda[r], Blocking::Row(j)));
                }
            }
            for i in 0..n {
                let nu = match fixed[i] {
                    Fixed::Free => continue,
                    Fixed::Lower => grad[i],
                    Fixed::Upper => -grad[i],
                };
                if nu < -mult_tol && worst.is_none_or(|(w, _)| nu < w) {
                    worst = Some((nu, Blocking::Bound(i, fixed[i])));
                }
            }
            match worst {
                None => {
                    let mut full_lambda = vec![0.0; m];
                    for (r, &j) in working.iter().enumerate() {
                        full_lambda[j] = lambda[r].max(0.0);
                    }
                    let bound_mult = (0..n)
                        .map(|i| match fixed[i] {
                            Fixed::Free => 0.0,
                            Fixed::Lower => -grad[i].max(0.0),
                            Fixed::Upper => (-grad[i]).max(0.0),
                        })
                        .collect();
                    return Ok(QpSolution {
                        x,
                        lambda: full_lambda,
                        bound_mult,
                        iterations: iter,
                    });
                }
                Some((_, Blocking::Row(j))) => working.retain(|&w| w != j),
                Some((_, Blocking::Bound(i, _))) => fixed[i] = Fixed::Free,
            }
            continue;
        }

        // Ratio test along d.
        let mut alpha = 1.0;
        let mut blocking = None;
        for j in 0..m {
            if working.contains(&j) {
                continue;
            }
            let ad: f64 = (0..n).map(|i| qp.a[(j, i)] * d[i]).sum();
            if ad > 1e-14 {
                let slack = qp.b[j] - (0..n).map(|i| qp.a[(j, i)] * x[i]).sum::<f64>();
                let step = (slack / ad).max(0.0);
                if step < alpha {
                    alpha = step;
                    blocking = Some(Blocking::Row(j));
                }
            }
        }
        for &i in &free {
            let (step, side) = if d[i] > 0.0 {
                ((qp.upper[i] - x[i]) / d[i], Fixed::Upper)
            } else if d[i] < 0.0 {
                ((qp.lower[i] - x[i]) / d[i], Fixed::Lower)
            } else {
                continue;
            };
            let step = step.max(0.0);
            if step < alpha {
                alpha = step;
                blocking = Some(Blocking::Bound(i, side));
            }
        }
        for &i in &free {
            x[i] += alpha * d[i];
        }
        match blocking {
            Some(Blocking::Row(j)) => working.push(j),
            Some(Blocking::Bound(i, side)) => {
                fixed[i] = side;
                x[i] = if side == Fixed::Lower {
                    qp.lower[i]
                } else {
                    qp.upper[i]
                };
            }
            None => {}
        }
    }
    Err(QpError::IterationLimit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn run(
        h: &[f64],
        c: &[f64],
        a: &[f64],
        b: &[f64],
        lo: &[f64],
        hi: &[f64],
        x0: &[f64],
    ) -> QpSolution {
        let n = c.len();
        let h = DMatrix::from_row_slice(n, n, h);
        let a = DMatrix::from_row_slice(b.len(), n, a);
        solve(
            &QpProblem {
                h: &h,
                c,
                a: &a,
                b,
                lower: lo,
                upper: hi,
            },
            x0,
        )
        .unwrap()
    }

    #[test]
    fn unconstrained_minimum() {
        let inf = f64::INFINITY;
        let s = run(
            &[2.0, 0.0, 0.0, 4.0],
            &[-2.0, -4.0],
            &[],
            &[],
            &[-inf; 2],
            &[inf; 2],
            &[0.0, 0.0],
        );
        assert_relative_eq!(s.x[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn single_general_constraint() {
        // min ½x² + ½y² + x  s.t.  −x − 2y ≤ −1  →  (−0.6, 0.8)
        let inf = f64::INFINITY;
        let s = run(
            &[1.0, 0.0, 0.0, 1.0],
            &[1.0, 0.0],
            &[-1.0, -2.0],
            &[-1.0],
            &[-inf; 2],
            &[inf; 2],
            &[0.0, 1.0],
        );
        assert_relative_eq!(s.x[0], -0.6, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 0.8, epsilon = 1e-12);
        assert_relative_eq!(s.lambda[0], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn box_and_row_together() {
        // min (x−3)² + (y−3)²  s.t. x + y ≤ 4, 0 ≤ x ≤ 1.5
        let s = run(
            &[2.0, 0.0, 0.0, 2.0],
            &[-6.0, -6.0],
            &[1.0, 1.0],
            &[4.0],
            &[0.0, -10.0],
            &[1.5, 10.0],
            &[0.0, 0.0],
        );
        assert_relative_eq!(s.x[0], 1.5, epsilon = 1e-12);
        assert_relative_eq!(s.x[1], 2.5, epsilon = 1e-12);
        // Stationarity: H x + c + λ a + ν e_0 = 0.
        assert_relative_eq!(s.lambda[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.bound_mult[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn drops_wrong_sign_bound() {
        // Start pinned at the lower bound; the optimum is interior.
        let s = run(&[1.0], &[-0.5], &[], &[], &[0.0], &[1.0], &[0.0]);
        assert_relative_eq!(s.x[0], 0.5, epsilon = 1e-12);
        assert_eq!(s.bound_mult[0], 0.0);
    }
}
