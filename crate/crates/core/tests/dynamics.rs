use gcbf_core::{acc_jacobians, acc_step, braking_step, AccParams, AccState, BrakingState};
use proptest::prelude::*;

/// Independent transcription of the ACC step.
fn oracle_step(x: [f64; 3], u: f64, q: f64, v_p: f64, p: &AccParams) -> [f64; 3] {
    let t = p.step;
    let v_f = v_p - x[1];
    let c = -p.tau_h * t - p.r * t * (2.0 * v_f - p.v_fmean);
    [
        x[0] + t * x[1] + c * x[2],
        x[1] - t * x[2] + t * q,
        (1.0 - t / p.t_g) * x[2] + p.k_g * t / p.t_g * u,
    ]
}

#[test]
fn zero_state_zero_input_is_fixed_point() {
    let p = AccParams::default();
    let x = acc_step(&AccState::default(), 0.0, 0.0, 15.0, &p).unwrap();
    assert_eq!(x, AccState::default());
}

#[test]
fn non_finite_inputs_are_rejected() {
    let p = AccParams::default();
    assert!(acc_step(&AccState::new(f64::NAN, 0.0, 0.0), 0.0, 0.0, 15.0, &p).is_err());
    assert!(acc_step(&AccState::default(), f64::INFINITY, 0.0, 15.0, &p).is_err());
    assert!(braking_step(&BrakingState::new(1.0, 0.0), f64::NAN, 0.1).is_err());
}

proptest! {
    #[test]
    fn acc_step_matches_oracle(
        dd in -20.0..20.0f64, dv in -8.0..8.0f64, af in -5.0..5.0f64,
        u in -5.0..5.0f64, q in -2.0..2.0f64, v_p in 5.0..25.0f64,
    ) {
        let p = AccParams::default();
        let got = acc_step(&AccState::new(dd, dv, af), u, q, v_p, &p).unwrap().to_array();
        let want = oracle_step([dd, dv, af], u, q, v_p, &p);
        for k in 0..3 {
            prop_assert!((got[k] - want[k]).abs() <= 1e-12 * (1.0 + want[k].abs()));
        }
    }

    #[test]
    fn acc_jacobians_match_finite_differences(
        dd in -20.0..20.0f64, dv in -8.0..8.0f64, af in -5.0..5.0f64,
        u in -5.0..5.0f64, v_p in 5.0..25.0f64,
    ) {
        let p = AccParams::default();
        let x = [dd, dv, af];
        let jac = acc_jacobians(&AccState::new(dd, dv, af), v_p, &p).unwrap();
        let eps = 1e-6;
        for j in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[j] += eps;
            xm[j] -= eps;
            let fp = oracle_step(xp, u, 0.0, v_p, &p);
            let fm = oracle_step(xm, u, 0.0, v_p, &p);
            for i in 0..3 {
                let fd = (fp[i] - fm[i]) / (2.0 * eps);
                prop_assert!((jac.a[(i, j)] - fd).abs() <= 1e-6, "A[{i},{j}] {} vs {fd}", jac.a[(i, j)]);
            }
        }
        let fp = oracle_step(x, u + eps, 0.0, v_p, &p);
        let fm = oracle_step(x, u - eps, 0.0, v_p, &p);
        for i in 0..3 {
            prop_assert!((jac.b[i] - (fp[i] - fm[i]) / (2.0 * eps)).abs() <= 1e-6);
        }
        let fp = oracle_step(x, u, eps, v_p, &p);
        let fm = oracle_step(x, u, -eps, v_p, &p);
        for i in 0..3 {
            prop_assert!((jac.e[i] - (fp[i] - fm[i]) / (2.0 * eps)).abs() <= 1e-6);
        }
    }

    #[test]
    fn braking_step_is_affine(
        d1 in -10.0..10.0f64, v1 in -5.0..5.0f64, a1 in -5.0..5.0f64,
        d2 in -10.0..10.0f64, v2 in -5.0..5.0f64, a2 in -5.0..5.0f64,
        s in -2.0..2.0f64,
    ) {
        // f(x1 + s·x2, a1 + s·a2) = f(x1, a1) + s·(f(x2, a2) − f(0, 0)) and f(0, 0) = 0.
        let t = 0.1;
        let f = |d: f64, v: f64, a: f64| braking_step(&BrakingState::new(d, v), a, t).unwrap();
        let lhs = f(d1 + s * d2, v1 + s * v2, a1 + s * a2);
        let r1 = f(d1, v1, a1);
        let r2 = f(d2, v2, a2);
        prop_assert!((lhs.d - (r1.d + s * r2.d)).abs() < 1e-12);
        prop_assert!((lhs.v - (r1.v + s * r2.v)).abs() < 1e-12);
    }
}
