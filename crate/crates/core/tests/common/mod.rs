#![allow(dead_code)]

use gcbf_core::{assemble, ConstraintStrategy, Exogenous, FiniteHorizonOcp, Scenario};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random ACC start inside the safe set with a constant preceding speed.
pub fn random_acc_start(rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
    random_acc_start_in(rng, f64::NEG_INFINITY, -0.1)
}

/// A random ACC start with `lo ≤ h(x0) ≤ hi`.
pub fn random_acc_start_in(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> (Vec<f64>, f64) {
    let s = Scenario::acc_default();
    let model = s.model().unwrap();
    loop {
        let x = vec![
            rng.random_range(-15.0..15.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-2.0..2.0),
        ];
        let v_p = rng.random_range(10.0..20.0);
        let h = model.barrier.value(&x, Exogenous::new(v_p, 0.0));
        if (lo..=hi).contains(&h) {
            return (x, v_p);
        }
    }
}

pub fn acc_ocp(
    x0: &[f64],
    v_p: f64,
    strategy: ConstraintStrategy,
    horizon: usize,
) -> FiniteHorizonOcp {
    let s = Scenario::acc_default();
    let model = s.model().unwrap();
    assemble(
        x0,
        &model,
        &s.cost,
        strategy,
        horizon,
        vec![Exogenous::new(v_p, 0.0); horizon + 1],
    )
    .unwrap()
}

pub fn random_controls(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-5.0..5.0)).collect()
}

/// N=3 ACC instances for the grid-oracle comparison. Three in four are drawn
/// so that the zero control sequence violates a constraint, which forces the
/// constraints to shape the solution when the instance is feasible.
pub fn oracle_instance(
    rng: &mut ChaCha8Rng,
    strategy: ConstraintStrategy,
    index: usize,
) -> FiniteHorizonOcp {
    if index.is_multiple_of(4) {
        let (x0, v_p) = random_acc_start(rng);
        return acc_ocp(&x0, v_p, strategy, 3);
    }
    loop {
        let (x0, v_p) = random_acc_start_in(rng, -3.0, 0.0);
        let ocp = acc_ocp(&x0, v_p, strategy, 3);
        let g0 = gcbf_core::rollout(&ocp, &[0.0; 3])
            .unwrap()
            .constraint_values;
        if g0.iter().any(|g| *g > 0.0) {
            return ocp;
        }
    }
}
