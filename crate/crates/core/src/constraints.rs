//! Constraint functions and horizon-constraint construction.
//!
//! A constraint function `h` is feasible where `h(x) ≤ 0`. A
//! [`ConstraintStrategy`] turns one `h` into the inequality set imposed over
//! the predicted trajectory `x_{0|t}, …, x_{N|t}`:
//!
//! | strategy         | inequalities                                         |
//! |------------------|------------------------------------------------------|
//! | `Pointwise`      | `h(x_i) ≤ 0`, `i = 1..N_c`                           |
//! | `MultiStepCbf`   | `h(x_{i+1}) − (1−λ)·h(x_i) ≤ 0`, `i = 0..N−1`        |
//! | `SingleStepCbf`  | `h(x_1) − (1−λ)·h(x_0) ≤ 0`                          |
//! | `Gcbf`           | `h(x_m) − (1−λ)^m·h(x_0) ≤ 0`                        |
//!
//! Every inequality is a linear combination of `h` evaluated at a few virtual
//! steps, which is how [`HorizonInequality`] stores it.

use serde::{Deserialize, Serialize};
use std::fmt::{self, Debug};
use std::str::FromStr;

use crate::dynamics::{AccParams, AccState, BrakingState, Exogenous, Plant};
use crate::error::{ensure_finite, Error, Result};

/// Scalar constraint `h(x; w) ≤ 0` with an analytic gradient in `x`.
pub trait ConstraintFunction: Debug + Send + Sync {
    fn value(&self, x: &[f64], w: Exogenous) -> f64;

    /// Writes `∂h/∂x` into `out`.
    fn gradient_into(&self, x: &[f64], w: Exogenous, out: &mut [f64]);

    fn gradient(&self, x: &[f64], w: Exogenous) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, w, &mut g);
        g
    }
}

/// Safety-distance and input-bound parameters.
///
/// `ttc` is used as given: with the published value of −2.5 s it contributes
/// `+2.5·Δv` to the ACC constraint through the `−TTC` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintParams {
    /// Safe distance, m.
    pub d_s0: f64,
    /// Time-to-collision coefficient, s.
    #[serde(rename = "TTC")]
    pub ttc: f64,
    /// Lower bound of the commanded acceleration, m/s².
    pub a_fmin: f64,
    /// Upper bound of the commanded acceleration, m/s².
    pub a_fmax: f64,
}

impl Default for ConstraintParams {
    fn default() -> Self {
        Self {
            d_s0: 5.0,
            ttc: -2.5,
            a_fmin: -5.0,
            a_fmax: 5.0,
        }
    }
}

impl ConstraintParams {
    /// Published acceleration bounds are listed as `a_fmin = 5`, `a_fmax = −5`.
    /// Swapped bounds are restored to `a_fmin < a_fmax` with a warning.
    pub fn normalized(mut self) -> Result<Self> {
        for (name, v) in [
            ("d_s0", self.d_s0),
            ("ttc", self.ttc),
            ("a_fmin", self.a_fmin),
            ("a_fmax", self.a_fmax),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "ConstraintParams.{name} is not finite"
                )));
            }
        }
        if self.a_fmin > self.a_fmax {
            log::warn!(
                "acceleration bounds swapped (a_fmin = {}, a_fmax = {}); using [{}, {}]",
                self.a_fmin,
                self.a_fmax,
                self.a_fmax,
                self.a_fmin
            );
            std::mem::swap(&mut self.a_fmin, &mut self.a_fmax);
        }
        if self.a_fmin == self.a_fmax {
            return Err(Error::Config("acceleration bounds are degenerate".into()));
        }
        Ok(self)
    }

    pub fn input_bounds(&self) -> (f64, f64) {
        (self.a_fmin, self.a_fmax)
    }
}

/// ACC safe-distance constraint, a function of `(Δd, Δv)` and `v_p`:
///
/// `h = (r·(v_p − Δv − v_fmean) + τ_h − TTC)·Δv − Δd − τ_h·v_p + d_s0 − d_0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccSafeDistance {
    pub params: AccParams,
    pub limits: ConstraintParams,
}

impl AccSafeDistance {
    pub fn new(params: AccParams, limits: ConstraintParams) -> Self {
        Self { params, limits }
    }
}

impl ConstraintFunction for AccSafeDistance {
    fn value(&self, x: &[f64], w: Exogenous) -> f64 {
        let p = &self.params;
        let c = &self.limits;
        let dv = x[1];
        (p.r * (w.v_p - dv - p.v_fmean) + p.tau_h - c.ttc) * dv - x[0] - p.tau_h * w.v_p + c.d_s0
            - p.d_0
    }

    fn gradient_into(&self, x: &[f64], w: Exogenous, out: &mut [f64]) {
        let p = &self.params;
        let dv = x[1];
        out[0] = -1.0;
        out[1] = p.r * (w.v_p - 2.0 * dv - p.v_fmean) + p.tau_h - self.limits.ttc;
        out[2] = 0.0;
    }
}

/// Braking constraint `h = −d` (the distance must stay nonnegative).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BrakingDistance;

impl ConstraintFunction for BrakingDistance {
    fn value(&self, x: &[f64], _w: Exogenous) -> f64 {
        -x[0]
    }

    fn gradient_into(&self, _x: &[f64], _w: Exogenous, out: &mut [f64]) {
        out[0] = -1.0;
        out[1] = 0.0;
    }
}

/// Linear state bound `h = x[index] − limit`.
///
/// With `index = 2` on the ACC plant this is a bound on the realized
/// acceleration, a relative-degree-one constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateUpperBound {
    pub index: usize,
    pub limit: f64,
}

impl ConstraintFunction for StateUpperBound {
    fn value(&self, x: &[f64], _w: Exogenous) -> f64 {
        x[self.index] - self.limit
    }

    fn gradient_into(&self, _x: &[f64], _w: Exogenous, out: &mut [f64]) {
        out.fill(0.0);
        out[self.index] = 1.0;
    }
}

/// Validated ACC constraint value.
pub fn acc_h(x: &AccState, v_p: f64, params: &AccParams, limits: &ConstraintParams) -> Result<f64> {
    ensure_finite("gap error", x.delta_d)?;
    ensure_finite("speed error", x.delta_v)?;
    ensure_finite("ego acceleration", x.a_f)?;
    ensure_finite("preceding speed", v_p)?;
    params.validate()?;
    Ok(AccSafeDistance::new(*params, *limits).value(&x.to_array(), Exogenous::new(v_p, 0.0)))
}

pub fn braking_h(x: &BrakingState) -> f64 {
    -x.d
}

/// How the single constraint function is imposed over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintStrategy {
    /// `h(x_i) ≤ 0` on the first `n_c` predicted steps.
    Pointwise { n_c: usize },
    /// The one-step barrier condition on every step of the horizon.
    #[serde(rename = "multistep_cbf")]
    MultiStepCbf { lambda: f64 },
    /// The one-step barrier condition on the first step only.
    #[serde(rename = "singlestep_cbf")]
    SingleStepCbf { lambda: f64 },
    /// The `m`-step barrier condition between `x_0` and `x_m`.
    Gcbf { lambda: f64, m: usize },
}

impl ConstraintStrategy {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let check_lambda = |lambda: f64| {
            if lambda > 0.0 && lambda <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "lambda must lie in (0, 1], got {lambda}"
                )))
            }
        };
        match *self {
            ConstraintStrategy::Pointwise { n_c } => {
                if n_c == 0 || n_c > horizon {
                    return Err(Error::Config(format!(
                        "pointwise n_c = {n_c} must lie in 1..={horizon}"
                    )));
                }
            }
            ConstraintStrategy::MultiStepCbf { lambda }
            | ConstraintStrategy::SingleStepCbf { lambda } => check_lambda(lambda)?,
            ConstraintStrategy::Gcbf { lambda, m } => {
                check_lambda(lambda)?;
                if m == 0 {
                    return Err(Error::Config(
                        "GCBF relative degree m must be at least 1".into(),
                    ));
                }
                if m > horizon {
                    return Err(Error::Config(format!(
                        "GCBF m = {m} exceeds horizon {horizon}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of inequalities this strategy places on a horizon of length `horizon`.
    pub fn inequality_count(&self, horizon: usize) -> usize {
        match *self {
            ConstraintStrategy::Pointwise { n_c } => n_c,
            ConstraintStrategy::MultiStepCbf { .. } => horizon,
            ConstraintStrategy::SingleStepCbf { .. } | ConstraintStrategy::Gcbf { .. } => 1,
        }
    }

    /// Short identifier used in file names and reports, e.g. `gcbf_l0.01_m2`.
    pub fn label(&self) -> String {
        match *self {
            ConstraintStrategy::Pointwise { n_c } => format!("ptw{n_c}"),
            ConstraintStrategy::MultiStepCbf { lambda } => format!("mscbf_l{lambda}"),
            ConstraintStrategy::SingleStepCbf { lambda } => format!("sscbf_l{lambda}"),
            ConstraintStrategy::Gcbf { lambda, m } => format!("gcbf_l{lambda}_m{m}"),
        }
    }
}

impl fmt::Display for ConstraintStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ConstraintStrategy::Pointwise { n_c } => write!(f, "pointwise:n_c={n_c}"),
            ConstraintStrategy::MultiStepCbf { lambda } => {
                write!(f, "multistep_cbf:lambda={lambda}")
            }
            ConstraintStrategy::SingleStepCbf { lambda } => {
                write!(f, "singlestep_cbf:lambda={lambda}")
            }
            ConstraintStrategy::Gcbf { lambda, m } => write!(f, "gcbf:lambda={lambda},m={m}"),
        }
    }
}

/// Parses `name[:key=value,...]`, e.g. `gcbf:lambda=0.01,m=2` or `pointwise:n_c=10`.
impl FromStr for ConstraintStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut lambda = None;
        let mut m = None;
        let mut n_c = None;
        for kv in rest.split(',').filter(|kv| !kv.trim().is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value in strategy `{s}`")))?;
            let bad = || Error::Config(format!("bad value for `{k}` in strategy `{s}`"));
            match k.trim() {
                "lambda" => lambda = Some(v.trim().parse::<f64>().map_err(|_| bad())?),
                "m" => m = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                "n_c" => n_c = Some(v.trim().parse::<usize>().map_err(|_| bad())?),
                other => return Err(Error::Config(format!("unknown strategy field `{other}`"))),
            }
        }
        let missing = |field: &str| Error::Config(format!("strategy `{s}` needs `{field}`"));
        match name.trim() {
            "pointwise" => Ok(ConstraintStrategy::Pointwise {
                n_c: n_c.ok_or_else(|| missing("n_c"))?,
            }),
            "multistep_cbf" => Ok(ConstraintStrategy::MultiStepCbf {
                lambda: lambda.ok_or_else(|| missing("lambda"))?,
            }),
            "singlestep_cbf" => Ok(ConstraintStrategy::SingleStepCbf {
                lambda: lambda.ok_or_else(|| missing("lambda"))?,
            }),
            "gcbf" => Ok(ConstraintStrategy::Gcbf {
                lambda: lambda.ok_or_else(|| missing("lambda"))?,
                m: m.ok_or_else(|| missing("m"))?,
            }),
            other => Err(Error::Config(format!("unknown strategy `{other}`"))),
        }
    }
}

/// One inequality `Σ coeff·h(x_step) ≤ 0` over the predicted trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonInequality {
    /// `(virtual step, coefficient)` pairs, ascending in step.
    pub terms: Vec<(usize, f64)>,
}

impl HorizonInequality {
    /// Evaluates the inequality given `h` values per virtual step.
    pub fn evaluate(&self, h_values: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * h_values[i]).sum()
    }

    pub fn touched_steps(&self) -> impl Iterator<Item = usize> + '_ {
        self.terms.iter().map(|&(i, _)| i)
    }

    pub fn last_step(&self) -> usize {
        self.terms.iter().map(|&(i, _)| i).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonConstraintSet {
    pub horizon: usize,
    pub inequalities: Vec<HorizonInequality>,
}

impl HorizonConstraintSet {
    pub fn len(&self) -> usize {
        self.inequalities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inequalities.is_empty()
    }

    pub fn evaluate(&self, h_values: &[f64]) -> Vec<f64> {
        self.inequalities
            .iter()
            .map(|g| g.evaluate(h_values))
            .collect()
    }
}

fn barrier_pair(next: usize, prev: usize, decay: f64) -> HorizonInequality {
    let mut terms = vec![(prev, -decay), (next, 1.0)];
    // (1 − λ)^m = 0 at λ = 1 leaves a plain pointwise constraint.
    terms.retain(|&(_, c)| c != 0.0);
    HorizonInequality { terms }
}

/// Builds the horizon inequalities for `strategy` on a horizon of length `horizon`.
pub fn build_constraints(
    strategy: ConstraintStrategy,
    horizon: usize,
) -> Result<HorizonConstraintSet> {
    strategy.validate(horizon)?;
    let inequalities = match strategy {
        ConstraintStrategy::Pointwise { n_c } => (1..=n_c)
            .map(|i| HorizonInequality {
                terms: vec![(i, 1.0)],
            })
            .collect(),
        ConstraintStrategy::MultiStepCbf { lambda } => (0..horizon)
            .map(|i| barrier_pair(i + 1, i, 1.0 - lambda))
            .collect(),
        ConstraintStrategy::SingleStepCbf { lambda } => vec![barrier_pair(1, 0, 1.0 - lambda)],
        ConstraintStrategy::Gcbf { lambda, m } => {
            vec![barrier_pair(m, 0, (1.0 - lambda).powi(m as i32))]
        }
    };
    Ok(HorizonConstraintSet {
        horizon,
        inequalities,
    })
}

/// Upper bound on `h` at real step `i` implied by a chain of satisfied
/// `m`-step barrier conditions: `(1 − λ)^{i−s}·h_anchor` with `s = i mod m`
/// and `h_anchor = h(x_s)`.
pub fn gcbf_decay_bound(h_anchor: f64, lambda: f64, m: usize, i: usize) -> f64 {
    let m = m.max(1);
    let exponent = i - i % m;
    (1.0 - lambda).powi(exponent as i32) * h_anchor
}

/// Result of [`relative_degree`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelativeDegree {
    Order(usize),
    /// No input sensitivity found up to `max_order`.
    ExceedsMaxOrder,
}

/// Sensitivity threshold for [`relative_degree`].
pub const RELATIVE_DEGREE_TOL: f64 = 1e-8;

/// Smallest `i ≤ max_order` such that `h(x_{i|t})` is sensitive to `u_{0|t}`
/// at one of the probe states.
///
/// Rollouts hold every control at `nominal_u` and the exogenous signal at `w`;
/// the sensitivity is a central difference on `u_{0|t}`.
pub fn relative_degree(
    plant: &dyn Plant,
    h: &dyn ConstraintFunction,
    probe_states: &[Vec<f64>],
    max_order: usize,
    nominal_u: f64,
    w: Exogenous,
) -> Result<RelativeDegree> {
    if probe_states.is_empty() {
        return Err(Error::Config("relative-degree probe set is empty".into()));
    }
    let nx = plant.state_dim();
    if max_order == 0 || max_order > nx {
        return Err(Error::Config(format!("max_order must lie in 1..={nx}")));
    }
    const DELTA: f64 = 1e-3;
    let rollout = |x0: &[f64], u0: f64, steps: usize| {
        let mut x = x0.to_vec();
        let mut next = vec![0.0; nx];
        for k in 0..steps {
            let u = if k == 0 { u0 } else { nominal_u };
            plant.step_into(&x, u, w, &mut next);
            std::mem::swap(&mut x, &mut next);
        }
        x
    };
    for order in 1..=max_order {
        for x0 in probe_states {
            if x0.len() != nx {
                return Err(Error::Config("probe state has the wrong dimension".into()));
            }
            let hp = h.value(&rollout(x0, nominal_u + DELTA, order), w);
            let hm = h.value(&rollout(x0, nominal_u - DELTA, order), w);
            if ((hp - hm) / (2.0 * DELTA)).abs() > RELATIVE_DEGREE_TOL {
                return Ok(RelativeDegree::Order(order));
            }
        }
    }
    Ok(RelativeDegree::ExceedsMaxOrder)
}

/// `count` quasi-uniform probe states in the box `[lo, hi]` plus the origin.
///
/// Uses a Halton sequence so the probe set is deterministic.
pub fn probe_states(lo: &[f64], hi: &[f64], count: usize) -> Vec<Vec<f64>> {
    const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
    let radical_inverse = |mut n: u64, base: u64| {
        let mut inv = 1.0 / base as f64;
        let mut r = 0.0;
        while n > 0 {
            r += (n % base) as f64 * inv;
            n /= base;
            inv /= base as f64;
        }
        r
    };
    let mut states = vec![vec![0.0; lo.len()]];
    for k in 1..=count as u64 {
        states.push(
            lo.iter()
                .zip(hi)
                .enumerate()
                .map(|(d, (l, h))| l + (h - l) * radical_inverse(k, PRIMES[d % PRIMES.len()]))
                .collect(),
        );
    }
    states
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{AccPlant, BrakingPlant};
    use approx::assert_relative_eq;

    #[test]
    fn acc_h_hand_evaluated() {
        let p = AccParams::default();
        let c = ConstraintParams::default();
        let h = acc_h(&AccState::new(2.0, 1.0, 0.0), 16.0, &p, &c).unwrap();
        assert_relative_eq!(h, -12.4, epsilon = 1e-12);
        let h = acc_h(&AccState::default(), 0.0, &p, &c).unwrap();
        assert_relative_eq!(h, 2.1, epsilon = 1e-12);
        // Linear in Δd when Δv = 0.
        let h1 = acc_h(&AccState::new(1.0, 0.0, 0.0), 12.0, &p, &c).unwrap();
        let h3 = acc_h(&AccState::new(3.0, 0.0, 0.0), 12.0, &p, &c).unwrap();
        assert_relative_eq!(h1 - h3, 2.0, epsilon = 1e-12);
        assert_relative_eq!(h1, -1.0 - 12.0 + 5.0 - 2.9, epsilon = 1e-12);
        assert!(acc_h(&AccState::new(f64::NAN, 0.0, 0.0), 1.0, &p, &c).is_err());
    }

    #[test]
    fn braking_h_sign() {
        assert_eq!(braking_h(&BrakingState::new(10.0, 1.0)), -10.0);
        assert_eq!(braking_h(&BrakingState::new(0.0, 1.0)), 0.0);
        assert_eq!(braking_h(&BrakingState::new(-1.0, 1.0)), 1.0);
    }

    #[test]
    fn swapped_bounds_are_normalized() {
        let c = ConstraintParams {
            a_fmin: 5.0,
            a_fmax: -5.0,
            ..Default::default()
        }
        .normalized()
        .unwrap();
        assert_eq!(c.input_bounds(), (-5.0, 5.0));
        assert_eq!(c.ttc, -2.5);
    }

    #[test]
    fn strategy_counts() {
        for n in 1..=100 {
            let cases = [
                ConstraintStrategy::Pointwise { n_c: n.clamp(1, 7) },
                ConstraintStrategy::MultiStepCbf { lambda: 0.2 },
                ConstraintStrategy::SingleStepCbf { lambda: 0.2 },
                ConstraintStrategy::Gcbf { lambda: 0.2, m: 1 },
            ];
            for s in cases {
                let set = build_constraints(s, n).unwrap();
                assert_eq!(set.len(), s.inequality_count(n));
                assert!(set.inequalities.iter().all(|g| g.last_step() <= n));
            }
        }
        assert_eq!(
            build_constraints(ConstraintStrategy::Pointwise { n_c: 50 }, 50)
                .unwrap()
                .len(),
            50
        );
    }

    #[test]
    fn invalid_strategies() {
        assert!(build_constraints(ConstraintStrategy::Gcbf { lambda: 0.1, m: 4 }, 3).is_err());
        assert!(build_constraints(ConstraintStrategy::Gcbf { lambda: 0.0, m: 1 }, 3).is_err());
        assert!(build_constraints(ConstraintStrategy::Gcbf { lambda: 1.5, m: 1 }, 3).is_err());
        assert!(build_constraints(ConstraintStrategy::Pointwise { n_c: 0 }, 3).is_err());
        assert!(build_constraints(ConstraintStrategy::Pointwise { n_c: 4 }, 3).is_err());
        assert!(build_constraints(ConstraintStrategy::SingleStepCbf { lambda: 1.0 }, 3).is_ok());
    }

    #[test]
    fn reductions_are_structural() {
        let a = build_constraints(ConstraintStrategy::Gcbf { lambda: 0.3, m: 1 }, 10).unwrap();
        let b = build_constraints(ConstraintStrategy::SingleStepCbf { lambda: 0.3 }, 10).unwrap();
        assert_eq!(a, b);
        let a = build_constraints(ConstraintStrategy::Gcbf { lambda: 1.0, m: 3 }, 10).unwrap();
        assert_eq!(
            a.inequalities,
            vec![HorizonInequality {
                terms: vec![(3, 1.0)]
            }]
        );
    }

    #[test]
    fn decay_bound_examples() {
        assert_relative_eq!(gcbf_decay_bound(-4.0, 0.5, 2, 2), -1.0);
        assert_eq!(gcbf_decay_bound(-4.0, 0.5, 2, 0), -4.0);
        assert_eq!(gcbf_decay_bound(0.0, 0.3, 3, 7), 0.0);
        assert_eq!(gcbf_decay_bound(-2.0, 0.5, 2, 1), -2.0);
    }

    #[test]
    fn strategy_strings_round_trip() {
        for s in [
            ConstraintStrategy::Pointwise { n_c: 10 },
            ConstraintStrategy::MultiStepCbf { lambda: 0.25 },
            ConstraintStrategy::SingleStepCbf { lambda: 0.5 },
            ConstraintStrategy::Gcbf { lambda: 0.01, m: 2 },
        ] {
            assert_eq!(s.to_string().parse::<ConstraintStrategy>().unwrap(), s);
        }
        assert!("gcbf:lambda=0.1".parse::<ConstraintStrategy>().is_err());
        assert!("nope".parse::<ConstraintStrategy>().is_err());
    }

    #[test]
    fn relative_degrees() {
        let braking = BrakingPlant::new(0.1).unwrap();
        let probes = probe_states(&[0.0, -5.0], &[20.0, 15.0], 20);
        let w = Exogenous::default();
        for nominal in [-2.0, 0.0, 3.0] {
            assert_eq!(
                relative_degree(&braking, &BrakingDistance, &probes, 2, nominal, w).unwrap(),
                RelativeDegree::Order(2)
            );
        }
        let acc = AccPlant::new(AccParams::default()).unwrap();
        let h = AccSafeDistance::new(AccParams::default(), ConstraintParams::default());
        let probes = probe_states(&[-10.0, -5.0, -3.0], &[10.0, 5.0, 3.0], 20);
        let w = Exogenous::new(15.0, 0.3);
        for nominal in [-2.0, 0.0, 3.0] {
            assert_eq!(
                relative_degree(&acc, &h, &probes, 3, nominal, w).unwrap(),
                RelativeDegree::Order(2)
            );
            let accel = StateUpperBound {
                index: 2,
                limit: 5.0,
            };
            assert_eq!(
                relative_degree(&acc, &accel, &probes, 3, nominal, w).unwrap(),
                RelativeDegree::Order(1)
            );
        }
        // The braking constraint has no input sensitivity within one step.
        assert_eq!(
            relative_degree(
                &braking,
                &BrakingDistance,
                &probe_states(&[0.0, 0.0], &[1.0, 1.0], 3),
                1,
                0.0,
                w
            )
            .unwrap(),
            RelativeDegree::ExceedsMaxOrder
        );
        assert!(relative_degree(&braking, &BrakingDistance, &[], 2, 0.0, w).is_err());
    }

    #[test]
    fn probe_states_stay_in_box() {
        let s = probe_states(&[-1.0, 2.0], &[1.0, 3.0], 20);
        assert_eq!(s.len(), 21);
        assert_eq!(s[0], vec![0.0, 0.0]);
        for x in &s[1..] {
            assert!(x[0] >= -1.0 && x[0] <= 1.0 && x[1] >= 2.0 && x[1] <= 3.0);
        }
    }
}
