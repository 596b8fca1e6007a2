//! Discrete-time plant models.
//!
//! Two plants are provided: the adaptive-cruise-control (ACC) vehicle-following
//! model and the emergency-braking double integrator. Both expose an exact
//! one-step map and its exact Jacobians through the [`Plant`] trait, which is
//! what the horizon rollout consumes. The typed free functions
//! ([`acc_step`], [`braking_step`], [`acc_jacobians`]) validate their inputs
//! and are the public entry points for one-off evaluation.
//!
//! ACC state: `(Δd, Δv, a_f)` with `Δd = d − d_des` the gap error,
//! `Δv = v_p − v_f` the speed error to the preceding vehicle and `a_f` the ego
//! acceleration. The desired distance follows the quadratic-clearance model
//! `d_des = r·v_f·(v_f − v_fmean) + τ_h·v_f + d_0`, and the actuator is a
//! first-order lag from the commanded to the realized acceleration.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::fmt::Debug;

use crate::error::{ensure_finite, Error, Result};

/// Exogenous signal at one time step: preceding-vehicle speed and acceleration.
///
/// The braking plant ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Exogenous {
    /// Preceding-vehicle speed, m/s.
    pub v_p: f64,
    /// Preceding-vehicle acceleration, m/s². Enters the ACC model as the
    /// observable disturbance `q`.
    pub a_p: f64,
}

impl Exogenous {
    pub fn new(v_p: f64, a_p: f64) -> Self {
        Self { v_p, a_p }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AccState {
    /// Gap error `d − d_des`, m.
    pub delta_d: f64,
    /// Speed error `v_p − v_f`, m/s.
    pub delta_v: f64,
    /// Ego acceleration, m/s².
    pub a_f: f64,
}

impl AccState {
    pub const DIM: usize = 3;

    pub fn new(delta_d: f64, delta_v: f64, a_f: f64) -> Self {
        Self {
            delta_d,
            delta_v,
            a_f,
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.delta_d, self.delta_v, self.a_f]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    /// Ego speed `v_f = v_p − Δv`.
    pub fn ego_speed(&self, v_p: f64) -> f64 {
        v_p - self.delta_v
    }

    fn validate(&self) -> Result<()> {
        ensure_finite("gap error", self.delta_d)?;
        ensure_finite("speed error", self.delta_v)?;
        ensure_finite("ego acceleration", self.a_f)
    }
}

/// ACC vehicle and driver-model parameters.
///
/// `v_fmean` is the expansion point of the quadratic-clearance model. No
/// reference value is published for it; the default of 15 m/s sits in the
/// middle of the simulated speed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccParams {
    /// Driver-behavior coefficient, s²/m.
    pub r: f64,
    /// Time headway, s.
    pub tau_h: f64,
    /// Stop distance, m.
    pub d_0: f64,
    /// Step time, s.
    #[serde(rename = "T")]
    pub step: f64,
    /// Actuator-lag gain.
    #[serde(rename = "K_G")]
    pub k_g: f64,
    /// Actuator-lag time constant, s.
    #[serde(rename = "T_G")]
    pub t_g: f64,
    /// Mean speed of the desired-distance expansion, m/s.
    pub v_fmean: f64,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            r: 0.054,
            tau_h: 1.0,
            d_0: 2.9,
            step: 0.1,
            k_g: 1.05,
            t_g: 0.393,
            v_fmean: 15.0,
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r", self.r),
            ("tau_h", self.tau_h),
            ("d_0", self.d_0),
            ("T", self.step),
            ("K_G", self.k_g),
            ("T_G", self.t_g),
            ("v_fmean", self.v_fmean),
        ] {
            if !v.is_finite() {
                return Err(Error::Config(format!("AccParams.{name} is not finite")));
            }
        }
        if self.step <= 0.0 {
            return Err(Error::Config("step time T must be positive".into()));
        }
        if self.t_g <= self.step {
            return Err(Error::Config(format!(
                "T_G ({}) must exceed T ({}) for a stable discretized lag",
                self.t_g, self.step
            )));
        }
        if self.k_g <= 0.0 {
            return Err(Error::Config("K_G must be positive".into()));
        }
        Ok(())
    }

    /// Desired following distance for ego speed `v_f`.
    pub fn desired_distance(&self, v_f: f64) -> f64 {
        self.r * v_f * (v_f - self.v_fmean) + self.tau_h * v_f + self.d_0
    }

    /// Acceleration-to-gap coefficient `−τ_h·T − r·T·(2v_f − v_fmean)`.
    pub fn gap_coupling(&self, v_f: f64) -> f64 {
        -self.tau_h * self.step - self.r * self.step * (2.0 * v_f - self.v_fmean)
    }

    /// Retention factor of the discretized lag, `1 − T/T_G`.
    pub fn lag_retention(&self) -> f64 {
        1.0 - self.step / self.t_g
    }

    /// Input gain of the discretized lag, `K_G·T/T_G`.
    pub fn input_gain(&self) -> f64 {
        self.k_g * self.step / self.t_g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BrakingState {
    /// Distance to the obstacle, m.
    pub d: f64,
    /// Closing speed, m/s.
    pub v: f64,
}

impl BrakingState {
    pub const DIM: usize = 2;

    pub fn new(d: f64, v: f64) -> Self {
        Self { d, v }
    }

    pub fn to_array(self) -> [f64; 2] {
        [self.d, self.v]
    }
}

/// Jacobians of one step of a plant.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedStep {
    /// `∂x'/∂x`.
    pub a: DMatrix<f64>,
    /// `∂x'/∂u`.
    pub b: DVector<f64>,
    /// `∂x'/∂q`, the disturbance column.
    pub e: DVector<f64>,
}

/// A single-input discrete-time plant `x' = f(x, u; w)`.
///
/// The slice-based methods are the allocation-free kernels used inside the
/// horizon rollout; they do not validate their inputs.
pub trait Plant: Debug + Send + Sync {
    fn state_dim(&self) -> usize;

    /// Sampling period, s.
    fn step_time(&self) -> f64;

    /// Writes `f(x, u; w)` into `out`.
    fn step_into(&self, x: &[f64], u: f64, w: Exogenous, out: &mut [f64]);

    /// Writes the row-major `∂x'/∂x` into `a` and `∂x'/∂u` into `b`.
    fn jacobians_into(&self, x: &[f64], u: f64, w: Exogenous, a: &mut [f64], b: &mut [f64]);

    fn step(&self, x: &[f64], u: f64, w: Exogenous) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim()];
        self.step_into(x, u, w, &mut out);
        out
    }
}

/// The ACC vehicle-following plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccPlant {
    pub params: AccParams,
}

impl AccPlant {
    pub fn new(params: AccParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }
}

impl Plant for AccPlant {
    fn state_dim(&self) -> usize {
        AccState::DIM
    }

    fn step_time(&self) -> f64 {
        self.params.step
    }

    fn step_into(&self, x: &[f64], u: f64, w: Exogenous, out: &mut [f64]) {
        let p = &self.params;
        let t = p.step;
        let v_f = w.v_p - x[1];
        out[0] = x[0] + t * x[1] + p.gap_coupling(v_f) * x[2];
        out[1] = x[1] - t * x[2] + t * w.a_p;
        out[2] = p.lag_retention() * x[2] + p.input_gain() * u;
    }

    fn jacobians_into(&self, x: &[f64], _u: f64, w: Exogenous, a: &mut [f64], b: &mut [f64]) {
        let p = &self.params;
        let t = p.step;
        let v_f = w.v_p - x[1];
        // The coupling coefficient depends on Δv through v_f = v_p − Δv.
        a.copy_from_slice(&[
            1.0,
            t + 2.0 * p.r * t * x[2],
            p.gap_coupling(v_f),
            0.0,
            1.0,
            -t,
            0.0,
            0.0,
            p.lag_retention(),
        ]);
        b.copy_from_slice(&[0.0, 0.0, p.input_gain()]);
    }
}

/// The emergency-braking double integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakingPlant {
    pub step: f64,
}

impl BrakingPlant {
    pub fn new(step: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Config(format!(
                "braking step time must be positive, got {step}"
            )));
        }
        Ok(Self { step })
    }
}

impl Plant for BrakingPlant {
    fn state_dim(&self) -> usize {
        BrakingState::DIM
    }

    fn step_time(&self) -> f64 {
        self.step
    }

    fn step_into(&self, x: &[f64], u: f64, _w: Exogenous, out: &mut [f64]) {
        out[0] = x[0] - self.step * x[1];
        out[1] = x[1] + self.step * u;
    }

    fn jacobians_into(&self, _x: &[f64], _u: f64, _w: Exogenous, a: &mut [f64], b: &mut [f64]) {
        a.copy_from_slice(&[1.0, -self.step, 0.0, 1.0]);
        b.copy_from_slice(&[0.0, self.step]);
    }
}

/// One ACC step: commanded acceleration `u`, preceding-vehicle acceleration
/// `q` and speed `v_p`.
pub fn acc_step(x: &AccState, u: f64, q: f64, v_p: f64, params: &AccParams) -> Result<AccState> {
    params.validate()?;
    x.validate()?;
    ensure_finite("commanded acceleration", u)?;
    ensure_finite("preceding acceleration", q)?;
    ensure_finite("preceding speed", v_p)?;
    let plant = AccPlant { params: *params };
    let mut out = [0.0; 3];
    plant.step_into(&x.to_array(), u, Exogenous::new(v_p, q), &mut out);
    Ok(AccState::from_slice(&out))
}

/// Exact Jacobians of [`acc_step`] at `x`.
///
/// `∂Δd'/∂Δv` carries the `2·r·T·a_f` term from differentiating the
/// speed-dependent coupling coefficient.
pub fn acc_jacobians(x: &AccState, v_p: f64, params: &AccParams) -> Result<LinearizedStep> {
    params.validate()?;
    x.validate()?;
    ensure_finite("preceding speed", v_p)?;
    let plant = AccPlant { params: *params };
    let mut a = [0.0; 9];
    let mut b = [0.0; 3];
    plant.jacobians_into(&x.to_array(), 0.0, Exogenous::new(v_p, 0.0), &mut a, &mut b);
    Ok(LinearizedStep {
        a: DMatrix::from_row_slice(3, 3, &a),
        b: DVector::from_column_slice(&b),
        e: DVector::from_column_slice(&[0.0, params.step, 0.0]),
    })
}

/// One braking step: `d' = d − T·v`, `v' = v + T·a`.
pub fn braking_step(x: &BrakingState, a: f64, step: f64) -> Result<BrakingState> {
    ensure_finite("distance", x.d)?;
    ensure_finite("closing speed", x.v)?;
    ensure_finite("commanded acceleration", a)?;
    let plant = BrakingPlant::new(step)?;
    let mut out = [0.0; 2];
    plant.step_into(&x.to_array(), a, Exogenous::default(), &mut out);
    Ok(BrakingState::new(out[0], out[1]))
}

/// Braking-plant Jacobians (constant).
pub fn braking_jacobians(step: f64) -> Result<LinearizedStep> {
    let plant = BrakingPlant::new(step)?;
    let mut a = [0.0; 4];
    let mut b = [0.0; 2];
    plant.jacobians_into(&[0.0, 0.0], 0.0, Exogenous::default(), &mut a, &mut b);
    Ok(LinearizedStep {
        a: DMatrix::from_row_slice(2, 2, &a),
        b: DVector::from_column_slice(&b),
        e: DVector::zeros(2),
    })
}

/// How the preceding vehicle moves over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    /// `v_p(t) = mean + amplitude·sin(2π·frequency·t)`; `a_p` is its exact
    /// derivative sampled at each step.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        frequency_hz: f64,
    },
    /// Constant preceding speed.
    Constant { v_p: f64 },
    /// Explicit acceleration samples starting from `v_p0`. The last sample is
    /// held if the run is longer than the list.
    Samples { v_p0: f64, a_p: Vec<f64> },
}

impl Default for DisturbanceSpec {
    fn default() -> Self {
        DisturbanceSpec::Sinusoid {
            mean: 15.0,
            amplitude: 3.0,
            frequency_hz: 0.05,
        }
    }
}

impl DisturbanceSpec {
    /// Samples the profile for `steps` real steps of length `step`.
    ///
    /// Speeds are integrated from the sampled accelerations so that
    /// `v_p[k+1] = v_p[k] + T·a_p[k]` holds by construction; this is the same
    /// relation the ACC plant uses for `Δv`.
    pub fn sample(&self, step: f64, steps: usize) -> Result<DisturbanceProfile> {
        let n = steps + 1;
        let (v0, accel): (f64, Vec<f64>) = match self {
            DisturbanceSpec::Sinusoid {
                mean,
                amplitude,
                frequency_hz,
            } => {
                let omega = 2.0 * std::f64::consts::PI * frequency_hz;
                let a = (0..n)
                    .map(|k| amplitude * omega * (omega * k as f64 * step).cos())
                    .collect();
                (*mean, a)
            }
            DisturbanceSpec::Constant { v_p } => (*v_p, vec![0.0; n]),
            DisturbanceSpec::Samples { v_p0, a_p } => {
                if a_p.is_empty() {
                    return Err(Error::Config(
                        "sampled disturbance needs at least one a_p".into(),
                    ));
                }
                let last = *a_p.last().unwrap();
                let a = (0..n)
                    .map(|k| a_p.get(k).copied().unwrap_or(last))
                    .collect();
                (*v_p0, a)
            }
        };
        let mut v_p = Vec::with_capacity(n);
        let mut v = v0;
        for a in &accel {
            v_p.push(v);
            v += step * a;
        }
        let profile = DisturbanceProfile {
            step,
            v_p,
            a_p: accel,
        };
        profile.validate()?;
        Ok(profile)
    }
}

/// Sampled preceding-vehicle trajectory over the real time domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceProfile {
    pub step: f64,
    pub v_p: Vec<f64>,
    pub a_p: Vec<f64>,
}

impl DisturbanceProfile {
    /// Number of samples (real steps + 1).
    pub fn len(&self) -> usize {
        self.v_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_p.is_empty()
    }

    pub fn at(&self, k: usize) -> Exogenous {
        Exogenous::new(self.v_p[k], self.a_p[k])
    }

    /// Largest violation of `v_p[k+1] = v_p[k] + T·a_p[k]`.
    pub fn consistency_error(&self) -> f64 {
        self.v_p
            .windows(2)
            .zip(&self.a_p)
            .map(|(v, a)| (v[1] - v[0] - self.step * a).abs())
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, (v, a)) in self.v_p.iter().zip(&self.a_p).enumerate() {
            if !v.is_finite() || !a.is_finite() {
                return Err(Error::Config(format!(
                    "disturbance sample {k} is not finite"
                )));
            }
            if *v < 0.0 {
                return Err(Error::Config(format!(
                    "preceding speed is negative ({v:.3} m/s) at step {k}"
                )));
            }
        }
        let err = self.consistency_error();
        if err > 1e-9 {
            return Err(Error::Config(format!(
                "disturbance integration error {err:e} exceeds 1e-9"
            )));
        }
        Ok(())
    }

    /// Virtual-domain forecast from real step `k`: the current acceleration is
    /// held over the whole horizon.
    pub fn forecast(&self, k: usize, horizon: usize) -> Vec<Exogenous> {
        let now = self.at(k);
        let mut v = now.v_p;
        (0..=horizon)
            .map(|_| {
                let w = Exogenous::new(v, now.a_p);
                v += self.step * now.a_p;
                w
            })
            .collect()
    }
}
