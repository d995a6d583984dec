//! Time integration, closed-loop scenarios and the discretization benchmark.
//!
//! Each step is one classical RK4 step on the ambient representation,
//! followed by projection back onto the manifold: `q_i` is normalized, `ω_i`
//! is made tangent to it and each `R_j` is replaced by its polar factor.
//! [`Stepper::step`] holds its input over the step; closed-loop runs
//! re-evaluate the controller at every stage.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    feedforward_baseline, lqr_input, riccati_backward, weights_from_config, BlockWeights, FeedforwardGains,
    GainSchedule,
};
use crate::dynamics::{self, energy, link_tensions, mass_entries, EnergyBreakdown, MassEntries, StateDerivative};
use crate::error::{Error, Result};
use crate::flatness::{expand, solve_static_shape, DesiredPoint, FlatOutputs, FlatTrajectory};
use crate::jets::{Primitive, Vec3Primitive};
use crate::geometry::{project_s2, project_so3, s2_config_error, so3_config_error, Vec3};
use crate::linearization::{error_state, retract, Layout, LinearizedSystem};
use crate::model::{ControlInput, Defects, SystemParams, SystemState};
use crate::presets::{benchmark_params, BENCHMARK_SPAN};

/// A run is flagged diverged once `‖x_0‖` exceeds this (m).
pub const DIVERGENCE_BOUND: f64 = 1e3;

/// Integrator bound to one parameter set.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    params: &'a SystemParams,
    entries: MassEntries,
    tethered: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(params: &'a SystemParams, tethered: bool) -> Self {
        Self { params, entries: mass_entries(params), tethered }
    }

    fn rate(&self, state: &SystemState, input: &ControlInput) -> Result<StateDerivative> {
        if self.tethered {
            dynamics::tethered_rhs(self.params, state, input)
        } else {
            dynamics::rhs_with(self.params, &self.entries, state, input)
        }
    }

    /// RK4 step without projection.
    pub fn raw_step(&self, state: &SystemState, input: &ControlInput, dt: f64) -> Result<SystemState> {
        let k1 = self.rate(state, input)?;
        let k2 = self.rate(&state.add_scaled(&k1, 0.5 * dt), input)?;
        let k3 = self.rate(&state.add_scaled(&k2, 0.5 * dt), input)?;
        let k4 = self.rate(&state.add_scaled(&k3, dt), input)?;
        Ok(state
            .add_scaled(&k1, dt / 6.0)
            .add_scaled(&k2, dt / 3.0)
            .add_scaled(&k3, dt / 3.0)
            .add_scaled(&k4, dt / 6.0))
    }

    pub fn step(&self, state: &SystemState, input: &ControlInput, dt: f64) -> Result<SystemState> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidScenario(format!("time step must be positive, got {dt}")));
        }
        project(&self.raw_step(state, input, dt)?)
    }
}

/// Projects every manifold component of `state`.
pub fn project(state: &SystemState) -> Result<SystemState> {
    let mut s = state.clone();
    for (q, w) in s.q.iter_mut().zip(s.omega.iter_mut()) {
        *q = project_s2(q)?.into_inner();
        *w -= w.dot(q) * *q;
    }
    for r in &mut s.rot {
        *r = project_so3(r)?.into_inner();
    }
    Ok(s)
}

/// One projected RK4 step of the untethered system.
pub fn step(params: &SystemParams, state: &SystemState, input: &ControlInput, dt: f64) -> Result<SystemState> {
    Stepper::new(params, false).step(state, input, dt)
}

/// What the run tracks.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    Static(DesiredPoint),
    Trajectory(FlatTrajectory),
}

impl Reference {
    pub fn at(&self, t: f64) -> Result<DesiredPoint> {
        match self {
            Reference::Static(p) => {
                let mut p = p.clone();
                p.t = t;
                Ok(p)
            }
            Reference::Trajectory(tr) => tr.at(t),
        }
    }

    /// Linear models over `[t0, t1]`; a static reference yields one model.
    pub fn linearize(&self, params: &SystemParams, t0: f64, t1: f64, dt: f64) -> Result<LinearizedSystem> {
        match self {
            Reference::Static(p) => LinearizedSystem::constant(params, p.clone(), t0, t1),
            Reference::Trajectory(tr) => LinearizedSystem::sample(tr, t0, t1, dt),
        }
    }

    /// Static hanging shape with quadrotors at `x0` and `targets`.
    pub fn setpoint(params: &SystemParams, x0: Vec3, targets: &[Vec3]) -> Result<Self> {
        Ok(Reference::Static(solve_static_shape(params, x0, targets)?.point))
    }
}

/// Riccati gains on `[0, horizon]` with grid step `dt` and `substeps` RK4
/// steps per grid interval.
pub fn lqr_schedule(
    params: &SystemParams,
    reference: &Reference,
    weights: &BlockWeights,
    horizon: f64,
    dt: f64,
    substeps: usize,
) -> Result<GainSchedule> {
    let sys = reference.linearize(params, 0.0, horizon, dt)?;
    riccati_backward(&sys, &weights_from_config(params, weights)?, 0.0, horizon, dt, substeps)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Controller {
    /// No thrust and no moments.
    Zero,
    /// The reference input, with no feedback.
    OpenLoop,
    Feedforward(FeedforwardGains),
    Lqr(GainSchedule),
}

impl Controller {
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Zero => "zero",
            Controller::OpenLoop => "open-loop",
            Controller::Feedforward(_) => "feedforward",
            Controller::Lqr(_) => "lqr",
        }
    }

    pub fn input(&self, params: &SystemParams, desired: &DesiredPoint, state: &SystemState) -> ControlInput {
        match self {
            Controller::Zero => ControlInput::zero(params.n_q()),
            Controller::OpenLoop => desired.input.clone(),
            Controller::Feedforward(g) => feedforward_baseline(params, g, desired, state),
            Controller::Lqr(s) => lqr_input(params, s, desired, state),
        }
    }
}

/// Initial offset from the reference: every link is turned by
/// `link_angle` about an axis perpendicular to it and every quadrotor by
/// `attitude_angle` (both in degrees). Axes are drawn from the seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialError {
    pub link_angle: f64,
    pub attitude_angle: f64,
}

impl Default for InitialError {
    fn default() -> Self {
        Self { link_angle: 10.0, attitude_angle: 0.0 }
    }
}

impl InitialError {
    pub const NONE: InitialError = InitialError { link_angle: 0.0, attitude_angle: 0.0 };

    /// The reference state at `desired` rotated as described above.
    pub fn apply(&self, params: &SystemParams, desired: &DesiredPoint, seed: u64) -> Result<SystemState> {
        let lay = Layout::new(params);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut err = nalgebra::DVector::zeros(lay.dim());
        let (sl, sa) = (self.link_angle.to_radians().sin(), self.attitude_angle.to_radians().sin());
        for i in 1..=lay.n {
            let qd = desired.state.q[i - 1];
            let axis = loop {
                let a = random_unit(&mut rng);
                let a = a - a.dot(&qd) * qd;
                if a.norm() > 1e-3 {
                    break a.normalize();
                }
            };
            err.fixed_rows_mut::<3>(lay.xi(i)).copy_from(&(sl * axis));
        }
        for j in 0..lay.n_q {
            let axis = random_unit(&mut rng);
            err.fixed_rows_mut::<3>(lay.eta(j)).copy_from(&(sa * axis));
        }
        retract(params, desired, &err)
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 && norm <= 1.0 {
            return v / norm;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SystemParams,
    pub reference: Reference,
    pub controller: Controller,
    pub initial_error: InitialError,
    pub dt: f64,
    pub duration: f64,
    /// Time between log records (s).
    pub log_interval: f64,
    pub seed: u64,
    /// Pin `x_0` at the origin.
    pub tethered: bool,
}

impl Scenario {
    pub fn check(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidScenario(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= self.dt) {
            return Err(Error::InvalidScenario(format!(
                "duration {} is shorter than dt {}",
                self.duration, self.dt
            )));
        }
        if !(self.log_interval >= self.dt) {
            return Err(Error::InvalidScenario("log interval must be at least dt".into()));
        }
        if self.tethered && matches!(self.controller, Controller::Lqr(_)) {
            return Err(Error::InvalidScenario("LQR is not available for a tethered chain".into()));
        }
        if let Controller::Lqr(s) = &self.controller {
            if s.start() > 0.0 || s.end() < self.duration - 1e-9 {
                log::warn!(
                    "gain schedule [{}, {}] does not cover the run [0, {}]",
                    s.start(),
                    s.end(),
                    self.duration
                );
            }
        }
        Ok(())
    }
}

/// One logged sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogRecord {
    pub t: f64,
    pub state: SystemState,
    pub psi_q: Vec<f64>,
    pub xi_norm: Vec<f64>,
    pub psi_r: Vec<f64>,
    pub eta_norm: Vec<f64>,
    pub input: ControlInput,
    pub energy: EnergyBreakdown,
    pub defects: Defects,
    /// `T_1..T_n`; empty when the tensions could not be recovered.
    pub tensions: Vec<Vec3>,
}

impl LogRecord {
    pub fn new(
        params: &SystemParams,
        desired: &DesiredPoint,
        state: &SystemState,
        input: &ControlInput,
        tethered: bool,
    ) -> Self {
        let lay = Layout::new(params);
        let e = error_state(params, state, desired);
        let norm3 = |at: usize| e.fixed_rows::<3>(at).norm();
        let tensions = if tethered {
            Vec::new()
        } else {
            dynamics::accelerations(params, state, input)
                .and_then(|acc| link_tensions(params, state, input, &acc))
                .unwrap_or_default()
        };
        Self {
            t: desired.t,
            psi_q: state.q.iter().zip(&desired.state.q).map(|(q, qd)| s2_config_error(qd, q)).collect(),
            xi_norm: (1..=lay.n).map(|i| norm3(lay.xi(i))).collect(),
            psi_r: state.rot.iter().zip(&desired.state.rot).map(|(r, rd)| so3_config_error(rd, r)).collect(),
            eta_norm: (0..lay.n_q).map(|j| norm3(lay.eta(j))).collect(),
            input: input.clone(),
            energy: energy(params, state),
            defects: state.constraint_defects(),
            tensions,
            state: state.clone(),
        }
    }

    pub fn max_psi_q(&self) -> f64 {
        self.psi_q.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_psi_r(&self) -> f64 {
        self.psi_r.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<LogRecord>,
    pub diverged: bool,
    pub final_state: SystemState,
    /// Time actually simulated.
    pub t_end: f64,
}

fn diverged(state: &SystemState) -> bool {
    !state.is_finite() || state.x0.norm() > DIVERGENCE_BOUND
}

/// Simulates `scenario` from the reference at `t = 0` plus the initial error.
pub fn run(scenario: &Scenario) -> Result<RunOutcome> {
    scenario.check()?;
    let params = &scenario.params;
    let start = scenario.reference.at(0.0)?;
    let mut state = scenario.initial_error.apply(params, &start, scenario.seed)?;
    if scenario.tethered {
        state.x0 = Vec3::zeros();
        state.v0 = Vec3::zeros();
    }
    run_from(scenario, state)
}

/// [`run`] from an explicit initial state.
///
/// The controller is evaluated at every RK4 stage, so the integrator sees
/// the continuous closed loop rather than a sampled one.
pub fn run_from(scenario: &Scenario, initial: SystemState) -> Result<RunOutcome> {
    scenario.check()?;
    let params = &scenario.params;
    let ctrl = &scenario.controller;
    let stepper = Stepper::new(params, scenario.tethered);
    let dt = scenario.dt;
    let steps = (scenario.duration / dt).round() as usize;
    let stride = ((scenario.log_interval / dt).round() as usize).max(1);
    let mut state = initial.validated(params)?;
    let mut records = Vec::with_capacity(steps / stride + 2);
    let mut desired = scenario.reference.at(0.0)?;
    for k in 0..=steps {
        let t = k as f64 * dt;
        let input = ctrl.input(params, &desired, &state);
        if k % stride == 0 || k == steps {
            records.push(LogRecord::new(params, &desired, &state, &input, scenario.tethered));
        }
        if k == steps {
            break;
        }
        if !input.is_finite() {
            return Ok(RunOutcome { records, diverged: true, final_state: state, t_end: t });
        }
        let mid = scenario.reference.at(t + 0.5 * dt)?;
        let end = scenario.reference.at((k + 1) as f64 * dt)?;
        let k1 = stepper.rate(&state, &input)?;
        let s2 = state.add_scaled(&k1, 0.5 * dt);
        let k2 = stepper.rate(&s2, &ctrl.input(params, &mid, &s2))?;
        let s3 = state.add_scaled(&k2, 0.5 * dt);
        let k3 = stepper.rate(&s3, &ctrl.input(params, &mid, &s3))?;
        let s4 = state.add_scaled(&k3, dt);
        let k4 = stepper.rate(&s4, &ctrl.input(params, &end, &s4))?;
        let next = state
            .add_scaled(&k1, dt / 6.0)
            .add_scaled(&k2, dt / 3.0)
            .add_scaled(&k3, dt / 3.0)
            .add_scaled(&k4, dt / 6.0);
        if diverged(&next) {
            return Ok(RunOutcome { records, diverged: true, final_state: next, t_end: t + dt });
        }
        state = project(&next)?;
        desired = end;
    }
    Ok(RunOutcome { records, diverged: false, t_end: steps as f64 * dt, final_state: state })
}

/// Hanging shape with the end quadrotor [`BENCHMARK_SPAN`] away
/// horizontally. A single link cannot sag, so it is held straight at that
/// span, sloping down, with tension equal to the hose weight.
pub fn benchmark_reference(params: &SystemParams) -> Result<Reference> {
    if params.n() > 1 {
        return Reference::setpoint(params, Vec3::zeros(), &[Vec3::new(BENCHMARK_SPAN, 0.0, 0.0)]);
    }
    let l = params.length(1);
    if BENCHMARK_SPAN >= l {
        return Err(Error::Unreachable(format!("span {BENCHMARK_SPAN} with a {l} m link")));
    }
    let dir = Vec3::new(BENCHMARK_SPAN, 0.0, -(l * l - BENCHMARK_SPAN * BENCHMARK_SPAN).sqrt()) / l;
    let tension = dir * params.masses().iter().sum::<f64>() * params.gravity();
    let flat = FlatOutputs {
        start: Vec3Primitive::constant([0.0; 3]),
        yaw: vec![Primitive::constant(0.0); params.n_q()],
        tensions: vec![Vec3Primitive::constant(tension.into())],
        tethered: false,
    };
    Ok(Reference::Static(expand(params, &flat, 0.0)?))
}

/// One row of the scaling table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub wall_seconds: f64,
}

/// Wall time to simulate `duration` seconds for each link count, with
/// total hose length and mass fixed and the PD baseline holding the end
/// quadrotors level, [`BENCHMARK_SPAN`] apart.
pub fn benchmark(ns: &[usize], duration: f64, dt: f64, seed: u64) -> Result<Vec<BenchmarkRow>> {
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidScenario("benchmark link counts must ascend".into()));
    }
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let params = benchmark_params(n)?;
        let reference = benchmark_reference(&params)?;
        let scenario = Scenario {
            params,
            reference,
            controller: Controller::Feedforward(FeedforwardGains::default()),
            initial_error: InitialError::default(),
            dt,
            duration,
            log_interval: duration,
            seed,
            tethered: false,
        };
        let clock = Instant::now();
        let out = run(&scenario)?;
        let wall_seconds = clock.elapsed().as_secs_f64();
        if out.diverged {
            return Err(Error::InvalidScenario(format!("benchmark run with n = {n} diverged")));
        }
        rows.push(BenchmarkRow { n, wall_seconds });
    }
    Ok(rows)
}
