//! Finite-horizon LQR on the linearized error dynamics, and a PD baseline
//! with constant cable feed-forward.
//!
//! The Riccati equation
//!
//! ```text
//! −Ṗ = Q₁ − P B Q₂⁻¹ Bᵀ P + Aᵀ P + P A,   P(T) = P_T
//! ```
//!
//! is integrated backward with classical fourth-order steps, and the gain is
//! `K = Q₂⁻¹ Bᵀ P`, so that `δu = −K δx`.

use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flatness::DesiredPoint;
use crate::geometry::{e1, e3, vee_skew, Mat3};
use crate::linearization::{apply_input, error_state, Layout, LinearizedSystem};
use crate::model::{node_positions, node_velocities, ControlInput, SystemParams, SystemState};

/// Per-block scalar weights. Each scalar multiplies an identity on its
/// blocks of the error state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlockWeights {
    /// `δx` and `δv`.
    pub translation: f64,
    /// `ξ` and `δω`.
    pub links: f64,
    /// `η`.
    pub attitude: f64,
    /// `δΩ`.
    pub body_rate: f64,
    /// `Q₂ = input · I`.
    pub input: f64,
    /// `P_T = terminal · I`.
    pub terminal: f64,
}

impl Default for BlockWeights {
    fn default() -> Self {
        Self { translation: 0.5, links: 0.75, attitude: 1.0, body_rate: 0.75, input: 0.2, terminal: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LqrWeights {
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub p_t: DMatrix<f64>,
}

impl LqrWeights {
    pub fn check(&self) -> Result<()> {
        let sym = |m: &DMatrix<f64>| (m - m.transpose()).amax() <= 1e-12;
        if !sym(&self.q1) || !sym(&self.q2) || !sym(&self.p_t) {
            return Err(Error::InvalidParams("LQR weights must be symmetric".into()));
        }
        if self.q2.clone().cholesky().is_none() {
            return Err(Error::InvalidParams("input weight must be positive definite".into()));
        }
        Ok(())
    }
}

pub fn weights_from_config(params: &SystemParams, w: &BlockWeights) -> Result<LqrWeights> {
    let scalars = [w.translation, w.links, w.attitude, w.body_rate, w.input, w.terminal];
    if scalars.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParams(format!("weights must be positive, got {w:?}")));
    }
    let lay = Layout::new(params);
    let mut diag = DVector::zeros(lay.dim());
    let mut fill = |at: usize, len: usize, v: f64| diag.rows_mut(at, len).fill(v);
    fill(lay.dx(), 3, w.translation);
    fill(lay.dv(), 3, w.translation);
    fill(lay.xi(1), 3 * lay.n, w.links);
    fill(lay.dw(1), 3 * lay.n, w.links);
    fill(lay.eta(0), 3 * lay.n_q, w.attitude);
    fill(lay.d_om(0), 3 * lay.n_q, w.body_rate);
    Ok(LqrWeights {
        q1: DMatrix::from_diagonal(&diag),
        q2: DMatrix::identity(lay.input_dim(), lay.input_dim()) * w.input,
        p_t: DMatrix::identity(lay.dim(), lay.dim()) * w.terminal,
    })
}

/// Gains on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSchedule {
    pub times: Vec<f64>,
    /// Riccati solution per sample; empty for a schedule read from disk.
    pub p: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
    /// Largest `‖P − Pᵀ‖_max` seen before each symmetric projection.
    pub max_symmetry_defect: f64,
}

/// Riccati solutions beyond this norm count as a finite escape.
pub const BLOW_UP_NORM: f64 = 1e12;

fn riccati_rate(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    s: &DMatrix<f64>,
    q1: &DMatrix<f64>,
) -> DMatrix<f64> {
    let pa = p * a;
    -(q1 - p * s * p + pa.transpose() + pa)
}

/// Integrates the Riccati equation from `t1` back to `t0`, storing `P` and
/// `K` every `dt` and taking `substeps` RK4 steps per interval.
pub fn riccati_backward(
    linsys: &LinearizedSystem,
    w: &LqrWeights,
    t0: f64,
    t1: f64,
    dt: f64,
    substeps: usize,
) -> Result<GainSchedule> {
    w.check()?;
    if !(dt > 0.0) || !(t1 > t0) || substeps == 0 {
        return Err(Error::InvalidScenario(format!(
            "bad Riccati grid [{t0}, {t1}] step {dt} x{substeps}"
        )));
    }
    let q2_inv = w
        .q2
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::InvalidParams("input weight must be positive definite".into()))?;
    let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
    let grid: Vec<f64> = (0..=steps).map(|k| t0 + (t1 - t0) * k as f64 / steps as f64).collect();

    let coeffs = |t: f64| {
        let (a, b) = linsys.ab(t);
        let s = &b * &q2_inv * b.transpose();
        (a, b, s)
    };
    let gain = |b: &DMatrix<f64>, p: &DMatrix<f64>| &q2_inv * b.transpose() * p;

    let mut p = w.p_t.clone();
    let mut ps = vec![DMatrix::zeros(0, 0); steps + 1];
    let mut ks = vec![DMatrix::zeros(0, 0); steps + 1];
    let (_, b_end, _) = coeffs(t1);
    ks[steps] = gain(&b_end, &p);
    ps[steps] = p.clone();
    let mut max_defect: f64 = 0.0;

    for k in (0..steps).rev() {
        let h = (grid[k + 1] - grid[k]) / substeps as f64;
        for sub in 0..substeps {
            let t = grid[k + 1] - sub as f64 * h;
            let (a1, _, s1) = coeffs(t);
            let (am, _, sm) = coeffs(t - 0.5 * h);
            let (a2, _, s2) = coeffs(t - h);
            let k1 = riccati_rate(&p, &a1, &s1, &w.q1);
            let k2 = riccati_rate(&(&p - &k1 * (0.5 * h)), &am, &sm, &w.q1);
            let k3 = riccati_rate(&(&p - &k2 * (0.5 * h)), &am, &sm, &w.q1);
            let k4 = riccati_rate(&(&p - &k3 * h), &a2, &s2, &w.q1);
            p -= (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            max_defect = max_defect.max((&p - p.transpose()).amax());
            p = (&p + p.transpose()) * 0.5;
            if !p.iter().all(|v| v.is_finite()) || p.amax() > BLOW_UP_NORM {
                return Err(Error::RiccatiBlowUp { t: t - h });
            }
        }
        let (_, b, _) = coeffs(grid[k]);
        ks[k] = gain(&b, &p);
        ps[k] = p.clone();
    }
    Ok(GainSchedule { times: grid, p: ps, k: ks, max_symmetry_defect: max_defect })
}

impl GainSchedule {
    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty schedule")
    }

    /// Linearly interpolated gain; times outside the grid clamp to the
    /// nearest end with a warning.
    pub fn gain(&self, t: f64) -> DMatrix<f64> {
        let n = self.times.len();
        if t < self.start() || t > self.end() {
            warn!("gain requested at t = {t} outside [{}, {}]; clamping", self.start(), self.end());
        }
        if n == 1 || t <= self.start() {
            return self.k[0].clone();
        }
        if t >= self.end() {
            return self.k[n - 1].clone();
        }
        let h = (self.end() - self.start()) / (n - 1) as f64;
        let i = (((t - self.start()) / h).floor() as usize).min(n - 2);
        let w = ((t - self.times[i]) / (self.times[i + 1] - self.times[i])).clamp(0.0, 1.0);
        if w == 0.0 {
            return self.k[i].clone();
        }
        &self.k[i] * (1.0 - w) + &self.k[i + 1] * w
    }

    /// Smallest eigenvalue over all stored `P`.
    pub fn min_eigenvalue(&self) -> f64 {
        self.p
            .iter()
            .map(|p| p.clone().symmetric_eigenvalues().min())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest `‖P − Pᵀ‖_max` over all stored `P`, after projection.
    pub fn symmetry_defect(&self) -> f64 {
        self.p.iter().map(|p| (p - p.transpose()).amax()).fold(0.0, f64::max)
    }

    /// Writes `t` followed by `K` in row-major order, one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let (rows, cols) = self.k[0].shape();
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::GainFile(e.to_string()))?;
        let mut header = vec!["t".to_string()];
        for r in 0..rows {
            for c in 0..cols {
                header.push(format!("k{r}_{c}"));
            }
        }
        w.write_record(&header).map_err(|e| Error::GainFile(e.to_string()))?;
        for (t, k) in self.times.iter().zip(&self.k) {
            let mut rec = vec![t.to_string()];
            for r in 0..rows {
                for c in 0..cols {
                    rec.push(k[(r, c)].to_string());
                }
            }
            w.write_record(&rec).map_err(|e| Error::GainFile(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::GainFile(e.to_string()))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let err = |e: String| Error::GainFile(format!("{}: {e}", path.display()));
        let mut rd = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
        let header = rd.headers().map_err(|e| err(e.to_string()))?.clone();
        let last = header.iter().next_back().unwrap_or("");
        let (rows, cols) = last
            .strip_prefix('k')
            .and_then(|s| s.split_once('_'))
            .and_then(|(r, c)| Some((r.parse::<usize>().ok()? + 1, c.parse::<usize>().ok()? + 1)))
            .ok_or_else(|| err(format!("unrecognised header column {last:?}")))?;
        if header.len() != 1 + rows * cols || &header[0] != "t" {
            return Err(err(format!("expected t plus {rows}x{cols} gain columns")));
        }
        let mut times = Vec::new();
        let mut ks = Vec::new();
        for rec in rd.records() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| err(format!("{s:?}: {e}"))))
                .collect::<Result<_>>()?;
            times.push(vals[0]);
            ks.push(DMatrix::from_row_slice(rows, cols, &vals[1..]));
        }
        if times.is_empty() {
            return Err(err("no samples".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(err("times must increase".into()));
        }
        Ok(Self { times, p: Vec::new(), k: ks, max_symmetry_defect: 0.0 })
    }
}

/// `δu = −K(t) δx`.
pub fn lqr_feedback(schedule: &GainSchedule, t: f64, err: &DVector<f64>) -> DVector<f64> {
    -(schedule.gain(t) * err)
}

/// `u_d + δu` for the current state.
pub fn lqr_input(
    params: &SystemParams,
    schedule: &GainSchedule,
    desired: &DesiredPoint,
    state: &SystemState,
) -> ControlInput {
    let e = error_state(params, state, desired);
    apply_input(desired, &lqr_feedback(schedule, desired.t, &e))
}

/// Gains of the PD baseline. Attitude gains multiply the inertia, so
/// `M = −J (k_r e_R + k_omega e_Ω) + Ω × JΩ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeedforwardGains {
    pub kp: f64,
    pub kd: f64,
    pub k_r: f64,
    pub k_omega: f64,
}

impl FeedforwardGains {
    /// Critically damped loops with natural frequencies `wp` (position)
    /// and `wa` (attitude), in rad/s.
    pub fn critically_damped(wp: f64, wa: f64) -> Self {
        Self { kp: wp * wp, kd: 2.0 * wp, k_r: wa * wa, k_omega: 2.0 * wa }
    }
}

impl Default for FeedforwardGains {
    fn default() -> Self {
        Self::critically_damped(3.0, 25.0)
    }
}

/// Position PD on every quadrotor plus the desired thrust vector, which
/// already contains the cable force at the reference; geometric attitude PD
/// tracks the resulting thrust direction at the reference heading.
pub fn feedforward_baseline(
    params: &SystemParams,
    gains: &FeedforwardGains,
    desired: &DesiredPoint,
    state: &SystemState,
) -> ControlInput {
    let pos = node_positions(params, state);
    let vel = node_velocities(params, state);
    let pos_d = node_positions(params, &desired.state);
    let vel_d = node_velocities(params, &desired.state);
    let mut u = ControlInput::zero(params.n_q());
    for (j, quad) in params.quadrotors().iter().enumerate() {
        let k = quad.node;
        let (rd, r, om) = (&desired.state.rot[j], &state.rot[j], &state.ang_vel[j]);
        let m = params.net_mass_unchecked(k);
        let force = desired.input.thrust[j] * rd * e3()
            - m * (gains.kp * (pos[k] - pos_d[k]) + gains.kd * (vel[k] - vel_d[k]));
        let b3 = force.try_normalize(1e-9).unwrap_or_else(e3);
        let b2 = b3.cross(&(rd * e1())).try_normalize(1e-9).unwrap_or_else(|| rd.column(1).into());
        let rc = Mat3::from_columns(&[b2.cross(&b3), b2, b3]);
        let e_r = vee_skew(&(rc.transpose() * r));
        let e_om = om - desired.state.ang_vel[j];
        let jm = params.inertia(j);
        u.thrust[j] = force.dot(&(r * e3()));
        u.moment[j] = -(jm * (gains.k_r * e_r + gains.k_omega * e_om)) + om.cross(&(jm * om));
    }
    u
}
