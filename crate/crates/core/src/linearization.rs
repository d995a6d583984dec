//! Variation-based linearization about a desired trajectory.
//!
//! The error state is `(δx, ξ_1..ξ_n, δv, δω_1..δω_n, η_1..η_{n_Q},
//! δΩ_1..δΩ_{n_Q})` with
//!
//! ```text
//! δx = x_0 − x_0d   ξ_i = q_id × q_i   δv = v_0 − v_0d   δω_i = ω_i − ω_id
//! η_j = ½ (R_jdᵀ R_j − R_jᵀ R_jd)^∨                      δΩ_j = Ω_j − Ω_jd
//! ```
//!
//! and the error input is `(δf_1..δf_{n_Q}, δM_1..δM_{n_Q})`. To first order
//! `δẋ = A δx + B δu` subject to `C δx = 0`, where `C` encodes `q·q = 1` and
//! `q·ω = 0`.
//!
//! The link rows of `A` and `B` come from varying the equations of motion
//! with every link row multiplied by −1 (so the diagonal blocks read
//! `+M_ii I`); the blocks `a..h` below are written for that sign convention.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, block_mass_matrix, mass_entries, nodal_forces};
use crate::error::{Error, Result};
use crate::flatness::{DesiredPoint, FlatTrajectory};
use crate::geometry::{e3, exp_so3, hat, vee_skew, Mat3, Vec3};
use crate::model::{ControlInput, SystemParams, SystemState};

/// Offsets of each block in the stacked error state and input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub n_q: usize,
}

impl Layout {
    pub fn new(params: &SystemParams) -> Self {
        Self { n: params.n(), n_q: params.n_q() }
    }

    pub fn dim(&self) -> usize {
        6 + 6 * self.n + 6 * self.n_q
    }

    pub fn input_dim(&self) -> usize {
        4 * self.n_q
    }

    pub fn dx(&self) -> usize {
        0
    }

    /// Offset of `ξ_i`, `i` in `1..=n`.
    pub fn xi(&self, i: usize) -> usize {
        3 * i
    }

    pub fn dv(&self) -> usize {
        3 + 3 * self.n
    }

    /// Offset of `δω_i`, `i` in `1..=n`.
    pub fn dw(&self, i: usize) -> usize {
        6 + 3 * self.n + 3 * (i - 1)
    }

    /// Offset of `η_j` for quadrotor slot `j`.
    pub fn eta(&self, j: usize) -> usize {
        6 + 6 * self.n + 3 * j
    }

    /// Offset of `δΩ_j` for quadrotor slot `j`.
    pub fn d_om(&self, j: usize) -> usize {
        6 + 6 * self.n + 3 * self.n_q + 3 * j
    }

    /// Input offset of `δf_j`.
    pub fn df(&self, j: usize) -> usize {
        j
    }

    /// Input offset of `δM_j`.
    pub fn dm(&self, j: usize) -> usize {
        self.n_q + 3 * j
    }
}

fn get3(v: &DVector<f64>, at: usize) -> Vec3 {
    Vec3::new(v[at], v[at + 1], v[at + 2])
}

fn set3(v: &mut DVector<f64>, at: usize, x: &Vec3) {
    v.fixed_rows_mut::<3>(at).copy_from(x);
}

/// Stacked error of `state` relative to `desired`.
pub fn error_state(params: &SystemParams, state: &SystemState, desired: &DesiredPoint) -> DVector<f64> {
    let lay = Layout::new(params);
    let d = &desired.state;
    let mut e = DVector::zeros(lay.dim());
    set3(&mut e, lay.dx(), &(state.x0 - d.x0));
    set3(&mut e, lay.dv(), &(state.v0 - d.v0));
    for i in 1..=lay.n {
        set3(&mut e, lay.xi(i), &d.q[i - 1].cross(&state.q[i - 1]));
        set3(&mut e, lay.dw(i), &(state.omega[i - 1] - d.omega[i - 1]));
    }
    for j in 0..lay.n_q {
        set3(&mut e, lay.eta(j), &vee_skew(&(d.rot[j].transpose() * state.rot[j])));
        set3(&mut e, lay.d_om(j), &(state.ang_vel[j] - d.ang_vel[j]));
    }
    e
}

/// State whose error relative to `desired` is `err`.
///
/// Each `q_i` is placed at angle `asin ‖ξ_i‖` from `q_id` and each `R_j` at
/// angle `asin ‖η_j‖` from `R_jd`; `ω_i` is projected onto the tangent plane
/// of the new `q_i`. For errors of valid states this inverts
/// [`error_state`] exactly; the component of `ξ_i` along `q_id` is ignored.
pub fn retract(params: &SystemParams, desired: &DesiredPoint, err: &DVector<f64>) -> Result<SystemState> {
    let lay = Layout::new(params);
    if err.len() != lay.dim() {
        return Err(Error::InvalidState(format!(
            "error state has {} entries, expected {}",
            err.len(),
            lay.dim()
        )));
    }
    let d = &desired.state;
    let mut q = Vec::with_capacity(lay.n);
    let mut omega = Vec::with_capacity(lay.n);
    for i in 1..=lay.n {
        let qd = &d.q[i - 1];
        let xi = get3(err, lay.xi(i));
        let xi = xi - xi.dot(qd) * qd;
        let s = xi.norm();
        if s >= 1.0 {
            return Err(Error::OutOfRadius(format!("|ξ{i}| = {s}")));
        }
        let dw = get3(err, lay.dw(i));
        if s == 0.0 && dw == Vec3::zeros() {
            q.push(*qd);
            omega.push(d.omega[i - 1]);
            continue;
        }
        let qi = (1.0 - s * s).sqrt() * qd + xi.cross(qd);
        let w = d.omega[i - 1] + dw;
        omega.push(w - w.dot(&qi) * qi);
        q.push(qi);
    }
    let mut rot = Vec::with_capacity(lay.n_q);
    let mut ang_vel = Vec::with_capacity(lay.n_q);
    for j in 0..lay.n_q {
        let eta = get3(err, lay.eta(j));
        let s = eta.norm();
        if s >= 1.0 {
            return Err(Error::OutOfRadius(format!("|η{j}| = {s}")));
        }
        let axis = if s > 0.0 { eta / s } else { Vec3::zeros() };
        rot.push(d.rot[j] * exp_so3(&(s.asin() * axis)));
        ang_vel.push(d.ang_vel[j] + get3(err, lay.d_om(j)));
    }
    Ok(SystemState {
        x0: d.x0 + get3(err, lay.dx()),
        v0: d.v0 + get3(err, lay.dv()),
        q,
        omega,
        rot,
        ang_vel,
    })
}

/// Stacked input deviation `u − u_d`.
pub fn error_input(desired: &DesiredPoint, input: &ControlInput) -> DVector<f64> {
    let nq = desired.input.thrust.len();
    let mut du = DVector::zeros(4 * nq);
    for j in 0..nq {
        du[j] = input.thrust[j] - desired.input.thrust[j];
        set3(&mut du, nq + 3 * j, &(input.moment[j] - desired.input.moment[j]));
    }
    du
}

/// `u_d + δu`.
pub fn apply_input(desired: &DesiredPoint, du: &DVector<f64>) -> ControlInput {
    let nq = desired.input.thrust.len();
    let mut u = desired.input.clone();
    for j in 0..nq {
        u.thrust[j] += du[j];
        u.moment[j] += get3(du, nq + 3 * j);
    }
    u
}

/// A block of the linear model, used to inject deliberate errors when
/// checking that the finite-difference test can detect them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Block {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
    H,
    Alpha,
    Beta,
    Gamma,
    Nu,
    Mu,
    C1,
    C2,
}

impl Block {
    pub const ALL: [Block; 15] = [
        Block::A,
        Block::B,
        Block::C,
        Block::D,
        Block::E,
        Block::F,
        Block::G,
        Block::H,
        Block::Alpha,
        Block::Beta,
        Block::Gamma,
        Block::Nu,
        Block::Mu,
        Block::C1,
        Block::C2,
    ];
}

fn tamper<const R: usize, const C: usize>(
    m: nalgebra::SMatrix<f64, R, C>,
    block: Block,
    corrupt: Option<Block>,
) -> nalgebra::SMatrix<f64, R, C> {
    if corrupt == Some(block) {
        m.add_scalar(0.25)
    } else {
        m
    }
}

/// `A`, `B` and `C` at one desired point.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

pub fn linearize(params: &SystemParams, desired: &DesiredPoint) -> Result<LinearModel> {
    linearize_with(params, desired, None)
}

/// [`linearize`] with one block optionally corrupted by adding 0.25 to every
/// entry.
pub fn linearize_with(
    params: &SystemParams,
    desired: &DesiredPoint,
    corrupt: Option<Block>,
) -> Result<LinearModel> {
    if desired.tethered {
        return Err(Error::InvalidScenario("linearization of a tethered chain is not supported".into()));
    }
    let lay = Layout::new(params);
    let (n, nq, dim) = (lay.n, lay.n_q, lay.dim());
    let d = &desired.state;
    let entries = mass_entries(params);
    let qh: Vec<Mat3> = d.q.iter().map(hat).collect();

    // Mass matrix with link rows negated, so link diagonals are +M_ii I.
    let mut mm = block_mass_matrix(params, &entries, &d.q);
    mm.rows_mut(3, 3 * n).neg_mut();

    let u = nodal_forces(params, d, &desired.input);
    let mut u_tail = vec![Vec3::zeros(); n + 2];
    for k in (0..=n).rev() {
        u_tail[k] = u_tail[k + 1] + u[k];
    }
    let node_of: Vec<usize> = params.attachments();
    let e3h = hat(&e3());

    let mut f = DMatrix::zeros(3 * (n + 1), dim);
    let mut g = DMatrix::zeros(3 * (n + 1), 4 * nq);
    let put = |m: &mut DMatrix<f64>, r: usize, c: usize, b: &Mat3| {
        let mut v = m.fixed_view_mut::<3, 3>(r, c);
        v += b;
    };
    let w_sq = |m: usize| d.omega[m - 1].norm_squared();

    // translational row
    for i in 1..=n {
        let a = entries.get(0, i) * (hat(&desired.omega_dot[i - 1]) - w_sq(i) * Mat3::identity()) * qh[i - 1];
        put(&mut f, 0, lay.xi(i), &tamper(a, Block::A, corrupt));
        let b = entries.get(0, i) * 2.0 * d.q[i - 1] * d.omega[i - 1].transpose();
        put(&mut f, 0, lay.dw(i), &tamper(b, Block::B, corrupt));
    }
    for j in 0..nq {
        let e = -desired.input.thrust[j] * d.rot[j] * e3h;
        put(&mut f, 0, lay.eta(j), &tamper(e, Block::E, corrupt));
        let gj = tamper(d.rot[j] * e3(), Block::G, corrupt);
        g.fixed_view_mut::<3, 1>(0, lay.df(j)).copy_from(&gj);
    }
    // link rows
    for i in 1..=n {
        let r = 3 * i;
        let qi = &qh[i - 1];
        let mut inner = entries.get(i, 0) * hat(&desired.v0_dot) - params.length(i) * hat(&u_tail[i]);
        for jl in 1..=n {
            if jl == i {
                continue;
            }
            let qj = &qh[jl - 1];
            inner -= entries.get(i, jl) * (hat(&(qj * desired.omega_dot[jl - 1])) + w_sq(jl) * qj);
            let c = entries.get(i, jl)
                * qi
                * (hat(&desired.omega_dot[jl - 1]) - w_sq(jl) * Mat3::identity())
                * qj;
            put(&mut f, r, lay.xi(jl), &tamper(c, Block::C, corrupt));
            let dij = entries.get(i, jl) * 2.0 * qi * d.q[jl - 1] * d.omega[jl - 1].transpose();
            put(&mut f, r, lay.dw(jl), &tamper(dij, Block::D, corrupt));
        }
        put(&mut f, r, lay.xi(i), &tamper(inner * (-qi), Block::C, corrupt));
        put(&mut f, r, lay.dw(i), &tamper(Mat3::zeros(), Block::D, corrupt));
        for (j, node) in node_of.iter().enumerate() {
            if *node < i {
                continue;
            }
            let lq = params.length(i) * qi;
            let fij = -lq * desired.input.thrust[j] * d.rot[j] * e3h;
            put(&mut f, r, lay.eta(j), &tamper(fij, Block::F, corrupt));
            let h = tamper(lq * d.rot[j] * e3(), Block::H, corrupt);
            g.fixed_view_mut::<3, 1>(r, lay.df(j)).copy_from(&h);
        }
    }

    let lu = mm.lu();
    let minv_f = lu
        .solve(&f)
        .ok_or(Error::SingularMassMatrix { condition: f64::INFINITY })?;
    let minv_g = lu
        .solve(&g)
        .ok_or(Error::SingularMassMatrix { condition: f64::INFINITY })?;

    let mut a = DMatrix::zeros(dim, dim);
    let mut b = DMatrix::zeros(dim, 4 * nq);
    a.fixed_view_mut::<3, 3>(lay.dx(), lay.dv()).copy_from(&Mat3::identity());
    for i in 1..=n {
        let q = &d.q[i - 1];
        let alpha = q * q.transpose() * hat(&d.omega[i - 1]);
        let beta = Mat3::identity() - q * q.transpose();
        a.fixed_view_mut::<3, 3>(lay.xi(i), lay.xi(i))
            .copy_from(&tamper(alpha, Block::Alpha, corrupt));
        a.fixed_view_mut::<3, 3>(lay.xi(i), lay.dw(i))
            .copy_from(&tamper(beta, Block::Beta, corrupt));
    }
    a.view_mut((lay.dv(), 0), (3 * (n + 1), dim)).copy_from(&minv_f);
    b.view_mut((lay.dv(), 0), (3 * (n + 1), 4 * nq)).copy_from(&minv_g);
    for j in 0..nq {
        let om = &d.ang_vel[j];
        let jm = params.inertia(j);
        let jinv = params.inertia_inv(j);
        let gamma = -hat(om);
        let nu = jinv * (hat(&(jm * om)) - hat(om) * jm);
        a.fixed_view_mut::<3, 3>(lay.eta(j), lay.eta(j))
            .copy_from(&tamper(gamma, Block::Gamma, corrupt));
        a.fixed_view_mut::<3, 3>(lay.eta(j), lay.d_om(j)).copy_from(&Mat3::identity());
        a.fixed_view_mut::<3, 3>(lay.d_om(j), lay.d_om(j))
            .copy_from(&tamper(nu, Block::Nu, corrupt));
        b.fixed_view_mut::<3, 3>(lay.d_om(j), lay.dm(j))
            .copy_from(&tamper(*jinv, Block::Mu, corrupt));
    }

    let mut c = DMatrix::zeros(2 * n, dim);
    for i in 1..=n {
        let q = d.q[i - 1];
        let c1 = tamper(q.transpose(), Block::C1, corrupt);
        let c2 = tamper(-d.omega[i - 1].transpose() * qh[i - 1], Block::C2, corrupt);
        c.fixed_view_mut::<1, 3>(i - 1, lay.xi(i)).copy_from(&c1);
        c.fixed_view_mut::<1, 3>(n + i - 1, lay.xi(i)).copy_from(&c2);
        c.fixed_view_mut::<1, 3>(n + i - 1, lay.dw(i)).copy_from(&c1);
    }
    Ok(LinearModel { a, b, c })
}

/// Exact time derivative of the error state along the nonlinear dynamics,
/// for `state` driven by `input` while the reference moves along `desired`.
pub fn error_rate(
    params: &SystemParams,
    desired: &DesiredPoint,
    state: &SystemState,
    input: &ControlInput,
) -> Result<DVector<f64>> {
    let lay = Layout::new(params);
    let d = &desired.state;
    let rate = dynamics::rhs(params, state, input)?;
    let mut e = DVector::zeros(lay.dim());
    set3(&mut e, lay.dx(), &(state.v0 - d.v0));
    set3(&mut e, lay.dv(), &(rate.v0_dot - desired.v0_dot));
    for i in 1..=lay.n {
        let (qd, q) = (&d.q[i - 1], &state.q[i - 1]);
        let qd_dot = d.omega[i - 1].cross(qd);
        set3(&mut e, lay.xi(i), &(qd_dot.cross(q) + qd.cross(&rate.q_dot[i - 1])));
        set3(&mut e, lay.dw(i), &(rate.omega_dot[i - 1] - desired.omega_dot[i - 1]));
    }
    for j in 0..lay.n_q {
        let rd_dot = d.rot[j] * hat(&d.ang_vel[j]);
        let a_dot = rd_dot.transpose() * state.rot[j] + d.rot[j].transpose() * rate.rot_dot[j];
        set3(&mut e, lay.eta(j), &vee_skew(&a_dot));
        set3(&mut e, lay.d_om(j), &(rate.ang_vel_dot[j] - desired.ang_vel_dot[j]));
    }
    Ok(e)
}

/// Projects `dx` onto the null space of `c`.
pub fn project_onto_constraints(c: &DMatrix<f64>, dx: &DVector<f64>) -> DVector<f64> {
    let cct = c * c.transpose();
    match cct.cholesky() {
        Some(ch) => dx - c.transpose() * ch.solve(&(c * dx)),
        None => dx.clone(),
    }
}

/// Random unit-norm error direction satisfying `C δx = 0`, and a random
/// unit-norm input direction.
pub fn random_directions<R: Rng>(
    params: &SystemParams,
    model: &LinearModel,
    rng: &mut R,
) -> (DVector<f64>, DVector<f64>) {
    let lay = Layout::new(params);
    let dx = DVector::from_fn(lay.dim(), |_, _| rng.sample(StandardNormal));
    let dx = project_onto_constraints(&model.c, &dx);
    let du = DVector::from_fn(lay.input_dim(), |_, _| rng.sample(StandardNormal));
    (dx.normalize(), du.normalize())
}

/// Remainders `r(ε) = ‖Φ(ε) − Φ(0) − ε(A δx + B δu)‖` where `Φ(ε)` is the
/// error rate at `retract(ε δx)` under input `u_d + ε δu`.
pub fn fd_residuals(
    params: &SystemParams,
    desired: &DesiredPoint,
    model: &LinearModel,
    dx: &DVector<f64>,
    du: &DVector<f64>,
    epsilons: &[f64],
) -> Result<Vec<f64>> {
    let phi0 = error_rate(params, desired, &desired.state, &desired.input)?;
    let lin = &model.a * dx + &model.b * du;
    epsilons
        .iter()
        .map(|eps| {
            let state = retract(params, desired, &(dx * *eps))?;
            let input = apply_input(desired, &(du * *eps));
            let phi = error_rate(params, desired, &state, &input)?;
            Ok((phi - &phi0 - &lin * *eps).norm())
        })
        .collect()
}

/// Bound on [`FdReport::constraint_slope`] for steps up to `1e-3`.
pub const CONSTRAINT_SLOPE_TOL: f64 = 1e-2;

/// Outcome of [`fd_validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    /// `r(ε_k) / r(ε_{k+1})` for every sampled point and direction.
    pub ratios: Vec<f64>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Largest `‖C e(ε)‖ / ε` where `e(ε)` is the error of the retracted
    /// state; `C` is consistent with the manifold when this vanishes with ε.
    pub constraint_slope: f64,
}

impl FdReport {
    /// Quadratic convergence with halving steps gives ratios near 4.
    pub fn is_quadratic(&self) -> bool {
        self.min_ratio >= 3.5 && self.max_ratio <= 4.5 && self.constraint_slope <= CONSTRAINT_SLOPE_TOL
    }
}

/// Finite-difference check of the linear model at every point, one random
/// constraint-satisfying direction each.
pub fn fd_validate<R: Rng>(
    params: &SystemParams,
    points: &[DesiredPoint],
    epsilons: &[f64],
    corrupt: Option<Block>,
    rng: &mut R,
) -> Result<FdReport> {
    let mut ratios = Vec::new();
    let mut constraint_slope: f64 = 0.0;
    for p in points {
        let model = linearize_with(params, p, corrupt)?;
        let (dx, du) = random_directions(params, &model, rng);
        let r = fd_residuals(params, p, &model, &dx, &du, epsilons)?;
        ratios.extend(r.windows(2).map(|w| w[0] / w[1]));
        for eps in epsilons {
            let e = error_state(params, &retract(params, p, &(&dx * *eps))?, p);
            constraint_slope = constraint_slope.max((&model.c * e).norm() / eps);
        }
    }
    let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let max_ratio = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(FdReport { ratios, min_ratio, max_ratio, constraint_slope })
}

/// Linear models sampled on a uniform time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedSystem {
    pub times: Vec<f64>,
    pub models: Vec<LinearModel>,
    pub points: Vec<DesiredPoint>,
}

impl LinearizedSystem {
    /// Samples `[t0, t1]` every `dt` (the last sample lands exactly on `t1`).
    pub fn sample(traj: &FlatTrajectory, t0: f64, t1: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(t1 > t0) {
            return Err(Error::InvalidScenario(format!("bad grid [{t0}, {t1}] step {dt}")));
        }
        let steps = ((t1 - t0) / dt).round().max(1.0) as usize;
        let mut times = Vec::with_capacity(steps + 1);
        let mut models = Vec::with_capacity(steps + 1);
        let mut points = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = t0 + (t1 - t0) * k as f64 / steps as f64;
            let p = traj.at(t)?;
            models.push(linearize(&traj.params, &p)?);
            points.push(p);
            times.push(t);
        }
        Ok(Self { times, models, points })
    }

    /// A single model held over `[t0, t1]`, for static references.
    pub fn constant(params: &SystemParams, point: DesiredPoint, t0: f64, t1: f64) -> Result<Self> {
        let model = linearize(params, &point)?;
        Ok(Self {
            times: vec![t0, t1],
            models: vec![model.clone(), model],
            points: vec![point.clone(), point],
        })
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().expect("nonempty grid")
    }

    /// Bracketing sample index and weight of the later sample; clamps
    /// outside the grid.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.times.len();
        if n == 1 || t <= self.times[0] {
            return (0, 0.0);
        }
        if t >= self.times[n - 1] {
            return (n - 2, 1.0);
        }
        let h = (self.times[n - 1] - self.times[0]) / (n - 1) as f64;
        let k = (((t - self.times[0]) / h).floor() as usize).min(n - 2);
        (k, ((t - self.times[k]) / (self.times[k + 1] - self.times[k])).clamp(0.0, 1.0))
    }

    /// Linearly interpolated `A(t)` and `B(t)`.
    pub fn ab(&self, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
        let (k, w) = self.locate(t);
        if w == 0.0 || self.models[k] == self.models[k + 1] {
            return (self.models[k].a.clone(), self.models[k].b.clone());
        }
        let (m0, m1) = (&self.models[k], &self.models[k + 1]);
        (&m0.a * (1.0 - w) + &m1.a * w, &m0.b * (1.0 - w) + &m1.b * w)
    }
}

/// Matrix dump rows `(t, matrix, row, col, value)` with nonzero entries only.
pub fn dump_entries(sys: &LinearizedSystem) -> Vec<(f64, &'static str, usize, usize, f64)> {
    let mut out = Vec::new();
    for (t, m) in sys.times.iter().zip(&sys.models) {
        for (name, mat) in [("A", &m.a), ("B", &m.b), ("C", &m.c)] {
            for r in 0..mat.nrows() {
                for c in 0..mat.ncols() {
                    let v = mat[(r, c)];
                    if v != 0.0 {
                        out.push((*t, name, r, c, v));
                    }
                }
            }
        }
    }
    out
}

/// Human-readable name of error-state row `r`, e.g. `xi3.y`.
pub fn state_label(lay: &Layout, r: usize) -> String {
    let axis = ["x", "y", "z"][r % 3];
    let block = r / 3;
    let n = lay.n;
    let name = if block == 0 {
        "dx".to_string()
    } else if block <= n {
        format!("xi{block}")
    } else if block == n + 1 {
        "dv".to_string()
    } else if block <= 2 * n + 1 {
        format!("dw{}", block - n - 1)
    } else if block < 2 * n + 2 + lay.n_q {
        format!("eta{}", block - 2 * n - 2)
    } else {
        format!("dOm{}", block - 2 * n - 2 - lay.n_q)
    };
    format!("{name}.{axis}")
}
