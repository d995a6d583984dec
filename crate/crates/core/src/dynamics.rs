//! Equations of motion of the hose–quadrotor chain.
//!
//! Unknowns are stacked as `[v̇_0, ω̇_1, …, ω̇_n]`. Row 0 is the
//! translational equation of the whole chain; row `i` is the rotational
//! equation of link `i`, written in the sign convention
//!
//! ```text
//! row 0:  M00 v̇0 − Σ_m M0m q̂_m ω̇_m              = Σ_m M0m |ω_m|² q_m + Σ_k u_k
//! row i: −Mi0 q̂_i v̇0 − Mii ω̇_i + Σ_{m≠i} Mim q̂_i q̂_m ω̇_m
//!                                   = −Σ_{m≠i} Mim |ω_m|² q̂_i q_m − l_i q̂_i Σ_{k≥i} u_k
//! ```
//!
//! with `u_k = −m̄_k g e3 + f_k R_k e3` at quadrotor nodes and `−m̄_k g e3`
//! elsewhere. Each quadrotor then obeys `J Ω̇ = M − Ω × J Ω`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{e3, hat, Mat3, Vec3};
use crate::model::{node_positions, node_velocities, ControlInput, SystemParams, SystemState};

/// Largest pivot ratio accepted from the LU factorization.
pub const MAX_CONDITION: f64 = 1e12;

/// Scalar inertia table `M_ij`, `i, j ∈ 0..=n`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassEntries {
    table: DMatrix<f64>,
}

impl MassEntries {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.table[(i, j)]
    }

    pub fn table(&self) -> &DMatrix<f64> {
        &self.table
    }
}

/// `M00 = Σ m̄_k`, `M0i = l_i Σ_{k≥i} m̄_k`, `Mij = l_i l_j Σ_{k≥max(i,j)} m̄_k`.
pub fn mass_entries(params: &SystemParams) -> MassEntries {
    let n = params.n();
    let mbar = params.net_masses();
    // tail[i] = Σ_{k≥i} m̄_k
    let mut tail = vec![0.0; n + 2];
    for k in (0..=n).rev() {
        tail[k] = tail[k + 1] + mbar[k];
    }
    let len = |i: usize| if i == 0 { 1.0 } else { params.length(i) };
    let table = DMatrix::from_fn(n + 1, n + 1, |i, j| len(i) * len(j) * tail[i.max(j)]);
    MassEntries { table }
}

/// External force `u_k` on every node.
pub fn nodal_forces(params: &SystemParams, state: &SystemState, input: &ControlInput) -> Vec<Vec3> {
    let g = params.gravity();
    (0..=params.n())
        .map(|k| {
            let weight = -params.net_mass_unchecked(k) * g * e3();
            match params.quad_at(k) {
                Some(j) => weight + input.thrust[j] * state.rot[j].column(2),
                None => weight,
            }
        })
        .collect()
}

/// Block matrix of the translational/link equations at link attitudes `q`.
pub fn block_mass_matrix(params: &SystemParams, entries: &MassEntries, q: &[Vec3]) -> DMatrix<f64> {
    let n = params.n();
    let mut m = DMatrix::zeros(3 * (n + 1), 3 * (n + 1));
    let hats: Vec<Mat3> = q.iter().map(hat).collect();
    let put = |m: &mut DMatrix<f64>, r: usize, c: usize, b: &Mat3| {
        m.fixed_view_mut::<3, 3>(3 * r, 3 * c).copy_from(b);
    };
    put(&mut m, 0, 0, &(entries.get(0, 0) * Mat3::identity()));
    for i in 1..=n {
        put(&mut m, 0, i, &(-entries.get(0, i) * hats[i - 1]));
        put(&mut m, i, 0, &(-entries.get(i, 0) * hats[i - 1]));
        for k in 1..=n {
            let block = if k == i {
                -entries.get(i, i) * Mat3::identity()
            } else {
                entries.get(i, k) * hats[i - 1] * hats[k - 1]
            };
            put(&mut m, i, k, &block);
        }
    }
    m
}

/// Matrix and right-hand side of the stacked equations of motion.
pub fn assemble(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> (DMatrix<f64>, DVector<f64>) {
    let entries = mass_entries(params);
    assemble_with(params, &entries, state, input)
}

fn assemble_with(
    params: &SystemParams,
    entries: &MassEntries,
    state: &SystemState,
    input: &ControlInput,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = params.n();
    let m = block_mass_matrix(params, entries, &state.q);
    let u = nodal_forces(params, state, input);
    // suffix sums Σ_{k≥i} u_k
    let mut u_tail = vec![Vec3::zeros(); n + 2];
    for k in (0..=n).rev() {
        u_tail[k] = u_tail[k + 1] + u[k];
    }
    // centripetal terms |ω_m|² q_m
    let cent: Vec<Vec3> = state.q.iter().zip(&state.omega).map(|(q, w)| w.norm_squared() * q).collect();

    let mut b = DVector::zeros(3 * (n + 1));
    let mut row0 = u_tail[0];
    for mm in 1..=n {
        row0 += entries.get(0, mm) * cent[mm - 1];
    }
    b.fixed_rows_mut::<3>(0).copy_from(&row0);
    for i in 1..=n {
        let qi = &state.q[i - 1];
        let mut acc = Vec3::zeros();
        for mm in 1..=n {
            if mm != i {
                acc += entries.get(i, mm) * cent[mm - 1];
            }
        }
        let row = -qi.cross(&acc) - params.length(i) * qi.cross(&u_tail[i]);
        b.fixed_rows_mut::<3>(3 * i).copy_from(&row);
    }
    (m, b)
}

/// Solution of the equations of motion at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Accelerations {
    pub v0_dot: Vec3,
    pub omega_dot: Vec<Vec3>,
    pub ang_vel_dot: Vec<Vec3>,
    /// Largest `|q_i·ω̇_i|` before tangency projection.
    pub tangency_defect: f64,
    /// Pivot-ratio estimate of the condition of the block matrix.
    pub condition: f64,
}

fn lu_solve(m: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let lu = m.lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularMassMatrix { condition });
    }
    let x = lu.solve(b).ok_or(Error::SingularMassMatrix { condition })?;
    Ok((x, condition))
}

/// `Ω̇ = J⁻¹(M − Ω × JΩ)` for every quadrotor.
pub fn attitude_accelerations(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> Vec<Vec3> {
    (0..params.n_q())
        .map(|j| {
            let om = &state.ang_vel[j];
            params.inertia_inv(j) * (input.moment[j] - om.cross(&(params.inertia(j) * om)))
        })
        .collect()
}

fn project_link_accelerations(state: &SystemState, omega_dot: &mut [Vec3]) -> f64 {
    let mut defect: f64 = 0.0;
    for (q, wd) in state.q.iter().zip(omega_dot.iter_mut()) {
        let d = q.dot(wd) / q.norm_squared();
        defect = defect.max(d.abs());
        *wd -= d * q;
    }
    defect
}

pub fn accelerations(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> Result<Accelerations> {
    let entries = mass_entries(params);
    accelerations_with(params, &entries, state, input)
}

/// As [`accelerations`] with a precomputed inertia table.
pub fn accelerations_with(
    params: &SystemParams,
    entries: &MassEntries,
    state: &SystemState,
    input: &ControlInput,
) -> Result<Accelerations> {
    let (m, b) = assemble_with(params, entries, state, input);
    let (x, condition) = lu_solve(m, &b)?;
    let v0_dot = Vec3::from(x.fixed_rows::<3>(0));
    let mut omega_dot: Vec<Vec3> =
        (1..=params.n()).map(|i| Vec3::from(x.fixed_rows::<3>(3 * i))).collect();
    let tangency_defect = project_link_accelerations(state, &mut omega_dot);
    Ok(Accelerations {
        v0_dot,
        omega_dot,
        ang_vel_dot: attitude_accelerations(params, state, input),
        tangency_defect,
        condition,
    })
}

/// Dynamics with node 0 pinned at the origin: row and column 0 are dropped
/// and `v̇_0 = 0`.
pub fn tethered_accelerations(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> Result<Accelerations> {
    let entries = mass_entries(params);
    let (m, b) = assemble_with(params, &entries, state, input);
    let dim = 3 * params.n();
    let m = m.view((3, 3), (dim, dim)).into_owned();
    let b = b.rows(3, dim).into_owned();
    let (x, condition) = lu_solve(m, &b)?;
    let mut omega_dot: Vec<Vec3> =
        (0..params.n()).map(|i| Vec3::from(x.fixed_rows::<3>(3 * i))).collect();
    let tangency_defect = project_link_accelerations(state, &mut omega_dot);
    Ok(Accelerations {
        v0_dot: Vec3::zeros(),
        omega_dot,
        ang_vel_dot: attitude_accelerations(params, state, input),
        tangency_defect,
        condition,
    })
}

/// Time derivative of every [`SystemState`] field.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub x0_dot: Vec3,
    pub v0_dot: Vec3,
    pub q_dot: Vec<Vec3>,
    pub omega_dot: Vec<Vec3>,
    pub rot_dot: Vec<Mat3>,
    pub ang_vel_dot: Vec<Vec3>,
}

impl StateDerivative {
    fn from_acc(state: &SystemState, acc: Accelerations) -> Self {
        Self {
            x0_dot: state.v0,
            v0_dot: acc.v0_dot,
            q_dot: state.omega.iter().zip(&state.q).map(|(w, q)| w.cross(q)).collect(),
            omega_dot: acc.omega_dot,
            rot_dot: state.rot.iter().zip(&state.ang_vel).map(|(r, om)| r * hat(om)).collect(),
            ang_vel_dot: acc.ang_vel_dot,
        }
    }
}

impl SystemState {
    /// `self + h·d` in ambient coordinates, with no projection.
    pub fn add_scaled(&self, d: &StateDerivative, h: f64) -> SystemState {
        let zip = |a: &[Vec3], b: &[Vec3]| a.iter().zip(b).map(|(x, y)| x + h * y).collect();
        SystemState {
            x0: self.x0 + h * d.x0_dot,
            v0: self.v0 + h * d.v0_dot,
            q: zip(&self.q, &d.q_dot),
            omega: zip(&self.omega, &d.omega_dot),
            rot: self.rot.iter().zip(&d.rot_dot).map(|(r, rd)| r + h * rd).collect(),
            ang_vel: zip(&self.ang_vel, &d.ang_vel_dot),
        }
    }
}

pub fn rhs(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> Result<StateDerivative> {
    Ok(StateDerivative::from_acc(state, accelerations(params, state, input)?))
}

pub fn rhs_with(
    params: &SystemParams,
    entries: &MassEntries,
    state: &SystemState,
    input: &ControlInput,
) -> Result<StateDerivative> {
    Ok(StateDerivative::from_acc(state, accelerations_with(params, entries, state, input)?))
}

pub fn tethered_rhs(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
) -> Result<StateDerivative> {
    let mut d = StateDerivative::from_acc(state, tethered_accelerations(params, state, input)?);
    d.x0_dot = Vec3::zeros();
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    pub potential: f64,
    pub total: f64,
    pub lagrangian: f64,
}

pub fn energy(params: &SystemParams, state: &SystemState) -> EnergyBreakdown {
    let mbar = params.net_masses();
    let g = params.gravity();
    let x = node_positions(params, state);
    let v = node_velocities(params, state);
    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for k in 0..=params.n() {
        kinetic += 0.5 * mbar[k] * v[k].norm_squared();
        potential += mbar[k] * g * x[k].z;
    }
    for j in 0..params.n_q() {
        let om = &state.ang_vel[j];
        kinetic += 0.5 * om.dot(&(params.inertia(j) * om));
    }
    EnergyBreakdown { kinetic, potential, total: kinetic + potential, lagrangian: kinetic - potential }
}

/// Node accelerations `a_i = v̇_0 + Σ_{k≤i} l_k (ω̇_k × q_k + ω_k × (ω_k × q_k))`.
pub fn node_accelerations(
    params: &SystemParams,
    state: &SystemState,
    v0_dot: &Vec3,
    omega_dot: &[Vec3],
) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(params.n() + 1);
    let mut a = *v0_dot;
    out.push(a);
    for i in 0..params.n() {
        let (q, w) = (&state.q[i], &state.omega[i]);
        a += params.lengths()[i] * (omega_dot[i].cross(q) + w.cross(&w.cross(q)));
        out.push(a);
    }
    out
}

/// Tension vectors `T_1..T_n` from Newton's law on each node, starting at
/// the free end `x_0` with `T_0 = 0`:
/// `T_{k+1} = m̄_k (a_k + g e3) + T_k − f_k R_k e3`.
///
/// The last node must balance with `T_{n+1} = 0`; a residual above 1e-6 N
/// means the accelerations do not belong to this state and input.
pub fn link_tensions(
    params: &SystemParams,
    state: &SystemState,
    input: &ControlInput,
    acc: &Accelerations,
) -> Result<Vec<Vec3>> {
    let a = node_accelerations(params, state, &acc.v0_dot, &acc.omega_dot);
    let g = params.gravity();
    let thrust = |k: usize| match params.quad_at(k) {
        Some(j) => input.thrust[j] * state.rot[j].column(2),
        None => Vec3::zeros(),
    };
    let mut t = Vec3::zeros();
    let mut out = Vec::with_capacity(params.n());
    for k in 0..=params.n() {
        t = params.net_mass_unchecked(k) * (a[k] + g * e3()) + t - thrust(k);
        if k < params.n() {
            out.push(t);
        }
    }
    let residual = t.norm();
    if residual > 1e-6 {
        return Err(Error::InconsistentTensions(residual));
    }
    Ok(out)
}
