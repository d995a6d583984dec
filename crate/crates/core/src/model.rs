//! System definition: parameters, state, inputs and the chain kinematics.
//!
//! Links are numbered `1..=n` and nodes `0..=n`; link `i` joins node `i-1`
//! to node `i` along the unit vector `q_i`. In storage, link `i` sits at
//! index `i-1` of [`SystemState::q`] and [`SystemState::omega`].
//!
//! Link angular velocities `ω_i` are world-frame (`q̇ = ω × q`); quadrotor
//! angular velocities `Ω_j` are body-frame (`Ṙ = R Ω̂`).

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{orthonormality_defect, Mat3, Vec3, MANIFOLD_TOL};

pub const DEFAULT_GRAVITY: f64 = 9.81;

/// Tolerance on `q·ω` in a valid state. Smaller defects are projected away.
pub const TANGENCY_TOL: f64 = 1e-8;

/// A quadrotor rigidly attached at hose node `node`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quadrotor {
    pub node: usize,
    pub mass: f64,
    pub inertia: Mat3,
}

impl Quadrotor {
    pub fn new(node: usize, mass: f64, inertia_diag: [f64; 3]) -> Self {
        Self { node, mass, inertia: Matrix3::from_diagonal(&Vec3::from(inertia_diag)) }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawParams {
    lengths: Vec<f64>,
    masses: Vec<f64>,
    quadrotors: Vec<Quadrotor>,
    #[serde(default = "default_gravity")]
    gravity: f64,
}

fn default_gravity() -> f64 {
    DEFAULT_GRAVITY
}

/// Hose discretization and attached quadrotors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct SystemParams {
    lengths: Vec<f64>,
    masses: Vec<f64>,
    quadrotors: Vec<Quadrotor>,
    gravity: f64,
    // slot[k] = index into `quadrotors` of the vehicle at node k
    slot: Vec<Option<usize>>,
    inertia_inv: Vec<Mat3>,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        Self::new(raw.lengths, raw.masses, raw.quadrotors, raw.gravity)
    }
}

impl From<SystemParams> for RawParams {
    fn from(p: SystemParams) -> Self {
        Self { lengths: p.lengths, masses: p.masses, quadrotors: p.quadrotors, gravity: p.gravity }
    }
}

impl SystemParams {
    /// `lengths` holds `l_1..l_n`, `masses` holds `m_0..m_n`; quadrotors must
    /// be listed in increasing node order.
    pub fn new(
        lengths: Vec<f64>,
        masses: Vec<f64>,
        quadrotors: Vec<Quadrotor>,
        gravity: f64,
    ) -> Result<Self> {
        let n = lengths.len();
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if n == 0 {
            return bad("the hose needs at least one link".into());
        }
        if masses.len() != n + 1 {
            return bad(format!("{} links need {} node masses, got {}", n, n + 1, masses.len()));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return bad(format!("link length {l} must be positive"));
        }
        if let Some(m) = masses.iter().find(|m| !(m.is_finite() && **m > 0.0)) {
            return bad(format!("node mass {m} must be positive"));
        }
        if !gravity.is_finite() {
            return bad("gravity must be finite".into());
        }
        if quadrotors.is_empty() {
            return bad("at least one quadrotor is required".into());
        }
        let mut slot = vec![None; n + 1];
        let mut inertia_inv = Vec::with_capacity(quadrotors.len());
        for (j, quad) in quadrotors.iter().enumerate() {
            if quad.node > n {
                return bad(format!("quadrotor node {} outside 0..={n}", quad.node));
            }
            if j > 0 && quad.node <= quadrotors[j - 1].node {
                return bad("quadrotor nodes must be strictly increasing".into());
            }
            if !(quad.mass.is_finite() && quad.mass >= 0.0) {
                return bad(format!("quadrotor mass {} must be non-negative", quad.mass));
            }
            let jm = &quad.inertia;
            if (jm - jm.transpose()).norm() > 1e-12 * (1.0 + jm.norm()) {
                return bad(format!("inertia of quadrotor at node {} is not symmetric", quad.node));
            }
            if jm.cholesky().is_none() {
                return bad(format!(
                    "inertia of quadrotor at node {} is not positive definite",
                    quad.node
                ));
            }
            slot[quad.node] = Some(j);
            inertia_inv.push(jm.try_inverse().expect("positive definite"));
        }
        Ok(Self { lengths, masses, quadrotors, gravity, slot, inertia_inv })
    }

    /// `n` equal links of length `link_length` and equal node masses.
    pub fn uniform(
        n: usize,
        link_length: f64,
        node_mass: f64,
        quadrotors: Vec<Quadrotor>,
    ) -> Result<Self> {
        Self::new(vec![link_length; n], vec![node_mass; n + 1], quadrotors, DEFAULT_GRAVITY)
    }

    pub fn with_gravity(mut self, gravity: f64) -> Result<Self> {
        if !gravity.is_finite() {
            return Err(Error::InvalidParams("gravity must be finite".into()));
        }
        self.gravity = gravity;
        Ok(self)
    }

    /// Number of links `n`.
    pub fn n(&self) -> usize {
        self.lengths.len()
    }

    /// Number of quadrotors `n_Q`.
    pub fn n_q(&self) -> usize {
        self.quadrotors.len()
    }

    pub fn gravity(&self) -> f64 {
        self.gravity
    }

    /// Length of link `i` (1-based).
    pub fn length(&self, i: usize) -> f64 {
        self.lengths[i - 1]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }

    pub fn quadrotors(&self) -> &[Quadrotor] {
        &self.quadrotors
    }

    /// Attachment index set `ℐ`, increasing.
    pub fn attachments(&self) -> Vec<usize> {
        self.quadrotors.iter().map(|q| q.node).collect()
    }

    /// Index of the quadrotor attached at `node`, if any.
    pub fn quad_at(&self, node: usize) -> Option<usize> {
        self.slot.get(node).copied().flatten()
    }

    pub fn inertia(&self, j: usize) -> &Mat3 {
        &self.quadrotors[j].inertia
    }

    pub fn inertia_inv(&self, j: usize) -> &Mat3 {
        &self.inertia_inv[j]
    }

    /// `m̄_k = m_k + m_Q 𝟙_ℐ(k)`.
    pub fn net_mass(&self, k: usize) -> Result<f64> {
        if k > self.n() {
            return Err(Error::InvalidParams(format!("node {k} outside 0..={}", self.n())));
        }
        Ok(self.net_mass_unchecked(k))
    }

    pub(crate) fn net_mass_unchecked(&self, k: usize) -> f64 {
        self.masses[k] + self.quad_at(k).map_or(0.0, |j| self.quadrotors[j].mass)
    }

    pub fn net_masses(&self) -> Vec<f64> {
        (0..=self.n()).map(|k| self.net_mass_unchecked(k)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.net_masses().iter().sum()
    }

    pub fn dof_counts(&self) -> DofCounts {
        let n = self.n();
        let nq = self.n_q();
        DofCounts {
            dof: 3 * (nq + 1) + 2 * n,
            actuated: 4 * nq,
            unactuated: (2 * n + 3) as isize - nq as isize,
        }
    }

    /// Dimension of the stacked error state `(δx, ξ, δv, δω, η, δΩ)`.
    pub fn error_dim(&self) -> usize {
        6 + 6 * self.n() + 6 * self.n_q()
    }

    /// Dimension of the stacked error input `(δf, δM)`.
    pub fn input_dim(&self) -> usize {
        4 * self.n_q()
    }
}

/// Degrees of freedom, actuated and unactuated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofCounts {
    pub dof: usize,
    pub actuated: usize,
    pub unactuated: isize,
}

/// Full configuration and velocities. Quadrotor entries follow the order of
/// [`SystemParams::quadrotors`].
///
/// Fields are kept in ambient coordinates so that intermediate integrator
/// stages, which sit slightly off the manifold, are representable.
/// [`SystemState::validated`] enforces the constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemState {
    pub x0: Vec3,
    pub v0: Vec3,
    pub q: Vec<Vec3>,
    pub omega: Vec<Vec3>,
    pub rot: Vec<Mat3>,
    pub ang_vel: Vec<Vec3>,
}

impl SystemState {
    /// Every link along `dir`, everything at rest, level quadrotors.
    pub fn straight(params: &SystemParams, x0: Vec3, dir: Vec3) -> Result<Self> {
        let dir = crate::geometry::project_s2(&dir)?.into_inner();
        Ok(Self {
            x0,
            v0: Vec3::zeros(),
            q: vec![dir; params.n()],
            omega: vec![Vec3::zeros(); params.n()],
            rot: vec![Mat3::identity(); params.n_q()],
            ang_vel: vec![Vec3::zeros(); params.n_q()],
        })
    }

    fn check_shape(&self, params: &SystemParams) -> Result<()> {
        let (n, nq) = (params.n(), params.n_q());
        if self.q.len() != n || self.omega.len() != n {
            return Err(Error::InvalidState(format!(
                "expected {n} link attitudes and rates, got {} and {}",
                self.q.len(),
                self.omega.len()
            )));
        }
        if self.rot.len() != nq || self.ang_vel.len() != nq {
            return Err(Error::InvalidState(format!(
                "expected {nq} quadrotor attitudes and rates, got {} and {}",
                self.rot.len(),
                self.ang_vel.len()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        let vecs = [&self.q, &self.omega, &self.ang_vel];
        self.x0.iter().chain(self.v0.iter()).all(|v| v.is_finite())
            && vecs.iter().all(|vs| vs.iter().all(|v| v.iter().all(|c| c.is_finite())))
            && self.rot.iter().all(|r| r.iter().all(|c| c.is_finite()))
    }

    /// Checks every manifold constraint, projecting `ω_i` onto the tangent
    /// plane of `q_i` when the defect is below [`TANGENCY_TOL`].
    pub fn validated(mut self, params: &SystemParams) -> Result<Self> {
        self.check_shape(params)?;
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite entries".into()));
        }
        for (i, (q, w)) in self.q.iter().zip(self.omega.iter_mut()).enumerate() {
            if (q.norm() - 1.0).abs() > MANIFOLD_TOL {
                return Err(Error::InvalidState(format!("|q{}| = {}", i + 1, q.norm())));
            }
            let defect = q.dot(w);
            if defect.abs() > TANGENCY_TOL {
                return Err(Error::InvalidState(format!("q{0}·w{0} = {defect:e}", i + 1)));
            }
            *w -= defect * q;
        }
        for (j, r) in self.rot.iter().enumerate() {
            let d = orthonormality_defect(r);
            if d > MANIFOLD_TOL || r.determinant() <= 0.0 {
                return Err(Error::InvalidState(format!("R{j} is not a rotation (defect {d:e})")));
            }
        }
        Ok(self)
    }

    /// Largest `| |q_i| - 1 |`, `|q_i·ω_i|` and `|RᵀR - I|` over the state.
    pub fn constraint_defects(&self) -> Defects {
        Defects {
            qnorm: self.q.iter().map(|q| (q.norm() - 1.0).abs()).fold(0.0, f64::max),
            qw: self.q.iter().zip(&self.omega).map(|(q, w)| q.dot(w).abs()).fold(0.0, f64::max),
            orth: self.rot.iter().map(orthonormality_defect).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defects {
    pub qnorm: f64,
    pub qw: f64,
    pub orth: f64,
}

impl Defects {
    pub fn max(&self) -> f64 {
        self.qnorm.max(self.qw).max(self.orth)
    }
}

/// Thrust magnitudes and body-frame moments, one per quadrotor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlInput {
    pub thrust: Vec<f64>,
    pub moment: Vec<Vec3>,
}

impl ControlInput {
    pub fn zero(n_q: usize) -> Self {
        Self { thrust: vec![0.0; n_q], moment: vec![Vec3::zeros(); n_q] }
    }

    pub fn is_finite(&self) -> bool {
        self.thrust.iter().all(|f| f.is_finite())
            && self.moment.iter().all(|m| m.iter().all(|c| c.is_finite()))
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        if self.thrust.len() != params.n_q() || self.moment.len() != params.n_q() {
            return Err(Error::InvalidState(format!(
                "expected {} thrusts and moments, got {} and {}",
                params.n_q(),
                self.thrust.len(),
                self.moment.len()
            )));
        }
        if !self.is_finite() {
            return Err(Error::InvalidState("non-finite control input".into()));
        }
        Ok(())
    }
}

/// `x_i = x_0 + Σ_{k≤i} l_k q_k` for `i = 0..=n`.
pub fn node_positions(params: &SystemParams, state: &SystemState) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(params.n() + 1);
    let mut x = state.x0;
    out.push(x);
    for (l, q) in params.lengths.iter().zip(&state.q) {
        x += *l * q;
        out.push(x);
    }
    out
}

/// `v_i = v_0 + Σ_{k≤i} l_k ω_k × q_k` for `i = 0..=n`.
pub fn node_velocities(params: &SystemParams, state: &SystemState) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(params.n() + 1);
    let mut v = state.v0;
    out.push(v);
    for ((l, q), w) in params.lengths.iter().zip(&state.q).zip(&state.omega) {
        v += *l * w.cross(q);
        out.push(v);
    }
    out
}
