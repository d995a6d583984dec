//! Shared test helpers: random draws and a constrained point-mass oracle.
#![allow(dead_code)]

use flexhose::geometry::{exp_so3, Mat3, Vec3};
use flexhose::{ControlInput, Quadrotor, SystemParams, SystemState};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Accelerations found without the reduced equations: the chain is a set of
/// point masses `x_0..x_n` with distance constraints
/// `g_i = ½(|x_i − x_{i−1}|² − l_i²) = 0`, solved together with their
/// multipliers from
///
/// ```text
/// m̄_k a_k − Σ_i λ_i ∂g_i/∂x_k = F_k
/// d_i · (a_i − a_{i−1}) = −|v_i − v_{i−1}|²,   d_i = x_i − x_{i−1}
/// ```
pub struct OracleAcc {
    pub v0_dot: Vec3,
    pub omega_dot: Vec<Vec3>,
    /// Link tensions `λ_i l_i` (positive when pulling).
    pub multipliers: Vec<f64>,
}

pub fn node_mass(params: &SystemParams, k: usize) -> f64 {
    let quad: f64 = params.quadrotors().iter().filter(|q| q.node == k).map(|q| q.mass).sum();
    params.masses()[k] + quad
}

pub fn oracle(params: &SystemParams, s: &SystemState, u: &ControlInput, tethered: bool) -> OracleAcc {
    let n = params.n();
    let g = params.gravity();
    let mut x = vec![s.x0];
    let mut v = vec![s.v0];
    for i in 0..n {
        let l = params.lengths()[i];
        x.push(x[i] + l * s.q[i]);
        v.push(v[i] + l * s.omega[i].cross(&s.q[i]));
    }
    let mut force: Vec<Vec3> = (0..=n).map(|k| -node_mass(params, k) * g * Vec3::z()).collect();
    for (j, quad) in params.quadrotors().iter().enumerate() {
        force[quad.node] += u.thrust[j] * s.rot[j] * Vec3::z();
    }

    // unknowns: a_k for free nodes, then λ_1..λ_n
    let first = usize::from(tethered);
    let na = 3 * (n + 1 - first);
    let dim = na + n;
    let col = |k: usize| 3 * (k - first);
    let mut m = DMatrix::zeros(dim, dim);
    let mut rhs = DVector::zeros(dim);
    for k in first..=n {
        for a in 0..3 {
            m[(col(k) + a, col(k) + a)] = node_mass(params, k);
            rhs[col(k) + a] = force[k][a];
        }
    }
    for i in 1..=n {
        let d = x[i] - x[i - 1];
        let dv = v[i] - v[i - 1];
        let row = na + i - 1;
        for a in 0..3 {
            // ∂g_i/∂x_i = d, ∂g_i/∂x_{i−1} = −d
            m[(col(i) + a, row)] = -d[a];
            m[(row, col(i) + a)] = d[a];
            if i > first {
                m[(col(i - 1) + a, row)] = d[a];
                m[(row, col(i - 1) + a)] = -d[a];
            }
        }
        rhs[row] = -dv.norm_squared();
    }
    let sol = m.lu().solve(&rhs).expect("oracle system is regular");
    let acc = |k: usize| {
        if k < first {
            Vec3::zeros()
        } else {
            Vec3::new(sol[col(k)], sol[col(k) + 1], sol[col(k) + 2])
        }
    };
    let omega_dot = (1..=n)
        .map(|i| s.q[i - 1].cross(&(acc(i) - acc(i - 1))) / params.lengths()[i - 1])
        .collect();
    let multipliers = (1..=n).map(|i| sol[na + i - 1] * params.lengths()[i - 1]).collect();
    OracleAcc { v0_dot: acc(0), omega_dot, multipliers }
}

pub fn unit<R: Rng>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        if v.norm() > 0.1 && v.norm() <= 1.0 {
            return v.normalize();
        }
    }
}

/// `n` links of random length and mass; quadrotors at node `n` and, at
/// random, at node 0 and an interior node.
pub fn random_params<R: Rng>(n: usize, rng: &mut R) -> SystemParams {
    let lengths = (0..n).map(|_| rng.random_range(0.05..0.5)).collect();
    let masses = (0..=n).map(|_| rng.random_range(0.02..0.3)).collect();
    let mut nodes = Vec::new();
    if rng.random_bool(0.7) {
        nodes.push(0);
    }
    if n > 1 && rng.random_bool(0.5) {
        nodes.push(rng.random_range(1..n));
    }
    nodes.push(n);
    let quads = nodes
        .into_iter()
        .map(|k| {
            let d = [rng.random_range(0.02..0.08), rng.random_range(0.02..0.08), rng.random_range(0.05..0.15)];
            Quadrotor::new(k, rng.random_range(0.3..1.2), d)
        })
        .collect();
    SystemParams::new(lengths, masses, quads, 9.81).unwrap()
}

pub fn random_state<R: Rng>(params: &SystemParams, rng: &mut R) -> SystemState {
    let q: Vec<Vec3> = (0..params.n()).map(|_| unit(rng)).collect();
    let omega = q
        .iter()
        .map(|qi| {
            let w = Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0));
            w - w.dot(qi) * qi
        })
        .collect();
    let rot: Vec<Mat3> = (0..params.n_q())
        .map(|_| exp_so3(&Vec3::from_fn(|_, _| rng.random_range(-1.5..1.5))))
        .collect();
    SystemState {
        x0: Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
        v0: Vec3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
        q,
        omega,
        rot,
        ang_vel: (0..params.n_q()).map(|_| Vec3::from_fn(|_, _| rng.random_range(-3.0..3.0))).collect(),
    }
}

pub fn random_input<R: Rng>(params: &SystemParams, rng: &mut R) -> ControlInput {
    ControlInput {
        thrust: (0..params.n_q()).map(|_| rng.random_range(0.0..20.0)).collect(),
        moment: (0..params.n_q()).map(|_| Vec3::from_fn(|_, _| rng.random_range(-0.5..0.5))).collect(),
    }
}

/// Largest componentwise difference between the reduced dynamics and the
/// oracle, over `v̇_0` and every `ω̇_i`.
pub fn oracle_gap(params: &SystemParams, s: &SystemState, u: &ControlInput) -> f64 {
    let acc = flexhose::dynamics::accelerations(params, s, u).unwrap();
    let o = oracle(params, s, u, false);
    let mut gap = (acc.v0_dot - o.v0_dot).amax();
    for (a, b) in acc.omega_dot.iter().zip(&o.omega_dot) {
        gap = gap.max((a - b).amax());
    }
    gap
}
