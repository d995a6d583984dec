//! The reference setups: two- and three-quadrotor setpoints, the tracking
//! trajectory and the discretization benchmark.

use std::f64::consts::FRAC_PI_2;

use crate::error::Result;
use crate::flatness::FlatOutputs;
use crate::geometry::Vec3;
use crate::jets::{Primitive, Term, Vec3Primitive};
use crate::model::{Quadrotor, SystemParams};

pub const QUAD_MASS: f64 = 0.85;
pub const QUAD_INERTIA: [f64; 3] = [0.0557, 0.0557, 0.1050];

pub fn quadrotor(node: usize) -> Quadrotor {
    Quadrotor::new(node, QUAD_MASS, QUAD_INERTIA)
}

/// Ten 0.1 m links, quadrotors at both ends.
pub fn two_quad_params() -> SystemParams {
    SystemParams::uniform(10, 0.1, 0.0909, vec![quadrotor(0), quadrotor(10)])
        .expect("valid preset")
}

/// Start and end positions for [`two_quad_params`].
pub fn two_quad_targets() -> (Vec3, Vec<Vec3>) {
    (Vec3::zeros(), vec![Vec3::new(0.6, 0.0, 0.0)])
}

/// Ten 0.2 m links, quadrotors at nodes 0, 5 and 10.
pub fn three_quad_params() -> SystemParams {
    SystemParams::uniform(10, 0.2, 0.0909, vec![quadrotor(0), quadrotor(5), quadrotor(10)])
        .expect("valid preset")
}

/// Level line with 0.7 m between neighbouring quadrotors.
pub fn three_quad_targets() -> (Vec3, Vec<Vec3>) {
    (Vec3::zeros(), vec![Vec3::new(0.7, 0.0, 0.0), Vec3::new(1.4, 0.0, 0.0)])
}

/// Five 0.2 m links, quadrotors at both ends.
pub fn trajectory_params() -> SystemParams {
    SystemParams::uniform(5, 0.2, 0.1667, vec![quadrotor(0), quadrotor(5)]).expect("valid preset")
}

/// `x_0 = [a_x(1 − cos 2πf₁t), a_y sin 2πf₂t, a_z cos 2πf₃t]` with
/// `a = (2, 2.5, 1.5)`, `f = (1/4, 1/5, 1/7)`; constant
/// `T_1 = [2.74, 0, −3.27]`; zero yaw.
pub fn trajectory_flat_outputs() -> FlatOutputs {
    let x = Primitive::constant(2.0).plus(Term::Sinusoid {
        amplitude: 2.0,
        frequency: 0.25,
        phase: -FRAC_PI_2,
    });
    let y = Primitive::sinusoid(2.5, 0.2, 0.0);
    let z = Primitive::sinusoid(1.5, 1.0 / 7.0, FRAC_PI_2);
    FlatOutputs {
        start: Vec3Primitive::new(x, y, z),
        yaw: vec![Primitive::constant(0.0); 2],
        tensions: vec![Vec3Primitive::constant([2.74, 0.0, -3.27])],
        tethered: false,
    }
}

pub const BENCHMARK_LENGTH: f64 = 1.0;
pub const BENCHMARK_MASS: f64 = 1.0;
pub const BENCHMARK_SPAN: f64 = 0.6;

/// `n` links sharing a fixed total length and hose mass, quadrotors at both
/// ends.
pub fn benchmark_params(n: usize) -> Result<SystemParams> {
    SystemParams::uniform(
        n,
        BENCHMARK_LENGTH / n as f64,
        BENCHMARK_MASS / (n + 1) as f64,
        vec![quadrotor(0), quadrotor(n)],
    )
}
