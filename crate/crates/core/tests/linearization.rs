mod common;

use flexhose::flatness::{solve_static_shape, FlatTrajectory};
use flexhose::geometry::{any_orthogonal, exp_so3, rotate, Vec3};
use flexhose::linearization::{error_state, linearize, random_directions, retract, Layout};
use flexhose::presets::*;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn trajectory() -> FlatTrajectory {
    FlatTrajectory::new(trajectory_params(), trajectory_flat_outputs()).unwrap()
}

#[test]
fn rotated_link_gives_sine_error() {
    let tr = trajectory();
    let p = tr.at(2.0).unwrap();
    let lay = Layout::new(&tr.params);
    let qd = p.state.q[2];
    let axis = any_orthogonal(&qd);
    let theta = 0.3;
    let mut s = p.state.clone();
    s.q[2] = rotate(&qd, &axis, theta);
    let w = s.omega[2];
    s.omega[2] = w - w.dot(&s.q[2]) * s.q[2];
    let e = error_state(&tr.params, &s, &p);
    let xi = e.fixed_rows::<3>(lay.xi(3)).into_owned();
    assert!((xi - theta.sin() * axis).norm() < 1e-14);
}

#[test]
fn rotated_body_gives_sine_error() {
    let tr = trajectory();
    let p = tr.at(1.0).unwrap();
    let lay = Layout::new(&tr.params);
    let a = Vec3::new(0.2, -0.6, 0.3).normalize();
    let mut s = p.state.clone();
    s.rot[1] = p.state.rot[1] * exp_so3(&(0.4 * a));
    let e = error_state(&tr.params, &s, &p);
    let eta = e.fixed_rows::<3>(lay.eta(1)).into_owned();
    assert!((eta - 0.4f64.sin() * a).norm() < 1e-14);
}

#[test]
fn retract_reaches_arcsine_angle() {
    let tr = trajectory();
    let p = tr.at(0.0).unwrap();
    let lay = Layout::new(&tr.params);
    let a = any_orthogonal(&p.state.q[0]);
    let mut e = DVector::zeros(lay.dim());
    e.fixed_rows_mut::<3>(lay.xi(1)).copy_from(&(0.1 * a));
    let s = retract(&tr.params, &p, &e).unwrap();
    let angle = s.q[0].dot(&p.state.q[0]).clamp(-1.0, 1.0).acos();
    assert!((angle - 0.1f64.asin()).abs() < 1e-14);
    let zero = retract(&tr.params, &p, &DVector::zeros(lay.dim())).unwrap();
    assert_eq!(zero, p.state);
}

#[test]
fn hover_blocks() {
    let params = two_quad_params();
    let (x0, targets) = two_quad_targets();
    let p = solve_static_shape(&params, x0, &targets).unwrap().point;
    let lay = Layout::new(&params);
    let m = linearize(&params, &p).unwrap();
    for i in 1..=lay.n {
        let alpha = m.a.view((lay.xi(i), lay.xi(i)), (3, 3));
        assert!(alpha.amax() == 0.0);
        let beta = m.a.view((lay.xi(i), lay.dw(i)), (3, 3)).into_owned();
        let q = p.state.q[i - 1];
        assert!((beta - (nalgebra::Matrix3::identity() - q * q.transpose())).amax() < 1e-15);
    }
    for j in 0..lay.n_q {
        assert!(m.a.view((lay.eta(j), lay.eta(j)), (3, 3)).amax() == 0.0);
        assert!(m.a.view((lay.d_om(j), lay.d_om(j)), (3, 3)).amax() == 0.0);
    }
    // no link rates, so the second constraint block only sees δω
    assert!(m.c.view((lay.n, lay.xi(1)), (lay.n, 3 * lay.n)).amax() == 0.0);
    assert_eq!(m, linearize(&params, &p).unwrap());
}

#[test]
fn thrust_column_of_level_quadrotor() {
    let params = two_quad_params();
    let (x0, targets) = two_quad_targets();
    let p = solve_static_shape(&params, x0, &targets).unwrap().point;
    assert!((p.state.rot[0] - nalgebra::Matrix3::identity()).amax() > 0.0);
    // translational acceleration from δf_j is R_jd e3 scaled through the
    // mass matrix, so it is finite and nonzero for both quadrotors
    let m = linearize(&params, &p).unwrap();
    let lay = Layout::new(&params);
    for j in 0..2 {
        let col = m.b.column(lay.df(j));
        assert!(col.rows(lay.dv(), 3).norm() > 0.0);
        assert!(col.rows(lay.d_om(0), 6).amax() == 0.0);
    }
}

#[test]
fn component_along_link_violates_first_constraint() {
    let tr = trajectory();
    let p = tr.at(3.0).unwrap();
    let lay = Layout::new(&tr.params);
    let m = linearize(&tr.params, &p).unwrap();
    let mut e = DVector::zeros(lay.dim());
    e.fixed_rows_mut::<3>(lay.xi(2)).copy_from(&(0.01 * p.state.q[1]));
    let c = &m.c * &e;
    assert!((c[1] - 0.01).abs() < 1e-15);
}

#[test]
fn errors_of_valid_states_satisfy_constraints() {
    let tr = trajectory();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for k in 0..10 {
        let p = tr.at(k as f64 * 0.9).unwrap();
        let m = linearize(&tr.params, &p).unwrap();
        let (dx, _) = random_directions(&tr.params, &m, &mut rng);
        let s = retract(&tr.params, &p, &(dx * 1e-5)).unwrap();
        let e = error_state(&tr.params, &s, &p);
        assert!((&m.c * e).norm() <= 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn retract_round_trips(seed in any::<u64>(), t in 0.0f64..10.0, scale in 0.0f64..0.5) {
        let tr = trajectory();
        let p = tr.at(t).unwrap();
        let m = linearize(&tr.params, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (dx, _) = random_directions(&tr.params, &m, &mut rng);
        let s = retract(&tr.params, &p, &(dx * scale)).unwrap();
        let e = error_state(&tr.params, &s, &p);
        let again = error_state(&tr.params, &retract(&tr.params, &p, &e).unwrap(), &p);
        prop_assert!((again - e).norm() < 1e-9);
    }
}
