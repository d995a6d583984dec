use flexhose::control::BlockWeights;
use flexhose::dynamics::{accelerations, tethered_rhs};
use flexhose::geometry::{rotate, Vec3};
use flexhose::flatness::FlatTrajectory;
use flexhose::presets::*;
use flexhose::sim::{lqr_schedule, run, Controller, InitialError, Reference, Scenario};
use flexhose::{ControlInput, SystemParams, SystemState};

fn tracking(dt: f64, gains: &Controller) -> SystemState {
    let params = trajectory_params();
    let tr = FlatTrajectory::new(params.clone(), trajectory_flat_outputs()).unwrap();
    let sc = Scenario {
        params,
        reference: Reference::Trajectory(tr),
        controller: gains.clone(),
        initial_error: InitialError::default(),
        dt,
        duration: 1.0,
        log_interval: 1.0,
        seed: 3,
        tethered: false,
    };
    run(&sc).unwrap().final_state
}

fn distance(a: &SystemState, b: &SystemState) -> f64 {
    let mut d = (a.x0 - b.x0).norm() + (a.v0 - b.v0).norm();
    for i in 0..a.q.len() {
        d += (a.q[i] - b.q[i]).norm() + (a.omega[i] - b.omega[i]).norm();
    }
    for j in 0..a.rot.len() {
        d += (a.rot[j] - b.rot[j]).norm() + (a.ang_vel[j] - b.ang_vel[j]).norm();
    }
    d
}

#[test]
fn closed_loop_integration_is_fourth_order() {
    let params = trajectory_params();
    let tr = FlatTrajectory::new(params.clone(), trajectory_flat_outputs()).unwrap();
    let gains = lqr_schedule(&params, &Reference::Trajectory(tr), &BlockWeights::default(), 1.0, 0.01, 1).unwrap();
    let ctrl = Controller::Lqr(gains);
    let reference = tracking(1.25e-4, &ctrl);
    let coarse = tracking(1e-3, &ctrl);
    let fine = tracking(5e-4, &ctrl);
    let (e1, e2) = (distance(&coarse, &reference), distance(&fine, &reference));
    assert!(distance(&coarse, &fine) / reference.x0.norm().max(1.0) < 1e-5);
    let ratio = e1 / e2;
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}, errors {e1:e} {e2:e}");
}

#[test]
fn tethered_matches_free_chain_with_immovable_base() {
    // without gravity a heavy free end barely moves, so the free chain
    // approaches the pinned one as the end mass grows
    let gap = |m0: f64| {
        let mut masses = vec![0.1; 5];
        masses[0] = m0;
        let quads = vec![quadrotor(2), quadrotor(4)];
        let params = SystemParams::new(vec![0.2, 0.3, 0.25, 0.2], masses, quads, 0.0).unwrap();
        let mut s = SystemState::straight(&params, Vec3::zeros(), Vec3::new(1.0, 0.2, -0.3)).unwrap();
        for (i, (q, w)) in s.q.iter_mut().zip(s.omega.iter_mut()).enumerate() {
            *q = rotate(q, &Vec3::z(), 0.4 * i as f64);
            let raw = Vec3::new(0.5, -1.0 + i as f64, 0.7);
            *w = raw - raw.dot(q) * *q;
        }
        let u = ControlInput { thrust: vec![3.0, 6.0], moment: vec![Vec3::zeros(); 2] };
        let free = accelerations(&params, &s, &u).unwrap();
        let pinned = tethered_rhs(&params, &s, &u).unwrap();
        free.omega_dot.iter().zip(&pinned.omega_dot).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    };
    let (g4, g6) = (gap(1e4), gap(1e6));
    assert!(g6 < 1e-4 && g6 < g4 / 50.0, "{g4:e} {g6:e}");
}
