//! Differential flatness of the chain.
//!
//! The flat outputs are the hose start `x_0(t)`, one yaw `ψ_j(t)` per
//! quadrotor and the tension `T_{k+1}(t)` in the link after every quadrotor
//! that is not at the last node. Walking down the chain with Newton's law
//!
//! ```text
//! m̄_k ẍ_k = T_{k+1} − T_k − m̄_k g e3 + f_k R_k e3 𝟙_ℐ(k),   T_0 = 0
//! ```
//!
//! each link tension is either a flat output (after a quadrotor) or follows
//! from the node below it; `q_{k+1} = T_{k+1}/‖T_{k+1}‖` and
//! `x_{k+1} = x_k + l_{k+1} q_{k+1}`. At quadrotor nodes the same balance
//! gives the thrust vector, from which attitude, rates and moments follow.
//! Each step costs two time derivatives, so `x_0` needs `2n + 4` of them.
//!
//! With a tethered chain `x_0 ≡ 0` and `T_1(t)` replaces `x_0(t)` as the
//! first flat output.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::geometry::{e3, vee_skew, Mat3, Vec3};
use crate::jets::{Primitive, ScalarJet, Vec3Jet, Vec3Primitive};
use crate::model::{ControlInput, SystemParams, SystemState};

/// Tension norms below this are treated as a flatness singularity.
pub const MIN_TENSION: f64 = 1e-6;

/// Number of derivatives each flat output must supply.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JetOrders {
    /// Order of `x_0`, or of `T_1` for a tethered chain.
    pub start: usize,
    pub yaw: usize,
    /// One per entry of [`FlatOutputs::tensions`].
    pub tensions: Vec<usize>,
}

/// `x_0`: `2n + 4`; `ψ_j`: 2; `T_{k+1}`: `2(n − k) + 2`.
pub fn required_jet_order(n: usize, tension_nodes: &[usize]) -> JetOrders {
    JetOrders {
        start: 2 * n + 4,
        yaw: 2,
        tensions: tension_nodes.iter().map(|k| 2 * (n - k) + 2).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FlatOutputs {
    /// `x_0(t)`, or `T_1(t)` when `tethered`.
    pub start: Vec3Primitive,
    /// One yaw angle per quadrotor.
    pub yaw: Vec<Primitive>,
    /// Tension in the link after each quadrotor, in node order, omitting a
    /// quadrotor at the last node.
    pub tensions: Vec<Vec3Primitive>,
    #[serde(default)]
    pub tethered: bool,
}

impl FlatOutputs {
    /// Nodes whose outgoing tension is a flat output.
    pub fn tension_nodes(params: &SystemParams) -> Vec<usize> {
        params.attachments().into_iter().filter(|k| *k < params.n()).collect()
    }

    pub fn check(&self, params: &SystemParams) -> Result<()> {
        let n = params.n();
        let nodes = Self::tension_nodes(params);
        if params.quad_at(n).is_none() {
            return Err(Error::InvalidScenario(format!(
                "a quadrotor must be attached at the hose end (node {n}) for flatness"
            )));
        }
        if self.yaw.len() != params.n_q() {
            return Err(Error::InvalidScenario(format!(
                "{} quadrotors need {} yaw outputs, got {}",
                params.n_q(),
                params.n_q(),
                self.yaw.len()
            )));
        }
        if self.tensions.len() != nodes.len() {
            return Err(Error::InvalidScenario(format!(
                "expected {} tension outputs (after nodes {:?}), got {}",
                nodes.len(),
                nodes,
                self.tensions.len()
            )));
        }
        if self.tethered && params.quad_at(0).is_some() {
            return Err(Error::InvalidScenario(
                "a tethered chain cannot have a quadrotor at the anchor".into(),
            ));
        }
        Ok(())
    }
}

/// Full desired state and input at one instant, with the accelerations the
/// dynamics must reproduce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesiredPoint {
    pub t: f64,
    pub state: SystemState,
    pub input: ControlInput,
    pub v0_dot: Vec3,
    pub omega_dot: Vec<Vec3>,
    pub ang_vel_dot: Vec<Vec3>,
    /// `T_1..T_n`.
    pub tensions: Vec<Vec3>,
    pub tethered: bool,
}

/// Attitude, rates, thrust and moment of one quadrotor.
#[derive(Debug, Clone, PartialEq)]
pub struct AttitudePoint {
    pub rot: Mat3,
    pub ang_vel: Vec3,
    pub ang_acc: Vec3,
    pub thrust: f64,
    pub moment: Vec3,
}

/// Recovers the attitude from the thrust vector `f R e3` and yaw `ψ`.
///
/// The body z-axis is the thrust direction; the body y-axis is normal to
/// both it and the heading `[cos ψ, sin ψ, 0]`. Both jets need order 2.
pub fn thrust_to_attitude(
    thrust_vec: &Vec3Jet,
    yaw: &ScalarJet,
    inertia: &Mat3,
) -> Result<AttitudePoint> {
    let thrust_vec = thrust_vec.truncate(2)?;
    let yaw = yaw.truncate(2)?;
    let f = thrust_vec.value().norm();
    if f < MIN_TENSION {
        return Err(Error::AttitudeSingularity(format!("thrust vector norm {f:e}")));
    }
    let b3 = thrust_vec.normalize()?;
    let (s, c) = yaw.sin_cos();
    let heading = Vec3Jet::from_components(&c, &s, &ScalarJet::zero(2))?;
    let side = b3.cross(&heading)?;
    if side.value().norm() < MIN_TENSION {
        return Err(Error::AttitudeSingularity("thrust axis is horizontal along the heading".into()));
    }
    let b2 = side.normalize()?;
    let b1 = b2.cross(&b3)?;
    let r: Vec<Mat3> = (0..=2)
        .map(|k| Matrix3::from_columns(&[b1.get(k), b2.get(k), b3.get(k)]))
        .collect();
    let ang_vel = vee_skew(&(r[0].transpose() * r[1]));
    let ang_acc = vee_skew(&(r[0].transpose() * r[2] + r[1].transpose() * r[1]));
    let moment = inertia * ang_acc + ang_vel.cross(&(inertia * ang_vel));
    Ok(AttitudePoint { rot: r[0], ang_vel, ang_acc, thrust: f, moment })
}

fn tension_guard(t: f64, tension: &Vec3Jet, link: usize) -> Result<()> {
    let norm = tension.value().norm();
    if norm < MIN_TENSION {
        return Err(Error::FlatnessSingularity {
            t,
            detail: format!("tension in link {link} has norm {norm:e}"),
        });
    }
    Ok(())
}

fn common<'a>(a: &'a Vec3Jet, b: &'a Vec3Jet) -> Result<(Vec3Jet, Vec3Jet)> {
    let o = a.order().min(b.order());
    Ok((a.truncate(o)?, b.truncate(o)?))
}

/// Desired state and input at time `t` from the flat outputs.
pub fn expand(params: &SystemParams, flat: &FlatOutputs, t: f64) -> Result<DesiredPoint> {
    flat.check(params)?;
    let n = params.n();
    let nq = params.n_q();
    let g = params.gravity();
    let orders = required_jet_order(n, &FlatOutputs::tension_nodes(params));

    let mut q_jets: Vec<Vec3Jet> = Vec::with_capacity(n);
    let mut tensions = Vec::with_capacity(n);
    let mut thrust_jets: Vec<Option<Vec3Jet>> = vec![None; nq];
    let mut flat_tensions = flat.tensions.iter().zip(&orders.tensions);

    // position of the current node and tension entering it from below
    let (mut x, mut t_in, first) = if flat.tethered {
        let t1 = flat.start.sample(t, orders.start - 2)?;
        tension_guard(t, &t1, 1)?;
        let q1 = t1.normalize()?;
        let x1 = q1.scale(params.length(1));
        tensions.push(t1.value());
        q_jets.push(q1);
        (x1, t1, 1)
    } else {
        let x0 = flat.start.sample(t, orders.start)?;
        let o = x0.order();
        (x0, Vec3Jet::zero(o), 0)
    };
    let x0_jet = if flat.tethered { Vec3Jet::zero(2) } else { x.truncate(2)? };

    for k in first..=n {
        let acc = x.derivative()?.derivative()?;
        let m = params.net_mass_unchecked(k);
        let need = acc.offset(&(g * e3())).scale(m).add(&t_in.truncate(acc.order())?)?;
        if k == n {
            thrust_jets[params.quad_at(n).expect("checked")] = Some(need);
            break;
        }
        let t_next = match params.quad_at(k) {
            Some(j) => {
                let (prim, order) = flat_tensions.next().expect("checked");
                let tf = prim.sample(t, *order)?;
                let (need, tf_c) = common(&need, &tf)?;
                thrust_jets[j] = Some(need.sub(&tf_c)?);
                tf
            }
            None => need,
        };
        tension_guard(t, &t_next, k + 1)?;
        let q = t_next.normalize()?;
        x = x.truncate(q.order())?.add(&q.scale(params.length(k + 1)))?;
        tensions.push(t_next.value());
        q_jets.push(q);
        t_in = t_next;
    }

    let mut rot = Vec::with_capacity(nq);
    let mut ang_vel = Vec::with_capacity(nq);
    let mut ang_vel_dot = Vec::with_capacity(nq);
    let mut input = ControlInput::zero(nq);
    for (j, jet) in thrust_jets.iter().enumerate() {
        let jet = jet.as_ref().expect("every quadrotor node is visited");
        let yaw = flat.yaw[j].sample(t, orders.yaw);
        let att = thrust_to_attitude(jet, &yaw, params.inertia(j)).map_err(|e| match e {
            Error::AttitudeSingularity(d) => Error::AttitudeSingularity(format!("t = {t}: {d}")),
            other => other,
        })?;
        rot.push(att.rot);
        ang_vel.push(att.ang_vel);
        ang_vel_dot.push(att.ang_acc);
        input.thrust[j] = att.thrust;
        input.moment[j] = att.moment;
    }

    let q: Vec<Vec3> = q_jets.iter().map(|j| j.value()).collect();
    let omega = q_jets.iter().map(|j| j.value().cross(&j.get(1))).collect();
    let omega_dot = q_jets.iter().map(|j| j.value().cross(&j.get(2))).collect();
    Ok(DesiredPoint {
        t,
        state: SystemState { x0: x0_jet.value(), v0: x0_jet.get(1), q, omega, rot, ang_vel },
        input,
        v0_dot: x0_jet.get(2),
        omega_dot,
        ang_vel_dot,
        tensions,
        tethered: flat.tethered,
    })
}

/// [`expand`] for a tethered chain: `flat.start` is read as `T_1(t)`.
pub fn tethered_expand(params: &SystemParams, flat: &FlatOutputs, t: f64) -> Result<DesiredPoint> {
    let mut flat = flat.clone();
    flat.tethered = true;
    expand(params, &flat, t)
}

/// Largest mismatch between the accelerations stored in `point` and those
/// the equations of motion produce at its state and input.
pub fn residual(params: &SystemParams, point: &DesiredPoint) -> Result<f64> {
    let acc = if point.tethered {
        dynamics::tethered_accelerations(params, &point.state, &point.input)?
    } else {
        dynamics::accelerations(params, &point.state, &point.input)?
    };
    let mut r = (acc.v0_dot - point.v0_dot).amax();
    for (a, b) in acc.omega_dot.iter().zip(&point.omega_dot) {
        r = r.max((a - b).amax());
    }
    for (a, b) in acc.ang_vel_dot.iter().zip(&point.ang_vel_dot) {
        r = r.max((a - b).amax());
    }
    Ok(r)
}

/// Flat outputs bound to a system, sampled on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTrajectory {
    pub params: SystemParams,
    pub flat: FlatOutputs,
}

impl FlatTrajectory {
    pub fn new(params: SystemParams, flat: FlatOutputs) -> Result<Self> {
        flat.check(&params)?;
        Ok(Self { params, flat })
    }

    pub fn at(&self, t: f64) -> Result<DesiredPoint> {
        expand(&self.params, &self.flat, t)
    }
}

/// Static equilibrium found by [`solve_static_shape`].
#[derive(Debug, Clone, PartialEq)]
pub struct StaticShape {
    pub flat: FlatOutputs,
    pub point: DesiredPoint,
    /// Largest endpoint miss over all segments (m).
    pub endpoint_error: f64,
    pub iterations: usize,
}

const SHAPE_TOL: f64 = 1e-12;
const SHAPE_MAX_ITER: usize = 100;

/// Hanging equilibrium with the first quadrotor at `x0` and the remaining
/// quadrotors at `targets`, all at zero yaw.
///
/// Node 0 must carry a quadrotor. The chain splits into independent
/// segments between consecutive quadrotors; each segment's outgoing tension
/// is found by damped Newton iteration on its endpoint.
pub fn solve_static_shape(params: &SystemParams, x0: Vec3, targets: &[Vec3]) -> Result<StaticShape> {
    let nodes = params.attachments();
    if nodes[0] != 0 {
        return Err(Error::InvalidScenario("static shapes need a quadrotor at node 0".into()));
    }
    if targets.len() != nodes.len() - 1 {
        return Err(Error::InvalidScenario(format!(
            "{} quadrotors after the first need {} targets, got {}",
            nodes.len() - 1,
            nodes.len() - 1,
            targets.len()
        )));
    }
    if *nodes.last().expect("nonempty") != params.n() {
        return Err(Error::InvalidScenario("the hose end must carry a quadrotor".into()));
    }
    let g = params.gravity();
    let mut from = x0;
    let mut tensions = Vec::with_capacity(targets.len());
    let mut endpoint_error: f64 = 0.0;
    let mut iterations = 0;
    for (w, target) in nodes.windows(2).zip(targets) {
        let (a, b) = (w[0], w[1]);
        let lengths: Vec<f64> = (a + 1..=b).map(|i| params.length(i)).collect();
        // weight hanging below each link of the segment (interior nodes only)
        let mut below = Vec::with_capacity(lengths.len());
        let mut acc = 0.0;
        for k in a + 1..=b {
            below.push(acc);
            if k < b {
                acc += g * params.net_mass_unchecked(k);
            }
        }
        let (t, err, it) = solve_segment(&lengths, &below, target - from)
            .map_err(|e| match e {
                Error::Unreachable(d) => Error::Unreachable(format!("nodes {a}..{b}: {d}")),
                other => other,
            })?;
        endpoint_error = endpoint_error.max(err);
        iterations = iterations.max(it);
        tensions.push(t);
        from = *target;
    }
    let flat = FlatOutputs {
        start: Vec3Primitive::constant(x0.into()),
        yaw: vec![Primitive::constant(0.0); params.n_q()],
        tensions: tensions.iter().map(|t| Vec3Primitive::constant((*t).into())).collect(),
        tethered: false,
    };
    let point = expand(params, &flat, 0.0)?;
    Ok(StaticShape { flat, point, endpoint_error, iterations })
}

/// Endpoint of a segment whose first link carries tension `t`, with the
/// Jacobian with respect to `t`.
fn segment_end(lengths: &[f64], below: &[f64], t: &Vec3) -> (Vec3, Mat3) {
    let mut end = Vec3::zeros();
    let mut jac = Mat3::zeros();
    for (l, w) in lengths.iter().zip(below) {
        let v = t + *w * e3();
        let r = v.norm();
        let u = v / r;
        end += u * *l;
        jac += (*l / r) * (Mat3::identity() - u * u.transpose());
    }
    (end, jac)
}

fn solve_segment(lengths: &[f64], below: &[f64], span: Vec3) -> Result<(Vec3, f64, usize)> {
    let total: f64 = lengths.iter().sum();
    let s = span.norm();
    if s >= total * (1.0 - 1e-9) {
        return Err(Error::Unreachable(format!(
            "span {s} m is not shorter than the segment length {total} m"
        )));
    }
    let weight = below.last().copied().unwrap_or(0.0);
    if weight <= 0.0 {
        return Err(Error::Unreachable("segment has no hanging mass to set its shape".into()));
    }
    // Start from two straight halves meeting at the midpoint sag.
    let horiz = Vec3::new(span.x, span.y, 0.0);
    let dir = if horiz.norm() > 1e-12 { horiz.normalize() } else { Vec3::x() };
    let v = 0.5 * weight;
    let h = v * horiz.norm().max(1e-3 * total) / (total * total - s * s).sqrt();
    let mut t = h * dir - v * e3() + 0.5 * span.z / total * weight * e3();

    let mut f = segment_end(lengths, below, &t).0 - span;
    for it in 0..SHAPE_MAX_ITER {
        if f.norm() <= SHAPE_TOL * total {
            return Ok((t, f.norm(), it));
        }
        let (_, jac) = segment_end(lengths, below, &t);
        let step = jac.lu().solve(&(-f)).ok_or(Error::NoConvergence {
            iterations: it,
            residual: f.norm(),
        })?;
        let mut alpha = 1.0;
        loop {
            let cand = t + alpha * step;
            let fc = segment_end(lengths, below, &cand).0 - span;
            if fc.norm() < f.norm() || alpha < 1e-6 {
                t = cand;
                f = fc;
                break;
            }
            alpha *= 0.5;
        }
    }
    if f.norm() <= 1e-9 {
        return Ok((t, f.norm(), SHAPE_MAX_ITER));
    }
    Err(Error::NoConvergence { iterations: SHAPE_MAX_ITER, residual: f.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{e1, hat};
    use crate::model::{node_positions, Quadrotor};
    use crate::presets;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn jet_orders() {
        let o = required_jet_order(5, &[0]);
        assert_eq!((o.start, o.tensions[0], o.yaw), (14, 12, 2));
        assert_eq!(required_jet_order(1, &[]).start, 6);
        assert_eq!(required_jet_order(10, &[0, 5]).tensions[1], 12);
    }

    fn hover_chain() -> SystemParams {
        SystemParams::new(
            vec![0.5, 0.5],
            vec![0.1; 3],
            vec![Quadrotor::new(2, 0.0, [0.01, 0.01, 0.02])],
            9.81,
        )
        .unwrap()
    }

    #[test]
    fn hover_with_single_quadrotor_at_the_end() {
        let p = hover_chain();
        let flat = FlatOutputs {
            start: Vec3Primitive::constant([1.0, 2.0, 3.0]),
            yaw: vec![Primitive::constant(0.0)],
            tensions: vec![],
            tethered: false,
        };
        let d = expand(&p, &flat, 0.0).unwrap();
        assert_relative_eq!(d.state.q[0], e3(), epsilon = 1e-15);
        assert_relative_eq!(d.state.q[1], e3(), epsilon = 1e-15);
        assert_relative_eq!(d.input.thrust[0], 2.943, epsilon = 1e-12);
        assert_relative_eq!(d.state.rot[0], Mat3::identity(), epsilon = 1e-15);
        assert_relative_eq!(d.tensions[1], Vec3::new(0.0, 0.0, 1.962), epsilon = 1e-12);
        assert!(residual(&p, &d).unwrap() < 1e-12);
    }

    #[test]
    fn constant_vertical_thrust_gives_level_attitude() {
        let c = 7.5;
        let a = thrust_to_attitude(
            &Vec3Jet::constant(Vec3::new(0.0, 0.0, c), 2),
            &ScalarJet::zero(2),
            &Mat3::identity(),
        )
        .unwrap();
        assert_eq!(a.rot, Mat3::identity());
        assert_eq!((a.thrust, a.ang_vel, a.moment), (c, Vec3::zeros(), Vec3::zeros()));
    }

    /// Thrust direction swinging about e2 with a smooth angle profile.
    fn swinging(t: f64) -> (Vec3Jet, ScalarJet) {
        let th = ScalarJet::new(vec![0.2 * t + 0.1 * t * t, 0.2 + 0.2 * t, 0.2]);
        let (s, c) = th.sin_cos();
        let v = Vec3Jet::from_components(&s, &ScalarJet::zero(2), &c).unwrap().scale(9.0);
        let yaw = ScalarJet::new(vec![0.3 * t, 0.3, 0.0]);
        (v, yaw)
    }

    #[test]
    fn recovered_rates_match_finite_differences() {
        let inertia = Mat3::from_diagonal(&Vec3::new(0.0557, 0.0557, 0.105));
        let at = |t: f64| {
            let (v, yaw) = swinging(t);
            thrust_to_attitude(&v, &yaw, &inertia).unwrap()
        };
        let (t, h) = (0.4, 1e-5);
        let a = at(t);
        let r_dot = (at(t + h).rot - at(t - h).rot) / (2.0 * h);
        assert_relative_eq!(r_dot, a.rot * hat(&a.ang_vel), epsilon = 1e-8);
        let om_dot = (at(t + h).ang_vel - at(t - h).ang_vel) / (2.0 * h);
        assert_relative_eq!(om_dot, a.ang_acc, epsilon = 1e-7);
        // plugging back into J Ω̇ = M − Ω × JΩ
        let back = inertia.try_inverse().unwrap()
            * (a.moment - a.ang_vel.cross(&(inertia * a.ang_vel)));
        assert_relative_eq!(back, a.ang_acc, epsilon = 1e-12);
        // pure pitch motion: body rate about body y, plus yaw
        let (v, _) = swinging(t);
        assert_relative_eq!(a.rot.column(2).into_owned(), v.value().normalize(), epsilon = 1e-14);
    }

    #[test]
    fn horizontal_thrust_along_heading_is_singular() {
        let r = thrust_to_attitude(
            &Vec3Jet::constant(e1(), 2),
            &ScalarJet::zero(2),
            &Mat3::identity(),
        );
        assert!(matches!(r, Err(Error::AttitudeSingularity(_))));
    }

    #[test]
    fn trajectory_start_satisfies_dynamics() {
        let p = presets::trajectory_params();
        let d = expand(&p, &presets::trajectory_flat_outputs(), 0.0).unwrap();
        assert_relative_eq!(d.state.x0, Vec3::new(0.0, 0.0, 1.5), epsilon = 1e-15);
        assert!(residual(&p, &d).unwrap() < 1e-6);
        let acc = dynamics::accelerations(&p, &d.state, &d.input).unwrap();
        let t = dynamics::link_tensions(&p, &d.state, &d.input, &acc).unwrap();
        for (a, b) in t.iter().zip(&d.tensions) {
            assert_relative_eq!(a, b, epsilon = 1e-6);
        }
        assert_relative_eq!(d.tensions[0], Vec3::new(2.74, 0.0, -3.27));
    }

    #[test]
    fn tethered_constant_tension_stands_vertically() {
        let p = hover_chain();
        let flat = FlatOutputs {
            start: Vec3Primitive::constant([0.0, 0.0, 4.0]),
            yaw: vec![Primitive::constant(0.0)],
            tensions: vec![],
            tethered: true,
        };
        let d = tethered_expand(&p, &flat, 1.0).unwrap();
        assert_eq!(d.state.x0, Vec3::zeros());
        for q in &d.state.q {
            assert_relative_eq!(*q, e3(), epsilon = 1e-15);
        }
        assert_relative_eq!(d.input.thrust[0], 4.0 + 0.2 * 9.81, epsilon = 1e-12);
        assert!(residual(&p, &d).unwrap() < 1e-12);
    }

    #[test]
    fn tethered_and_free_paths_agree_when_the_start_is_fixed() {
        let p = hover_chain();
        let free = FlatOutputs {
            start: Vec3Primitive::constant([0.0; 3]),
            yaw: vec![Primitive::constant(0.4)],
            tensions: vec![],
            tethered: false,
        };
        let a = expand(&p, &free, 0.0).unwrap();
        let tethered = FlatOutputs {
            start: Vec3Primitive::constant(a.tensions[0].into()),
            tethered: true,
            ..free
        };
        let b = expand(&p, &tethered, 0.0).unwrap();
        assert_eq!(a.state, b.state);
        assert_eq!(a.input, b.input);
        assert_eq!(a.tensions, b.tensions);
    }

    #[test]
    fn vanishing_tension_is_a_singularity() {
        let p = hover_chain();
        let flat = FlatOutputs {
            start: Vec3Primitive::constant([0.0; 3]),
            yaw: vec![Primitive::constant(0.0)],
            tensions: vec![],
            tethered: true,
        };
        assert!(matches!(expand(&p, &flat, 0.0), Err(Error::FlatnessSingularity { .. })));
        // Without gravity nothing loads the chain either.
        let weightless = p.with_gravity(0.0).unwrap();
        let flat = FlatOutputs { tethered: false, ..flat };
        assert!(matches!(expand(&weightless, &flat, 0.0), Err(Error::FlatnessSingularity { .. })));
    }

    #[test]
    fn flat_output_counts_are_checked() {
        let p = presets::two_quad_params();
        let mut flat = presets::trajectory_flat_outputs();
        flat.tensions.clear();
        assert!(matches!(expand(&p, &flat, 0.0), Err(Error::InvalidScenario(_))));
        let open_end = SystemParams::uniform(3, 0.1, 0.1, vec![Quadrotor::new(1, 1.0, [1.0; 3])])
            .unwrap();
        let flat = FlatOutputs {
            yaw: vec![Primitive::default()],
            tensions: vec![Vec3Primitive::constant([0.0, 0.0, 1.0])],
            ..Default::default()
        };
        assert!(matches!(expand(&open_end, &flat, 0.0), Err(Error::InvalidScenario(_))));
    }

    #[test]
    fn two_quad_static_shape_sags_symmetrically() {
        let p = presets::two_quad_params();
        let (x0, targets) = presets::two_quad_targets();
        let shape = solve_static_shape(&p, x0, &targets).unwrap();
        assert!(shape.endpoint_error < 1e-9);
        let x = node_positions(&p, &shape.point.state);
        assert_relative_eq!(x[10], targets[0], epsilon = 1e-9);
        for i in 0..=10 {
            assert_relative_eq!(x[i].x + x[10 - i].x, 0.6, epsilon = 1e-9);
            assert_relative_eq!(x[i].z, x[10 - i].z, epsilon = 1e-9);
            assert!(x[i].y.abs() < 1e-12);
        }
        assert!(x[5].z < -0.3);
        assert!(residual(&p, &shape.point).unwrap() < 1e-9);
        let thrusts = &shape.point.input.thrust;
        assert_relative_eq!(thrusts[0], thrusts[1], epsilon = 1e-9);
        // The quadrotors carry the whole weight between them.
        let lift: f64 = (0..2)
            .map(|j| shape.point.input.thrust[j] * shape.point.state.rot[j][(2, 2)])
            .sum();
        assert_relative_eq!(lift, p.total_mass() * 9.81, epsilon = 1e-9);
    }

    #[test]
    fn three_quad_static_shape_is_an_equilibrium() {
        let p = presets::three_quad_params();
        let (x0, targets) = presets::three_quad_targets();
        let shape = solve_static_shape(&p, x0, &targets).unwrap();
        assert!(shape.endpoint_error < 1e-9);
        let acc = dynamics::accelerations(&p, &shape.point.state, &shape.point.input).unwrap();
        assert!(acc.v0_dot.norm() < 1e-9);
        assert!(acc.omega_dot.iter().all(|w| w.norm() < 1e-9));
        let x = node_positions(&p, &shape.point.state);
        assert_relative_eq!(x[5], targets[0], epsilon = 1e-9);
        assert_relative_eq!(x[10], targets[1], epsilon = 1e-9);
    }

    #[test]
    fn unreachable_spans_are_rejected() {
        let p = presets::two_quad_params();
        for end in [Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 0.0, -1.0), Vec3::new(2.0, 0.0, 0.0)] {
            assert!(matches!(
                solve_static_shape(&p, Vec3::zeros(), &[end]),
                Err(Error::Unreachable(_))
            ));
        }
    }

    #[test]
    fn offset_targets_converge() {
        let p = presets::two_quad_params();
        let end = Vec3::new(0.3, -0.4, 0.35);
        let shape = solve_static_shape(&p, Vec3::new(0.0, 0.0, 0.1), &[end]).unwrap();
        let x = node_positions(&p, &shape.point.state);
        assert_relative_eq!(x[10], end, epsilon = 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn smooth_flat_outputs_satisfy_dynamics(
            amp in prop::array::uniform3(0.0..1.0f64),
            freq in prop::array::uniform3(0.05..0.3f64),
            tension in prop::array::uniform3(-1.0..1.0f64),
            yaw_rate in -0.5..0.5f64,
            t in 0.0..5.0f64,
        ) {
            let p = presets::trajectory_params();
            let prim = |i: usize| Primitive::sinusoid(amp[i], freq[i], 0.3 * i as f64);
            let flat = FlatOutputs {
                start: Vec3Primitive::new(prim(0), prim(1), prim(2)),
                yaw: vec![
                    Primitive::polynomial(vec![0.0, yaw_rate]),
                    Primitive::constant(0.2),
                ],
                tensions: vec![Vec3Primitive::constant([tension[0], tension[1], -3.0 + tension[2]])],
                tethered: false,
            };
            let d = expand(&p, &flat, t).unwrap();
            prop_assert!(residual(&p, &d).unwrap() < 1e-6);
            for (q, w) in d.state.q.iter().zip(&d.state.omega) {
                prop_assert!((q.norm() - 1.0).abs() < 1e-12);
                prop_assert!(q.dot(w).abs() < 1e-12);
            }
        }
    }
}
