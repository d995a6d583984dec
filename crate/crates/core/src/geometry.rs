//! Primitives on the two-sphere and the rotation group.
//!
//! Hose links live on S² (unit vectors) and quadrotor attitudes on SO(3).
//! Everything here is a pure function of its arguments.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Absolute tolerance on every manifold invariant.
pub const MANIFOLD_TOL: f64 = 1e-9;

/// Constructors renormalize silently below this defect and reject above it.
pub const RENORMALIZE_TOL: f64 = 1e-6;

pub fn e1() -> Vec3 {
    Vec3::x()
}

pub fn e2() -> Vec3 {
    Vec3::y()
}

pub fn e3() -> Vec3 {
    Vec3::z()
}

/// A point on S².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct UnitVector(Vec3);

impl UnitVector {
    /// Accepts `v` if its norm is within [`RENORMALIZE_TOL`] of one and
    /// renormalizes it.
    pub fn new(v: Vec3) -> Result<Self> {
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > RENORMALIZE_TOL {
            return Err(Error::InvalidState(format!(
                "unit vector has norm {norm}"
            )));
        }
        Ok(Self(v / norm))
    }

    pub fn as_vec(&self) -> &Vec3 {
        &self.0
    }

    pub fn into_inner(self) -> Vec3 {
        self.0
    }
}

impl TryFrom<Vec3> for UnitVector {
    type Error = Error;

    fn try_from(v: Vec3) -> Result<Self> {
        Self::new(v)
    }
}

impl From<UnitVector> for Vec3 {
    fn from(u: UnitVector) -> Vec3 {
        u.0
    }
}

/// A proper rotation matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct RotationMatrix(Mat3);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Mat3::identity())
    }

    /// Accepts `m` if `|mᵀm − I|` is within [`RENORMALIZE_TOL`] and `det > 0`,
    /// re-projecting it onto SO(3).
    pub fn new(m: Mat3) -> Result<Self> {
        let defect = orthonormality_defect(&m);
        if !defect.is_finite() || defect > RENORMALIZE_TOL || m.determinant() <= 0.0 {
            return Err(Error::InvalidState(format!(
                "not a rotation: |RᵀR − I| = {defect:e}, det = {}",
                m.determinant()
            )));
        }
        project_so3(&m)
    }

    pub fn as_mat(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }
}

impl TryFrom<Mat3> for RotationMatrix {
    type Error = Error;

    fn try_from(m: Mat3) -> Result<Self> {
        Self::new(m)
    }
}

impl From<RotationMatrix> for Mat3 {
    fn from(r: RotationMatrix) -> Mat3 {
        r.0
    }
}

/// Cross-product matrix: `hat(v) * w == v × w`.
pub fn hat(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects matrices whose symmetric part exceeds
/// [`MANIFOLD_TOL`].
pub fn vee(s: &Mat3) -> Result<Vec3> {
    let asym = (s + s.transpose()).norm();
    if asym > MANIFOLD_TOL {
        return Err(Error::NotAntisymmetric(asym));
    }
    Ok(vee_skew(s))
}

/// Vee of the antisymmetric part of `s`, with no check.
pub(crate) fn vee_skew(s: &Mat3) -> Vec3 {
    0.5 * Vec3::new(s[(2, 1)] - s[(1, 2)], s[(0, 2)] - s[(2, 0)], s[(1, 0)] - s[(0, 1)])
}

pub fn project_s2(v: &Vec3) -> Result<UnitVector> {
    let norm = v.norm();
    if !norm.is_finite() || norm <= 1e-12 {
        return Err(Error::Degenerate {
            op: "project_s2",
            detail: format!("norm {norm:e}"),
        });
    }
    Ok(UnitVector(v / norm))
}

/// Nearest rotation in the Frobenius sense (the orthogonal polar factor).
pub fn project_so3(m: &Mat3) -> Result<RotationMatrix> {
    if !m.iter().all(|x| x.is_finite()) {
        return Err(Error::Degenerate {
            op: "project_so3",
            detail: "non-finite entry".into(),
        });
    }
    let svd = m.svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest <= 1e-12 {
        return Err(Error::Degenerate {
            op: "project_so3",
            detail: format!("singular matrix (smallest singular value {smallest:e})"),
        });
    }
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let flip = Mat3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        r = u * flip * v_t;
    }
    Ok(RotationMatrix(r))
}

/// `|RᵀR − I|` (Frobenius).
pub fn orthonormality_defect(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

/// Ψ_q = 1 − q_dᵀq.
pub fn s2_config_error(q_d: &Vec3, q: &Vec3) -> f64 {
    1.0 - q_d.dot(q)
}

/// Ψ_R = ½ tr(I − R_dᵀR).
pub fn so3_config_error(r_d: &Mat3, r: &Mat3) -> f64 {
    0.5 * (Mat3::identity() - r_d.transpose() * r).trace()
}

/// ξ = q̂_d q.
pub fn s2_error_vector(q_d: &Vec3, q: &Vec3) -> Vec3 {
    q_d.cross(q)
}

/// η = ½ (R_dᵀR − RᵀR_d)^∨.
pub fn so3_error_vector(r_d: &Mat3, r: &Mat3) -> Vec3 {
    let a = r_d.transpose() * r;
    vee_skew(&a)
}

/// Rodrigues' formula for exp(hat(w)).
pub fn exp_so3(w: &Vec3) -> Mat3 {
    let theta = w.norm();
    let k = hat(w);
    if theta < 1e-8 {
        return Mat3::identity() + k + 0.5 * k * k;
    }
    Mat3::identity() + (theta.sin() / theta) * k + ((1.0 - theta.cos()) / (theta * theta)) * k * k
}

/// Rotates `v` by angle `theta` about the unit `axis`.
pub fn rotate(v: &Vec3, axis: &Vec3, theta: f64) -> Vec3 {
    exp_so3(&(axis.normalize() * theta)) * v
}

/// Some unit vector orthogonal to `v`.
pub fn any_orthogonal(v: &Vec3) -> Vec3 {
    let candidate = if v.x.abs() < 0.9 { e1() } else { e2() };
    v.cross(&candidate).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn vec3() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-5.0..5.0f64).prop_map(Vec3::from)
    }

    #[test]
    fn hat_basis_and_self() {
        assert_eq!(hat(&e1()) * e2(), e3());
        let v = Vec3::new(0.3, -1.2, 2.0);
        assert_eq!(hat(&v) * v, Vec3::zeros());
    }

    #[test]
    fn hat_numeric() {
        let r = hat(&Vec3::new(1.0, 2.0, 3.0)) * Vec3::new(4.0, 5.0, 6.0);
        assert_eq!(r, Vec3::new(-3.0, 6.0, -3.0));
    }

    #[test]
    fn vee_cases() {
        assert_eq!(vee(&hat(&Vec3::new(1.0, 2.0, 3.0))).unwrap(), Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(vee(&Mat3::zeros()).unwrap(), Vec3::zeros());
        assert_eq!(vee(&hat(&e3())).unwrap(), e3());
    }

    #[test]
    fn vee_rejects_symmetric_part() {
        let mut s = hat(&e1());
        s[(0, 1)] += 1e-6;
        assert!(matches!(vee(&s), Err(Error::NotAntisymmetric(_))));
    }

    #[test]
    fn project_s2_scales() {
        let u = project_s2(&Vec3::new(0.0, 0.0, -2.0)).unwrap();
        assert_eq!(*u.as_vec(), -e3());
        assert!(project_s2(&Vec3::zeros()).is_err());
    }

    #[test]
    fn project_so3_fixed_point_and_perturbation() {
        let r = exp_so3(&Vec3::new(0.4, -1.1, 0.7));
        let p = project_so3(&r).unwrap();
        assert_relative_eq!(*p.as_mat(), r, epsilon = 1e-12);

        let e = Mat3::new(0.3, -0.8, 0.1, 0.5, 0.2, -0.9, 0.7, 0.4, 0.6);
        let p = project_so3(&(r + 1e-6 * e)).unwrap();
        assert!((p.as_mat() - r).norm() < 1e-5);
        assert!(orthonormality_defect(p.as_mat()) < 1e-12);
        assert!(project_so3(&Mat3::zeros()).is_err());
    }

    #[test]
    fn config_errors() {
        let q = Vec3::new(0.0, 0.6, 0.8);
        assert_eq!(s2_config_error(&q, &q), 0.0);
        assert_relative_eq!(s2_config_error(&e3(), &e1()), 1.0);
        assert_relative_eq!(s2_config_error(&q, &-q), 2.0);

        let r_d = exp_so3(&Vec3::new(0.1, 0.2, 0.3));
        assert_relative_eq!(so3_config_error(&r_d, &r_d), 0.0, epsilon = 1e-15);
        let half_turn = r_d * exp_so3(&(PI * e1()));
        assert_relative_eq!(so3_config_error(&r_d, &half_turn), 2.0, epsilon = 1e-12);
        let quarter = r_d * exp_so3(&(FRAC_PI_2 * e2()));
        assert_relative_eq!(so3_config_error(&r_d, &quarter), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn error_vectors() {
        let q = Vec3::new(0.0, 0.6, 0.8);
        assert_eq!(s2_error_vector(&q, &q), Vec3::zeros());
        assert_eq!(s2_error_vector(&e3(), &e1()), e2());

        let theta = 0.3;
        let axis = any_orthogonal(&q);
        let rotated = rotate(&q, &axis, theta);
        assert_relative_eq!(s2_error_vector(&q, &rotated), theta.sin() * axis, epsilon = 1e-14);

        let r_d = exp_so3(&Vec3::new(-0.5, 0.2, 0.9));
        let a = Vec3::new(1.0, 2.0, -2.0).normalize();
        let r = r_d * exp_so3(&(theta * a));
        assert_relative_eq!(so3_error_vector(&r_d, &r), theta.sin() * a, epsilon = 1e-14);
        assert_eq!(so3_error_vector(&r_d, &r_d), Vec3::zeros());
    }

    #[test]
    fn constructors_renormalize_or_reject() {
        let u = UnitVector::new(Vec3::new(0.0, 0.0, 1.0 + 1e-7)).unwrap();
        assert!((u.as_vec().norm() - 1.0).abs() < 1e-15);
        assert!(UnitVector::new(Vec3::new(0.0, 0.0, 1.1)).is_err());
        let r = RotationMatrix::new(Mat3::identity() * (1.0 + 1e-8)).unwrap();
        assert!(orthonormality_defect(r.as_mat()) < 1e-12);
        assert!(RotationMatrix::new(-Mat3::identity()).is_err());
    }

    proptest! {
        #[test]
        fn hat_is_cross_product(v in vec3(), w in vec3()) {
            prop_assert!((hat(&v) * w - v.cross(&w)).norm() < 1e-12);
            prop_assert!((hat(&v) + hat(&v).transpose()).norm() == 0.0);
            prop_assert_eq!(vee(&hat(&v)).unwrap(), v);
        }

        #[test]
        fn projections_are_idempotent(v in vec3(), w in vec3()) {
            prop_assume!(v.norm() > 1e-3);
            let p = project_s2(&v).unwrap();
            let pp = project_s2(p.as_vec()).unwrap();
            prop_assert!((p.as_vec() - pp.as_vec()).norm() < 1e-15);

            let m = exp_so3(&w) + Mat3::identity() * 0.1;
            prop_assume!(m.determinant().abs() > 1e-3);
            let r = project_so3(&m).unwrap();
            let rr = project_so3(r.as_mat()).unwrap();
            prop_assert!((r.as_mat() - rr.as_mat()).norm() < 1e-12);
            prop_assert!(orthonormality_defect(r.as_mat()) < MANIFOLD_TOL);
        }

        #[test]
        fn s2_error_is_half_squared_distance(v in vec3(), w in vec3()) {
            prop_assume!(v.norm() > 1e-3 && w.norm() > 1e-3);
            let a = v.normalize();
            let b = w.normalize();
            let lhs = s2_config_error(&a, &b);
            prop_assert!((lhs - 0.5 * (b - a).norm_squared()).abs() < 1e-12);
            prop_assert!((-1e-15..=2.0 + 1e-15).contains(&lhs));
            prop_assert!(s2_error_vector(&a, &b).dot(&a).abs() < 1e-12);
        }
    }
}
