//! Truncated Taylor arithmetic.
//!
//! A jet of order `K` holds a function's value together with its first `K`
//! time derivatives at one instant. Coefficients are the raw derivatives
//! `f⁽ᵏ⁾(t)`, not divided by `k!`, so products carry binomial weights
//! (Leibniz rule) instead of plain convolutions.
//!
//! Binary operations require equal orders. Use [`ScalarJet::truncate`] or
//! [`Vec3Jet::truncate`] to drop derivatives explicitly; nothing is
//! truncated implicitly.

mod primitive;

pub use primitive::{Primitive, Term, Vec3Primitive};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Binomial coefficients `C(k, 0..=k)`.
fn pascal_row(k: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(k + 1);
    let mut c = 1.0;
    row.push(c);
    for j in 0..k {
        c = c * (k - j) as f64 / (j + 1) as f64;
        row.push(c);
    }
    row
}

fn check_orders(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::OrderMismatch { left, right });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarJet {
    coeffs: Vec<f64>,
}

impl ScalarJet {
    /// Builds a jet from raw derivatives `[f, f', f'', ...]`.
    ///
    /// Panics if `coeffs` is empty.
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least its value");
        Self { coeffs }
    }

    pub fn constant(value: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(0.0, order)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// k-th derivative. Panics if `k > order`.
    pub fn get(&self, k: usize) -> f64 {
        self.coeffs[k]
    }

    /// Jet of the derivative: drops the value and shifts every coefficient
    /// down by one slot.
    pub fn derivative(&self) -> Result<Self> {
        if self.order() == 0 {
            return Err(Error::OrderMismatch { left: 0, right: 1 });
        }
        Ok(Self { coeffs: self.coeffs[1..].to_vec() })
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::OrderMismatch { left: self.order(), right: order });
        }
        Ok(Self { coeffs: self.coeffs[..=order].to_vec() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_orders(self.order(), other.order())?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_orders(self.order(), other.order())?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    /// Leibniz product: `(ab)⁽ᵏ⁾ = Σⱼ C(k,j) a⁽ʲ⁾ b⁽ᵏ⁻ʲ⁾`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        check_orders(self.order(), other.order())?;
        let coeffs = (0..=self.order())
            .map(|k| {
                pascal_row(k)
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.coeffs[j] * other.coeffs[k - j])
                    .sum()
            })
            .collect();
        Ok(Self { coeffs })
    }

    /// Square root via `r² = s`, solved order by order.
    pub fn sqrt(&self) -> Result<Self> {
        let s0 = self.value();
        if !(s0 > 0.0) {
            return Err(Error::Degenerate { op: "jet sqrt", detail: format!("value {s0:e}") });
        }
        let mut r = vec![0.0; self.coeffs.len()];
        r[0] = s0.sqrt();
        for k in 1..r.len() {
            let row = pascal_row(k);
            let cross: f64 = (1..k).map(|j| row[j] * r[j] * r[k - j]).sum();
            r[k] = (self.coeffs[k] - cross) / (2.0 * r[0]);
        }
        Ok(Self { coeffs: r })
    }

    /// Quotient `self / den` via `self = q · den`, solved order by order.
    pub fn div(&self, den: &Self) -> Result<Self> {
        check_orders(self.order(), den.order())?;
        let d0 = den.value();
        if d0 == 0.0 || !d0.is_finite() {
            return Err(Error::Degenerate { op: "jet div", detail: format!("denominator {d0:e}") });
        }
        let mut q = vec![0.0; self.coeffs.len()];
        for k in 0..q.len() {
            let row = pascal_row(k);
            let known: f64 = (0..k).map(|j| row[j] * q[j] * den.coeffs[k - j]).sum();
            q[k] = (self.coeffs[k] - known) / d0;
        }
        Ok(Self { coeffs: q })
    }

    /// Jets of `(sin f, cos f)`, from `(sin f)' = cos f · f'` and
    /// `(cos f)' = −sin f · f'`.
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.coeffs.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.value().sin();
        c[0] = self.value().cos();
        for k in 0..n - 1 {
            let row = pascal_row(k);
            let mut ds = 0.0;
            let mut dc = 0.0;
            for j in 0..=k {
                ds += row[j] * c[j] * self.coeffs[k - j + 1];
                dc -= row[j] * s[j] * self.coeffs[k - j + 1];
            }
            s[k + 1] = ds;
            c[k + 1] = dc;
        }
        (Self { coeffs: s }, Self { coeffs: c })
    }
}

/// Jet of a vector-valued function: one coefficient vector per derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec3Jet {
    coeffs: Vec<Vec3>,
}

impl Vec3Jet {
    /// Panics if `coeffs` is empty.
    pub fn new(coeffs: Vec<Vec3>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least its value");
        Self { coeffs }
    }

    pub fn constant(value: Vec3, order: usize) -> Self {
        let mut coeffs = vec![Vec3::zeros(); order + 1];
        coeffs[0] = value;
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::constant(Vec3::zeros(), order)
    }

    pub fn from_components(x: &ScalarJet, y: &ScalarJet, z: &ScalarJet) -> Result<Self> {
        check_orders(x.order(), y.order())?;
        check_orders(x.order(), z.order())?;
        let coeffs = (0..=x.order()).map(|k| Vec3::new(x.get(k), y.get(k), z.get(k))).collect();
        Ok(Self { coeffs })
    }

    pub fn component(&self, axis: usize) -> ScalarJet {
        ScalarJet::new(self.coeffs.iter().map(|c| c[axis]).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn value(&self) -> Vec3 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[Vec3] {
        &self.coeffs
    }

    /// k-th derivative. Panics if `k > order`.
    pub fn get(&self, k: usize) -> Vec3 {
        self.coeffs[k]
    }

    pub fn derivative(&self) -> Result<Self> {
        if self.order() == 0 {
            return Err(Error::OrderMismatch { left: 0, right: 1 });
        }
        Ok(Self { coeffs: self.coeffs[1..].to_vec() })
    }

    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::OrderMismatch { left: self.order(), right: order });
        }
        Ok(Self { coeffs: self.coeffs[..=order].to_vec() })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_orders(self.order(), other.order())?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_orders(self.order(), other.order())?;
        Ok(Self { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    /// Adds a constant vector to the value coefficient.
    pub fn offset(&self, v: &Vec3) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += v;
        out
    }

    /// Product with a scalar jet.
    pub fn mul_scalar(&self, s: &ScalarJet) -> Result<Self> {
        self.bilinear(s.order(), |j, k| self.coeffs[j] * s.get(k))
    }

    pub fn dot(&self, other: &Self) -> Result<ScalarJet> {
        check_orders(self.order(), other.order())?;
        let coeffs = (0..=self.order())
            .map(|k| {
                pascal_row(k)
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * self.coeffs[j].dot(&other.coeffs[k - j]))
                    .sum()
            })
            .collect();
        Ok(ScalarJet::new(coeffs))
    }

    pub fn cross(&self, other: &Self) -> Result<Self> {
        self.bilinear(other.order(), |j, k| self.coeffs[j].cross(&other.coeffs[k]))
    }

    fn bilinear(&self, other_order: usize, f: impl Fn(usize, usize) -> Vec3) -> Result<Self> {
        check_orders(self.order(), other_order)?;
        let coeffs = (0..=self.order())
            .map(|k| {
                pascal_row(k)
                    .iter()
                    .enumerate()
                    .fold(Vec3::zeros(), |acc, (j, c)| acc + *c * f(j, k - j))
            })
            .collect();
        Ok(Self { coeffs })
    }

    pub fn norm_squared(&self) -> ScalarJet {
        self.dot(self).expect("same order")
    }

    pub fn norm(&self) -> Result<ScalarJet> {
        let s = self.norm_squared();
        if s.value().sqrt() <= 1e-9 {
            return Err(Error::DegenerateTension(s.value().sqrt()));
        }
        s.sqrt()
    }

    /// `a / ‖a‖`, via the square-root and quotient recurrences.
    pub fn normalize(&self) -> Result<Self> {
        let r = self.norm()?;
        let one = ScalarJet::constant(1.0, self.order());
        self.mul_scalar(&one.div(&r)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Analytic derivatives of t ↦ (cos t, sin t, 0) at `t`.
    fn circle(t: f64, order: usize) -> Vec3Jet {
        Vec3Jet::new(
            (0..=order)
                .map(|k| {
                    let phase = t + k as f64 * std::f64::consts::FRAC_PI_2;
                    Vec3::new(phase.cos(), phase.sin(), 0.0)
                })
                .collect(),
        )
    }

    #[test]
    fn product_of_identity_jets() {
        let t = ScalarJet::new(vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(t.mul(&t).unwrap().coeffs(), &[1.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn product_identity_and_annihilator() {
        let a = ScalarJet::new(vec![0.3, -1.0, 2.5, 7.0]);
        assert_eq!(a.mul(&ScalarJet::constant(1.0, 3)).unwrap(), a);
        assert_eq!(a.mul(&ScalarJet::zero(3)).unwrap(), ScalarJet::zero(3));
    }

    #[test]
    fn order_mismatch_is_an_error() {
        let a = ScalarJet::zero(3);
        let b = ScalarJet::zero(2);
        assert!(matches!(a.mul(&b), Err(Error::OrderMismatch { left: 3, right: 2 })));
        assert!(Vec3Jet::zero(1).cross(&Vec3Jet::zero(2)).is_err());
    }

    #[test]
    fn cross_cases() {
        let a = circle(0.4, 4);
        assert_eq!(a.cross(&a).unwrap(), Vec3Jet::zero(4));
        let x = Vec3Jet::constant(Vec3::x(), 2);
        let y = Vec3Jet::constant(Vec3::y(), 2);
        assert_eq!(x.cross(&y).unwrap(), Vec3Jet::constant(Vec3::z(), 2));

        // c(t) × c'(t) = e3 for the unit circle, so every derivative beyond
        // the value vanishes.
        let c = circle(0.0, 5);
        let dc = circle(0.0, 6).derivative().unwrap();
        let cross = c.cross(&dc).unwrap();
        for k in 0..=5 {
            let expected = if k == 0 { Vec3::z() } else { Vec3::zeros() };
            assert_relative_eq!(cross.get(k), expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_constant_tension() {
        let t = Vec3Jet::constant(Vec3::new(2.74, 0.0, -3.27), 3);
        let n = t.normalize().unwrap();
        let norm = (2.74f64.powi(2) + 3.27f64.powi(2)).sqrt();
        assert_relative_eq!(n.value(), Vec3::new(2.74 / norm, 0.0, -3.27 / norm), epsilon = 1e-15);
        assert_relative_eq!(n.value().x, 0.6423, epsilon = 1e-4);
        assert_relative_eq!(n.value().z, -0.7664, epsilon = 1e-4);
        for k in 1..=3 {
            assert_eq!(n.get(k), Vec3::zeros());
        }
    }

    #[test]
    fn normalize_unit_circle_is_identity() {
        let c = circle(0.7, 8);
        let n = c.normalize().unwrap();
        for k in 0..=8 {
            assert_relative_eq!(n.get(k), c.get(k), epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(matches!(Vec3Jet::zero(2).normalize(), Err(Error::DegenerateTension(_))));
    }

    #[test]
    fn sin_cos_of_linear_jet() {
        let theta = ScalarJet::new(vec![0.3, 2.0, 0.0, 0.0, 0.0]);
        let (s, c) = theta.sin_cos();
        for k in 0..=4 {
            let phase = 0.3 + k as f64 * std::f64::consts::FRAC_PI_2;
            assert_relative_eq!(s.get(k), 2f64.powi(k as i32) * phase.sin(), epsilon = 1e-12);
            assert_relative_eq!(c.get(k), 2f64.powi(k as i32) * phase.cos(), epsilon = 1e-12);
        }
    }

    /// Polynomials have exact hand derivatives: f = 1 + 2t + t³, g = 3 − t².
    #[test]
    fn quotient_and_sqrt_against_analytic() {
        let t = 0.8;
        let f = |t: f64| [1.0 + 2.0 * t + t.powi(3), 2.0 + 3.0 * t * t, 6.0 * t, 6.0, 0.0];
        let g = |t: f64| [3.0 - t * t, -2.0 * t, -2.0, 0.0, 0.0];
        let fj = ScalarJet::new(f(t).to_vec());
        let gj = ScalarJet::new(g(t).to_vec());
        // Product then quotient recovers f.
        let h = fj.mul(&gj).unwrap();
        let back = h.div(&gj).unwrap();
        for k in 0..=4 {
            assert_relative_eq!(back.get(k), fj.get(k), epsilon = 1e-10);
        }
        // sqrt(f²) = f where f > 0.
        let root = fj.mul(&fj).unwrap().sqrt().unwrap();
        for k in 0..=4 {
            assert_relative_eq!(root.get(k), fj.get(k), epsilon = 1e-10);
        }
    }

    fn jet(order: usize) -> impl Strategy<Value = Vec3Jet> {
        prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), order + 1)
            .prop_map(|v| Vec3Jet::new(v.into_iter().map(Vec3::from).collect()))
    }

    proptest! {
        #[test]
        fn normalized_jets_have_unit_norm_at_every_order(mut a in jet(10)) {
            a.coeffs[0] += Vec3::new(4.0, 0.0, 0.0);
            let n = a.normalize().unwrap();
            let d = n.dot(&n).unwrap();
            prop_assert!((d.value() - 1.0).abs() < 1e-12);
            for k in 1..=10 {
                prop_assert!(d.get(k).abs() < 1e-9 * (1.0 + a.get(k).norm()).powi(k as i32));
            }
        }

        #[test]
        fn scalar_product_matches_componentwise_dot(a in jet(6), b in jet(6)) {
            let via_components = (0..3)
                .map(|i| a.component(i).mul(&b.component(i)).unwrap())
                .reduce(|x, y| x.add(&y).unwrap())
                .unwrap();
            let d = a.dot(&b).unwrap();
            for k in 0..=6 {
                prop_assert!((d.get(k) - via_components.get(k)).abs() < 1e-9 * (1.0 + d.get(k).abs()));
            }
        }
    }
}
