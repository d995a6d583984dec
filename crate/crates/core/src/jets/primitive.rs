//! Closed-form time functions with exact derivatives.
//!
//! Flat-output trajectories are sums of these terms, so their jets are
//! exact at any order instead of being differentiated numerically.

use std::f64::consts::{FRAC_PI_2, TAU};

use serde::{Deserialize, Serialize};

use super::{ScalarJet, Vec3Jet};
use crate::error::Result;

/// One additive term of a scalar time function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    Constant { value: f64 },
    /// `Σ cᵢ tⁱ`, lowest degree first.
    Polynomial { coefficients: Vec<f64> },
    /// `A sin(2π f t + φ)` with `f` in Hz and `φ` in radians.
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

impl Term {
    /// k-th time derivative at `t`.
    pub fn derivative_at(&self, t: f64, k: usize) -> f64 {
        match self {
            Term::Constant { value } => {
                if k == 0 {
                    *value
                } else {
                    0.0
                }
            }
            Term::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(k)
                .map(|(i, c)| {
                    // i! / (i-k)! as a falling factorial
                    let falling: f64 = ((i - k + 1)..=i).map(|m| m as f64).product();
                    c * falling * t.powi((i - k) as i32)
                })
                .sum(),
            Term::Sinusoid { amplitude, frequency, phase } => {
                let w = TAU * frequency;
                amplitude * w.powi(k as i32) * (w * t + phase + k as f64 * FRAC_PI_2).sin()
            }
        }
    }
}

/// Scalar time function: the sum of its terms. An empty sum is zero.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Primitive(pub Vec<Term>);

impl Primitive {
    pub fn constant(value: f64) -> Self {
        Self(vec![Term::Constant { value }])
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self(vec![Term::Polynomial { coefficients }])
    }

    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self(vec![Term::Sinusoid { amplitude, frequency, phase }])
    }

    /// Appends a term.
    pub fn plus(mut self, term: Term) -> Self {
        self.0.push(term);
        self
    }

    pub fn derivative_at(&self, t: f64, k: usize) -> f64 {
        self.0.iter().map(|term| term.derivative_at(t, k)).sum()
    }

    pub fn sample(&self, t: f64, order: usize) -> ScalarJet {
        ScalarJet::new((0..=order).map(|k| self.derivative_at(t, k)).collect())
    }
}

/// Vector time function, one primitive per axis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3Primitive {
    #[serde(default)]
    pub x: Primitive,
    #[serde(default)]
    pub y: Primitive,
    #[serde(default)]
    pub z: Primitive,
}

impl Vec3Primitive {
    pub fn new(x: Primitive, y: Primitive, z: Primitive) -> Self {
        Self { x, y, z }
    }

    pub fn constant(v: [f64; 3]) -> Self {
        Self::new(Primitive::constant(v[0]), Primitive::constant(v[1]), Primitive::constant(v[2]))
    }

    pub fn sample(&self, t: f64, order: usize) -> Result<Vec3Jet> {
        Vec3Jet::from_components(
            &self.x.sample(t, order),
            &self.y.sample(t, order),
            &self.z.sample(t, order),
        )
    }
}
