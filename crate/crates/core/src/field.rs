//! Scalar data on the domain (targets, bounds, shifts) and region predicates.

use serde::{Deserialize, Serialize};

use crate::mesh::Point;

/// A scalar function of position.
///
/// Only closed-form families are representable so that problem data can be
/// round-tripped through configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Constant { value: f64 },
    /// `offset + grad · x`
    Affine { offset: f64, grad: [f64; 3] },
    /// `|x|²`
    SquaredNorm,
    /// `above` where `x[axis] > threshold`, `below` elsewhere.
    Step {
        axis: usize,
        threshold: f64,
        below: f64,
        above: f64,
    },
}

impl ScalarFn {
    pub const fn constant(value: f64) -> Self {
        ScalarFn::Constant { value }
    }

    pub fn eval(&self, x: &Point) -> f64 {
        match *self {
            ScalarFn::Constant { value } => value,
            ScalarFn::Affine { offset, grad } => {
                offset + grad[0] * x[0] + grad[1] * x[1] + grad[2] * x[2]
            }
            ScalarFn::SquaredNorm => x[0] * x[0] + x[1] * x[1] + x[2] * x[2],
            ScalarFn::Step {
                axis,
                threshold,
                below,
                above,
            } => {
                if x[axis] > threshold {
                    above
                } else {
                    below
                }
            }
        }
    }

    /// True when the function lies in the P1 space of every mesh.
    pub fn is_affine(&self) -> bool {
        matches!(self, ScalarFn::Constant { .. } | ScalarFn::Affine { .. })
    }

    /// The hyperplane `x[axis] = t` across which the function jumps, if any.
    pub fn discontinuity(&self) -> Option<(usize, f64)> {
        match *self {
            ScalarFn::Step {
                axis, threshold, ..
            } => Some((axis, threshold)),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ScalarFn::Constant { value } if *value == 0.0)
    }
}

/// Closed region used for state constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Region {
    /// Closed ball `|x - center| <= radius`.
    Ball { center: [f64; 3], radius: f64 },
}

impl Region {
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            Region::Ball { center, radius } => {
                let d2 = (x[0] - center[0]).powi(2)
                    + (x[1] - center[1]).powi(2)
                    + (x[2] - center[2]).powi(2);
                d2 <= radius * radius
            }
        }
    }

    /// Signed distance to the region boundary (negative inside).
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            Region::Ball { center, radius } => {
                let d = ((x[0] - center[0]).powi(2)
                    + (x[1] - center[1]).powi(2)
                    + (x[2] - center[2]).powi(2))
                .sqrt();
                d - radius
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_takes_below_value_on_threshold() {
        let f = ScalarFn::Step {
            axis: 0,
            threshold: 0.25,
            below: -1.0,
            above: 1.0,
        };
        assert_eq!(f.eval(&[0.25, 0.0, 0.0]), -1.0);
        assert_eq!(f.eval(&[0.26, 0.0, 0.0]), 1.0);
        assert_eq!(f.discontinuity(), Some((0, 0.25)));
    }

    #[test]
    fn ball_is_closed() {
        let r = Region::Ball {
            center: [0.0, 0.0, 0.0],
            radius: 0.5,
        };
        assert!(r.contains(&[0.5, 0.0, 0.0]));
        assert!(!r.contains(&[0.5, 0.01, 0.0]));
    }
}
