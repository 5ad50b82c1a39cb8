//! Global-motion data augmentation: add a random full-quadratic flow field.

use rand::Rng;

use crate::flow::FlowField;
use crate::model::{render_model, ModelKind};
use crate::scalar::Scalar;

/// Half-widths of the uniform draw for each polynomial degree, in
/// normalized-coordinate units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentRanges<T> {
    pub constant: T,
    pub linear: T,
    pub quadratic: T,
}

impl<T: Scalar> Default for AugmentRanges<T> {
    fn default() -> Self {
        Self {
            constant: T::lit(2.0),
            linear: T::lit(0.5),
            quadratic: T::lit(0.25),
        }
    }
}

impl<T: Scalar> AugmentRanges<T> {
    pub fn zero() -> Self {
        Self {
            constant: T::zero(),
            linear: T::zero(),
            quadratic: T::zero(),
        }
    }

    fn for_degree(&self, degree: usize) -> T {
        match degree {
            0 => self.constant,
            1 => self.linear,
            _ => self.quadratic,
        }
    }
}

/// Draws `θ_ζ` uniformly within `ranges` and returns `(f + f_ζ, θ_ζ)`.
pub fn augment<T: Scalar, R: Rng + ?Sized>(
    f: &FlowField<T>,
    rng: &mut R,
    ranges: &AugmentRanges<T>,
) -> (FlowField<T>, Vec<T>) {
    let kind = ModelKind::FullQuadratic;
    let degrees = kind.term_degrees();
    let mut theta = Vec::with_capacity(kind.parameter_count());
    for _ in 0..2 {
        for &deg in degrees {
            let r = ranges.for_degree(deg).as_f64().abs();
            let v = if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
            theta.push(T::lit(v));
        }
    }
    if theta.iter().all(|t| t.is_zero()) {
        // keeps signed zeros and every other bit of the input intact
        return (f.clone(), theta);
    }
    let global = render_model(&theta, kind, f.dims());
    let out = f.add(&global).expect("same dimensions");
    (out, theta)
}
