//! Compensated accumulation.
//!
//! Large reductions (lower bounds, Gram matrices) are accumulated with
//! Neumaier's variant of Kahan summation so results do not depend on how a
//! site range is split.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum<T> {
    sum: T,
    comp: T,
}

impl<T: Scalar> NeumaierSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
        }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Scalar> FromIterator<T> for NeumaierSum<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        let mut acc = Self::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn neumaier_sum<T: Scalar, I: IntoIterator<Item = T>>(iter: I) -> T {
    iter.into_iter().collect::<NeumaierSum<T>>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_terms() {
        let xs = [1.0f64, 1e100, 1.0, -1e100];
        assert_eq!(neumaier_sum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn order_independent_for_many_small_terms() {
        let xs: Vec<f64> = (0..10_000).map(|i| 0.1 + (i as f64) * 1e-7).collect();
        let fwd = neumaier_sum(xs.iter().copied());
        let rev = neumaier_sum(xs.iter().rev().copied());
        assert!((fwd - rev).abs() <= 1e-12);
    }
}
