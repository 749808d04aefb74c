//! Scalar abstraction for the closed-form reliability math.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the analytical routines are generic over.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Send + Sync + 'static {
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }

    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("representable count")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Compensated (Kahan) running sum.
#[derive(Clone, Copy, Debug)]
pub struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> Default for KahanSum<T> {
    fn default() -> Self {
        Self {
            sum: T::zero(),
            carry: T::zero(),
        }
    }
}

impl<T: Real> KahanSum<T> {
    pub fn add(&mut self, x: T) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    pub fn value(&self) -> T {
        self.sum
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kahan_beats_naive_on_small_terms() {
        let mut k = KahanSum::<f32>::default();
        let mut naive = 0f32;
        k.add(1.0);
        naive += 1.0;
        for _ in 0..10_000 {
            k.add(1e-8);
            naive += 1e-8;
        }
        assert_eq!(naive, 1.0);
        assert!((k.value() - 1.0001).abs() < 1e-6);
    }
}
