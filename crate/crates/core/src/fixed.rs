//! Fixed-point accumulators for histogram statistics.
//!
//! Gradient sums are accumulated as integers so that addition is associative:
//! summing per-worker histograms in any grouping yields bit-identical totals,
//! which is what makes trained models independent of the worker count.

use std::ops::{Add, AddAssign, Neg, Sub};

use crate::oblivious::{Cond, Select};

const FRAC_BITS: u32 = 40;
const SCALE: f64 = (1u64 << FRAC_BITS) as f64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed(pub i128);

impl Fixed {
    pub const ZERO: Fixed = Fixed(0);

    /// Rounds to the nearest representable value.
    #[inline]
    pub fn from_f64(x: f64) -> Fixed {
        Fixed((x * SCALE).round() as i128)
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.0 as f64 / SCALE
    }

    /// Smallest positive representable value.
    pub fn epsilon() -> f64 {
        1.0 / SCALE
    }
}

impl Add for Fixed {
    type Output = Fixed;
    #[inline]
    fn add(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 + rhs.0)
    }
}

impl AddAssign for Fixed {
    #[inline]
    fn add_assign(&mut self, rhs: Fixed) {
        self.0 += rhs.0;
    }
}

impl Sub for Fixed {
    type Output = Fixed;
    #[inline]
    fn sub(self, rhs: Fixed) -> Fixed {
        Fixed(self.0 - rhs.0)
    }
}

impl Neg for Fixed {
    type Output = Fixed;
    #[inline]
    fn neg(self) -> Fixed {
        Fixed(-self.0)
    }
}

impl Select for Fixed {
    #[inline]
    fn select(cond: Cond, if_true: &Self, if_false: &Self) -> Self {
        Fixed(i128::select(cond, &if_true.0, &if_false.0))
    }
}
