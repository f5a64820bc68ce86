//! Branch-free scalar primitives.
//!
//! Every function here runs the same instruction sequence regardless of its
//! operand values: comparisons are computed with integer arithmetic on an
//! order-preserving `u64` image of the operands, and selection is done with
//! bit masks.

use std::hint::black_box;
use std::ops::{BitAnd, BitOr, Not};

/// A secret boolean held as a full machine word (0 or 1).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cond(u64);

impl Cond {
    pub const TRUE: Cond = Cond(1);
    pub const FALSE: Cond = Cond(0);

    #[inline]
    pub fn from_bit(bit: u64) -> Cond {
        debug_assert!(bit <= 1, "condition word must be 0 or 1, got {bit}");
        Cond(bit)
    }

    /// Converts a *public* boolean. Never call this on a secret-derived `bool`.
    #[inline]
    pub fn public(b: bool) -> Cond {
        Cond(b as u64)
    }

    #[inline]
    pub fn bit(self) -> u64 {
        self.0
    }

    /// All-ones when true, all-zeros when false.
    #[inline]
    pub fn mask(self) -> u64 {
        black_box(0u64.wrapping_sub(self.0))
    }

    /// Reveals the condition. Only for results that are public by contract
    /// (tests, final outputs).
    #[inline]
    pub fn declassify(self) -> bool {
        self.0 == 1
    }
}

impl Not for Cond {
    type Output = Cond;
    #[inline]
    fn not(self) -> Cond {
        Cond(self.0 ^ 1)
    }
}

impl BitAnd for Cond {
    type Output = Cond;
    #[inline]
    fn bitand(self, rhs: Cond) -> Cond {
        Cond(self.0 & rhs.0)
    }
}

impl BitOr for Cond {
    type Output = Cond;
    #[inline]
    fn bitor(self, rhs: Cond) -> Cond {
        Cond(self.0 | rhs.0)
    }
}

/// Fixed-width scalar that can take part in oblivious comparison and
/// selection.
pub trait Word: Copy {
    fn to_bits(self) -> u64;
    fn from_bits(bits: u64) -> Self;
    /// Order-preserving image: `a < b` iff `a.order_key() < b.order_key()`.
    fn order_key(self) -> u64;
}

macro_rules! unsigned_word {
    ($($t:ty),*) => {$(
        impl Word for $t {
            #[inline]
            fn to_bits(self) -> u64 { self as u64 }
            #[inline]
            fn from_bits(bits: u64) -> Self { bits as $t }
            #[inline]
            fn order_key(self) -> u64 { self as u64 }
        }
    )*};
}

macro_rules! signed_word {
    ($($t:ty),*) => {$(
        impl Word for $t {
            #[inline]
            fn to_bits(self) -> u64 { self as i64 as u64 }
            #[inline]
            fn from_bits(bits: u64) -> Self { bits as i64 as $t }
            #[inline]
            fn order_key(self) -> u64 { (self as i64 as u64) ^ (1 << 63) }
        }
    )*};
}

unsigned_word!(u8, u16, u32, u64, usize);
signed_word!(i8, i16, i32, i64);

impl Word for f64 {
    #[inline]
    fn to_bits(self) -> u64 {
        f64::to_bits(self)
    }
    #[inline]
    fn from_bits(bits: u64) -> Self {
        f64::from_bits(bits)
    }
    #[inline]
    fn order_key(self) -> u64 {
        // +0.0 folds -0.0 onto +0.0 so both compare equal.
        let bits = f64::to_bits(self + 0.0);
        let sign = ((bits as i64) >> 63) as u64;
        bits ^ (sign | (1 << 63))
    }
}

#[inline]
fn lt_u64(a: u64, b: u64) -> u64 {
    ((!a & b) | ((!a | b) & a.wrapping_sub(b))) >> 63
}

#[inline]
fn eq_u64(a: u64, b: u64) -> u64 {
    let x = a ^ b;
    ((x | x.wrapping_neg()) >> 63) ^ 1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompareMode {
    Less,
    Greater,
    Equal,
}

/// `mode` is public; only the operands are secret.
#[inline]
pub fn ocompare<W: Word>(a: W, b: W, mode: CompareMode) -> Cond {
    match mode {
        CompareMode::Less => oless(a, b),
        CompareMode::Greater => ogreater(a, b),
        CompareMode::Equal => oequal(a, b),
    }
}

#[inline]
pub fn oless<W: Word>(a: W, b: W) -> Cond {
    Cond(lt_u64(a.order_key(), b.order_key()))
}

#[inline]
pub fn ogreater<W: Word>(a: W, b: W) -> Cond {
    Cond(lt_u64(b.order_key(), a.order_key()))
}

#[inline]
pub fn oequal<W: Word>(a: W, b: W) -> Cond {
    Cond(eq_u64(a.order_key(), b.order_key()))
}

#[inline]
pub fn oassign<W: Word>(cond: Cond, if_true: W, if_false: W) -> W {
    let m = cond.mask();
    W::from_bits((if_true.to_bits() & m) | (if_false.to_bits() & !m))
}

/// Branch-free minimum of two words.
#[inline]
pub fn omin<W: Word>(a: W, b: W) -> W {
    oassign(oless(a, b), a, b)
}

/// Branch-free maximum of two words.
#[inline]
pub fn omax<W: Word>(a: W, b: W) -> W {
    oassign(ogreater(a, b), a, b)
}

/// Conditional selection for composite values, applied field by field.
pub trait Select: Copy {
    fn select(cond: Cond, if_true: &Self, if_false: &Self) -> Self;
}

macro_rules! word_select {
    ($($t:ty),*) => {$(
        impl Select for $t {
            #[inline]
            fn select(cond: Cond, if_true: &Self, if_false: &Self) -> Self {
                oassign(cond, *if_true, *if_false)
            }
        }
    )*};
}

word_select!(u8, u16, u32, u64, usize, i8, i16, i32, i64, f64);

impl Select for i128 {
    #[inline]
    fn select(cond: Cond, if_true: &Self, if_false: &Self) -> Self {
        let m = (cond.mask() as i64 as i128) as u128;
        ((*if_true as u128 & m) | (*if_false as u128 & !m)) as i128
    }
}

impl<A: Select, B: Select> Select for (A, B) {
    #[inline]
    fn select(cond: Cond, t: &Self, f: &Self) -> Self {
        (A::select(cond, &t.0, &f.0), B::select(cond, &t.1, &f.1))
    }
}

/// Swaps `a` and `b` when `cond` holds; both are rewritten either way.
#[inline]
pub fn ocswap<T: Select>(cond: Cond, a: &mut T, b: &mut T) {
    let na = T::select(cond, b, a);
    let nb = T::select(cond, a, b);
    *a = na;
    *b = nb;
}

/// Selects `values[index]` by scanning every element. The register-level
/// counterpart of `oaccess_read` for values already loaded into locals.
#[inline]
pub fn oselect_index<T: Select>(values: &[T], index: usize) -> T {
    debug_assert!(index < values.len());
    let mut acc = values[0];
    for (k, v) in values.iter().enumerate() {
        acc = T::select(oequal(k, index), v, &acc);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_examples() {
        assert_eq!(ocompare(3i64, 5, CompareMode::Less), Cond::TRUE);
        assert_eq!(ocompare(5i64, 5, CompareMode::Equal), Cond::TRUE);
        assert_eq!(ocompare(-1i64, -2, CompareMode::Greater), Cond::TRUE);
        assert_eq!(oassign(Cond::TRUE, 7u64, 9), 7);
        assert_eq!(oassign(Cond::FALSE, 7u64, 9), 9);
        // max(x, y) written without a branch
        let (x, y) = (3i64, 5i64);
        assert_eq!(oassign(ocompare(x, y, CompareMode::Greater), x, y), 5);
    }

    #[test]
    fn exhaustive_u8_and_i8() {
        for a in 0..=255u8 {
            for b in 0..=255u8 {
                assert_eq!(oless(a, b).declassify(), a < b);
                assert_eq!(ogreater(a, b).declassify(), a > b);
                assert_eq!(oequal(a, b).declassify(), a == b);
                let (sa, sb) = (a as i8, b as i8);
                assert_eq!(oless(sa, sb).declassify(), sa < sb);
                assert_eq!(ogreater(sa, sb).declassify(), sa > sb);
                assert_eq!(oequal(sa, sb).declassify(), sa == sb);
                for c in [Cond::FALSE, Cond::TRUE] {
                    let naive = if c.declassify() { a } else { b };
                    assert_eq!(oassign(c, a, b), naive);
                }
            }
        }
    }

    #[test]
    fn float_order_edges() {
        let vals = [
            f64::NEG_INFINITY,
            -1e300,
            -1.5,
            -f64::MIN_POSITIVE,
            -0.0,
            0.0,
            f64::MIN_POSITIVE,
            2.5,
            1e300,
            f64::INFINITY,
        ];
        for &a in &vals {
            for &b in &vals {
                assert_eq!(oless(a, b).declassify(), a < b, "{a} < {b}");
                assert_eq!(oequal(a, b).declassify(), a == b, "{a} == {b}");
            }
        }
    }

    #[test]
    fn i128_select_and_swap() {
        let (t, f) = (-(1i128 << 100), 12345i128);
        assert_eq!(i128::select(Cond::TRUE, &t, &f), t);
        assert_eq!(i128::select(Cond::FALSE, &t, &f), f);
        let (mut a, mut b) = (1u64, 2u64);
        ocswap(Cond::TRUE, &mut a, &mut b);
        assert_eq!((a, b), (2, 1));
        ocswap(Cond::FALSE, &mut a, &mut b);
        assert_eq!((a, b), (2, 1));
    }

    #[test]
    fn select_index_scan() {
        let v = [10u64, 20, 30, 40];
        for i in 0..4 {
            assert_eq!(oselect_index(&v, i), v[i]);
        }
    }

    #[test]
    fn cond_algebra() {
        assert_eq!(!Cond::TRUE, Cond::FALSE);
        assert_eq!(Cond::TRUE & Cond::FALSE, Cond::FALSE);
        assert_eq!(Cond::TRUE | Cond::FALSE, Cond::TRUE);
        assert_eq!(Cond::TRUE.mask(), u64::MAX);
        assert_eq!(Cond::FALSE.mask(), 0);
    }

    proptest::proptest! {
        #[test]
        fn matches_naive_u64(a: u64, b: u64, c: bool) {
            proptest::prop_assert_eq!(oless(a, b).declassify(), a < b);
            proptest::prop_assert_eq!(ogreater(a, b).declassify(), a > b);
            proptest::prop_assert_eq!(oequal(a, b).declassify(), a == b);
            proptest::prop_assert_eq!(oassign(Cond::public(c), a, b), if c { a } else { b });
        }

        #[test]
        fn matches_naive_i64(a: i64, b: i64) {
            proptest::prop_assert_eq!(oless(a, b).declassify(), a < b);
            proptest::prop_assert_eq!(ogreater(a, b).declassify(), a > b);
            proptest::prop_assert_eq!(omin(a, b), a.min(b));
            proptest::prop_assert_eq!(omax(a, b), a.max(b));
        }

        #[test]
        fn matches_naive_f64(a in -1e12f64..1e12, b in -1e12f64..1e12) {
            proptest::prop_assert_eq!(oless(a, b).declassify(), a < b);
            proptest::prop_assert_eq!(ogreater(a, b).declassify(), a > b);
            proptest::prop_assert_eq!(oequal(a, b).declassify(), a == b);
        }
    }
}
