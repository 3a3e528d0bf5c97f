//! Closed intervals with outward rounding.
//!
//! Every operation first computes the round-to-nearest result and then
//! recovers the exact rounding error with an error-free transformation
//! (TwoSum, FMA residuals). The bound is moved by one ulp only when the exact
//! value lies on the wrong side, so exact operations stay exact. Results near
//! overflow or underflow, where the transformations are not exact, are
//! widened unconditionally.

use std::fmt;

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

#[inline]
fn unsafe_range<T: Scalar>(v: T) -> bool {
    // below this the FMA residual may itself underflow
    let tiny = T::min_positive_value() * T::lit(2f64.powi(60).min(1e30));
    !v.is_finite() || (v != T::zero() && v.abs() < tiny)
}

/// `(a + b)` rounded toward `-inf` and `+inf`.
pub fn add_round<T: Scalar>(a: T, b: T) -> (T, T) {
    let s = a + b;
    if !s.is_finite() {
        return (s.next_down(), s.next_up());
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    split(s, err)
}

/// `(a * b)` rounded toward `-inf` and `+inf`.
pub fn mul_round<T: Scalar>(a: T, b: T) -> (T, T) {
    let p = a * b;
    if unsafe_range(p) {
        return (p.next_down(), p.next_up());
    }
    let err = a.mul_add(b, -p);
    split(p, err)
}

/// `(a / b)` rounded toward `-inf` and `+inf`; `b` must be non-zero.
pub fn div_round<T: Scalar>(a: T, b: T) -> (T, T) {
    let q = a / b;
    if unsafe_range(q) || unsafe_range(a) {
        return (q.next_down(), q.next_up());
    }
    // exact: a = q*b + r, so a/b = q + r/b
    let r = (-q).mul_add(b, a);
    let err = if (r > T::zero()) == (b > T::zero()) && r != T::zero() {
        T::one()
    } else if r == T::zero() {
        T::zero()
    } else {
        -T::one()
    };
    split(q, err)
}

#[inline]
fn split<T: Scalar>(v: T, err: T) -> (T, T) {
    if err > T::zero() {
        (v, v.next_up())
    } else if err < T::zero() {
        (v.next_down(), v)
    } else {
        (v, v)
    }
}

impl<T: Scalar> Interval<T> {
    /// Panics in debug builds if `lo > hi`.
    pub fn new(lo: T, hi: T) -> Self {
        debug_assert!(!(lo > hi), "inverted interval [{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(v: T) -> Self {
        Self { lo: v, hi: v }
    }

    /// Smallest interval containing both endpoints, in either order.
    pub fn spanning(a: T, b: T) -> Self {
        Self {
            lo: a.min(b),
            hi: a.max(b),
        }
    }

    pub fn centered(mid: T, radius: T) -> Self {
        let (lo, _) = add_round(mid, -radius.abs());
        let (_, hi) = add_round(mid, radius.abs());
        Self { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || self.lo.is_nan() || self.hi.is_nan()
    }

    /// Upper bound on the width.
    pub fn width(&self) -> T {
        add_round(self.hi, -self.lo).1
    }

    /// Lower bound on the width.
    pub fn width_lower(&self) -> T {
        add_round(self.hi, -self.lo).0.max(T::zero())
    }

    pub fn mid(&self) -> T {
        self.lo + (self.hi - self.lo) / T::lit(2.0)
    }

    pub fn radius(&self) -> T {
        (self.hi - self.lo) / T::lit(2.0)
    }

    pub fn contains(&self, v: T) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Self) -> Option<Self> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Self { lo, hi })
    }

    pub fn hull(&self, other: &Self) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Distance from `v` to the complement, negative if `v` lies outside.
    pub fn depth(&self, v: T) -> T {
        (v - self.lo).min(self.hi - v)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            lo: add_round(self.lo, other.lo).0,
            hi: add_round(self.hi, other.hi).1,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        Self {
            lo: -self.hi,
            hi: -self.lo,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cands = [
            mul_round(self.lo, other.lo),
            mul_round(self.lo, other.hi),
            mul_round(self.hi, other.lo),
            mul_round(self.hi, other.hi),
        ];
        let lo = cands.iter().map(|c| c.0).fold(T::infinity(), T::min);
        let hi = cands.iter().map(|c| c.1).fold(T::neg_infinity(), T::max);
        Self { lo, hi }
    }

    pub fn scale(&self, k: T) -> Self {
        self.mul(&Self::point(k))
    }

    /// `None` if the divisor contains zero.
    pub fn div(&self, other: &Self) -> Option<Self> {
        if other.contains(T::zero()) {
            return None;
        }
        let cands = [
            div_round(self.lo, other.lo),
            div_round(self.lo, other.hi),
            div_round(self.hi, other.lo),
            div_round(self.hi, other.hi),
        ];
        let lo = cands.iter().map(|c| c.0).fold(T::infinity(), T::min);
        let hi = cands.iter().map(|c| c.1).fold(T::neg_infinity(), T::max);
        Some(Self { lo, hi })
    }

    /// Rigorous enclosure of `k * self + b` for point coefficients.
    pub fn affine(&self, k: T, b: T) -> Self {
        self.scale(k).add(&Self::point(b))
    }
}

impl<T: Scalar> fmt::Display for Interval<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:e}, {:e}]", self.lo, self.hi)
    }
}

/// Rigorous enclosure of a dot product with point coefficients.
pub fn dot_enclosure<T: Scalar>(row: &[T], xs: &[Interval<T>]) -> Interval<T> {
    row.iter()
        .zip(xs)
        .fold(Interval::point(T::zero()), |acc, (&a, x)| {
            acc.add(&x.scale(a))
        })
}
