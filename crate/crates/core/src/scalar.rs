//! Floating point scalar abstraction shared by every module.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FromPrimitive};

/// Real scalar usable by the affine models: `f32` or `f64`.
///
/// Besides the arithmetic of [`Float`], the trait exposes one-ulp stepping
/// (needed by the outward-rounded interval type) and the tolerances used by
/// the audits, which depend on the precision.
pub trait Scalar:
    Float + FromPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Smallest representable value strictly greater than `self`.
    fn next_up(self) -> Self;
    /// Largest representable value strictly smaller than `self`.
    fn next_down(self) -> Self;
    /// Absolute tolerance for "equals" in structural audits.
    fn audit_tol() -> Self;
    /// Tolerance for fixed-point and parameter residuals.
    fn residual_tol() -> Self;

    /// Converts an `f64` literal. Panics only if the value is not
    /// representable at all, which cannot happen for finite inputs.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn count(k: usize) -> Self {
        <Self as FromPrimitive>::from_usize(k).expect("index fits in a float")
    }
}

impl Scalar for f64 {
    #[inline]
    fn next_up(self) -> Self {
        f64::next_up(self)
    }
    #[inline]
    fn next_down(self) -> Self {
        f64::next_down(self)
    }
    fn audit_tol() -> Self {
        1e-12
    }
    fn residual_tol() -> Self {
        1e-10
    }
}

impl Scalar for f32 {
    #[inline]
    fn next_up(self) -> Self {
        f32::next_up(self)
    }
    #[inline]
    fn next_down(self) -> Self {
        f32::next_down(self)
    }
    fn audit_tol() -> Self {
        1e-5
    }
    fn residual_tol() -> Self {
        1e-4
    }
}

/// `base^k` for non-negative integer `k`, switching to log space for long
/// words so that intermediate powers do not overflow.
pub fn int_pow<T: Scalar>(base: T, k: usize) -> T {
    if k <= 64 {
        base.powi(k as i32)
    } else if base == T::zero() {
        T::zero()
    } else {
        let mag = (T::count(k) * base.abs().ln()).exp();
        if base < T::zero() && k % 2 == 1 {
            -mag
        } else {
            mag
        }
    }
}

/// `factor * base^k`, computed as `exp(k ln|base| + ln|factor|)` for long
/// words. Avoids overflow when `base^k` alone is out of range but the product
/// is not.
pub fn scaled_pow<T: Scalar>(factor: T, base: T, k: usize) -> T {
    if k <= 64 || factor == T::zero() || base == T::zero() {
        return factor * int_pow(base, k);
    }
    let log_mag = T::count(k) * base.abs().ln() + factor.abs().ln();
    let negative = (factor < T::zero()) ^ (base < T::zero() && k % 2 == 1);
    let mag = log_mag.exp();
    if negative {
        -mag
    } else {
        mag
    }
}
