//! Coefficient rings.
//!
//! Every series type in this crate is generic over a coefficient ring
//! implementing [`Coeff`]. Two ground rings are provided:
//!
//! - [`Rat`] — arbitrary-precision rationals, always stored in lowest terms
//!   with a positive denominator (the representation `num-rational`
//!   canonicalizes on construction). This is the default, exact mode.
//! - [`C64`] — complex numbers with `f64` components, for degree values
//!   that are not half-periods. Operations are the usual floating-point
//!   ones; exactness-sensitive callers branch on [`Coeff::EXACT`].
//!
//! [`crate::qseries::QSeries`] itself implements `Coeff`, so multivariate
//! series can carry q-series coefficients (the substrate for theta-weighted
//! residues).

use alloc::string::ToString;
use core::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::{Error, Result};

/// Arbitrary-precision rational scalar (exact mode).
pub type Rat = num_rational::BigRational;

/// Complex double-precision scalar (numeric mode).
pub type C64 = num_complex::Complex<f64>;

/// Ring operations required of a coefficient type.
///
/// Implementations must be commutative rings with exact or approximate
/// division. `inv` fails (rather than panics) on non-units so that series
/// inversion can surface a valuation error to the caller.
pub trait Coeff: Clone + PartialEq + fmt::Debug + fmt::Display {
    /// Whether arithmetic in this ring is exact (no rounding).
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, rhs: &Self) -> Self;
    fn sub(&self, rhs: &Self) -> Self;
    fn neg(&self) -> Self;
    fn mul(&self, rhs: &Self) -> Self;
    /// Multiplicative inverse; `Err` on zero (exact) or on a coefficient
    /// that is structurally non-invertible (series with zero constant term).
    fn inv(&self) -> Result<Self>;
    fn from_int(n: i64) -> Self;
    /// `num / den` with `den > 0`.
    fn from_ratio(num: i64, den: u64) -> Self;
    /// Embed an exact rational (lossy only in numeric rings).
    fn from_rational(r: &Rat) -> Self;
}

impl Coeff for Rat {
    const EXACT: bool = true;

    fn zero() -> Self {
        <Rat as Zero>::zero()
    }
    fn one() -> Self {
        <Rat as One>::one()
    }
    fn is_zero(&self) -> bool {
        <Rat as Zero>::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inv(&self) -> Result<Self> {
        if <Rat as Zero>::is_zero(self) {
            return Err(Error::Valuation("division by zero rational".to_string()));
        }
        Ok(self.recip())
    }
    fn from_int(n: i64) -> Self {
        Rat::from_integer(BigInt::from(n))
    }
    fn from_ratio(num: i64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        Rat::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_rational(r: &Rat) -> Self {
        r.clone()
    }
}

impl Coeff for C64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn one() -> Self {
        C64::new(1.0, 0.0)
    }
    fn is_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn add(&self, rhs: &Self) -> Self {
        self + rhs
    }
    fn sub(&self, rhs: &Self) -> Self {
        self - rhs
    }
    fn neg(&self) -> Self {
        -self
    }
    fn mul(&self, rhs: &Self) -> Self {
        self * rhs
    }
    fn inv(&self) -> Result<Self> {
        if Coeff::is_zero(self) {
            return Err(Error::Valuation("division by zero complex".to_string()));
        }
        Ok(C64::new(1.0, 0.0) / self)
    }
    fn from_int(n: i64) -> Self {
        C64::new(n as f64, 0.0)
    }
    fn from_ratio(num: i64, den: u64) -> Self {
        assert!(den != 0, "zero denominator");
        C64::new(num as f64 / den as f64, 0.0)
    }
    fn from_rational(r: &Rat) -> Self {
        // Convert through f64 division of the parts to survive numerators
        // that individually overflow f64 integer precision.
        let num = r.numer().to_f64().unwrap_or(f64::NAN);
        let den = r.denom().to_f64().unwrap_or(f64::NAN);
        C64::new(num / den, 0.0)
    }
}

/// Canonicalization check used by tests and JSON round-tripping: lowest
/// terms with positive denominator (guaranteed by `num-rational` on
/// construction, asserted here for defense).
pub fn rat_is_canonical(r: &Rat) -> bool {
    use num_integer::Integer;
    if r.denom().is_negative() || r.denom().is_zero() {
        return false;
    }
    r.numer().gcd(r.denom()).is_one() || <Rat as Zero>::is_zero(r)
}
