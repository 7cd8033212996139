//! Exact-arithmetic engine for iterated residues of multivariate Laurent
//! series, with applications to cohomology pairings and genera of generalized
//! Bott manifolds and to theta-weighted lattice sums over fans.
//!
//! The crate is organized bottom-up:
//!
//! - [`scalar`] — pluggable coefficient rings (exact big rationals, complex
//!   doubles) behind the [`scalar::Coeff`] trait.
//! - [`qseries`] — univariate truncated power series in the nome `q`,
//!   including the analytically continued geometric factor and divisor-sum
//!   series.
//! - [`ilseries`] — multivariate iterated Laurent series with certified
//!   per-variable exponent windows; formal residue extraction lives here.
//! - [`driver`] — window budgeting for residues of products of factors
//!   (polynomials, jet compositions and their inverses), with retry-on-
//!   underflow doubling.
//! - [`theta`] — jets of an algebraically normalized Jacobi theta function,
//!   logarithmic-derivative ratios, and the characteristic power series of
//!   the supported genera.
//! - [`poly`] — sparse multivariate polynomials used as cohomology classes.
//! - [`bott`] — Bott towers: relations, normal forms, pairings, string
//!   checks, and genera of complete intersections.
//! - [`toric`] — fans, degree functions, and theta-weighted lattice sums
//!   computed both by direct lattice summation and by iterated residue.
//!
//! All computations are deterministic. Exact mode uses arbitrary-precision
//! rationals and never rounds; numeric mode uses `f64` complex arithmetic
//! for degree values that are not half-periods.
#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

use alloc::string::String;
use core::fmt;

pub mod bott;
pub mod driver;
pub mod ilseries;
pub mod poly;
pub mod qseries;
pub mod scalar;
pub mod theta;
pub mod toric;

/// Errors shared by every module of the engine.
///
/// Variants carry enough context to name the offending variable or bound;
/// callers that orchestrate retries (window doubling, box enlargement)
/// match on the variant, not the message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A series with zero constant term (or a non-unit leading coefficient)
    /// was inverted: a "valuation error". The caller must factor out the
    /// vanishing part explicitly.
    Valuation(String),
    /// The analytically continued geometric factor `1/(1 - zeta q^a)` was
    /// requested with `a = 0` and `zeta = 1`: the degree function is
    /// integral on a ray, which the continuation cannot handle.
    DegreeIntegralOnRay,
    /// A certified exponent window does not cover a required exponent.
    /// `var` is the 1-based index of the offending variable (`u1` is the
    /// innermost residue variable).
    WindowUnderflow { var: usize, detail: String },
    /// A jet was composed at an order too small to certify the requested
    /// window; retry with `need`.
    JetOrderTooSmall { have: u32, need: u32 },
    /// The series has no usable leading term for inversion (non-invertible
    /// leading coefficient, or trailing terms are not lexicographically
    /// above the lead).
    NoLeadingTerm(String),
    /// A lattice sum did not stabilize within the box cap.
    NotStabilized { cap: i64 },
    /// Window-budget doubling exceeded the configured retry cap.
    BudgetExceeded { cap: i64 },
    /// Invalid construction parameters (schema or invariant violations).
    Invalid(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Valuation(what) => write!(f, "valuation error: {what}"),
            Error::DegreeIntegralOnRay => write!(f, "degree integral on ray"),
            Error::WindowUnderflow { var, detail } => {
                write!(f, "window underflow in u{var}: {detail}")
            }
            Error::JetOrderTooSmall { have, need } => {
                write!(f, "jet order too small: have {have}, need at least {need}")
            }
            Error::NoLeadingTerm(what) => write!(f, "no well-defined leading term: {what}"),
            Error::NotStabilized { cap } => {
                write!(f, "lattice sum not stabilized within box cap {cap}")
            }
            Error::BudgetExceeded { cap } => {
                write!(f, "window budget retries exceeded cap {cap}")
            }
            Error::Invalid(what) => write!(f, "invalid input: {what}"),
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
