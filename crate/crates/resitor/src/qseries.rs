//! Univariate truncated power series in the nome `q`.
//!
//! A [`QSeries`] is either
//!
//! - *truncated* at order `N`: coefficients of `q^0..q^N` are certified and
//!   the series is known modulo `q^{N+1}`, or
//! - an *exact polynomial* (no truncation): every coefficient, including the
//!   implicit zeros beyond the stored degree, is certified.
//!
//! Binary operations take the pessimistic minimum of the operand orders;
//! the product of two exact polynomials is their exact product. Exact
//! constants are what scalar embedding produces, so mixing constants into
//! truncated arithmetic loses no order.
//!
//! Besides ring operations the module provides the analytically continued
//! geometric factor [`QSeries::geometric`] — the series expansion of
//! `1/(1 - zeta q^a)` for any sign of `a` — and divisor-power sums
//! [`QSeries::sigma_series`], the building blocks of the lattice-sum and
//! Eisenstein-series computations.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::scalar::Coeff;
use crate::{Error, Result};

/// Sentinel truncation order marking an exact polynomial.
const EXACT_ORDER: u32 = u32::MAX;

/// Truncated power series in `q` over a coefficient ring `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct QSeries<C> {
    /// Certified order: coefficients of `q^0..q^trunc` are exact values of
    /// the represented series. `EXACT_ORDER` marks an exact polynomial.
    trunc: u32,
    /// `coeffs[k]` is the coefficient of `q^k`. Truncated series store
    /// exactly `trunc + 1` entries; exact polynomials store up to their
    /// degree with trailing zeros trimmed.
    coeffs: Vec<C>,
}

impl<C: Coeff> QSeries<C> {
    /// Series truncated at `order`, with `coeffs` padded or cut to length
    /// `order + 1`.
    pub fn truncated(order: u32, mut coeffs: Vec<C>) -> Self {
        coeffs.resize(order as usize + 1, C::zero());
        QSeries { trunc: order, coeffs }
    }

    /// Exact polynomial with the given coefficients (trailing zeros trimmed).
    pub fn exact_poly(mut coeffs: Vec<C>) -> Self {
        while coeffs.last().map(C::is_zero).unwrap_or(false) {
            coeffs.pop();
        }
        QSeries { trunc: EXACT_ORDER, coeffs }
    }

    /// Exact constant series.
    pub fn constant(c: C) -> Self {
        QSeries::exact_poly(vec![c])
    }

    /// Exact constant built from a small rational.
    pub fn from_ratio(num: i64, den: u64) -> Self {
        QSeries::constant(C::from_ratio(num, den))
    }

    /// Truncated series from integer coefficients (test convenience).
    pub fn from_ints(order: u32, ints: &[i64]) -> Self {
        QSeries::truncated(order, ints.iter().map(|&n| C::from_int(n)).collect())
    }

    /// `None` for exact polynomials, `Some(order)` otherwise.
    pub fn trunc_order(&self) -> Option<u32> {
        if self.trunc == EXACT_ORDER {
            None
        } else {
            Some(self.trunc)
        }
    }

    pub fn is_exact_poly(&self) -> bool {
        self.trunc == EXACT_ORDER
    }

    /// Coefficient of `q^k`.
    ///
    /// Panics if `k` exceeds the certified order of a truncated series —
    /// arithmetic never reports a coefficient beyond the truncation.
    pub fn coeff(&self, k: u32) -> C {
        assert!(
            self.trunc == EXACT_ORDER || k <= self.trunc,
            "coefficient of q^{k} requested beyond certified order {}",
            self.trunc
        );
        self.coeffs.get(k as usize).cloned().unwrap_or_else(C::zero)
    }

    /// Stored coefficient slice (length `trunc + 1` when truncated).
    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(C::is_zero)
    }

    /// Smallest exponent with a nonzero stored coefficient.
    pub fn valuation(&self) -> Option<u32> {
        self.coeffs.iter().position(|c| !c.is_zero()).map(|k| k as u32)
    }

    fn min_trunc(&self, rhs: &Self) -> u32 {
        self.trunc.min(rhs.trunc)
    }

    /// Reduce (or, for exact polynomials, fix) the certified order.
    ///
    /// Panics if a truncated series is asked for a higher order than it
    /// certifies.
    pub fn truncate(&self, order: u32) -> Self {
        assert!(
            self.trunc == EXACT_ORDER || order <= self.trunc,
            "cannot raise certified order from {} to {order}",
            self.trunc
        );
        let mut coeffs = self.coeffs.clone();
        coeffs.truncate(order as usize + 1);
        QSeries::truncated(order, coeffs)
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let trunc = self.min_trunc(rhs);
        let keep = |len: usize| {
            if trunc == EXACT_ORDER {
                len
            } else {
                len.min(trunc as usize + 1)
            }
        };
        let n = keep(self.coeffs.len()).max(keep(rhs.coeffs.len()));
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let a = self.coeffs.get(k);
            let b = rhs.coeffs.get(k);
            out.push(match (a, b) {
                (Some(a), Some(b)) => a.add(b),
                (Some(a), None) => a.clone(),
                (None, Some(b)) => b.clone(),
                (None, None) => C::zero(),
            });
        }
        if trunc == EXACT_ORDER {
            QSeries::exact_poly(out)
        } else {
            QSeries::truncated(trunc, out)
        }
    }

    pub fn neg(&self) -> Self {
        QSeries { trunc: self.trunc, coeffs: self.coeffs.iter().map(C::neg).collect() }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.add(&rhs.neg())
    }

    pub fn scale(&self, c: &C) -> Self {
        let scaled: Vec<C> = self.coeffs.iter().map(|a| a.mul(c)).collect();
        if self.trunc == EXACT_ORDER {
            QSeries::exact_poly(scaled)
        } else {
            QSeries { trunc: self.trunc, coeffs: scaled }
        }
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let trunc = self.min_trunc(rhs);
        let full = self.coeffs.len() + rhs.coeffs.len();
        let n = if trunc == EXACT_ORDER {
            full.saturating_sub(1)
        } else {
            (trunc as usize + 1).min(full.saturating_sub(1).max(if full == 0 { 0 } else { 1 }))
        };
        let mut out = vec![C::zero(); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                if b.is_zero() {
                    continue;
                }
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        if trunc == EXACT_ORDER {
            QSeries::exact_poly(out)
        } else {
            QSeries::truncated(trunc, out)
        }
    }

    /// Small non-negative power by repeated multiplication.
    pub fn pow(&self, k: u32) -> Self {
        let mut acc = if self.trunc == EXACT_ORDER {
            Self::constant(C::one())
        } else {
            Self::truncated(self.trunc, vec![C::one()])
        };
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiply by `q^s` for signed `s`.
    ///
    /// A negative `s` divides by `q^{|s|}`: in exact mode the discarded
    /// leading coefficients must vanish (otherwise a valuation error is
    /// returned); in numeric mode sub-valuation residue noise is discarded.
    /// Truncated orders shift with the exponent: multiplying by `q^s` turns
    /// knowledge modulo `q^{N+1}` into knowledge modulo `q^{N+1+s}`.
    pub fn mul_qpow(&self, s: i64) -> Result<Self> {
        if s >= 0 {
            let s = s as usize;
            let mut out = vec![C::zero(); s];
            out.extend(self.coeffs.iter().cloned());
            return Ok(if self.trunc == EXACT_ORDER {
                QSeries::exact_poly(out)
            } else {
                QSeries::truncated(self.trunc + s as u32, out)
            });
        }
        let drop = (-s) as usize;
        if C::EXACT {
            for c in self.coeffs.iter().take(drop) {
                if !c.is_zero() {
                    return Err(Error::Valuation(
                        "division by q^k drops a nonzero coefficient".to_string(),
                    ));
                }
            }
        }
        let out: Vec<C> = self.coeffs.iter().skip(drop).cloned().collect();
        if self.trunc == EXACT_ORDER {
            Ok(QSeries::exact_poly(out))
        } else {
            let new_trunc = self.trunc as i64 + s;
            if new_trunc < 0 {
                return Err(Error::Invalid(format!(
                    "division by q^{drop} exhausts a series truncated at order {}",
                    self.trunc
                )));
            }
            Ok(QSeries::truncated(new_trunc as u32, out))
        }
    }

    /// Multiplicative inverse through the certified order.
    ///
    /// Requires an invertible constant term; a zero constant term is a
    /// valuation error (factor out the `q` powers first). A non-constant
    /// exact polynomial has no polynomial inverse: truncate it explicitly
    /// before inverting.
    pub fn invert(&self) -> Result<Self> {
        if self.trunc == EXACT_ORDER {
            return match self.coeffs.len() {
                0 => Err(Error::Valuation("zero constant term".to_string())),
                1 => Ok(QSeries::constant(self.coeffs[0].inv()?)),
                _ => Err(Error::Invalid(
                    "cannot invert a non-constant exact polynomial; truncate it first"
                        .to_string(),
                )),
            };
        }
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(Error::Valuation("zero constant term".to_string()));
        }
        let c0inv = c0.inv()?;
        let n = self.trunc as usize + 1;
        let mut out = Vec::with_capacity(n);
        out.push(c0inv.clone());
        for k in 1..n {
            // b_k = -c0^{-1} * sum_{j=1..k} a_j b_{k-j}
            let mut acc = C::zero();
            for j in 1..=k {
                let a = &self.coeffs[j];
                if a.is_zero() {
                    continue;
                }
                acc = acc.add(&a.mul(&out[k - j]));
            }
            out.push(acc.mul(&c0inv).neg());
        }
        Ok(QSeries { trunc: self.trunc, coeffs: out })
    }

    /// Analytically continued geometric factor: the `q`-expansion of
    /// `1/(1 - zeta q^a)`.
    ///
    /// - `a > 0`: `sum_{t >= 0} zeta^t q^{at}`;
    /// - `a = 0`: the exact constant `1/(1 - zeta)` — an error if
    ///   `zeta = 1` (the degree function is integral on the ray);
    /// - `a < 0`: the continuation `-sum_{t >= 1} zeta^{-t} q^{|a|t}`,
    ///   the Taylor expansion at `q = 0` of the same rational function.
    pub fn geometric(a: i64, zeta: &C, order: u32) -> Result<Self> {
        if a == 0 {
            if *zeta == C::one() {
                return Err(Error::DegreeIntegralOnRay);
            }
            return Ok(QSeries::constant(C::one().sub(zeta).inv()?));
        }
        let step = a.unsigned_abs();
        let mut coeffs = vec![C::zero(); order as usize + 1];
        if a > 0 {
            let mut zt = C::one();
            let mut k: u64 = 0;
            while k <= order as u64 {
                coeffs[k as usize] = zt.clone();
                zt = zt.mul(zeta);
                k += step;
            }
        } else {
            let zinv = zeta.inv()?;
            let mut zt = zinv.clone();
            let mut k: u64 = step;
            while k <= order as u64 {
                coeffs[k as usize] = zt.neg();
                zt = zt.mul(&zinv);
                k += step;
            }
        }
        Ok(QSeries { trunc: order, coeffs })
    }

    /// Divisor-power sum series `sum_{r >= 1} sigma_w(r) q^{scale * r}`
    /// truncated at `order`, where `sigma_w(r) = sum_{k | r} k^w`.
    pub fn sigma_series(weight: u32, scale: u32, order: u32) -> Self {
        assert!(scale >= 1, "scale must be positive");
        let mut coeffs = vec![C::zero(); order as usize + 1];
        let mut r: u32 = 1;
        while (scale as u64) * (r as u64) <= order as u64 {
            let mut sigma: i128 = 0;
            for k in 1..=r {
                if r % k == 0 {
                    let mut p: i128 = 1;
                    for _ in 0..weight {
                        p = p.checked_mul(k as i128).expect("sigma overflow");
                    }
                    sigma += p;
                }
            }
            let idx = (scale * r) as usize;
            coeffs[idx] = C::from_int(i64::try_from(sigma).expect("sigma overflow"));
            r += 1;
        }
        QSeries { trunc: order, coeffs }
    }

    /// Map coefficients into another ring (e.g. exact rationals to complex
    /// doubles), preserving the truncation structure.
    pub fn map<D: Coeff>(&self, f: impl Fn(&C) -> D) -> QSeries<D> {
        let coeffs: Vec<D> = self.coeffs.iter().map(f).collect();
        if self.trunc == EXACT_ORDER {
            QSeries::exact_poly(coeffs)
        } else {
            QSeries::truncated(self.trunc, coeffs)
        }
    }
}

impl<C: Coeff> fmt::Display for QSeries<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut wrote = false;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if wrote {
                write!(f, " + ")?;
            }
            match k {
                0 => write!(f, "{c}")?,
                1 => write!(f, "({c})*q")?,
                _ => write!(f, "({c})*q^{k}")?,
            }
            wrote = true;
        }
        if !wrote {
            write!(f, "0")?;
        }
        if self.trunc != EXACT_ORDER {
            write!(f, " + O(q^{})", self.trunc as u64 + 1)?;
        }
        Ok(())
    }
}

/// Q-series form a coefficient ring themselves, so iterated Laurent series
/// can carry q-series coefficients. Ring constants embed as exact
/// polynomials and therefore never lower the truncation of their partners.
impl<C: Coeff> Coeff for QSeries<C> {
    const EXACT: bool = C::EXACT;

    fn zero() -> Self {
        QSeries::exact_poly(Vec::new())
    }
    fn one() -> Self {
        QSeries::constant(C::one())
    }
    fn is_zero(&self) -> bool {
        QSeries::is_zero(self)
    }
    fn add(&self, rhs: &Self) -> Self {
        QSeries::add(self, rhs)
    }
    fn sub(&self, rhs: &Self) -> Self {
        QSeries::sub(self, rhs)
    }
    fn neg(&self) -> Self {
        QSeries::neg(self)
    }
    fn mul(&self, rhs: &Self) -> Self {
        QSeries::mul(self, rhs)
    }
    fn inv(&self) -> Result<Self> {
        QSeries::invert(self)
    }
    fn from_int(n: i64) -> Self {
        QSeries::constant(C::from_int(n))
    }
    fn from_ratio(num: i64, den: u64) -> Self {
        QSeries::constant(C::from_ratio(num, den))
    }
    fn from_rational(r: &crate::scalar::Rat) -> Self {
        QSeries::constant(C::from_rational(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rat;

    type QS = QSeries<Rat>;

    fn q() -> QS {
        QS::exact_poly(vec![Rat::from_int(0), Rat::from_int(1)])
    }

    #[test]
    fn difference_of_squares() {
        let one_plus_q = QS::from_ints(4, &[1, 1]);
        let one_minus_q = QS::from_ints(4, &[1, -1]);
        assert_eq!(one_plus_q.mul(&one_minus_q), QS::from_ints(4, &[1, 0, -1]));
    }

    #[test]
    fn additive_inverse_cancels() {
        let a = QS::from_ints(3, &[1, 1]);
        assert!(a.add(&a.neg()).is_zero());
    }

    #[test]
    fn finite_geometric_factorization_reports_min_trunc() {
        // (1 - 3q)(1 + 3q + 9q^2) = 1 - 27 q^3, at the min order of the two.
        let a = QS::from_ints(5, &[1, -3]);
        let b = QS::from_ints(3, &[1, 3, 9]);
        let prod = a.mul(&b);
        assert_eq!(prod.trunc_order(), Some(3));
        assert_eq!(prod, QS::from_ints(3, &[1, 0, 0, -27]));
    }

    #[test]
    fn exact_times_exact_is_exact() {
        let a = QS::exact_poly(vec![Rat::from_int(1), Rat::from_int(-3)]);
        let b = QS::exact_poly(vec![Rat::from_int(1), Rat::from_int(3), Rat::from_int(9)]);
        let prod = a.mul(&b);
        assert_eq!(prod.trunc_order(), None);
        assert_eq!(prod, QS::exact_poly(vec![
            Rat::from_int(1),
            Rat::from_int(0),
            Rat::from_int(0),
            Rat::from_int(-27),
        ]));
    }

    #[test]
    fn invert_geometric() {
        let one_minus_q = QS::from_ints(6, &[1, -1]);
        assert_eq!(one_minus_q.invert().unwrap(), QS::from_ints(6, &[1, 1, 1, 1, 1, 1, 1]));
        assert_eq!(QS::from_ints(4, &[1]).invert().unwrap(), QS::from_ints(4, &[1]));
    }

    #[test]
    fn invert_two_plus_two_q_and_multiply_back() {
        let a = QS::from_ints(5, &[2, 2]);
        let inv = a.invert().unwrap();
        assert_eq!(inv.coeff(0), Rat::from_ratio(1, 2));
        assert_eq!(inv.coeff(1), Rat::from_ratio(-1, 2));
        assert_eq!(inv.coeff(2), Rat::from_ratio(1, 2));
        let prod = a.mul(&inv);
        assert_eq!(prod, QS::from_ints(5, &[1]));
    }

    #[test]
    fn invert_zero_constant_term_is_valuation_error() {
        let a = q().truncate(3);
        match a.invert() {
            Err(Error::Valuation(_)) => {}
            other => panic!("expected valuation error, got {other:?}"),
        }
    }

    #[test]
    fn geometric_positive_exponent() {
        let g = QS::geometric(1, &Rat::from_int(-1), 4).unwrap();
        assert_eq!(g, QS::from_ints(4, &[1, -1, 1, -1, 1]));
    }

    #[test]
    fn geometric_zero_exponent_is_exact_constant() {
        let g = QS::geometric(0, &Rat::from_int(-1), 7).unwrap();
        assert_eq!(g, QS::from_ratio(1, 2));
        assert!(g.is_exact_poly());
    }

    #[test]
    fn geometric_zero_exponent_unit_zeta_errors() {
        match QS::geometric(0, &Rat::from_int(1), 3) {
            Err(Error::DegreeIntegralOnRay) => {}
            other => panic!("expected degree-integral-on-ray, got {other:?}"),
        }
    }

    #[test]
    fn geometric_negative_exponent_continuation() {
        // 1/(1 + q^{-2}) continued: q^2 - q^4 + q^6 - ...
        let g = QS::geometric(-2, &Rat::from_int(-1), 7).unwrap();
        assert_eq!(g, QS::from_ints(7, &[0, 0, 1, 0, -1, 0, 1]));
    }

    #[test]
    fn geometric_times_its_denominator_is_one() {
        // For a > 0: g * (1 - zeta q^a) = 1. For a < 0, clearing the
        // denominator of the continued function: g * (q^{|a|} - zeta) = q^{|a|}.
        let zeta = Rat::from_ratio(-2, 3);
        for a in 1..5i64 {
            let g = QS::geometric(a, &zeta, 12).unwrap();
            let mut denom = vec![Rat::from_int(0); a as usize + 1];
            denom[0] = Rat::from_int(1);
            denom[a as usize] = Coeff::neg(&zeta);
            assert_eq!(g.mul(&QS::exact_poly(denom)), QS::from_ints(12, &[1]));
        }
        for a in 1..5i64 {
            let g = QS::geometric(-a, &zeta, 12).unwrap();
            let mut denom = vec![Coeff::neg(&zeta)];
            denom.resize(a as usize, Rat::from_int(0));
            denom.push(Rat::from_int(1));
            let mut expect = vec![Rat::from_int(0); a as usize];
            expect.push(Rat::from_int(1));
            assert_eq!(g.mul(&QS::exact_poly(denom)), QS::truncated(12, expect));
        }
    }

    #[test]
    fn geometric_continuation_identity() {
        // g(a, zeta) + g(-a, 1/zeta) = 1 for a != 0: the two expansions of
        // the partial-fraction split of 1.
        let zeta = Rat::from_ratio(3, 5);
        for a in [1i64, 2, 3, -1, -4] {
            let g1 = QS::geometric(a, &zeta, 10).unwrap();
            let g2 = QS::geometric(-a, &zeta.inv().unwrap(), 10).unwrap();
            assert_eq!(g1.add(&g2), QS::from_ints(10, &[1]), "a = {a}");
        }
    }

    #[test]
    fn sigma_series_small_tables() {
        assert_eq!(QS::sigma_series(1, 2, 8), QS::from_ints(8, &[0, 0, 1, 0, 3, 0, 4, 0, 7]));
        assert_eq!(QS::sigma_series(1, 1, 3), QS::from_ints(3, &[0, 1, 3, 4]));
        assert_eq!(QS::sigma_series(3, 1, 2), QS::from_ints(2, &[0, 1, 9]));
    }

    #[test]
    fn mul_qpow_shifts_and_checks_valuation() {
        let s = QS::from_ints(4, &[0, 0, 5, 7]);
        let up = s.mul_qpow(1).unwrap();
        assert_eq!(up, QS::from_ints(5, &[0, 0, 0, 5, 7]));
        let down = s.mul_qpow(-2).unwrap();
        assert_eq!(down, QS::from_ints(2, &[5, 7]));
        match QS::from_ints(3, &[1]).mul_qpow(-1) {
            Err(Error::Valuation(_)) => {}
            other => panic!("expected valuation error, got {other:?}"),
        }
    }

    #[test]
    fn nested_qseries_coefficients_work() {
        // A q-series whose coefficients are themselves q-series (in another
        // formal variable): the Coeff impl must be a genuine ring.
        type Nested = QSeries<QSeries<Rat>>;
        let inner = QSeries::<Rat>::from_ints(3, &[0, 1]);
        let a = Nested::truncated(2, vec![QSeries::constant(Rat::from_int(1)), inner.clone()]);
        let sq = a.mul(&a);
        assert_eq!(sq.coeff(0), QSeries::constant(Rat::from_int(1)));
        assert_eq!(sq.coeff(1), inner.scale(&Rat::from_int(2)));
        assert_eq!(sq.coeff(2), inner.mul(&inner));
    }

    #[test]
    fn float_mode_tracks_exact_mode() {
        use crate::scalar::C64;
        let exact = QS::from_ints(8, &[3, -1, 4, -1, 5, -9, 2, 6]).invert().unwrap();
        let float = QSeries::<C64>::from_ints(8, &[3, -1, 4, -1, 5, -9, 2, 6]).invert().unwrap();
        for k in 0..=8u32 {
            let e = C64::from_rational(&exact.coeff(k));
            let f = float.coeff(k);
            assert!((e - f).norm() < 1e-12, "coefficient {k} drifted");
        }
    }
}
