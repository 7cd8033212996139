//! Jacobi theta jets, their normalized derivative ratios, and the genus
//! power-series families built from them.
//!
//! The central object is the x-jet (to a requested order, with q-series
//! coefficients) of
//!
//! ```text
//! T(x; a) = (z^{1/2} e^{x/2} - z^{-1/2} e^{-x/2})
//!           * prod_{j>=1} (1-q^j) (1 - z q^j e^x) (1 - z^{-1} q^j e^{-x})
//! ```
//!
//! with `z = e^{2 pi i a}`. For the half-integer shifts used by the exact
//! pipelines the unit prefactors split off cleanly:
//!
//! * `a = 0`:  `T = 2 sinh(x/2) * prod (1-q^j)(1-q^j e^x)(1-q^j e^{-x})`,
//!   an odd jet with `T'(0) = prod (1-q^j)^3` (the slope unit);
//! * `a = 1/2`: `T = ±i * [ (e^{x/2}+e^{-x/2}) * prod
//!   (1-q^j)(1+q^j e^x)(1+q^j e^{-x}) ]`, an even rational part times a
//!   unit that cancels from every ratio we form.
//!
//! The exact builders return the rational parts only; the numeric builder
//! returns the full jet for arbitrary real shifts. All q-expansions are
//! truncated at the requested order, which is exact: the omitted product
//! factors are `1 + O(q^{order+1})`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::qseries::QSeries;
use crate::scalar::{Coeff, Rat, C64};
use crate::{Error, Result};

// ---------------------------------------------------------------------
// Dense one-variable jet helpers (coefficient lists indexed by power).
// ---------------------------------------------------------------------

/// Product of jets truncated at `ord` (inclusive).
pub fn jet_mul<C: Coeff>(a: &[C], b: &[C], ord: usize) -> Vec<C> {
    let mut out = vec![C::zero(); ord + 1];
    for (i, ai) in a.iter().enumerate().take(ord + 1) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(ord + 1 - i) {
            out[i + j] = out[i + j].add(&ai.mul(bj));
        }
    }
    out
}

/// Inverse of a jet with invertible constant term, truncated at `ord`.
pub fn jet_inv<C: Coeff>(a: &[C], ord: usize) -> Result<Vec<C>> {
    let a0 = a.first().cloned().unwrap_or_else(C::zero);
    let a0_inv = a0
        .inv()
        .map_err(|e| Error::Valuation(format!("jet constant term not invertible ({e})")))?;
    let mut out = vec![C::zero(); ord + 1];
    out[0] = a0_inv.clone();
    for k in 1..=ord {
        let mut s = C::zero();
        for j in 1..=k.min(a.len().saturating_sub(1)) {
            s = s.add(&a[j].mul(&out[k - j]));
        }
        out[k] = a0_inv.mul(&s).neg();
    }
    Ok(out)
}

// ---------------------------------------------------------------------
// Theta jets.
// ---------------------------------------------------------------------

/// Half-integer shifts handled by the exact lane.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfShift {
    Zero,
    Half,
}

/// Shared product part: multiply `jet` by
/// `prod_{j=1..qord} (1-q^j)(1 - zp q^j e^x)(1 - zm q^j e^{-x})`.
fn theta_product_part<C: Coeff>(
    mut jet: Vec<QSeries<C>>,
    zp: &C,
    zm: &C,
    xord: usize,
    qord: u32,
) -> Vec<QSeries<C>> {
    // Reciprocal factorials as scalars, built incrementally.
    let mut inv_fact: Vec<C> = Vec::with_capacity(xord + 1);
    inv_fact.push(C::one());
    for k in 1..=xord as i64 {
        let prev = inv_fact.last().unwrap().clone();
        let kinv = C::from_int(k).inv().expect("nonzero integer");
        inv_fact.push(prev.mul(&kinv));
    }
    let mut euler = QSeries::<C>::truncated(qord, vec![C::one()]);
    for j in 1..=qord {
        let qj = QSeries::<C>::from_ints(qord, &{
            let mut v = vec![0i64; (j + 1) as usize];
            v[j as usize] = 1;
            v
        });
        euler = euler.mul(&QSeries::constant(C::one()).sub(&qj));
        // (1 - zp q^j e^x): x^k coefficient is -zp q^j / k!.
        let mut fp: Vec<QSeries<C>> = Vec::with_capacity(xord + 1);
        let mut fm: Vec<QSeries<C>> = Vec::with_capacity(xord + 1);
        for k in 0..=xord {
            let base_p = qj.scale(&zp.mul(&inv_fact[k]).neg());
            let base_m = qj.scale(&zm.mul(&inv_fact[k]).neg());
            let sign = if k % 2 == 0 { C::one() } else { C::one().neg() };
            let mut cp = base_p;
            let mut cm = base_m.scale(&sign);
            if k == 0 {
                cp = cp.add(&QSeries::constant(C::one()));
                cm = cm.add(&QSeries::constant(C::one()));
            }
            fp.push(cp);
            fm.push(cm);
        }
        jet = jet_mul(&jet, &fp, xord);
        jet = jet_mul(&jet, &fm, xord);
    }
    jet.iter().map(|c| c.mul(&euler)).collect()
}

/// x-jet (orders `0..=xord`) of the rational part of `T(x; a)` at a
/// half-integer shift, with q-series coefficients exact through `q^qord`.
pub fn theta_jet(shift: HalfShift, xord: usize, qord: u32) -> Vec<QSeries<Rat>> {
    // Prefactor jets: e^{x/2} -+ e^{-x/2}.
    let mut pref: Vec<QSeries<Rat>> = Vec::with_capacity(xord + 1);
    let mut up = Rat::one(); // (1/2)^k / k!
    let mut dn = Rat::one(); // (-1/2)^k / k!
    for k in 0..=xord {
        if k > 0 {
            let step = Rat::from_ratio(1, 2 * k as u64);
            up = up.mul(&step);
            dn = dn.mul(&step.neg());
        }
        let c = match shift {
            HalfShift::Zero => up.sub(&dn),
            HalfShift::Half => up.add(&dn),
        };
        pref.push(QSeries::constant(c));
    }
    let (zp, zm) = match shift {
        HalfShift::Zero => (Rat::one(), Rat::one()),
        HalfShift::Half => (Rat::one().neg(), Rat::one().neg()),
    };
    theta_product_part(pref, &zp, &zm, xord, qord)
}

/// Full numeric x-jet of `T(x; a)` for an arbitrary real shift `a`
/// (including the unit prefactor `z^{1/2} = e^{i pi a}`).
pub fn theta_jet_alpha(alpha: f64, xord: usize, qord: u32) -> Vec<QSeries<C64>> {
    let pi = core::f64::consts::PI;
    let half_z = C64::new(0.0, pi * alpha).exp(); // z^{1/2}
    let half_z_inv = C64::new(0.0, -pi * alpha).exp();
    let mut pref: Vec<QSeries<C64>> = Vec::with_capacity(xord + 1);
    let mut up = C64::new(1.0, 0.0);
    let mut dn = C64::new(1.0, 0.0);
    for k in 0..=xord {
        if k > 0 {
            let step = 1.0 / (2.0 * k as f64);
            up = up * C64::new(step, 0.0);
            dn = dn * C64::new(-step, 0.0);
        }
        pref.push(QSeries::constant(half_z * up - half_z_inv * dn));
    }
    let z = C64::new(0.0, 2.0 * pi * alpha).exp();
    let z_inv = C64::new(0.0, -2.0 * pi * alpha).exp();
    theta_product_part(pref, &z, &z_inv, xord, qord)
}

/// The slope unit `prod_{j>=1} (1-q^j)^3` (the x-derivative of the
/// shift-zero jet at `x = 0`), exact through `q^qord`.
pub fn theta_zero_slope(qord: u32) -> QSeries<Rat> {
    let mut out = QSeries::truncated(qord, vec![Rat::one()]);
    for j in 1..=qord {
        let mut v = vec![0i64; (j + 1) as usize];
        v[0] = 1;
        v[j as usize] = -1;
        let f = QSeries::from_ints(qord, &v);
        out = out.mul(&f).mul(&f).mul(&f);
    }
    out
}

/// Normalized derivative ratio of the theta jet at a half-integer shift:
/// for `shift = Half` the ratio `T^(m)(0) / T(0)`, for `shift = Zero`
/// (where `T(0) = 0`) the ratio `T^(m)(0) / T'(0)`. Units cancel, so
/// these are computed from the rational parts.
pub fn r_ratio(shift: HalfShift, m: usize, qord: u32) -> Result<QSeries<Rat>> {
    let jet = theta_jet(shift, m, qord);
    let mut fact = Rat::one();
    for k in 2..=m as i64 {
        fact = fact.mul(&Rat::from_int(k));
    }
    let num = jet[m].scale(&fact);
    let den = match shift {
        HalfShift::Half => jet[0].clone(),
        HalfShift::Zero => jet[1].clone(),
    };
    Ok(num.mul(&den.invert()?))
}

/// Numeric analogue of [`r_ratio`] for an arbitrary non-integer shift:
/// `T^(m)(0; a) / T(0; a)`.
pub fn r_ratio_alpha(alpha: f64, m: usize, qord: u32) -> Result<QSeries<C64>> {
    let jet = theta_jet_alpha(alpha, m, qord);
    let mut fact = C64::new(1.0, 0.0);
    for k in 2..=m {
        fact *= C64::new(k as f64, 0.0);
    }
    let num = jet[m].scale(&fact);
    Ok(num.mul(&jet[0].invert()?))
}

/// Numeric theta value from the triple product,
/// `theta(z | tau) = 2 q^{1/8} sin(pi z) prod_{j=1..terms}
/// (1-q^j)(1-q^j e^{2 pi i z})(1-q^j e^{-2 pi i z})`, `q = e^{2 pi i tau}`.
pub fn theta_point(z: C64, tau: C64, terms: u32) -> C64 {
    let pi = core::f64::consts::PI;
    let i = C64::new(0.0, 1.0);
    let q = (i * 2.0 * pi * tau).exp();
    let q8 = (i * pi * tau / 4.0).exp();
    let e = (i * 2.0 * pi * z).exp();
    let e_inv = (-i * 2.0 * pi * z).exp();
    let mut out = 2.0 * q8 * (pi * z).sin();
    let mut qj = C64::new(1.0, 0.0);
    for _ in 1..=terms {
        qj *= q;
        out *= (1.0 - qj) * (1.0 - qj * e) * (1.0 - qj * e_inv);
    }
    out
}

// ---------------------------------------------------------------------
// Genus families: jets of f with f(0) = 0, f'(0) = 1. A genus pairs each
// tangent root r with 1/f(r) and each constraint class l with f(l).
// ---------------------------------------------------------------------

/// `f(x) = 1 - e^{-x}` (arithmetic genus / Todd normalization):
/// coefficient of `x^k` is `(-1)^{k+1}/k!`.
pub fn todd_f_jet(order: usize) -> Vec<Rat> {
    let mut out = vec![Rat::zero()];
    let mut term = Rat::one();
    for k in 1..=order as u64 {
        if k > 1 {
            term = term.mul(&Rat::from_ratio(-1, k));
        }
        out.push(term.clone());
    }
    out
}

/// `f(x) = 2 sinh(x/2)` (the A-roof normalization).
pub fn ahat_f_jet(order: usize) -> Vec<Rat> {
    let mut out = Vec::with_capacity(order + 1);
    let mut up = Rat::one();
    let mut dn = Rat::one();
    for k in 0..=order {
        if k > 0 {
            let step = Rat::from_ratio(1, 2 * k as u64);
            up = up.mul(&step);
            dn = dn.mul(&step.neg());
        }
        out.push(up.sub(&dn));
    }
    out
}

/// `f(x) = tanh(x)` (signature normalization).
pub fn l_f_jet(order: usize) -> Result<Vec<Rat>> {
    let mut sinh = vec![Rat::zero(); order + 1];
    let mut cosh = vec![Rat::zero(); order + 1];
    let mut term = Rat::one(); // 1/k!
    for k in 0..=order {
        if k > 0 {
            term = term.mul(&Rat::from_int(k as i64).inv()?);
        }
        if k % 2 == 0 {
            cosh[k] = term.clone();
        } else {
            sinh[k] = term.clone();
        }
    }
    Ok(jet_mul(&sinh, &jet_inv(&cosh, order)?, order))
}

/// q-deformed family `f(x) = T(x; 0) / T'(0; 0)`: the shift-zero theta jet
/// normalized to unit slope. Its `q^0` slice is the A-roof family.
pub fn witten_f_jet(order: usize, qord: u32) -> Result<Vec<QSeries<Rat>>> {
    let jet = theta_jet(HalfShift::Zero, order, qord);
    let slope_inv = jet[1].invert()?;
    Ok(jet.iter().map(|c| c.mul(&slope_inv)).collect())
}

/// Half-shift elliptic family: `f(x) = x / Q(x)` where
/// `Q(x) = [T(x;1/2)/T(0;1/2)] * [x T'(0;0) / T(x;0)]`.
pub fn elliptic_half_f_jet(order: usize, qord: u32) -> Result<Vec<QSeries<Rat>>> {
    let jet_h = theta_jet(HalfShift::Half, order, qord);
    let jet_0 = theta_jet(HalfShift::Zero, order + 1, qord);
    let slope = jet_0[1].clone();
    // A = T(x;1/2)/T(0;1/2)
    let h0_inv = jet_h[0].invert()?;
    let a: Vec<QSeries<Rat>> = jet_h.iter().map(|c| c.mul(&h0_inv)).collect();
    // B = x T'(0)/T(x;0) = slope / (T(x;0)/x)
    let shifted: Vec<QSeries<Rat>> = jet_0[1..=order + 1].to_vec();
    let b: Vec<QSeries<Rat>> =
        jet_inv(&shifted, order)?.iter().map(|c| c.mul(&slope)).collect();
    let q = jet_mul(&a, &b, order);
    let q_inv = jet_inv(&q, order.saturating_sub(1))?;
    let mut f = vec![QSeries::truncated(qord, vec![])];
    f.extend(q_inv);
    f.truncate(order + 1);
    Ok(f)
}
