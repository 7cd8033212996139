//! Small builders for exact cohomology polynomials: linear forms in the
//! stage variables and their products, as windowed Laurent series.

use alloc::vec;

use crate::ilseries::ILSeries;
use crate::scalar::Coeff;

/// The linear form `sum_v coeffs[v] * u_{v+1}` (zero coefficients are
/// dropped; an all-zero form is the zero series).
pub fn linear_form<C: Coeff>(nvars: usize, coeffs: &[i64]) -> ILSeries<C> {
    assert_eq!(coeffs.len(), nvars, "one coefficient per variable");
    ILSeries::from_terms(
        nvars,
        coeffs.iter().enumerate().filter(|(_, &a)| a != 0).map(|(v, &a)| {
            let mut e = vec![0i32; nvars];
            e[v] = 1;
            (e, C::from_int(a))
        }),
    )
}

/// The single variable `u_{var+1}` as a linear form.
pub fn variable<C: Coeff>(nvars: usize, var: usize) -> ILSeries<C> {
    let mut coeffs = vec![0i64; nvars];
    coeffs[var] = 1;
    linear_form(nvars, &coeffs)
}

/// Product of exact polynomials (empty product = 1).
pub fn product<C: Coeff>(nvars: usize, factors: &[ILSeries<C>]) -> ILSeries<C> {
    let mut out = ILSeries::one(nvars);
    for f in factors {
        out = out.mul(f).expect("exact polynomial products never underflow");
    }
    out
}
