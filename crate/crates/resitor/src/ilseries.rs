//! Multivariate iterated Laurent series with certified exponent windows.
//!
//! An [`ILSeries`] stores finitely many terms of the expansion of a
//! meromorphic germ in the iterated regime `u1 << u2 << ... << un` (each
//! variable infinitesimal against the next). Variable `u1` — exponent index
//! 0 — is the innermost residue variable. Exponent vectors are compared
//! lexicographically with `u1` most significant, which is exactly the order
//! in which `BTreeMap<Vec<i32>, _>` sorts keys; the first stored key is the
//! expansion's leading term.
//!
//! # Window semantics
//!
//! Each series carries a per-variable *certified window* `[lo_v, hi_v]`
//! (`hi_v` may be unbounded, meaning the series is exact above in that
//! variable) plus a global *support floor* `supp_lo` bounding every true
//! exponent from below when such a bound is known. The contract is:
//!
//! 1. every stored exponent lies inside the window box;
//! 2. inside the box, the stored coefficient (zero if absent) equals the
//!    true coefficient of the represented expansion;
//! 3. **upward escape**: every true-support exponent outside the box leaves
//!    the window *upward* at the first coordinate where it is out of
//!    window (`e_v > hi_v` at the first `v` with `e_v` outside
//!    `[lo_v, hi_v]`).
//!
//! Rule 3 is what makes the windows composable: it guarantees that terms a
//! product is missing, because an operand hid them above its window, can
//! only influence coefficients above the product's window. The binary
//! operations below propagate all three properties; inversion and
//! composition establish them from scratch.
//!
//! Truncation is pessimistic and loud: operations shrink windows by the
//! conservative rules, terms falling outside a shrunken window are dropped,
//! and any attempt to read through a window that does not cover the needed
//! exponent is an error naming the offending variable — never a silent
//! zero.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::scalar::Coeff;
use crate::{Error, Result};

/// Upper-window sentinel: at or above this value a window is unbounded
/// ("exact above" — no unknown tail in that variable).
pub const HI_INF: i64 = i64::MAX / 8;

/// Support-floor sentinel: no global lower bound is known.
pub const SUPP_UNBOUNDED: i64 = i64::MIN / 8;

fn hi_add(h: i64, delta: i64) -> i64 {
    if h >= HI_INF {
        HI_INF
    } else {
        h + delta
    }
}

fn supp_add(a: i64, b: i64) -> i64 {
    if a <= SUPP_UNBOUNDED || b <= SUPP_UNBOUNDED {
        SUPP_UNBOUNDED
    } else {
        a + b
    }
}

fn ceil_div(num: i64, den: i64) -> i64 {
    debug_assert!(num >= 0 && den >= 1);
    (num + den - 1) / den
}

/// Iterated Laurent series over a coefficient ring `C` (scalars or
/// q-series), with certified windows as described in the module docs.
#[derive(Clone, Debug, PartialEq)]
pub struct ILSeries<C: Coeff> {
    nvars: usize,
    terms: BTreeMap<Vec<i32>, C>,
    lo: Vec<i64>,
    hi: Vec<i64>,
    supp_lo: Vec<i64>,
}

impl<C: Coeff> ILSeries<C> {
    /// The zero series (exact everywhere).
    pub fn zero(nvars: usize) -> Self {
        ILSeries {
            nvars,
            terms: BTreeMap::new(),
            lo: vec![0; nvars],
            hi: vec![HI_INF; nvars],
            supp_lo: vec![0; nvars],
        }
    }

    /// Exact Laurent polynomial from explicit terms (duplicates are summed,
    /// zeros dropped). The window is unbounded above; the lower bound is
    /// the componentwise minimum of the surviving exponents.
    pub fn from_terms(nvars: usize, pairs: impl IntoIterator<Item = (Vec<i32>, C)>) -> Self {
        let mut terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        for (e, c) in pairs {
            assert_eq!(e.len(), nvars, "exponent arity mismatch");
            let entry = terms.entry(e).or_insert_with(C::zero);
            *entry = entry.add(&c);
        }
        terms.retain(|_, c| !c.is_zero());
        let mut lo = vec![0i64; nvars];
        for (i, e) in terms.keys().enumerate() {
            for v in 0..nvars {
                let ev = e[v] as i64;
                lo[v] = if i == 0 { ev } else { lo[v].min(ev) };
            }
        }
        ILSeries { nvars, terms, lo: lo.clone(), hi: vec![HI_INF; nvars], supp_lo: lo }
    }

    /// Exact monomial `c * u^e`.
    pub fn monomial(nvars: usize, exps: &[i32], c: C) -> Self {
        Self::from_terms(nvars, [(exps.to_vec(), c)])
    }

    /// The constant `1`.
    pub fn one(nvars: usize) -> Self {
        Self::monomial(nvars, &vec![0; nvars], C::one())
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn window_lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn window_hi(&self) -> &[i64] {
        &self.hi
    }

    pub fn support_floor(&self) -> &[i64] {
        &self.supp_lo
    }

    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<i32>, &C)> {
        self.terms.iter()
    }

    /// Leading (lexicographically smallest stored) term.
    pub fn lead_term(&self) -> Option<(&Vec<i32>, &C)> {
        self.terms.iter().next()
    }

    pub fn is_zero_stored(&self) -> bool {
        self.terms.is_empty()
    }

    /// Certified coefficient at `exps`.
    ///
    /// Exponents below the support floor in some variable are certified
    /// zeros. Otherwise `exps` must lie inside the certified window —
    /// callers must check coverage (or use the residue operations, which
    /// do) — and the method panics if it does not.
    pub fn coeff(&self, exps: &[i32]) -> C {
        assert_eq!(exps.len(), self.nvars);
        if exps.iter().zip(&self.supp_lo).any(|(&ev, &s)| (ev as i64) < s) {
            return C::zero();
        }
        for v in 0..self.nvars {
            assert!(
                (exps[v] as i64) >= self.lo[v] && (exps[v] as i64) <= self.hi[v],
                "coefficient at exponent {} of u{} requested outside certified window [{}, {}]",
                exps[v],
                v + 1,
                self.lo[v],
                self.hi[v]
            );
        }
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn scale(&self, s: &C) -> Self {
        let mut out = self.clone();
        if s.is_zero() {
            out.terms.clear();
            return out;
        }
        for c in out.terms.values_mut() {
            *c = c.mul(s);
        }
        out.terms.retain(|_, c| !c.is_zero());
        out
    }

    fn assert_compat(&self, rhs: &Self) {
        assert_eq!(self.nvars, rhs.nvars, "variable contexts differ");
    }

    fn check_nonempty_window(lo: &[i64], hi: &[i64]) -> Result<()> {
        for v in 0..lo.len() {
            if lo[v] > hi[v] {
                return Err(Error::WindowUnderflow {
                    var: v + 1,
                    detail: format!("empty window [{}, {}]", lo[v], hi[v]),
                });
            }
        }
        Ok(())
    }

    fn inside(e: &[i32], lo: &[i64], hi: &[i64]) -> bool {
        e.iter()
            .zip(lo.iter().zip(hi.iter()))
            .all(|(&ev, (&l, &h))| (ev as i64) >= l && (ev as i64) <= h)
    }

    /// Sum, certified on the componentwise union-safe window: the lower
    /// bound is the min of the operand bounds (both remain true valuation
    /// bounds) and the upper bound the min (pessimistic). Terms above the
    /// result window are dropped; their absence is recorded by the window.
    pub fn add(&self, rhs: &Self) -> Result<Self> {
        self.assert_compat(rhs);
        let n = self.nvars;
        let lo: Vec<i64> = (0..n).map(|v| self.lo[v].min(rhs.lo[v])).collect();
        let hi: Vec<i64> = (0..n).map(|v| self.hi[v].min(rhs.hi[v])).collect();
        Self::check_nonempty_window(&lo, &hi)?;
        let supp_lo: Vec<i64> = (0..n).map(|v| self.supp_lo[v].min(rhs.supp_lo[v])).collect();
        let mut terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        for (e, c) in self.terms.iter().chain(rhs.terms.iter()) {
            if !Self::inside(e, &lo, &hi) {
                continue;
            }
            let entry = terms.entry(e.clone()).or_insert_with(C::zero);
            *entry = entry.add(c);
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(ILSeries { nvars: n, terms, lo, hi, supp_lo })
    }

    pub fn sub(&self, rhs: &Self) -> Result<Self> {
        self.add(&rhs.neg())
    }

    /// Product. Window rule per variable: a product coefficient is
    /// certified only when every contributing split lies inside both
    /// operand windows, giving
    /// `[lo_a + lo_b, min(hi_a + lo_b, lo_a + hi_b)]`.
    pub fn mul(&self, rhs: &Self) -> Result<Self> {
        self.mul_impl(rhs, None)
    }

    /// Product that stores only exponents inside `[keep_lo, keep_hi]` with
    /// total degree inside `[keep_deg.0, keep_deg.1]`.
    ///
    /// The window vectors are those of the plain product — the window
    /// *certificate* is unaffected by what is stored — but coefficients
    /// inside the window and outside the keep region are silently dropped,
    /// so the result answers correctly **only** inside the keep region.
    /// For residue extraction the driver keeps, at every partial product,
    /// the region of exponents that can still reach the all-`-1` target
    /// given the exponent ranges of the factors not yet multiplied;
    /// everything outside is provably irrelevant to that one coefficient.
    pub(crate) fn mul_clamped(
        &self,
        rhs: &Self,
        keep_lo: &[i64],
        keep_hi: &[i64],
        keep_deg: (i64, i64),
    ) -> Result<Self> {
        self.mul_impl(rhs, Some((keep_lo, keep_hi, keep_deg)))
    }

    fn mul_impl(&self, rhs: &Self, keep: Option<(&[i64], &[i64], (i64, i64))>) -> Result<Self> {
        self.assert_compat(rhs);
        let n = self.nvars;
        let lo: Vec<i64> = (0..n).map(|v| self.lo[v] + rhs.lo[v]).collect();
        let hi: Vec<i64> = (0..n)
            .map(|v| hi_add(self.hi[v], rhs.lo[v]).min(hi_add(rhs.hi[v], self.lo[v])))
            .collect();
        Self::check_nonempty_window(&lo, &hi)?;
        let supp_lo: Vec<i64> = (0..n).map(|v| supp_add(self.supp_lo[v], rhs.supp_lo[v])).collect();
        let mut terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            'pair: for (eb, cb) in &rhs.terms {
                let mut e = Vec::with_capacity(n);
                let mut deg: i64 = 0;
                for v in 0..n {
                    let s = ea[v] as i64 + eb[v] as i64;
                    if s > hi[v] {
                        continue 'pair;
                    }
                    if let Some((kl, kh, _)) = keep {
                        if s < kl[v] || s > kh[v] {
                            continue 'pair;
                        }
                    }
                    deg += s;
                    e.push(s as i32);
                }
                if let Some((_, _, (dl, dh))) = keep {
                    if deg < dl || deg > dh {
                        continue 'pair;
                    }
                }
                let entry = terms.entry(e).or_insert_with(C::zero);
                *entry = entry.add(&ca.mul(cb));
            }
        }
        terms.retain(|_, c| !c.is_zero());
        Ok(ILSeries { nvars: n, terms, lo, hi, supp_lo })
    }

    /// Raw targeted product: multiplies stored terms, keeping only
    /// exponents inside `[keep_lo, keep_hi]` with total degree inside
    /// `keep_deg`, and ignores window arithmetic entirely (the result's
    /// window is set to the keep box and means nothing).
    ///
    /// This is only sound when the caller certifies relevance externally:
    /// both operands' stored coefficients must all be true expansion
    /// coefficients, and everything dropped must be provably unable to
    /// contribute to the exponents the caller will read.
    pub(crate) fn mul_for_target(
        &self,
        rhs: &Self,
        keep_lo: &[i64],
        keep_hi: &[i64],
        keep_deg: (i64, i64),
    ) -> Self {
        self.assert_compat(rhs);
        let n = self.nvars;
        let mut terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            'pair: for (eb, cb) in &rhs.terms {
                let mut e = Vec::with_capacity(n);
                let mut deg: i64 = 0;
                for v in 0..n {
                    let s = ea[v] as i64 + eb[v] as i64;
                    if s < keep_lo[v] || s > keep_hi[v] {
                        continue 'pair;
                    }
                    deg += s;
                    e.push(s as i32);
                }
                if deg < keep_deg.0 || deg > keep_deg.1 {
                    continue 'pair;
                }
                let entry = terms.entry(e).or_insert_with(C::zero);
                *entry = entry.add(&ca.mul(cb));
            }
        }
        terms.retain(|_, c| !c.is_zero());
        let lo: Vec<i64> = keep_lo.to_vec();
        let hi: Vec<i64> = keep_hi.to_vec();
        let supp_lo = lo.clone();
        ILSeries { nvars: n, terms, lo, hi, supp_lo }
    }

    /// Stored coefficient at `exps`, regardless of window state. Zero when
    /// absent. Only meaningful to callers that certify truth at `exps` by
    /// other means than the window contract.
    pub(crate) fn stored_coeff(&self, exps: &[i32]) -> C {
        assert_eq!(exps.len(), self.nvars);
        self.terms.get(exps).cloned().unwrap_or_else(C::zero)
    }

    /// Which variables the series genuinely involves (in any stored term).
    pub fn active_vars(&self) -> Vec<bool> {
        let mut active = vec![false; self.nvars];
        for e in self.terms.keys() {
            for v in 0..self.nvars {
                if e[v] != 0 {
                    active[v] = true;
                }
            }
        }
        active
    }

    /// Bound on the drop rate of this series relative to its lead: how far
    /// a trailing branch can *decrease* some variable per unit of rise in
    /// earlier variables. Considers stored branches, and — when the series
    /// is truncated — the branches its window may hide, bounded through
    /// the support floor. Errors mirror the leading-term requirements of
    /// [`Self::invert`].
    pub fn drop_rate_bound(&self) -> Result<i64> {
        let (lead_e, _) = self
            .terms
            .iter()
            .next()
            .ok_or_else(|| Error::Valuation("zero series has no leading term".to_string()))?;
        let mut rate: i64 = 0;
        for (t, _) in self.terms.iter().skip(1) {
            let mut rise: i64 = 0;
            for v in 0..self.nvars {
                let dv = t[v] as i64 - lead_e[v] as i64;
                if dv > 0 {
                    rise += dv;
                } else if dv < 0 {
                    if rise == 0 {
                        return Err(Error::NoLeadingTerm(
                            "trailing term not lexicographically above the lead".to_string(),
                        ));
                    }
                    rate = rate.max(ceil_div(-dv, rise));
                }
            }
        }
        if (0..self.nvars).any(|v| self.hi[v] < HI_INF) {
            let active = self.active_vars();
            for v in 0..self.nvars {
                if !active[v] {
                    continue;
                }
                if self.supp_lo[v] <= SUPP_UNBOUNDED {
                    return Err(Error::NoLeadingTerm(
                        "cannot certify inversion of a truncated series without a support floor"
                            .to_string(),
                    ));
                }
                rate = rate.max(lead_e[v] as i64 - self.supp_lo[v]);
            }
        }
        Ok(rate)
    }

    /// Inverse, certified on the requested window `[computed lo, out_hi]`.
    ///
    /// The stored leading term (lexicographically smallest; `u1` most
    /// significant) must be the expansion's true leading term — callers
    /// arrange windows so it is — and its coefficient must be invertible
    /// (recursively: a q-series coefficient needs a unit constant term).
    /// Writing the input as `c·u^e·(1 + R)`, every branch of `R` is
    /// lexicographically positive and the inverse is the Neumann series
    /// `c^{-1}u^{-e}·sum_k (-R)^k`, summed with per-term liveness pruning.
    ///
    /// A branch of `R` may *drop* a later variable while *rising* in
    /// earlier ones; the drop rate `r` (max drop per unit of earlier rise,
    /// over stored branches and over what the input's support floor allows
    /// hidden branches) bounds how far below `-e` exponents can reach:
    /// variable `v` is granted an allowance `allow_v = r * sum of earlier
    /// rooms`, with `room_w = max(0, hi_w + e_w + 2*allow_w)` the gross
    /// climbing space in `w`. The output window's lower bound is
    /// `-e_v - allow_v`; terms above `hi_v + allow_v` in any variable can
    /// never re-enter the window and are pruned; termination follows
    /// because every multiplication by `-R` strictly increases the
    /// lexicographic minimum inside a finite live box.
    ///
    /// For truncated inputs the certified input window must exceed the
    /// requested output window by the reach of the iteration (checked;
    /// failing windows report underflow so drivers can enlarge budgets).
    pub fn invert(&self, out_hi: &[i64]) -> Result<Self> {
        assert_eq!(out_hi.len(), self.nvars);
        let n = self.nvars;
        let (lead_e, lead_c) = match self.terms.iter().next() {
            Some((e, c)) => (e.clone(), c.clone()),
            None => {
                return Err(Error::Valuation("inverting the zero series".to_string()));
            }
        };
        let c_inv = lead_c.inv().map_err(|err| {
            Error::NoLeadingTerm(format!("leading coefficient not invertible ({err})"))
        })?;
        let active = self.active_vars();
        let truncated = (0..n).any(|v| self.hi[v] < HI_INF);
        let rate = self.drop_rate_bound()?;

        // Branches of R (exponents relative to the lead), coefficients
        // pre-scaled for the Neumann series. BTreeMap order guarantees
        // lexicographic positivity.
        let mut neg_r: Vec<(Vec<i32>, C)> = Vec::new();
        for (t, c) in self.terms.iter().skip(1) {
            let d: Vec<i32> =
                (0..n).map(|v| (t[v] as i64 - lead_e[v] as i64) as i32).collect();
            neg_r.push((d, c.mul(&c_inv).neg()));
        }

        // Allowances and input-window adequacy, ascending through the
        // variables (rooms of earlier variables feed later allowances).
        let mut allow = vec![0i64; n];
        let mut cum_rooms: i64 = 0;
        for v in 0..n {
            if !active[v] {
                continue;
            }
            if out_hi[v] >= HI_INF {
                return Err(Error::Invalid(format!(
                    "unbounded inverse window requested for active variable u{}",
                    v + 1
                )));
            }
            allow[v] = rate.saturating_mul(cum_rooms);
            let room = (out_hi[v] + lead_e[v] as i64 + 2 * allow[v]).max(0);
            cum_rooms = cum_rooms.saturating_add(room);
            if self.hi[v] < HI_INF {
                let need =
                    out_hi[v] + 2 * (lead_e[v] as i64).max(0) + 2 * allow[v] + 1;
                if self.hi[v] < need {
                    return Err(Error::WindowUnderflow {
                        var: v + 1,
                        detail: format!(
                            "input certified through {} but inversion reach needs {need}",
                            self.hi[v]
                        ),
                    });
                }
            }
        }

        let out_lo: Vec<i64> = (0..n)
            .map(|v| if active[v] { -(lead_e[v] as i64) - allow[v] } else { 0 })
            .collect();
        let out_hi_full: Vec<i64> =
            (0..n).map(|v| if active[v] { out_hi[v] } else { HI_INF }).collect();
        Self::check_nonempty_window(&out_lo, &out_hi_full)?;
        let out_supp: Vec<i64> = (0..n)
            .map(|v| {
                if !active[v] {
                    return 0;
                }
                let stored_drop = neg_r.iter().any(|(d, _)| d[v] < 0);
                let hidden_drop = truncated && self.supp_lo[v] < lead_e[v] as i64;
                if stored_drop || hidden_drop {
                    SUPP_UNBOUNDED
                } else {
                    -(lead_e[v] as i64)
                }
            })
            .collect();

        let alive = |e: &[i32]| -> bool {
            let mut cum: i64 = 0;
            for v in 0..n {
                if !active[v] {
                    continue;
                }
                let al = rate.saturating_mul(cum);
                if (e[v] as i64) > hi_add(out_hi[v], al) {
                    return false;
                }
                cum = cum.saturating_add((out_hi[v] + al - e[v] as i64).max(0));
            }
            true
        };

        // Iteration cap: the live region is finite; a strictly increasing
        // lexicographic minimum walks through it at most once per cell.
        let mut volume: u128 = 1;
        for v in 0..n {
            if active[v] {
                let span = (out_hi[v] + allow[v] - out_lo[v] + 1).max(1) as u128;
                volume = volume.saturating_mul(span).min(100_000_000);
            }
        }
        let cap = volume + 4;

        let start: Vec<i32> = (0..n).map(|v| -(lead_e[v])).collect();
        let mut acc: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        acc.insert(start, c_inv);
        let mut out_terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        let mut iters: u128 = 0;
        loop {
            for (e, c) in &acc {
                if Self::inside(e, &out_lo, &out_hi_full) {
                    let entry = out_terms.entry(e.clone()).or_insert_with(C::zero);
                    *entry = entry.add(c);
                }
            }
            if acc.is_empty() || neg_r.is_empty() {
                break;
            }
            iters += 1;
            if iters > cap {
                return Err(Error::Invalid(
                    "inversion iteration exceeded the live-box bound".to_string(),
                ));
            }
            let mut next: BTreeMap<Vec<i32>, C> = BTreeMap::new();
            for (t, ct) in &acc {
                for (d, cd) in &neg_r {
                    let mut s = Vec::with_capacity(n);
                    for v in 0..n {
                        s.push(t[v] + d[v]);
                    }
                    if !alive(&s) {
                        continue;
                    }
                    let entry = next.entry(s).or_insert_with(C::zero);
                    *entry = entry.add(&ct.mul(cd));
                }
            }
            next.retain(|_, c| !c.is_zero());
            acc = next;
        }
        out_terms.retain(|_, c| !c.is_zero());
        Ok(ILSeries { nvars: n, terms: out_terms, lo: out_lo, hi: out_hi_full, supp_lo: out_supp })
    }

    /// Compose a univariate jet `s(t) = sum_k jet[k] t^k` with an exact
    /// polynomial `form` (nonnegative exponents, no constant term),
    /// certifying the window `[valuation bound, req_hi]`.
    ///
    /// Certification needs the jet order to dominate the window:
    /// `K >= sum_v max(0, req_hi_v)` over the form's variables, since a
    /// discarded tail monomial has total degree `> K` and nonnegative
    /// exponents, hence cannot land inside the box. Evaluation is Horner
    /// with per-step pruning above `req_hi` (sound: exponents only grow).
    pub fn compose(jet: &[C], form: &Self, req_hi: &[i64]) -> Result<Self> {
        Self::compose_impl(jet, form, req_hi, None)
    }

    /// Composition that is additionally truthful only up to total degree
    /// `deg_cap`. Because every form term has total degree `>= 1`, jet
    /// orders above `deg_cap` cannot reach any monomial of total degree
    /// `<= deg_cap`, so the required jet order drops to
    /// `min(sum_v max(0, req_hi_v), deg_cap)` and Horner prunes partial
    /// exponents whose degree already exceeds the cap (degrees only grow).
    /// The result answers correctly only for exponents inside the window
    /// box **and** of total degree `<= deg_cap`; the caller owns that
    /// restriction.
    pub(crate) fn compose_capped(
        jet: &[C],
        form: &Self,
        req_hi: &[i64],
        deg_cap: i64,
    ) -> Result<Self> {
        Self::compose_impl(jet, form, req_hi, Some(deg_cap))
    }

    fn compose_impl(
        jet: &[C],
        form: &Self,
        req_hi: &[i64],
        deg_cap: Option<i64>,
    ) -> Result<Self> {
        let n = form.nvars;
        assert_eq!(req_hi.len(), n);
        if form.terms.contains_key(&vec![0i32; n]) {
            return Err(Error::Invalid("composition form has a constant term".to_string()));
        }
        for v in 0..n {
            if form.hi[v] < HI_INF {
                return Err(Error::Invalid("composition form must be exact".to_string()));
            }
        }
        for e in form.terms.keys() {
            if e.iter().any(|&x| x < 0) {
                return Err(Error::Invalid(
                    "composition form must have nonnegative exponents".to_string(),
                ));
            }
        }
        let active = form.active_vars();
        let mut need: i64 = 0;
        for v in 0..n {
            if !active[v] {
                continue;
            }
            if req_hi[v] >= HI_INF {
                return Err(Error::Invalid(format!(
                    "unbounded composition window requested for active variable u{}",
                    v + 1
                )));
            }
            need += req_hi[v].max(0);
        }
        if let Some(cap) = deg_cap {
            need = need.min(cap.max(0));
        }
        let have = jet.len().saturating_sub(1) as i64;
        if have < need {
            return Err(Error::JetOrderTooSmall { have: have as u32, need: need as u32 });
        }

        let nu = jet.iter().position(|c| !c.is_zero());
        let hi_full: Vec<i64> =
            (0..n).map(|v| if active[v] { req_hi[v] } else { HI_INF }).collect();
        let nu = match nu {
            None => return Ok(Self::zero(n)),
            Some(nu) => nu as i64,
        };
        // True valuation bound: every surviving monomial contains at least
        // nu factors from the form.
        let lo: Vec<i64> = (0..n)
            .map(|v| {
                if !active[v] {
                    return 0;
                }
                let min_exp =
                    form.terms.keys().map(|e| e[v] as i64).min().unwrap_or(0);
                nu * min_exp
            })
            .collect();
        Self::check_nonempty_window(&lo, &hi_full)?;

        // Horner from the top coefficient, pruning above req_hi.
        let mut acc: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        let top = jet.len() - 1;
        if !jet[top].is_zero() {
            acc.insert(vec![0; n], jet[top].clone());
        }
        for k in (0..top).rev() {
            let mut next: BTreeMap<Vec<i32>, C> = BTreeMap::new();
            for (ea, ca) in &acc {
                'pair: for (eb, cb) in &form.terms {
                    let mut e = Vec::with_capacity(n);
                    let mut deg: i64 = 0;
                    for v in 0..n {
                        let s = ea[v] as i64 + eb[v] as i64;
                        if s > hi_full[v] {
                            continue 'pair;
                        }
                        deg += s;
                        e.push(s as i32);
                    }
                    if let Some(cap) = deg_cap {
                        if deg > cap {
                            continue 'pair;
                        }
                    }
                    let entry = next.entry(e).or_insert_with(C::zero);
                    *entry = entry.add(&ca.mul(cb));
                }
            }
            if !jet[k].is_zero() {
                let entry = next.entry(vec![0; n]).or_insert_with(C::zero);
                *entry = entry.add(&jet[k]);
            }
            next.retain(|_, c| !c.is_zero());
            acc = next;
        }
        // Exponents below the valuation bound are exact cancellations
        // (numeric modes may leave noise there); the window starts at lo.
        acc.retain(|e, _| Self::inside(e, &lo, &hi_full));
        Ok(ILSeries { nvars: n, terms: acc, lo: lo.clone(), hi: hi_full, supp_lo: lo })
    }

    /// One layer of the residue nest: the coefficient of `u1^{-1}`, as a
    /// series in the remaining variables (windows inherited).
    ///
    /// The window's lower edge in the *first* coordinate is a true support
    /// floor: a true exponent with `e_1 < lo_1` is out of window first at
    /// coordinate 1 and downward, which the upward-escape invariant
    /// forbids. So `lo_1 > -1` certifies a zero residue, while
    /// `hi_1 < -1` leaves the coefficient hidden above the window and is
    /// an error.
    pub fn residue_innermost(&self) -> Result<ILSeries<C>> {
        assert!(self.nvars >= 1, "no variables left to take a residue in");
        if self.lo[0] > -1 {
            return Ok(Self::zero(self.nvars - 1));
        }
        if self.hi[0] < -1 {
            return Err(Error::WindowUnderflow {
                var: 1,
                detail: format!(
                    "window [{}, {}] lies below exponent -1",
                    self.lo[0], self.hi[0]
                ),
            });
        }
        let n = self.nvars - 1;
        let mut terms: BTreeMap<Vec<i32>, C> = BTreeMap::new();
        for (e, c) in &self.terms {
            if e[0] == -1 {
                terms.insert(e[1..].to_vec(), c.clone());
            }
        }
        Ok(ILSeries {
            nvars: n,
            terms,
            lo: self.lo[1..].to_vec(),
            hi: self.hi[1..].to_vec(),
            supp_lo: self.supp_lo[1..].to_vec(),
        })
    }

    /// The full iterated residue: fold [`Self::residue_innermost`] over
    /// `u1, u2, ..., un` and return the remaining constant. Window
    /// underflow errors name the original variable at which extraction
    /// failed.
    pub fn iterated_residue(&self) -> Result<C> {
        let mut cur = self.clone();
        for k in 0..self.nvars {
            cur = cur.residue_innermost().map_err(|e| match e {
                Error::WindowUnderflow { var, detail } => {
                    Error::WindowUnderflow { var: var + k, detail }
                }
                other => other,
            })?;
        }
        Ok(cur.terms.get(&Vec::new()).cloned().unwrap_or_else(C::zero))
    }

    /// Debug dump: one term per line, `e1,e2,...,en : coefficient`,
    /// lexicographically sorted. Golden-file friendly.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (e, c) in &self.terms {
            let mut first = true;
            for x in e {
                if !first {
                    out.push(',');
                }
                let _ = write!(out, "{x}");
                first = false;
            }
            let _ = writeln!(out, " : {c}");
        }
        out
    }
}
