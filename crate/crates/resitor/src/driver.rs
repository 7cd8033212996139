//! Window-budget driver: builds a product of factors with automatically
//! chosen certified windows and extracts its iterated residue.
//!
//! Callers describe the integrand as a list of [`Factor`]s — exact Laurent
//! polynomials, their inverses, and jets of one-variable series composed
//! with polynomial forms (optionally inverted). The driver runs one
//! ascending pass over the variables choosing, for every factor, a window
//! just generous enough that the product certifies the exponent `-1` in
//! each variable, builds the factors, multiplies, and extracts. Since all
//! window arithmetic is certified, a successful extraction is correct by
//! construction; budgets are only a search heuristic. If a window comes up
//! short the pass is retried with doubled slack up to a configured cap,
//! after which the driver reports a budget failure rather than guessing.
//!
//! Two certified short-cuts apply before any series is built: if the sum
//! of the factors' valuation floors in some variable exceeds `-1`, the
//! residue is exactly zero (the pole is not there), reported without
//! further work.
//!
//! Two structural optimizations keep large products tractable without
//! touching the certification story:
//!
//! * an inverted jet `1/s(L)` with `s` of valuation `nu` is decomposed as
//!   `1/L^nu * g(L)`, where `g = x^nu/s(x)` is a *unit* power series whose
//!   coefficients are obtained by inverting the jet of `s/x^nu` one
//!   variable at a time. Series inversion then only ever runs on exact
//!   Laurent polynomials, never on composed multivariate truncations;
//! * the product is folded with a residue-targeted clamp: after each
//!   partial product, exponents that cannot reach the all-`-1` target
//!   within the window boxes of the factors still to come are dropped.
//!   Window vectors (hence certification) are those of the unclamped
//!   product; only provably irrelevant coefficients are discarded.
//!
//! When every factor qualifies, a *viability* fast path replaces window
//! search entirely: see [`viability_attempt`]. Window budgets then matter
//! only for integrands that fall outside the qualified class.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::ilseries::{ILSeries, HI_INF};
use crate::scalar::Coeff;
use crate::{Error, Result};

/// Source of Taylor coefficients for a one-variable series being composed
/// into a product. Implementations must be consistent: requesting a higher
/// order extends the coefficient list without changing earlier entries.
pub trait JetProvider<C: Coeff> {
    /// Coefficients `0..=order` of the series.
    fn jet(&self, order: u32) -> Result<Vec<C>>;
}

impl<C: Coeff, F: Fn(u32) -> Result<Vec<C>>> JetProvider<C> for F {
    fn jet(&self, order: u32) -> Result<Vec<C>> {
        self(order)
    }
}

/// One factor of an integrand.
pub enum Factor<'a, C: Coeff> {
    /// Exact Laurent polynomial, multiplied as-is.
    Poly(ILSeries<C>),
    /// Inverse of an exact Laurent polynomial.
    InvPoly(ILSeries<C>),
    /// `s(form)` for a jet `s`: the form must be an exact polynomial with
    /// nonnegative exponents and no constant term.
    Jet { series: &'a dyn JetProvider<C>, form: ILSeries<C> },
    /// `1 / s(form)`.
    InvJet { series: &'a dyn JetProvider<C>, form: ILSeries<C> },
}

/// Budget policy for the retry loop.
#[derive(Clone, Debug)]
pub struct BudgetConfig {
    /// Maximum per-variable window slack; doubling stops here.
    pub max_slack: i64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig { max_slack: 4096 }
    }
}

/// Valuation probe depth for jets: providers used here have a nonzero
/// coefficient among orders `0..=2` or none at all.
const NU_PROBE: u32 = 2;

/// Internal factor shape after the inverted-jet decomposition: jets carry
/// a valuation shift (divide the series by `x^shift`) and an inversion
/// flag (invert the shifted unit series coefficient-wise), and series
/// inversion survives only for exact polynomials.
enum WorkFactor<'a, C: Coeff> {
    Poly(ILSeries<C>),
    InvPoly(ILSeries<C>),
    Jet { series: &'a dyn JetProvider<C>, form: ILSeries<C>, shift: usize, invert: bool },
}

/// Coefficient-wise inverse of a unit one-variable jet:
/// `g_0 = 1/h_0`, `g_k = -g_0 * sum_{j=1..k} h_j g_{k-j}`.
fn invert_jet<C: Coeff>(h: &[C]) -> Result<Vec<C>> {
    let h0_inv = h[0]
        .inv()
        .map_err(|err| Error::NoLeadingTerm(format!("jet lead not invertible ({err})")))?;
    let mut g: Vec<C> = Vec::with_capacity(h.len());
    g.push(h0_inv.clone());
    for k in 1..h.len() {
        let mut acc = C::zero();
        for j in 1..=k {
            acc = acc.add(&h[j].mul(&g[k - j]));
        }
        g.push(acc.mul(&h0_inv).neg());
    }
    Ok(g)
}

/// Decompose the public factors into [`WorkFactor`]s (jet valuations are
/// probed once, up front; they do not depend on the window budget).
fn rewrite_factors<'a, C: Coeff>(factors: &[Factor<'a, C>]) -> Result<Vec<WorkFactor<'a, C>>> {
    let mut out: Vec<WorkFactor<'a, C>> = Vec::with_capacity(factors.len());
    for f in factors {
        match f {
            Factor::Poly(p) => out.push(WorkFactor::Poly(p.clone())),
            Factor::InvPoly(p) => out.push(WorkFactor::InvPoly(p.clone())),
            Factor::Jet { series, form } => out.push(WorkFactor::Jet {
                series: *series,
                form: form.clone(),
                shift: 0,
                invert: false,
            }),
            Factor::InvJet { series, form } => {
                let probe = series.jet(NU_PROBE)?;
                let nu = probe.iter().position(|c| !c.is_zero()).ok_or_else(|| {
                    Error::NoLeadingTerm(
                        "jet has no nonzero coefficient through its probe order".into(),
                    )
                })?;
                if nu > 0 {
                    let mut pow = form.clone();
                    for _ in 1..nu {
                        pow = pow.mul(form)?;
                    }
                    out.push(WorkFactor::InvPoly(pow));
                }
                out.push(WorkFactor::Jet {
                    series: *series,
                    form: form.clone(),
                    shift: nu,
                    invert: true,
                });
            }
        }
    }
    Ok(out)
}

/// Scale guard for viability arithmetic: plans whose bounds leave this
/// range fall back to the general window path.
const FAST_BOUND: i128 = (HI_INF / 2) as i128;

enum FastKind {
    Poly,
    Inv { lead: Vec<i64>, rate: i64, drops: Vec<bool>, rises: Vec<bool> },
    Jet { active: Vec<bool> },
}

/// Per-factor viable exponent data: true floors and ceilings, and the
/// derived viable box `[m, cap]` / degree range `[deg_lo, deg_cap]`.
struct FastPlan {
    kind: FastKind,
    ceil: Vec<i64>,
    m: Vec<i64>,
    cap: Vec<i64>,
    deg_lo: i64,
    deg_cap: i64,
}

/// Qualify one factor for the viability fast path, recording its true
/// per-variable exponent floors and ceilings and its true total-degree
/// range. `None` means the factor is outside the qualified class.
fn fast_plan_factor<C: Coeff>(
    factor: &WorkFactor<'_, C>,
    n: usize,
) -> Result<Option<FastPlan>> {
    let exact = |p: &ILSeries<C>| p.window_hi().iter().all(|&h| h >= HI_INF);
    match factor {
        WorkFactor::Poly(p) => {
            assert_eq!(p.nvars(), n, "factor variable arity mismatch");
            if !exact(p) {
                return Ok(None);
            }
            let mut floors = vec![i64::MAX; n];
            let mut ceils = vec![i64::MIN; n];
            let mut deg_lo = i64::MAX;
            let mut deg_hi = i64::MIN;
            for (e, _) in p.terms() {
                let mut deg: i64 = 0;
                for v in 0..n {
                    let x = e[v] as i64;
                    floors[v] = floors[v].min(x);
                    ceils[v] = ceils[v].max(x);
                    deg += x;
                }
                deg_lo = deg_lo.min(deg);
                deg_hi = deg_hi.max(deg);
            }
            Ok(Some(FastPlan {
                kind: FastKind::Poly,
                ceil: ceils,
                m: floors,
                cap: vec![0; n],
                deg_lo,
                deg_cap: deg_hi,
            }))
        }
        WorkFactor::InvPoly(p) => {
            assert_eq!(p.nvars(), n, "factor variable arity mismatch");
            if !exact(p) {
                return Ok(None);
            }
            let (lead_e, _) = p
                .lead_term()
                .ok_or_else(|| Error::Valuation("inverting the zero series".into()))?;
            let lead: Vec<i64> = lead_e.iter().map(|&x| x as i64).collect();
            let deg: i64 = lead.iter().sum();
            let mut rises = vec![false; n];
            let mut drops = vec![false; n];
            for (t, _) in p.terms() {
                let mut tdeg: i64 = 0;
                for v in 0..n {
                    let d = t[v] as i64 - lead[v];
                    tdeg += t[v] as i64;
                    if d > 0 {
                        rises[v] = true;
                    }
                    if d < 0 {
                        drops[v] = true;
                    }
                }
                if tdeg != deg {
                    // Inhomogeneous: expansion terms spread over degrees.
                    return Ok(None);
                }
            }
            if (0..n).any(|v| rises[v] && drops[v]) {
                // A variable that both rises and drops lets branch products
                // hide gross rises behind net cancellation, and the spend
                // recursion below is only a bound on gross rises.
                return Ok(None);
            }
            let rate = p.drop_rate_bound()?;
            let ceil: Vec<i64> =
                (0..n).map(|v| if rises[v] { HI_INF } else { -lead[v] }).collect();
            let m: Vec<i64> = (0..n).map(|v| -lead[v]).collect();
            Ok(Some(FastPlan {
                kind: FastKind::Inv { lead, rate, drops, rises },
                ceil,
                m,
                cap: vec![0; n],
                deg_lo: -deg,
                deg_cap: -deg,
            }))
        }
        WorkFactor::Jet { series, form, invert, .. } => {
            assert_eq!(form.nvars(), n, "factor variable arity mismatch");
            if !exact(form) {
                return Ok(None);
            }
            let mut min_deg = i64::MAX;
            for (e, _) in form.terms() {
                let mut deg: i64 = 0;
                for v in 0..n {
                    if e[v] < 0 {
                        return Ok(None);
                    }
                    deg += e[v] as i64;
                }
                if deg == 0 {
                    // Constant term: composition would reject it anyway.
                    return Ok(None);
                }
                min_deg = min_deg.min(deg);
            }
            if min_deg == i64::MAX {
                min_deg = 0; // zero form: the composition is a constant
            }
            let active = form.active_vars();
            let nu: i64 = if *invert {
                0 // the shifted, inverted series is a unit
            } else {
                let probe = series.jet(NU_PROBE)?;
                probe.iter().position(|c| !c.is_zero()).unwrap_or(0) as i64
            };
            let mut m = vec![0i64; n];
            let mut ceil = vec![0i64; n];
            for v in 0..n {
                if active[v] {
                    let min_exp =
                        form.terms().map(|(e, _)| e[v] as i64).min().unwrap_or(0);
                    m[v] = nu * min_exp;
                    ceil[v] = HI_INF;
                }
            }
            Ok(Some(FastPlan {
                kind: FastKind::Jet { active: active.clone() },
                ceil,
                m,
                cap: vec![0; n],
                deg_lo: nu * min_deg,
                deg_cap: HI_INF,
            }))
        }
    }
}

/// Viability fast path: computes the iterated residue without window
/// search when every factor is in the qualified class (exact polynomials;
/// inverses of exact *homogeneous* polynomials none of whose expansion
/// branches drops in a variable where another branch rises; jets of forms
/// with nonnegative exponents and no constant term).
///
/// For such products the region of factor exponents that can contribute to
/// the all-`-1` coefficient is provably finite and small, by two exact
/// conservation laws applied to any split `sum_j a_j = (-1, ..., -1)` of
/// true expansion terms:
///
/// * **degree**: total degrees add up to `-nvars`. Every factor has a true
///   degree floor (inverses of homogeneous polynomials sit on a single
///   degree; jets and polynomials are bounded below), so each factor's
///   degree is capped by `-nvars` minus the others' floors. In particular
///   jet orders are capped independently of any window budget.
/// * **per-variable extent**, ascending through the variables: every
///   factor has a true floor in the current variable — for inverses,
///   `-lead_v` deepened by at most `rate * sum` of the factor's own viable
///   gross rises in earlier variables, which the earlier caps bound.
///   Summing to `-1` then caps each factor from above by `-1` minus the
///   others' floors.
///
/// Factors are then built certified on boxes containing their viable
/// regions (inverse windows get exactly the viable caps, which the
/// inversion allowances cover from below; compositions use the degree cap
/// to bound the jet order), and folded keeping only exponents that can
/// still reach the target given the viable ranges of the factors to come.
/// Every stored coefficient is a true expansion coefficient, every viable
/// split survives the fold, and every surviving split is viable — so the
/// stored target coefficient *is* the residue, with no window checks left
/// to fail. An empty viable region certifies a zero residue.
///
/// Returns `Ok(None)` if some factor is outside the class or the plan
/// arithmetic leaves its guard range; the windowed path then decides.
fn viability_attempt<C: Coeff>(
    n: usize,
    factors: &[WorkFactor<'_, C>],
) -> Result<Option<C>> {
    for f in factors {
        if let WorkFactor::Poly(p) = f {
            if p.term_count() == 0 {
                return Ok(Some(C::zero())); // zero factor: zero product
            }
        }
    }
    let mut plans: Vec<FastPlan> = Vec::with_capacity(factors.len());
    for f in factors {
        match fast_plan_factor(f, n)? {
            Some(plan) => plans.push(plan),
            None => return Ok(None),
        }
    }

    let fit = |x: i128| -> Option<i64> {
        if x.abs() <= FAST_BOUND {
            Some(x as i64)
        } else {
            None
        }
    };

    // Degree caps: deg_j <= -n - sum of the other factors' degree floors.
    let total_deg: i128 = plans.iter().map(|p| p.deg_lo as i128).sum();
    for plan in plans.iter_mut() {
        let others = total_deg - plan.deg_lo as i128;
        let cap = (plan.deg_cap as i128).min(-(n as i128) - others);
        let cap = match fit(cap) {
            Some(c) => c,
            None => return Ok(None),
        };
        if cap < plan.deg_lo {
            return Ok(Some(C::zero())); // no split reaches total degree -n
        }
        plan.deg_cap = cap;
    }

    // Per-variable floors and caps, ascending: earlier caps bound the
    // gross rises that fund later drops.
    for v in 0..n {
        for plan in plans.iter_mut() {
            if let FastKind::Inv { lead, rate, drops, rises } = &plan.kind {
                if drops[v] {
                    let mut spend: i128 = 0;
                    for w in 0..v {
                        if rises[w] {
                            spend += (plan.cap[w] as i128 + lead[w] as i128).max(0);
                        }
                    }
                    let m = -(lead[v] as i128) - (*rate as i128) * spend;
                    match fit(m) {
                        Some(m) => plan.m[v] = m,
                        None => return Ok(None),
                    }
                }
            }
        }
        let total: i128 = plans.iter().map(|p| p.m[v] as i128).sum();
        for plan in plans.iter_mut() {
            let others = total - plan.m[v] as i128;
            let cap = (plan.ceil[v] as i128).min(-1 - others);
            let cap = match fit(cap) {
                Some(c) => c,
                None => return Ok(None),
            };
            if cap < plan.m[v] {
                return Ok(Some(C::zero())); // no split reaches -1 here
            }
            plan.cap[v] = cap;
        }
    }

    // Build each factor certified on a region containing its viable box.
    let mut built: Vec<(u8, ILSeries<C>, usize)> = Vec::with_capacity(factors.len());
    for (j, (f, plan)) in factors.iter().zip(plans.iter()).enumerate() {
        let series = match f {
            WorkFactor::Poly(p) => (0u8, p.clone()),
            WorkFactor::InvPoly(p) => (2u8, p.invert(&plan.cap)?),
            WorkFactor::Jet { series, form, shift, invert } => {
                let active = match &plan.kind {
                    FastKind::Jet { active, .. } => active,
                    _ => unreachable!("jet factor planned as non-jet"),
                };
                let box_need: i64 = (0..n)
                    .filter(|&v| active[v])
                    .map(|v| plan.cap[v].max(0))
                    .sum();
                let need = box_need.min(plan.deg_cap.max(0));
                if need + (*shift as i64) > (u32::MAX / 4) as i64 {
                    return Ok(None);
                }
                let raw = series.jet((need + *shift as i64) as u32)?;
                let h: Vec<C> = raw[*shift..].to_vec();
                let jet = if *invert { invert_jet(&h)? } else { h };
                (1u8, ILSeries::compose_capped(&jet, form, &plan.cap, plan.deg_cap)?)
            }
        };
        built.push((series.0, series.1, j));
    }
    built.sort_by_key(|(rank, _, _)| *rank);

    // Targeted fold: keep exponents that can still reach the all-(-1)
    // target given the viable ranges of the factors still to come.
    let m = built.len();
    let mut suf_m = vec![vec![0i64; n]; m + 1];
    let mut suf_cap = vec![vec![0i64; n]; m + 1];
    let mut suf_dlo = vec![0i64; m + 1];
    let mut suf_dcap = vec![0i64; m + 1];
    for i in (0..m).rev() {
        let plan = &plans[built[i].2];
        for v in 0..n {
            suf_m[i][v] = suf_m[i + 1][v] + plan.m[v];
            suf_cap[i][v] = suf_cap[i + 1][v] + plan.cap[v];
        }
        suf_dlo[i] = suf_dlo[i + 1] + plan.deg_lo;
        suf_dcap[i] = suf_dcap[i + 1] + plan.deg_cap;
    }
    let mut product = ILSeries::one(n);
    for (i, (_, series, _)) in built.iter().enumerate() {
        let keep_lo: Vec<i64> = (0..n).map(|v| -1 - suf_cap[i + 1][v]).collect();
        let keep_hi: Vec<i64> = (0..n).map(|v| -1 - suf_m[i + 1][v]).collect();
        let keep_deg =
            (-(n as i64) - suf_dcap[i + 1], -(n as i64) - suf_dlo[i + 1]);
        product = product.mul_for_target(series, &keep_lo, &keep_hi, keep_deg);
    }
    Ok(Some(product.stored_coeff(&vec![-1i32; n])))
}

struct FactorPlan {
    /// Lead exponent of the factor's expansion (inverted kinds).
    lead: Vec<i64>,
    /// Drop rate bound for the inversion's allowance recursion.
    rate: i64,
    /// Variables the factor involves.
    active: Vec<bool>,
    /// Jet valuation (jets; 0 otherwise).
    nu: i64,
    /// Componentwise minimum exponent of the form (jets).
    min_exp: Vec<i64>,
    /// True valuation floor per variable, filled ascending.
    lo: Vec<i64>,
    /// Requested certified output window (inexact kinds).
    hi: Vec<i64>,
    /// Window requested from composition (jets).
    in_hi: Vec<i64>,
    /// Inversion allowances per variable.
    allow: Vec<i64>,
    cum_rooms: i64,
    exact: bool,
    inverted: bool,
    is_jet: bool,
}

fn plan_factor<C: Coeff>(factor: &WorkFactor<'_, C>, n: usize) -> Result<FactorPlan> {
    let mut plan = FactorPlan {
        lead: vec![0; n],
        rate: 0,
        active: vec![false; n],
        nu: 0,
        min_exp: vec![0; n],
        lo: vec![0; n],
        hi: vec![HI_INF; n],
        in_hi: vec![HI_INF; n],
        allow: vec![0; n],
        cum_rooms: 0,
        exact: false,
        inverted: false,
        is_jet: false,
    };
    match factor {
        WorkFactor::Poly(p) => {
            assert_eq!(p.nvars(), n, "factor variable arity mismatch");
            plan.exact = true;
            plan.lo.copy_from_slice(p.window_lo());
        }
        WorkFactor::InvPoly(p) => {
            assert_eq!(p.nvars(), n, "factor variable arity mismatch");
            plan.inverted = true;
            let (e, _) = p
                .lead_term()
                .ok_or_else(|| Error::Valuation("inverting the zero series".into()))?;
            for v in 0..n {
                plan.lead[v] = e[v] as i64;
            }
            plan.rate = p.drop_rate_bound()?;
            plan.active = p.active_vars();
        }
        WorkFactor::Jet { series, form, invert, .. } => {
            assert_eq!(form.nvars(), n, "factor variable arity mismatch");
            plan.is_jet = true;
            plan.active = form.active_vars();
            for v in 0..n {
                plan.min_exp[v] = form
                    .terms()
                    .map(|(e, _)| e[v] as i64)
                    .min()
                    .unwrap_or(0);
            }
            if *invert {
                // The shifted, inverted series is a unit: valuation 0.
                plan.nu = 0;
            } else {
                let probe = series.jet(NU_PROBE)?;
                // Valuation floor 0 is always sound for an all-zero probe.
                plan.nu = probe.iter().position(|c| !c.is_zero()).unwrap_or(0) as i64;
            }
        }
    }
    Ok(plan)
}

/// Iterated residue (innermost variable first) of the product of the
/// factors, with windows chosen automatically and enlarged on demand.
pub fn iterated_residue_of_product<C: Coeff>(
    nvars: usize,
    factors: &[Factor<'_, C>],
    cfg: &BudgetConfig,
) -> Result<C> {
    assert!(nvars >= 1, "residues need at least one variable");
    let work = rewrite_factors(factors)?;
    if let Some(value) = viability_attempt(nvars, &work)? {
        return Ok(value);
    }
    let mut slack: i64 = 1;
    loop {
        match attempt(nvars, &work, slack) {
            Ok(value) => return Ok(value),
            Err(Error::WindowUnderflow { .. }) | Err(Error::JetOrderTooSmall { .. }) => {
                if slack >= cfg.max_slack {
                    return Err(Error::BudgetExceeded { cap: cfg.max_slack });
                }
                slack = (slack * 2).min(cfg.max_slack);
            }
            Err(other) => return Err(other),
        }
    }
}

fn attempt<C: Coeff>(n: usize, factors: &[WorkFactor<'_, C>], slack: i64) -> Result<C> {
    let mut plans: Vec<FactorPlan> = Vec::with_capacity(factors.len());
    for f in factors {
        plans.push(plan_factor(f, n)?);
    }

    // Ascending pass: fix valuation floors, then output windows, variable
    // by variable (later allowances consume earlier rooms).
    for v in 0..n {
        for plan in plans.iter_mut() {
            if plan.exact {
                continue; // lo already exact
            }
            if !plan.active[v] {
                plan.lo[v] = 0;
                continue;
            }
            if plan.inverted {
                plan.allow[v] = plan.rate.saturating_mul(plan.cum_rooms);
                plan.lo[v] = -plan.lead[v] - plan.allow[v];
            } else {
                plan.lo[v] = plan.nu * plan.min_exp[v];
            }
        }
        let total_lo: i64 = plans.iter().map(|p| p.lo[v]).sum();
        if total_lo > -1 {
            // The product's true valuation in this variable exceeds -1:
            // the iterated residue vanishes identically.
            return Ok(C::zero());
        }
        for plan in plans.iter_mut() {
            let inexact_here = !plan.exact && plan.active[v] && (plan.is_jet || plan.inverted);
            if !inexact_here {
                continue;
            }
            plan.hi[v] = -1 - (total_lo - plan.lo[v]) + slack;
            if plan.inverted {
                let room = (plan.hi[v] + plan.lead[v] + 2 * plan.allow[v]).max(0);
                plan.cum_rooms = plan.cum_rooms.saturating_add(room);
                plan.in_hi[v] = plan.hi[v] + 2 * plan.lead[v].max(0) + 2 * plan.allow[v] + 1;
            } else {
                plan.in_hi[v] = plan.hi[v];
            }
        }
    }

    // Build the factor series. Exact factors first keeps intermediate
    // products small and their windows tight.
    let mut built: Vec<(u8, ILSeries<C>)> = Vec::with_capacity(factors.len());
    for (f, plan) in factors.iter().zip(plans.iter()) {
        let series = match f {
            WorkFactor::Poly(p) => (0u8, p.clone()),
            WorkFactor::InvPoly(p) => (2u8, p.invert(&plan.hi)?),
            WorkFactor::Jet { series, form, shift, invert } => {
                let order: i64 = (0..n)
                    .filter(|&v| plan.active[v])
                    .map(|v| plan.in_hi[v].max(0))
                    .sum();
                let raw = series.jet(order as u32 + *shift as u32)?;
                let h: Vec<C> = raw[*shift..].to_vec();
                let jet = if *invert { invert_jet(&h)? } else { h };
                let composed = ILSeries::compose(&jet, form, &plan.in_hi)?;
                (1u8, composed)
            }
        };
        built.push(series);
    }
    built.sort_by_key(|(rank, _)| *rank);

    // Residue-targeted fold: when multiplying factor i, only exponents in
    // `[-1 - suffix_hi, -1 - suffix_lo]` (windows of factors > i summed)
    // can still reach the all-(-1) target; everything else is dropped.
    let m = built.len();
    let sat = |a: i64, b: i64| if a >= HI_INF || b >= HI_INF { HI_INF } else { a + b };
    let mut suffix_lo = vec![vec![0i64; n]; m + 1];
    let mut suffix_hi = vec![vec![0i64; n]; m + 1];
    for i in (0..m).rev() {
        for v in 0..n {
            suffix_lo[i][v] = suffix_lo[i + 1][v] + built[i].1.window_lo()[v];
            suffix_hi[i][v] = sat(suffix_hi[i + 1][v], built[i].1.window_hi()[v]);
        }
    }
    let mut product = ILSeries::one(n);
    for (i, (_, series)) in built.iter().enumerate() {
        let keep_lo: Vec<i64> = (0..n)
            .map(|v| {
                if suffix_hi[i + 1][v] >= HI_INF {
                    i64::MIN / 4
                } else {
                    -1 - suffix_hi[i + 1][v]
                }
            })
            .collect();
        let keep_hi: Vec<i64> = (0..n).map(|v| -1 - suffix_lo[i + 1][v]).collect();
        let keep_deg = (i64::MIN / 4, i64::MAX / 4);
        product = product.mul_clamped(series, &keep_lo, &keep_hi, keep_deg)?;
    }
    product.iterated_residue()
}
