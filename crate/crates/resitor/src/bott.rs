//! Iterated projective-bundle towers: cohomology presentation, normal-form
//! reduction, intersection pairings by two independent routes, tangent
//! roots, characteristic classes, rigidity certificates for complete
//! intersections, and genus evaluation through the residue driver.
//!
//! A tower is a sequence of stages.  Stage `k` (1-based) is a projective
//! bundle of fiber dimension `n_k` over the part below it, and contributes
//! one generator `u_k` of the cohomology ring together with one relation
//!
//! ```text
//!     f_k  =  u_k * prod_{j=1..n_k} (u_k + x_{kj}),
//! ```
//!
//! where each twist `x_{kj}` is an integer linear form in `u_1 .. u_{k-1}`
//! (so stage 1 always has `f_1 = u_1^{n_1 + 1}`).  The cohomology ring is
//! the polynomial ring modulo `(f_1, .., f_n)`; a basis is given by the
//! monomials with `e_k <= n_k`, and the pairing against the fundamental
//! class reads off the coefficient of `u_1^{n_1} ... u_n^{n_n}` in normal
//! form.  The same pairing is computed analytically as an iterated residue
//! of `p / (f_1 ... f_n)` , expanded innermost-variable-first; the two
//! routes are kept separate deliberately so they can check each other.
//!
//! The stable tangent bundle splits into line bundles whose first Chern
//! classes ("roots") are, per stage, `u_k` once plus `u_k + x_{kj}` for
//! each `j`; their product over all stages equals `f_1 ... f_n`, which is
//! what makes the residue pairing work.
//!
//! A complete intersection inside the tower is cut out by classes
//! `l_1 .. l_m` (integer linear forms).  For a multiplicative genus with
//! characteristic power series `f(x) = x + O(x^2)`, the genus of the
//! complete intersection is the iterated residue of
//!
//! ```text
//!     prod_s f(l_s)  /  prod_roots f(r),
//! ```
//!
//! which this module assembles from jet factors and feeds to the driver.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use alloc::collections::BTreeMap;

use crate::driver::{iterated_residue_of_product, BudgetConfig, Factor, JetProvider};
use crate::ilseries::ILSeries;
use crate::poly::linear_form;
use crate::qseries::QSeries;
use crate::scalar::{Coeff, Rat};
use crate::theta::{theta_jet, theta_zero_slope, HalfShift};
use crate::{Error, Result};

/// One projective-bundle stage of a tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    /// Fiber dimension `n_k >= 1`.
    pub fiber_dim: usize,
    /// One twist row per fiber dimension; row `j` lists the integer
    /// coefficients of `x_{kj}` on `u_1 .. u_{k-1}` (so every row of the
    /// first stage is empty).
    pub twists: Vec<Vec<i64>>,
}

/// A validated tower of projective-bundle stages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BottTower {
    stages: Vec<Stage>,
}

impl BottTower {
    /// Validate and build a tower.  Stage `k` (1-based) must have
    /// `fiber_dim >= 1` and exactly `fiber_dim` twist rows of length
    /// `k - 1`.
    pub fn new(stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Invalid(String::from("a tower needs at least one stage")));
        }
        for (k, st) in stages.iter().enumerate() {
            if st.fiber_dim == 0 {
                return Err(Error::Invalid(format!(
                    "stage {} has fiber dimension 0; every stage must fiber in at least CP^1",
                    k + 1
                )));
            }
            if st.twists.len() != st.fiber_dim {
                return Err(Error::Invalid(format!(
                    "stage {} needs {} twist rows, got {}",
                    k + 1,
                    st.fiber_dim,
                    st.twists.len()
                )));
            }
            for row in &st.twists {
                if row.len() != k {
                    return Err(Error::Invalid(format!(
                        "stage {} twist rows must have length {}, got {}",
                        k + 1,
                        k,
                        row.len()
                    )));
                }
            }
        }
        Ok(BottTower { stages })
    }

    /// Projective space `CP^n` as a single stage.
    pub fn cp(n: usize) -> Self {
        BottTower::new(vec![Stage { fiber_dim: n, twists: vec![vec![]; n] }])
            .expect("single projective stage is always valid")
    }

    /// The Hirzebruch surface of parameter `k`: a `CP^1`-bundle over
    /// `CP^1` with one twist `x_{21} = -k u_1`.
    pub fn hirzebruch(k: i64) -> Self {
        BottTower::two_stage(1, 1, &[-k]).expect("two CP^1 stages are always valid")
    }

    /// Two-stage tower with fiber dimensions `n1`, `n2` and stage-two
    /// twists `x_{2j} = c_j u_1` given by `twist_coeffs` (length `n2`).
    pub fn two_stage(n1: usize, n2: usize, twist_coeffs: &[i64]) -> Result<Self> {
        if twist_coeffs.len() != n2 {
            return Err(Error::Invalid(format!(
                "need {} stage-two twist coefficients, got {}",
                n2,
                twist_coeffs.len()
            )));
        }
        BottTower::new(vec![
            Stage { fiber_dim: n1, twists: vec![vec![]; n1] },
            Stage { fiber_dim: n2, twists: twist_coeffs.iter().map(|&c| vec![c]).collect() },
        ])
    }

    /// Projectivized sum of line bundles of degrees `-i_1, .., -i_m` over
    /// `CP^m` (a twisted analogue of the Milnor hypersurface setting):
    /// two stages of equal fiber dimension `m` with `x_{2j} = -i_j u_1`.
    pub fn twisted_milnor(degrees: &[i64]) -> Result<Self> {
        let m = degrees.len();
        if m == 0 {
            return Err(Error::Invalid(String::from("need at least one fiber degree")));
        }
        let neg: Vec<i64> = degrees.iter().map(|&d| -d).collect();
        BottTower::two_stage(m, m, &neg)
    }

    /// Number of stages = number of ring generators.
    pub fn nvars(&self) -> usize {
        self.stages.len()
    }

    /// Complex dimension = sum of fiber dimensions.
    pub fn dim(&self) -> usize {
        self.stages.iter().map(|s| s.fiber_dim).sum()
    }

    /// The stages, in order.
    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// The twist row `x_{kj}` as a full-width coefficient vector
    /// (`k`, `j` zero-based here).
    fn twist_coeffs(&self, k: usize, j: usize) -> Vec<i64> {
        let mut out = vec![0i64; self.nvars()];
        out[..k].copy_from_slice(&self.stages[k].twists[j]);
        out
    }

    /// The stage-`k` relation `f_k = u_k prod_j (u_k + x_{kj})`
    /// (`k` zero-based).
    pub fn relation<C: Coeff>(&self, k: usize) -> ILSeries<C> {
        let n = self.nvars();
        let mut out = crate::poly::variable(n, k);
        for j in 0..self.stages[k].fiber_dim {
            let mut coeffs = self.twist_coeffs(k, j);
            coeffs[k] += 1;
            out = out.mul(&linear_form(n, &coeffs)).expect("polynomial product");
        }
        out
    }

    /// All relations `f_1 .. f_n`.
    pub fn relations<C: Coeff>(&self) -> Vec<ILSeries<C>> {
        (0..self.nvars()).map(|k| self.relation(k)).collect()
    }

    /// First Chern classes of the line-bundle summands of the stable
    /// tangent bundle: per stage `k`, the form `u_k` once plus
    /// `u_k + x_{kj}` for each `j`.  Their product equals the product of
    /// all relations.
    pub fn tangent_roots<C: Coeff>(&self) -> Vec<ILSeries<C>> {
        let n = self.nvars();
        let mut out = Vec::new();
        for k in 0..n {
            out.push(crate::poly::variable(n, k));
            for j in 0..self.stages[k].fiber_dim {
                let mut coeffs = self.twist_coeffs(k, j);
                coeffs[k] += 1;
                out.push(linear_form(n, &coeffs));
            }
        }
        out
    }

    /// Exponent vector of the top-degree basis monomial
    /// `u_1^{n_1} .. u_n^{n_n}`.
    pub fn top_monomial(&self) -> Vec<i32> {
        self.stages.iter().map(|s| s.fiber_dim as i32).collect()
    }
}

/// Reduce a polynomial to the monomial basis with `e_k <= n_k`, using the
/// relations as rewrite rules `u_k^{n_k+1} -> -(f_k - u_k^{n_k+1})`.
/// Terms are processed from the lexicographically largest exponent vector
/// read highest-variable-first; every rewrite strictly lowers that order,
/// so the loop terminates.
pub fn normal_form<C: Coeff>(tower: &BottTower, p: &ILSeries<C>) -> ILSeries<C> {
    let n = tower.nvars();
    assert_eq!(p.nvars(), n, "polynomial must live on the tower's variables");
    let fiber: Vec<i32> = tower.top_monomial();

    // Tails  f_k - u_k^{n_k+1}  as term lists.
    let mut tails: Vec<Vec<(Vec<i32>, C)>> = Vec::with_capacity(n);
    for k in 0..n {
        let f: ILSeries<C> = tower.relation(k);
        let mut head = vec![0i32; n];
        head[k] = fiber[k] + 1;
        let tail: Vec<(Vec<i32>, C)> = f
            .terms()
            .filter(|(e, _)| *e != head.as_slice())
            .map(|(e, c)| (e.to_vec(), c.clone()))
            .collect();
        tails.push(tail);
    }

    let rev = |e: &[i32]| -> Vec<i32> { e.iter().rev().copied().collect() };

    let mut work: BTreeMap<Vec<i32>, C> = BTreeMap::new();
    for (e, c) in p.terms() {
        assert!(e.iter().all(|&x| x >= 0), "normal form expects a polynomial, not a Laurent series");
        work.insert(rev(e), c.clone());
    }
    let mut done: BTreeMap<Vec<i32>, C> = BTreeMap::new();

    while let Some((re, c)) = work.pop_last() {
        if c.is_zero() {
            continue;
        }
        let e = rev(&re);
        match (0..n).find(|&k| e[k] > fiber[k]) {
            None => {
                let entry = done.entry(re).or_insert_with(C::zero);
                *entry = entry.add(&c);
            }
            Some(k) => {
                // e = e' + (n_k + 1) at slot k;  u^e == -u^{e'} * tail_k.
                let mut rest = e.clone();
                rest[k] -= fiber[k] + 1;
                for (t, tc) in &tails[k] {
                    let shifted: Vec<i32> = rest.iter().zip(t).map(|(a, b)| a + b).collect();
                    let key = rev(&shifted);
                    let entry = work.entry(key).or_insert_with(C::zero);
                    *entry = entry.sub(&c.mul(tc));
                }
            }
        }
    }

    ILSeries::from_terms(n, done.into_iter().map(|(re, c)| (rev(&re), c)))
}

/// Pairing of a polynomial class against the fundamental class, read as
/// the coefficient of the top basis monomial in normal form.
pub fn pairing_normal_form<C: Coeff>(tower: &BottTower, p: &ILSeries<C>) -> C {
    let nf = normal_form(tower, p);
    let top = tower.top_monomial();
    let c = nf
        .terms()
        .find(|(e, _)| *e == top.as_slice())
        .map(|(_, c)| c.clone());
    c.unwrap_or_else(C::zero)
}

/// Pairing of a polynomial class against the fundamental class, computed
/// as the iterated residue of `p / (f_1 .. f_n)` expanded
/// innermost-variable-first.
pub fn pairing_residue<C: Coeff>(
    tower: &BottTower,
    p: &ILSeries<C>,
    cfg: &BudgetConfig,
) -> Result<C> {
    let rels: Vec<ILSeries<C>> = tower.relations();
    let mut factors: Vec<Factor<'_, C>> = vec![Factor::Poly(p.clone())];
    for f in &rels {
        factors.push(Factor::InvPoly(f.clone()));
    }
    iterated_residue_of_product(tower.nvars(), &factors, cfg)
}

/// First Chern class of a complete intersection cut out by the given
/// integer linear forms (empty slice = the ambient tower itself):
/// sum of tangent roots minus sum of the cutting classes.
pub fn c1<C: Coeff>(tower: &BottTower, classes: &[Vec<i64>]) -> ILSeries<C> {
    let n = tower.nvars();
    let mut out = ILSeries::zero(n);
    for r in tower.tangent_roots::<C>() {
        out = out.add(&r).expect("polynomial sum");
    }
    for l in classes {
        out = out.sub(&linear_form(n, l)).expect("polynomial sum");
    }
    out
}

/// First Pontryagin class of a complete intersection: sum of squared
/// tangent roots minus sum of squared cutting classes (not reduced).
pub fn p1<C: Coeff>(tower: &BottTower, classes: &[Vec<i64>]) -> ILSeries<C> {
    let n = tower.nvars();
    let mut out = ILSeries::zero(n);
    for r in tower.tangent_roots::<C>() {
        out = out.add(&r.mul(&r).expect("square")).expect("polynomial sum");
    }
    for l in classes {
        let lf: ILSeries<C> = linear_form(n, l);
        out = out.sub(&lf.mul(&lf).expect("square")).expect("polynomial sum");
    }
    out
}

/// Outcome of the string-condition certificate for a complete
/// intersection inside a tower.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StringCheck {
    /// All coefficients of `c1` of the intersection are even (spin).
    pub c1_even: bool,
    /// `p1 * prod_s l_s` reduces to zero in the ambient ring, which
    /// pushes the first Pontryagin obstruction forward to zero.
    pub p1_pushforward_vanishes: bool,
}

impl StringCheck {
    /// Both halves of the certificate hold.
    pub fn certified(&self) -> bool {
        self.c1_even && self.p1_pushforward_vanishes
    }
}

fn rat_is_even_integer(r: &Rat) -> bool {
    use num_integer::Integer;
    r.is_integer() && r.numer().is_even()
}

/// Run the string-condition certificate: evenness of `c1` and vanishing
/// of the pushed-forward `p1` in the ambient ring.
pub fn string_check(tower: &BottTower, classes: &[Vec<i64>]) -> StringCheck {
    let n = tower.nvars();
    let c: ILSeries<Rat> = c1(tower, classes);
    let c1_even = c.terms().all(|(_, coeff)| rat_is_even_integer(coeff));

    let mut push: ILSeries<Rat> = p1(tower, classes);
    for l in classes {
        push = push.mul(&linear_form(n, l)).expect("polynomial product");
    }
    let p1_pushforward_vanishes = normal_form(tower, &push).is_zero_stored();

    StringCheck { c1_even, p1_pushforward_vanishes }
}

/// Exhaustive search for two-class complete intersections
/// `(d1 u + d2 v, d3 u + d4 v)` in a two-stage tower with stage-two
/// twists `x_{2j} = -i_j u` that satisfy the quadratic string system
///
/// ```text
///   (A)  n1 + 1 + sum i_j^2 = d1^2 + d3^2
///   (B)  n2 + 1             = d2^2 + d4^2
///   (C)  d1 d2 + d3 d4 + sum i_j = 0
/// ```
///
/// (matching the `u^2`, `v^2`, and `u v` coefficients of `p1`).  Results
/// are canonicalized: classes ordered, first nonzero entry of the first
/// class positive.  All `|d| <= bound` are scanned.
pub fn solve_string_pairs(
    n1: usize,
    n2: usize,
    fiber_degrees: &[i64],
    bound: i64,
) -> Vec<[[i64; 2]; 2]> {
    let sum_i: i64 = fiber_degrees.iter().sum();
    let sum_i2: i64 = fiber_degrees.iter().map(|i| i * i).sum();
    let a_target = n1 as i64 + 1 + sum_i2;
    let b_target = n2 as i64 + 1;

    let mut seen: Vec<[[i64; 2]; 2]> = Vec::new();
    for d1 in -bound..=bound {
        for d3 in d1..=bound {
            if d1 * d1 + d3 * d3 != a_target {
                continue;
            }
            for d2 in -bound..=bound {
                for d4 in -bound..=bound {
                    if d2 * d2 + d4 * d4 != b_target {
                        continue;
                    }
                    if d1 * d2 + d3 * d4 + sum_i != 0 {
                        continue;
                    }
                    let mut pair = [[d1, d2], [d3, d4]];
                    pair.sort();
                    // Overall sign flips per class leave the system
                    // invariant; canonicalize each class.
                    for cls in pair.iter_mut() {
                        let lead = if cls[0] != 0 { cls[0] } else { cls[1] };
                        if lead < 0 {
                            cls[0] = -cls[0];
                            cls[1] = -cls[1];
                        }
                    }
                    pair.sort();
                    if !seen.contains(&pair) {
                        seen.push(pair);
                    }
                }
            }
        }
    }
    seen.sort();
    seen
}

/// Exhaustive search for single-class complete intersections
/// `d1 u + d2 v` in a two-stage tower with stage-two twists
/// `x_{2j} = -i_j u` that pass the full string certificate (evenness of
/// `c1` and vanishing pushed-forward `p1`, checked in the actual ring so
/// relations can cancel what the naive coefficient system cannot).
pub fn solve_string_single(
    n1: usize,
    n2: usize,
    fiber_degrees: &[i64],
    bound: i64,
) -> Result<Vec<[i64; 2]>> {
    let neg: Vec<i64> = fiber_degrees.iter().map(|&d| -d).collect();
    let tower = BottTower::two_stage(n1, n2, &neg)?;
    let mut out = Vec::new();
    for d1 in 0..=bound {
        for d2 in -bound..=bound {
            if d1 == 0 && d2 <= 0 {
                continue; // canonical sign; skip the zero class
            }
            let classes = vec![vec![d1, d2]];
            if string_check(&tower, &classes).certified() {
                out.push([d1, d2]);
            }
        }
    }
    Ok(out)
}

/// Genus of a complete intersection inside a tower, for the
/// multiplicative genus whose characteristic power series `f(x) = x +
/// O(x^2)` is supplied as a jet provider.  Computed as the iterated
/// residue of `prod_s f(l_s) / prod_roots f(r)`.
pub fn genus_ci<C: Coeff>(
    tower: &BottTower,
    family: &dyn JetProvider<C>,
    classes: &[Vec<i64>],
    cfg: &BudgetConfig,
) -> Result<C> {
    let n = tower.nvars();
    let roots: Vec<ILSeries<C>> = tower.tangent_roots();
    let class_forms: Vec<ILSeries<C>> = classes.iter().map(|l| linear_form(n, l)).collect();

    let mut factors: Vec<Factor<'_, C>> = Vec::new();
    for lf in &class_forms {
        factors.push(Factor::Jet { series: family, form: lf.clone() });
    }
    for r in &roots {
        factors.push(Factor::InvJet { series: family, form: r.clone() });
    }
    iterated_residue_of_product(n, &factors, cfg)
}

/// The Witten genus of a complete intersection, computed directly from
/// odd theta jets instead of through a normalized characteristic series:
///
/// ```text
///   W0^(#roots - #classes) * ItRes[ prod_s T(l_s) / prod_r T(r) ],
/// ```
///
/// where `T` is the rational part of the odd theta function and `W0` its
/// slope at zero.  This is an independent route that must agree with
/// [`genus_ci`] run on the normalized theta family.
pub fn witten_genus_theta_route(
    tower: &BottTower,
    classes: &[Vec<i64>],
    q_order: u32,
    cfg: &BudgetConfig,
) -> Result<QSeries<Rat>> {
    let n = tower.nvars();
    let roots: Vec<ILSeries<QSeries<Rat>>> = tower.tangent_roots();
    let class_forms: Vec<ILSeries<QSeries<Rat>>> =
        classes.iter().map(|l| linear_form(n, l)).collect();

    let provider = move |order: u32| -> Result<Vec<QSeries<Rat>>> {
        Ok(theta_jet(HalfShift::Zero, order as usize, q_order))
    };

    let mut factors: Vec<Factor<'_, QSeries<Rat>>> = Vec::new();
    for lf in &class_forms {
        factors.push(Factor::Jet { series: &provider, form: lf.clone() });
    }
    for r in &roots {
        factors.push(Factor::InvJet { series: &provider, form: r.clone() });
    }
    let raw = iterated_residue_of_product(n, &factors, cfg)?;

    // Relative to the slope-normalized series, each denominator theta is
    // short one factor of the slope and each numerator theta carries one
    // too many, so the correction is slope^(#roots - #classes).
    let balance = roots.len() as i64 - classes.len() as i64;
    let slope = theta_zero_slope(q_order);
    let mut out = raw;
    if balance >= 0 {
        for _ in 0..balance {
            out = out.mul(&slope);
        }
    } else {
        let inv = slope.invert()?;
        for _ in 0..(-balance) {
            out = out.mul(&inv);
        }
    }
    Ok(out)
}
