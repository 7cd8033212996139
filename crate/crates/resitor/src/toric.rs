//! Complete smooth fans, degree functions, and the associated q-series
//! ("toric forms") computed by two independent routes:
//!
//! 1. **Lattice route**: the double sum over dual-lattice points `m` and
//!    fan cones `C` of `(-1)^(codim C) * prod_{rays d in C} a.c. 1/(1 -
//!    zeta_d q^(m.d))`, where each factor is the analytically continued
//!    geometric series and `zeta_d = e^(2 pi i alpha_d)` comes from the
//!    per-ray degree value.  The `m`-sum is evaluated over expanding
//!    boxes until the coefficients through the requested order stabilize
//!    twice in a row.
//!
//!    For fans built from projective-bundle towers the cone sum
//!    telescopes per lattice point into the closed form
//!    `prod_g (1 - eps_g q^(s_g)) * prod_rays a.c. 1/(1 - zeta_d q^(m.d))`
//!    with one binomial per ray group (`eps_g` the product of the group's
//!    `zeta`s, `s_g = m . (sum of the group's rays)`); this "circuit"
//!    path is used when the group structure is known and is checked
//!    against the general cone sum in tests.
//!
//! 2. **Theta route**: for tower fans, the same series is an iterated
//!    residue of a product of theta-quotient jets composed with the
//!    per-ray divisor classes — one numerator theta shifted by the ray's
//!    degree and one denominator theta per ray, normalized by the theta
//!    slope at zero.  Exact rational arithmetic when every degree value
//!    is a half period; complex floating point otherwise.
//!
//! The two routes agreeing coefficient-by-coefficient is a nontrivial
//! family of theta-function identities, exercised in the tests and the
//! acceptance suite.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Float, ToPrimitive};

use crate::bott::BottTower;
use crate::driver::{iterated_residue_of_product, BudgetConfig, Factor, JetProvider};
use crate::ilseries::ILSeries;
use crate::poly::linear_form;
use crate::qseries::QSeries;
use crate::scalar::{Coeff, Rat, C64};
use crate::theta::{r_ratio, r_ratio_alpha, theta_jet, theta_jet_alpha, theta_zero_slope, HalfShift};
use crate::{Error, Result};

/// A complete smooth fan: primitive rays, unimodular maximal cones, and
/// the face closure derived from them.  Builders attach two optional
/// extras that unlock fast paths: the circuit group structure (rays
/// partitioned per tower stage) and the divisor-class map (per-ray
/// linear forms in the tower variables) for the theta route.
#[derive(Clone, Debug)]
pub struct Fan {
    rank: usize,
    rays: Vec<Vec<i64>>,
    max_cones: Vec<Vec<usize>>,
    cones: Vec<Vec<usize>>,
    groups: Option<Vec<Vec<usize>>>,
    class_vars: usize,
    classes: Option<Vec<Vec<i64>>>,
}

fn gcd64(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `|det|` of the square matrix whose rows are the given rays, by
/// fraction-free (Bareiss) elimination in `i128`.
fn cone_det_abs(rays: &[Vec<i64>], cone: &[usize]) -> i128 {
    let r = cone.len();
    if r == 0 {
        return 1;
    }
    let mut m: Vec<Vec<i128>> =
        cone.iter().map(|&i| rays[i].iter().map(|&x| x as i128).collect()).collect();
    let mut prev: i128 = 1;
    for k in 0..r {
        let Some(p) = (k..r).find(|&i| m[i][k] != 0) else {
            return 0;
        };
        if p != k {
            m.swap(p, k);
            // a row swap flips the sign only; we return |det|
        }
        for i in (k + 1)..r {
            for j in (k + 1)..r {
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev;
            }
            m[i][k] = 0;
        }
        prev = m[k][k];
    }
    m[r - 1][r - 1].abs()
}

impl Fan {
    /// Validate and build a fan from rays and maximal cones.  Rays must
    /// be primitive nonzero vectors of length `rank`; each maximal cone
    /// must list `rank` distinct ray indices spanning a unimodular cone.
    /// The face closure (all subsets, including the empty cone) is
    /// generated here.  Completeness (the cones covering all of space)
    /// is not checked; the builders below produce complete fans by
    /// construction.
    pub fn new(rank: usize, rays: Vec<Vec<i64>>, max_cones: Vec<Vec<usize>>) -> Result<Self> {
        if rank == 0 || rank > 16 {
            return Err(Error::Invalid(format!("rank {rank} out of supported range 1..=16")));
        }
        if rays.is_empty() {
            return Err(Error::Invalid(String::from("a fan needs at least one ray")));
        }
        for (i, d) in rays.iter().enumerate() {
            if d.len() != rank {
                return Err(Error::Invalid(format!(
                    "ray {i} has {} coordinates, expected {rank}",
                    d.len()
                )));
            }
            let g = d.iter().fold(0i64, |acc, &x| gcd64(acc, x));
            if g != 1 {
                return Err(Error::Invalid(format!(
                    "ray {i} is not primitive (gcd of coordinates is {g})"
                )));
            }
        }
        if max_cones.is_empty() {
            return Err(Error::Invalid(String::from("a fan needs at least one maximal cone")));
        }
        for (c, cone) in max_cones.iter().enumerate() {
            if cone.len() != rank {
                return Err(Error::Invalid(format!(
                    "maximal cone {c} has {} rays, expected {rank}",
                    cone.len()
                )));
            }
            let set: BTreeSet<usize> = cone.iter().copied().collect();
            if set.len() != rank {
                return Err(Error::Invalid(format!("maximal cone {c} repeats a ray")));
            }
            if let Some(&bad) = cone.iter().find(|&&i| i >= rays.len()) {
                return Err(Error::Invalid(format!(
                    "maximal cone {c} references ray {bad}, but there are only {} rays",
                    rays.len()
                )));
            }
            let det = cone_det_abs(&rays, cone);
            if det != 1 {
                return Err(Error::Invalid(format!(
                    "maximal cone {c} is not unimodular (|det| = {det})"
                )));
            }
        }
        // Face closure: every subset of every maximal cone.
        let mut faces: BTreeSet<Vec<usize>> = BTreeSet::new();
        for cone in &max_cones {
            let n = cone.len();
            for mask in 0..(1u32 << n) {
                let mut face: Vec<usize> =
                    (0..n).filter(|&b| mask & (1 << b) != 0).map(|b| cone[b]).collect();
                face.sort_unstable();
                faces.insert(face);
            }
        }
        Ok(Fan {
            rank,
            rays,
            max_cones,
            cones: faces.into_iter().collect(),
            groups: None,
            class_vars: 0,
            classes: None,
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rays(&self) -> &[Vec<i64>] {
        &self.rays
    }

    pub fn max_cones(&self) -> &[Vec<usize>] {
        &self.max_cones
    }

    /// All cones of the fan (face closure of the maximal cones),
    /// including the empty cone.
    pub fn cones(&self) -> &[Vec<usize>] {
        &self.cones
    }

    /// Circuit groups (one per tower stage), if this fan came from a
    /// builder that knows them.
    pub fn groups(&self) -> Option<&[Vec<usize>]> {
        self.groups.as_deref()
    }

    /// Per-ray divisor classes as linear forms in the tower variables,
    /// if this fan came from a tower builder.
    pub fn divisor_classes(&self) -> Option<&[Vec<i64>]> {
        self.classes.as_deref()
    }

    /// Number of tower variables the divisor classes live in.
    pub fn class_vars(&self) -> usize {
        self.class_vars
    }
}

/// The fan of a projective-bundle tower.  Stage `k` of fiber dimension
/// `n_k` contributes the coordinate rays `e_(k,1) .. e_(k,n_k)` of its
/// block plus one extra ray
///
/// ```text
///   v_k = -sum_j e_(k,j) - sum_(l>k) sum_i (coefficient of u_k in x_(l,i)) e_(l,i),
/// ```
///
/// so later-stage twists tilt the earlier stage's extra ray.  Maximal
/// cones drop one ray from each stage's group; divisor classes are
/// `u_k + x_(k,j)` on `e_(k,j)` and `u_k` on `v_k`.
pub fn fan_for_tower(tower: &BottTower) -> Result<Fan> {
    let nstages = tower.nvars();
    let dims: Vec<usize> = tower.stages().iter().map(|s| s.fiber_dim).collect();
    let rank: usize = dims.iter().sum();
    let offset: Vec<usize> = {
        let mut o = vec![0usize; nstages];
        for k in 1..nstages {
            o[k] = o[k - 1] + dims[k - 1];
        }
        o
    };

    let mut rays: Vec<Vec<i64>> = Vec::new();
    let mut classes: Vec<Vec<i64>> = Vec::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();

    for k in 0..nstages {
        let mut group = Vec::new();
        // Coordinate rays of the stage block.
        for j in 0..dims[k] {
            let mut ray = vec![0i64; rank];
            ray[offset[k] + j] = 1;
            group.push(rays.len());
            rays.push(ray);
            let mut class = vec![0i64; nstages];
            class[k] = 1;
            for (l, c) in tower.stages()[k].twists[j].iter().enumerate() {
                class[l] += c;
            }
            classes.push(class);
        }
        // The extra ray, tilted by every later stage's twists.
        let mut ray = vec![0i64; rank];
        for j in 0..dims[k] {
            ray[offset[k] + j] = -1;
        }
        for l in (k + 1)..nstages {
            for (i, row) in tower.stages()[l].twists.iter().enumerate() {
                ray[offset[l] + i] -= row[k];
            }
        }
        group.push(rays.len());
        rays.push(ray);
        let mut class = vec![0i64; nstages];
        class[k] = 1;
        classes.push(class);
        groups.push(group);
    }

    // Maximal cones: drop one ray from each group (odometer over the
    // dropped index per stage).
    let mut max_cones: Vec<Vec<usize>> = Vec::new();
    let mut drop = vec![0usize; nstages];
    loop {
        let mut cone = Vec::with_capacity(rank);
        for k in 0..nstages {
            for (pos, &idx) in groups[k].iter().enumerate() {
                if pos != drop[k] {
                    cone.push(idx);
                }
            }
        }
        max_cones.push(cone);
        let mut k = 0;
        loop {
            if k == nstages {
                break;
            }
            drop[k] += 1;
            if drop[k] < groups[k].len() {
                break;
            }
            drop[k] = 0;
            k += 1;
        }
        if k == nstages {
            break;
        }
    }

    let mut fan = Fan::new(rank, rays, max_cones)?;
    fan.groups = Some(groups);
    fan.class_vars = nstages;
    fan.classes = Some(classes);
    Ok(fan)
}

/// The fan of projective `n`-space: rays `e_1 .. e_n` and `-(e_1 + ... +
/// e_n)`, every ray carrying the hyperplane class.
pub fn fan_cp(n: usize) -> Fan {
    fan_for_tower(&BottTower::cp(n)).expect("projective-space fan is always valid")
}

/// The fan of the parameter-`k` Hirzebruch surface, rays in the order
/// `e_1`, `-e_1 + k e_2`, `-e_2`, `e_2` with divisor classes `u`, `u`,
/// `v`, `v - k u`.  (Degree values passed to the lattice and theta
/// routes bind to the rays positionally in this order.)
pub fn fan_hirzebruch(k: i64) -> Fan {
    let rays = vec![vec![1, 0], vec![-1, k], vec![0, -1], vec![0, 1]];
    let max_cones = vec![vec![0, 3], vec![0, 2], vec![1, 3], vec![1, 2]];
    let mut fan = Fan::new(2, rays, max_cones).expect("Hirzebruch fan is always valid");
    fan.groups = Some(vec![vec![0, 1], vec![2, 3]]);
    fan.class_vars = 2;
    fan.classes = Some(vec![vec![1, 0], vec![1, 0], vec![0, 1], vec![-k, 1]]);
    fan
}

/// The fan of the projectivization of `O(-j) + O(-k) + O` over the
/// projective plane: six rays in rank 4 including
/// `-e_1 - e_2 + j e_3 + k e_4` and `-e_3 - e_4`.
pub fn fan_bundle_over_cp2(j: i64, k: i64) -> Result<Fan> {
    let tower = BottTower::two_stage(2, 2, &[-j, -k])?;
    fan_for_tower(&tower)
}

/// A per-ray degree value: an exact rational (half periods make the
/// whole computation exact) or a complex number.
#[derive(Clone, Debug, PartialEq)]
pub enum DegreeValue {
    Rational(Rat),
    Complex(C64),
}

impl DegreeValue {
    /// Degree values that are integers are forbidden on rays: the
    /// geometric factor `1/(1 - q^0)` would be evaluated at its pole.
    pub fn is_integral(&self) -> bool {
        match self {
            DegreeValue::Rational(r) => r.is_integer(),
            DegreeValue::Complex(c) => c.im == 0.0 && c.re == c.re.trunc(),
        }
    }

    /// True when the value is `1/2` modulo 1, i.e. `zeta = -1` exactly.
    pub fn is_half_period(&self) -> bool {
        match self {
            DegreeValue::Rational(r) => {
                use num_integer::Integer;
                let doubled = Coeff::add(r, r);
                doubled.is_integer() && doubled.numer().is_odd()
            }
            DegreeValue::Complex(_) => false,
        }
    }

    fn alpha_f64(&self) -> Result<f64> {
        match self {
            DegreeValue::Rational(r) => r
                .to_f64()
                .ok_or_else(|| Error::Invalid(String::from("degree value overflows f64"))),
            DegreeValue::Complex(_) => Err(Error::Invalid(String::from(
                "complex degree values are supported on the lattice route only",
            ))),
        }
    }

    /// `e^(2 pi i alpha)`, exact (`-1 + 0i`) for half periods.
    pub fn zeta(&self) -> Result<C64> {
        if self.is_integral() {
            return Err(Error::DegreeIntegralOnRay);
        }
        if self.is_half_period() {
            return Ok(C64::new(-1.0, 0.0));
        }
        Ok(match self {
            DegreeValue::Rational(r) => {
                let a = r
                    .to_f64()
                    .ok_or_else(|| Error::Invalid(String::from("degree value overflows f64")))?;
                C64::from_polar(1.0, 2.0 * core::f64::consts::PI * a)
            }
            DegreeValue::Complex(c) => {
                // e^(2 pi i (x + i y)) = e^(-2 pi y) e^(2 pi i x)
                let modulus = Float::exp(-2.0 * core::f64::consts::PI * c.im);
                C64::from_polar(modulus, 2.0 * core::f64::consts::PI * c.re)
            }
        })
    }
}

/// `e^(2 pi i sum_of_alphas)` for a set of rays, snapped to exactly `1`
/// or `-1` when every participating value is rational and the sum is an
/// integer or half integer.  This exactness is what makes "the group
/// unit is 1" tests (and the resulting vanishing theorems) exact even in
/// the floating-point lane.
fn group_unit(values: &[DegreeValue], members: &[usize]) -> C64 {
    let mut rational_sum = Some(Rat::zero());
    let mut float_sum = C64::new(0.0, 0.0);
    for &i in members {
        match &values[i] {
            DegreeValue::Rational(r) => {
                rational_sum = rational_sum.map(|s| Coeff::add(&s, r));
                float_sum = float_sum.add(&C64::new(r.to_f64().unwrap_or(f64::NAN), 0.0));
            }
            DegreeValue::Complex(c) => {
                rational_sum = None;
                float_sum = float_sum.add(c);
            }
        }
    }
    if let Some(s) = rational_sum {
        use num_integer::Integer;
        if s.is_integer() {
            return C64::new(1.0, 0.0);
        }
        let doubled = Coeff::add(&s, &s);
        if doubled.is_integer() && doubled.numer().is_odd() {
            return C64::new(-1.0, 0.0);
        }
        let a = s.to_f64().unwrap_or(f64::NAN);
        return C64::from_polar(1.0, 2.0 * core::f64::consts::PI * a);
    }
    let modulus = Float::exp(-2.0 * core::f64::consts::PI * float_sum.im);
    C64::from_polar(modulus, 2.0 * core::f64::consts::PI * float_sum.re)
}

/// Check a degree assignment against a fan: one value per ray, none
/// integral.
pub fn validate_degrees(fan: &Fan, deg: &[DegreeValue]) -> Result<()> {
    if deg.len() != fan.rays.len() {
        return Err(Error::Invalid(format!(
            "need {} degree values (one per ray), got {}",
            fan.rays.len(),
            deg.len()
        )));
    }
    if deg.iter().any(DegreeValue::is_integral) {
        return Err(Error::DegreeIntegralOnRay);
    }
    Ok(())
}

fn dot(m: &[i64], ray: &[i64]) -> i64 {
    m.iter().zip(ray).map(|(a, b)| a * b).sum()
}

/// The analytically continued sum over one cone's lattice points at a
/// fixed dual vector `m`: the product over the cone's rays of
/// `a.c. 1/(1 - zeta_i q^(m . d_i))`.  The empty cone gives 1.
pub fn cone_term<C: Coeff>(
    fan: &Fan,
    cone: &[usize],
    m: &[i64],
    zetas: &[C],
    order: u32,
) -> Result<QSeries<C>> {
    let mut out = QSeries::constant(C::one());
    for &i in cone {
        out = out.mul(&QSeries::geometric(dot(m, &fan.rays[i]), &zetas[i], order)?);
    }
    Ok(out)
}

/// One lattice point's contribution via the alternating cone sum.
fn cone_sum_term<C: Coeff>(
    fan: &Fan,
    m: &[i64],
    zetas: &[C],
    order: u32,
) -> Result<QSeries<C>> {
    let minus_one = C::zero().sub(&C::one());
    let mut total = QSeries::truncated(order, vec![]);
    for cone in &fan.cones {
        let t = cone_term(fan, cone, m, zetas, order)?;
        let codim = fan.rank - cone.len();
        let signed = if codim % 2 == 1 { t.scale(&minus_one) } else { t };
        total = total.add(&signed);
    }
    Ok(total)
}

struct CircuitGroup<C> {
    members: Vec<usize>,
    unit: C,
}

/// One lattice point's contribution via the telescoped circuit form
/// `prod_g (1 - unit_g q^(s_g)) * prod_i geometric(m.d_i, zeta_i)`.
/// Returns `None` when the term provably cannot touch coefficients
/// through `order` (its q-valuation bound exceeds `order`) or when a
/// group factor is exactly zero.
fn circuit_term<C: Coeff>(
    fan: &Fan,
    groups: &[CircuitGroup<C>],
    m: &[i64],
    zetas: &[C],
    order: u32,
) -> Result<Option<QSeries<C>>> {
    let dots: Vec<i64> = fan.rays.iter().map(|d| dot(m, d)).collect();
    let s: Vec<i64> = groups
        .iter()
        .map(|g| g.members.iter().map(|&i| dots[i]).sum::<i64>())
        .collect();

    // A group factor (1 - unit q^0) with unit exactly 1 kills the term.
    for (g, &sg) in groups.iter().zip(&s) {
        if sg == 0 && g.unit == C::one() {
            return Ok(Some(QSeries::truncated(order, vec![])));
        }
    }

    // Valuation bound: every negative-exponent geometric factor has
    // valuation |m.d|; every negative-shift binomial costs |s_g|.
    let val: i64 = dots.iter().map(|&d| (-d).max(0)).sum::<i64>()
        + s.iter().map(|&sg| sg.min(0)).sum::<i64>();
    if val > order as i64 {
        return Ok(None);
    }

    let extra: i64 = s.iter().map(|&sg| (-sg).max(0)).sum();
    let work_order = order + u32::try_from(extra).expect("shift budget fits in u32");
    let mut p = QSeries::constant(C::one());
    for (i, &d) in dots.iter().enumerate() {
        p = p.mul(&QSeries::geometric(d, &zetas[i], work_order)?);
    }
    for (g, &sg) in groups.iter().zip(&s) {
        if sg == 0 {
            p = p.scale(&C::one().sub(&g.unit));
        } else {
            p = p.sub(&p.mul_qpow(sg)?.scale(&g.unit));
        }
    }
    Ok(Some(p.truncate(order)))
}

/// Sum a per-lattice-point evaluator over expanding boxes `[-B, B]^rank`
/// until the coefficients through `order` agree (per the supplied
/// predicate) for two consecutive enlargements (B grows in steps of
/// `max(order, 1)`, capped at eight steps).  Terms are added in a fixed
/// lexicographic order so floating-point runs are reproducible.  The
/// exact lane compares coefficients bit-for-bit; the floating-point lane
/// allows cancellation noise far below any working tolerance.
fn stabilized_sum<C: Coeff>(
    rank: usize,
    order: u32,
    mut term: impl FnMut(&[i64]) -> Result<Option<QSeries<C>>>,
    agree: impl Fn(&C, &C) -> bool,
) -> Result<QSeries<C>> {
    let step = i64::from(order.max(1));
    let cap = 8 * step;
    let mut total = QSeries::truncated(order, vec![]);
    let mut covered: i64 = -1;
    let mut prev: Option<Vec<C>> = None;
    let mut agreements = 0u32;

    loop {
        let b = (covered.max(0) + step).min(cap);
        // Walk the box [-b, b]^rank, keeping only points outside the
        // already-covered radius.
        let mut m = vec![-b; rank];
        loop {
            let norm = m.iter().map(|x| x.abs()).max().unwrap_or(0);
            if norm > covered {
                if let Some(t) = term(&m)? {
                    total = total.add(&t);
                }
            }
            let mut k = 0;
            loop {
                if k == rank {
                    break;
                }
                m[k] += 1;
                if m[k] <= b {
                    break;
                }
                m[k] = -b;
                k += 1;
            }
            if k == rank {
                break;
            }
        }
        covered = b;

        let snapshot: Vec<C> = (0..=order).map(|k| total.coeff(k)).collect();
        let stable = prev
            .as_ref()
            .is_some_and(|p| p.iter().zip(&snapshot).all(|(a, b)| agree(a, b)));
        if stable {
            agreements += 1;
            if agreements == 2 {
                return Ok(total);
            }
        } else {
            agreements = 0;
        }
        prev = Some(snapshot);

        if covered >= cap {
            return Err(Error::NotStabilized { cap });
        }
    }
}

/// Which evaluation strategy the lattice route uses for each lattice
/// point.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeMethod {
    /// Circuit form when the fan carries group structure, cone sum
    /// otherwise.
    Auto,
    /// Always the alternating sum over all cones.
    ConeSum,
    /// The telescoped per-group binomial form (requires group data).
    Circuit,
}

fn resolve_method(fan: &Fan, method: LatticeMethod) -> Result<bool> {
    match method {
        LatticeMethod::ConeSum => Ok(false),
        LatticeMethod::Circuit => {
            if fan.groups.is_some() {
                Ok(true)
            } else {
                Err(Error::Invalid(String::from(
                    "circuit evaluation needs the fan's ray-group structure (builder fans only)",
                )))
            }
        }
        LatticeMethod::Auto => Ok(fan.groups.is_some()),
    }
}

/// Exact lattice route with every degree value equal to `1/2` (so every
/// `zeta` is exactly `-1` and the whole computation stays rational).
pub fn toric_form_lattice_exact(
    fan: &Fan,
    order: u32,
    method: LatticeMethod,
) -> Result<QSeries<Rat>> {
    let minus_one = Rat::zero().sub(&Rat::one());
    let zetas = vec![minus_one; fan.rays.len()];
    let exact_agree = |a: &Rat, b: &Rat| a == b;
    if resolve_method(fan, method)? {
        let groups: Vec<CircuitGroup<Rat>> = fan
            .groups
            .as_ref()
            .expect("resolved method implies groups")
            .iter()
            .map(|members| CircuitGroup {
                members: members.clone(),
                unit: if members.len() % 2 == 0 {
                    Rat::one()
                } else {
                    Rat::zero().sub(&Rat::one())
                },
            })
            .collect();
        stabilized_sum(
            fan.rank,
            order,
            |m| circuit_term(fan, &groups, m, &zetas, order),
            exact_agree,
        )
    } else {
        stabilized_sum(
            fan.rank,
            order,
            |m| cone_sum_term(fan, m, &zetas, order).map(Some),
            exact_agree,
        )
    }
}

/// Agreement predicate for the floating-point lattice lane: equal up to
/// accumulated cancellation noise, far below any verification tolerance.
fn c64_agree(a: &C64, b: &C64) -> bool {
    let scale = 1.0 + Float::abs(a.re) + Float::abs(a.im) + Float::abs(b.re) + Float::abs(b.im);
    Float::abs(a.re - b.re) + Float::abs(a.im - b.im) <= 1e-11 * scale
}

/// Floating-point lattice route for arbitrary non-integral degree
/// values.  Group units are snapped to exact `1` or `-1` whenever the
/// participating values are rational and sum to an integer or half
/// integer, so the vanishing cases come out exactly zero.
pub fn toric_form_lattice_numeric(
    fan: &Fan,
    deg: &[DegreeValue],
    order: u32,
    method: LatticeMethod,
) -> Result<QSeries<C64>> {
    validate_degrees(fan, deg)?;
    let zetas: Vec<C64> = deg.iter().map(DegreeValue::zeta).collect::<Result<_>>()?;
    if resolve_method(fan, method)? {
        let groups: Vec<CircuitGroup<C64>> = fan
            .groups
            .as_ref()
            .expect("resolved method implies groups")
            .iter()
            .map(|members| CircuitGroup {
                members: members.clone(),
                unit: group_unit(deg, members),
            })
            .collect();
        stabilized_sum(
            fan.rank,
            order,
            |m| circuit_term(fan, &groups, m, &zetas, order),
            c64_agree,
        )
    } else {
        stabilized_sum(
            fan.rank,
            order,
            |m| cone_sum_term(fan, m, &zetas, order).map(Some),
            c64_agree,
        )
    }
}

fn require_classes(fan: &Fan) -> Result<(usize, &[Vec<i64>])> {
    match &fan.classes {
        Some(c) => Ok((fan.class_vars, c)),
        None => Err(Error::Invalid(String::from(
            "theta route needs the fan's divisor-class map (builder fans only)",
        ))),
    }
}

/// Theta route, exact lane (every degree value `1/2`): the iterated
/// residue of the product over rays of
///
/// ```text
///   T(l_i; 1/2) * W0 / ( T(l_i; 0) * T(0; 1/2) ),
/// ```
///
/// where `l_i` is the ray's divisor class, `T` the rational theta jet at
/// the given half shift, and `W0` the slope of the odd theta at zero.
pub fn toric_form_theta_exact(fan: &Fan, q_order: u32, cfg: &BudgetConfig) -> Result<QSeries<Rat>> {
    let (nvars, classes) = require_classes(fan)?;
    let half = move |ord: u32| -> Result<Vec<QSeries<Rat>>> {
        Ok(theta_jet(HalfShift::Half, ord as usize, q_order))
    };
    let zero = move |ord: u32| -> Result<Vec<QSeries<Rat>>> {
        Ok(theta_jet(HalfShift::Zero, ord as usize, q_order))
    };

    let forms: Vec<ILSeries<QSeries<Rat>>> =
        classes.iter().map(|l| linear_form(nvars, l)).collect();
    let mut factors: Vec<Factor<'_, QSeries<Rat>>> = Vec::new();
    for f in &forms {
        factors.push(Factor::Jet { series: &half, form: f.clone() });
        factors.push(Factor::InvJet { series: &zero, form: f.clone() });
    }
    let raw = iterated_residue_of_product(nvars, &factors, cfg)?;

    // Per-ray normalization W0 / T(0; 1/2).
    let t0_half = theta_jet(HalfShift::Half, 0, q_order)
        .into_iter()
        .next()
        .expect("order-0 jet always has one entry");
    let unit = theta_zero_slope(q_order).mul(&t0_half.invert()?);
    let mut out = raw;
    for _ in 0..classes.len() {
        out = out.mul(&unit);
    }
    Ok(out)
}

struct AlphaThetaJets {
    alpha: f64,
    q_order: u32,
}

impl JetProvider<QSeries<C64>> for AlphaThetaJets {
    fn jet(&self, order: u32) -> Result<Vec<QSeries<C64>>> {
        Ok(theta_jet_alpha(self.alpha, order as usize, self.q_order))
    }
}

/// Theta route, floating-point lane: per ray `i` with degree `alpha_i`,
/// the numerator theta jet is taken at shift `-alpha_i` and the result
/// is normalized by `W0 / T(0; -alpha_i)` per ray.  Complex degree
/// values are not supported here.
pub fn toric_form_theta_numeric(
    fan: &Fan,
    deg: &[DegreeValue],
    q_order: u32,
    cfg: &BudgetConfig,
) -> Result<QSeries<C64>> {
    validate_degrees(fan, deg)?;
    let (nvars, classes) = require_classes(fan)?;
    let alphas: Vec<f64> = deg.iter().map(DegreeValue::alpha_f64).collect::<Result<_>>()?;

    let zero = move |ord: u32| -> Result<Vec<QSeries<C64>>> {
        Ok(theta_jet(HalfShift::Zero, ord as usize, q_order)
            .into_iter()
            .map(|s| s.map(C64::from_rational))
            .collect())
    };
    let numerators: Vec<AlphaThetaJets> = alphas
        .iter()
        .map(|&a| AlphaThetaJets { alpha: -a, q_order })
        .collect();

    let forms: Vec<ILSeries<QSeries<C64>>> =
        classes.iter().map(|l| linear_form(nvars, l)).collect();
    let mut factors: Vec<Factor<'_, QSeries<C64>>> = Vec::new();
    for (i, f) in forms.iter().enumerate() {
        factors.push(Factor::Jet { series: &numerators[i], form: f.clone() });
        factors.push(Factor::InvJet { series: &zero, form: f.clone() });
    }
    let raw = iterated_residue_of_product(nvars, &factors, cfg)?;

    let slope = theta_zero_slope(q_order).map(C64::from_rational);
    let mut out = raw;
    for &a in &alphas {
        let t0 = theta_jet_alpha(-a, 0, q_order)
            .into_iter()
            .next()
            .expect("order-0 jet always has one entry");
        out = out.mul(&slope).mul(&t0.invert()?);
    }
    Ok(out)
}

/// Closed-form prediction for the projective-plane toric form with all
/// degrees `1/2`: `(3/2) R_2(1/2) - (1/2) R_3(0)` in normalized
/// theta-derivative ratios, which expands to `1/4 + 6q + 6q^2 + ...`.
pub fn cp2_form_prediction(q_order: u32) -> Result<QSeries<Rat>> {
    let r2 = r_ratio(HalfShift::Half, 2, q_order)?;
    let r3 = r_ratio(HalfShift::Zero, 3, q_order)?;
    Ok(r2.scale(&Rat::from_ratio(3, 2)).sub(&r3.scale(&Rat::from_ratio(1, 2))))
}

/// Closed-form prediction for the Hirzebruch-surface toric form with
/// degree values `alpha = (a1, a2, a3, a4)` bound to the rays in the
/// [`fan_hirzebruch`] order:
///
/// ```text
///   [R_1(-a3) + R_1(-a4)] [R_1(-a1) + R_1(-a2)] + (k/2) [R_2(-a3) - R_2(-a4)]
/// ```
pub fn hirzebruch_form_prediction(k: i64, alphas: &[f64; 4], q_order: u32) -> Result<QSeries<C64>> {
    let r1: Vec<QSeries<C64>> = alphas
        .iter()
        .map(|&a| r_ratio_alpha(-a, 1, q_order))
        .collect::<Result<_>>()?;
    let r2_3 = r_ratio_alpha(-alphas[2], 2, q_order)?;
    let r2_4 = r_ratio_alpha(-alphas[3], 2, q_order)?;
    let half_k = C64::from_ratio(k, 2);
    Ok(r1[2]
        .add(&r1[3])
        .mul(&r1[0].add(&r1[1]))
        .add(&r2_3.sub(&r2_4).scale(&half_k)))
}

/// Closed-form prediction for the toric form of the projectivized
/// `O(-j) + O(-k) + O` bundle over the projective plane with all degrees
/// `1/2`:
///
/// ```text
///   [(3/2) R_2(1/2) - (1/2) R_3(0)]^2
///   + (j^2 + k^2 - j k) [ R_2(1/2)^2/4 + (5/24) R_4(1/2)
///       - (7/12) R_3(0) R_2(1/2) - (1/24) R_5(0) + (1/6) R_3(0)^2 ].
/// ```
pub fn cp2_bundle_form_prediction(j: i64, k: i64, q_order: u32) -> Result<QSeries<Rat>> {
    let r2 = r_ratio(HalfShift::Half, 2, q_order)?;
    let r3 = r_ratio(HalfShift::Zero, 3, q_order)?;
    let r4 = r_ratio(HalfShift::Half, 4, q_order)?;
    let r5 = r_ratio(HalfShift::Zero, 5, q_order)?;

    let base = r2.scale(&Rat::from_ratio(3, 2)).sub(&r3.scale(&Rat::from_ratio(1, 2)));
    let square = base.mul(&base);

    let bracket = r2
        .mul(&r2)
        .scale(&Rat::from_ratio(1, 4))
        .add(&r4.scale(&Rat::from_ratio(5, 24)))
        .sub(&r3.mul(&r2).scale(&Rat::from_ratio(7, 12)))
        .sub(&r5.scale(&Rat::from_ratio(1, 24)))
        .add(&r3.mul(&r3).scale(&Rat::from_ratio(1, 6)));

    let coeff = Rat::from_int(j * j + k * k - j * k);
    Ok(square.add(&bracket.scale(&coeff)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rat(n: i64, d: u64) -> Rat {
        Rat::from_ratio(n, d)
    }

    /// Sum of odd divisors of `n` — the independently derived
    /// coefficient formula for the projective-plane toric form, whose
    /// series is `1/4 + 6 sum_n (odd-divisor-sum of n) q^n`.
    fn odd_divisor_sum(n: u32) -> i64 {
        (1..=n).filter(|d| n % d == 0 && d % 2 == 1).map(i64::from).sum()
    }

    fn cp2_reference(order: u32) -> QSeries<Rat> {
        let mut coeffs = vec![rat(1, 4)];
        for n in 1..=order {
            coeffs.push(rat(6 * odd_divisor_sum(n), 1));
        }
        QSeries::truncated(order, coeffs)
    }

    #[test]
    fn fan_validation_catches_bad_input() {
        // Non-primitive ray.
        assert!(Fan::new(2, vec![vec![2, 0], vec![0, 1]], vec![vec![0, 1]]).is_err());
        // Non-unimodular cone.
        assert!(Fan::new(
            2,
            vec![vec![1, 0], vec![1, 2]],
            vec![vec![0, 1]],
        )
        .is_err());
        // Wrong cone size.
        assert!(Fan::new(2, vec![vec![1, 0], vec![0, 1]], vec![vec![0]]).is_err());
    }

    #[test]
    fn projective_plane_fan_shape() {
        let fan = fan_cp(2);
        assert_eq!(fan.rank(), 2);
        assert_eq!(fan.rays(), &[vec![1, 0], vec![0, 1], vec![-1, -1]]);
        assert_eq!(fan.max_cones().len(), 3);
        assert_eq!(fan.cones().len(), 7); // empty + 3 rays + 3 walls
        assert_eq!(fan.divisor_classes().unwrap(), &[vec![1], vec![1], vec![1]]);
    }

    #[test]
    fn hirzebruch_fan_matches_tower_fan() {
        // The bespoke ray order differs, but the fan and classes agree
        // as sets with the generic tower construction.
        let a = fan_hirzebruch(2);
        let b = fan_for_tower(&BottTower::hirzebruch(2)).unwrap();
        let mut pairs_a: Vec<(Vec<i64>, Vec<i64>)> = a
            .rays()
            .iter()
            .cloned()
            .zip(a.divisor_classes().unwrap().iter().cloned())
            .collect();
        let mut pairs_b: Vec<(Vec<i64>, Vec<i64>)> = b
            .rays()
            .iter()
            .cloned()
            .zip(b.divisor_classes().unwrap().iter().cloned())
            .collect();
        pairs_a.sort();
        pairs_b.sort();
        assert_eq!(pairs_a, pairs_b);
        assert!(a.rays().contains(&vec![-1, 2]));
    }

    #[test]
    fn cone_term_oracles() {
        let fan = fan_cp(2);
        let minus_one = rat(-1, 1);
        let zetas = vec![minus_one; 3];
        // Empty cone: the constant 1.
        let t = cone_term(&fan, &[], &[5, -3], &zetas, 4).unwrap();
        assert_eq!(t.coeff(0), Rat::one());
        assert!(t.is_exact_poly());
        // Full cone {e1, e2} at m = 0: (1/(1+1))^2 = 1/4.
        let t = cone_term(&fan, &[0, 1], &[0, 0], &zetas, 4).unwrap();
        assert_eq!(t.coeff(0), rat(1, 4));
        // Ray cone {e1} at m = (-1, 0): continuation q - q^2 + q^3 - ...
        let t = cone_term(&fan, &[0], &[-1, 0], &zetas, 4).unwrap();
        assert_eq!(t.coeff(0), Rat::zero());
        assert_eq!(t.coeff(1), Rat::one());
        assert_eq!(t.coeff(2), rat(-1, 1));
        assert_eq!(t.coeff(3), Rat::one());
    }

    #[test]
    fn alternating_signs_are_load_bearing() {
        // At m = 0 the signed cone sum gives the constant 1/4; dropping
        // the (-1)^codim signs gives 13/4 instead.
        let fan = fan_cp(2);
        let zetas = vec![rat(-1, 1); 3];
        let signed = cone_sum_term(&fan, &[0, 0], &zetas, 0).unwrap();
        assert_eq!(signed.coeff(0), rat(1, 4));
        let mut unsigned = QSeries::truncated(0, vec![]);
        for cone in fan.cones() {
            unsigned = unsigned.add(&cone_term(&fan, cone, &[0, 0], &zetas, 0).unwrap());
        }
        assert_eq!(unsigned.coeff(0), rat(13, 4));
    }

    #[test]
    fn projective_plane_lattice_form_matches_reference() {
        let fan = fan_cp(2);
        let f = toric_form_lattice_exact(&fan, 5, LatticeMethod::Circuit).unwrap();
        let want = cp2_reference(5);
        for k in 0..=5 {
            assert_eq!(f.coeff(k), want.coeff(k), "q^{k}");
        }
    }

    #[test]
    fn circuit_and_cone_sum_paths_agree() {
        let fan = fan_cp(2);
        let a = toric_form_lattice_exact(&fan, 4, LatticeMethod::Circuit).unwrap();
        let b = toric_form_lattice_exact(&fan, 4, LatticeMethod::ConeSum).unwrap();
        for k in 0..=4 {
            assert_eq!(a.coeff(k), b.coeff(k), "q^{k}");
        }

        let fan = fan_hirzebruch(2);
        let deg: Vec<DegreeValue> = [0.25f64, 0.2, 1.0 / 7.0, 2.0 / 7.0]
            .iter()
            .map(|&a| DegreeValue::Complex(C64::new(a, 0.0)))
            .collect();
        let a = toric_form_lattice_numeric(&fan, &deg, 3, LatticeMethod::Circuit).unwrap();
        let b = toric_form_lattice_numeric(&fan, &deg, 3, LatticeMethod::ConeSum).unwrap();
        for k in 0..=3 {
            let d = a.coeff(k).sub(&b.coeff(k));
            assert!(
                (d.re * d.re + d.im * d.im) < 1e-20,
                "q^{k}: circuit {:?} vs cone sum {:?}",
                a.coeff(k),
                b.coeff(k)
            );
        }
    }

    #[test]
    fn hirzebruch_exact_lane_vanishes() {
        // With every degree 1/2 the vertical ray group has unit
        // (+1, shift 0), so the whole form is exactly zero — the
        // half-period instance of "alpha_3 + alpha_4 integral implies
        // both sides vanish".
        let fan = fan_hirzebruch(3);
        let f = toric_form_lattice_exact(&fan, 4, LatticeMethod::Circuit).unwrap();
        for k in 0..=4 {
            assert_eq!(f.coeff(k), Rat::zero(), "q^{k}");
        }
        let g = toric_form_lattice_exact(&fan, 2, LatticeMethod::ConeSum).unwrap();
        for k in 0..=2 {
            assert_eq!(g.coeff(k), Rat::zero(), "q^{k}");
        }
    }

    #[test]
    fn numeric_lattice_vanishes_exactly_when_vertical_degrees_sum_to_integer() {
        let fan = fan_hirzebruch(2);
        let deg = vec![
            DegreeValue::Rational(rat(1, 3)),
            DegreeValue::Rational(rat(1, 5)),
            DegreeValue::Rational(rat(1, 7)),
            DegreeValue::Rational(rat(6, 7)),
        ];
        let f = toric_form_lattice_numeric(&fan, &deg, 4, LatticeMethod::Circuit).unwrap();
        for k in 0..=4 {
            assert_eq!(f.coeff(k), C64::new(0.0, 0.0), "q^{k} must vanish exactly");
        }
    }

    #[test]
    fn integral_degree_on_a_ray_is_rejected() {
        let fan = fan_cp(2);
        let deg = vec![
            DegreeValue::Rational(Rat::one()),
            DegreeValue::Rational(rat(1, 2)),
            DegreeValue::Rational(rat(1, 2)),
        ];
        assert!(matches!(
            toric_form_lattice_numeric(&fan, &deg, 2, LatticeMethod::Auto),
            Err(Error::DegreeIntegralOnRay)
        ));
    }

    #[test]
    fn theta_route_matches_lattice_on_projective_plane() {
        let cfg = BudgetConfig::default();
        let fan = fan_cp(2);
        let qord = 3u32;
        let theta = toric_form_theta_exact(&fan, qord, &cfg).unwrap();
        let lattice = toric_form_lattice_exact(&fan, qord, LatticeMethod::Circuit).unwrap();
        let closed = cp2_form_prediction(qord).unwrap();
        let want = cp2_reference(qord);
        for k in 0..=qord {
            assert_eq!(theta.coeff(k), want.coeff(k), "theta q^{k}");
            assert_eq!(lattice.coeff(k), want.coeff(k), "lattice q^{k}");
            assert_eq!(closed.coeff(k), want.coeff(k), "closed form q^{k}");
        }
    }

    #[test]
    fn theta_route_is_the_half_period_genus() {
        // With every degree 1/2 the toric form of a tower fan equals the
        // normalized elliptic genus computed through the genus driver.
        use crate::theta::elliptic_half_f_jet;
        let cfg = BudgetConfig::default();
        let qord = 2u32;
        for tower in [BottTower::cp(2), BottTower::hirzebruch(1)] {
            let fan = fan_for_tower(&tower).unwrap();
            let via_theta = toric_form_theta_exact(&fan, qord, &cfg).unwrap();
            let family = move |ord: u32| -> Result<Vec<QSeries<Rat>>> {
                elliptic_half_f_jet(ord as usize, qord)
            };
            let via_genus = crate::bott::genus_ci(&tower, &family, &[], &cfg).unwrap();
            for k in 0..=qord {
                assert_eq!(via_theta.coeff(k), via_genus.coeff(k), "q^{k}");
            }
        }
    }

    #[test]
    fn hirzebruch_numeric_form_matches_prediction() {
        let k = 1i64;
        let qord = 2u32;
        let fan = fan_hirzebruch(k);
        let alphas = [1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0, 2.0 / 7.0];
        let deg: Vec<DegreeValue> = [rat(1, 3), rat(1, 5), rat(1, 7), rat(2, 7)]
            .into_iter()
            .map(DegreeValue::Rational)
            .collect();
        let lattice = toric_form_lattice_numeric(&fan, &deg, qord, LatticeMethod::Circuit).unwrap();
        let predicted = hirzebruch_form_prediction(k, &alphas, qord).unwrap();
        for n in 0..=qord {
            let d = lattice.coeff(n).sub(&predicted.coeff(n));
            let err = Float::sqrt(d.re * d.re + d.im * d.im);
            assert!(
                err < 1e-8,
                "q^{n}: lattice {:?} vs predicted {:?}",
                lattice.coeff(n),
                predicted.coeff(n)
            );
        }
    }

    #[test]
    fn bundle_prediction_at_zero_twists_is_the_square() {
        let qord = 3u32;
        let square = cp2_bundle_form_prediction(0, 0, qord).unwrap();
        let base = cp2_form_prediction(qord).unwrap();
        let expect = base.mul(&base);
        for k in 0..=qord {
            assert_eq!(square.coeff(k), expect.coeff(k), "q^{k}");
        }
    }

    #[test]
    fn bundle_lattice_form_matches_prediction_at_zero_twists() {
        let fan = fan_bundle_over_cp2(0, 0).unwrap();
        let qord = 2u32;
        let lattice = toric_form_lattice_exact(&fan, qord, LatticeMethod::Circuit).unwrap();
        let predicted = cp2_bundle_form_prediction(0, 0, qord).unwrap();
        for k in 0..=qord {
            assert_eq!(lattice.coeff(k), predicted.coeff(k), "q^{k}");
        }
    }

    #[test]
    fn projectivized_sum_over_the_line_vanishes() {
        // Fiber degrees (1, 3, 4) over CP^1, all degrees 1/2: the fiber
        // group has four rays summing to zero, so its unit is +1 and
        // every lattice term dies — the vanishing-theorem instance.
        let tower = BottTower::two_stage(1, 3, &[-1, -3, -4]).unwrap();
        let fan = fan_for_tower(&tower).unwrap();
        assert_eq!(fan.rank(), 4);
        assert_eq!(fan.rays().len(), 6);
        let f = toric_form_lattice_exact(&fan, 2, LatticeMethod::Circuit).unwrap();
        for k in 0..=2 {
            assert_eq!(f.coeff(k), Rat::zero(), "q^{k}");
        }
    }

    #[test]
    fn degree_value_classification() {
        assert!(DegreeValue::Rational(Rat::one()).is_integral());
        assert!(DegreeValue::Rational(rat(-2, 1)).is_integral());
        assert!(!DegreeValue::Rational(rat(1, 2)).is_integral());
        assert!(DegreeValue::Rational(rat(1, 2)).is_half_period());
        assert!(DegreeValue::Rational(rat(-3, 2)).is_half_period());
        assert!(!DegreeValue::Rational(rat(1, 3)).is_half_period());
        let z = DegreeValue::Rational(rat(3, 2)).zeta().unwrap();
        assert_eq!(z, C64::new(-1.0, 0.0));
    }
}
