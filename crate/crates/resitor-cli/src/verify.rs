//! Self-contained verification targets: each check computes both sides
//! of an identity (or a vanishing statement), reports a PASS/FAIL
//! verdict with the maximum coefficient deviation, and returns a
//! machine-readable JSON report.

use serde_json::{json, Value};

use resitor::bott::{
    genus_ci, string_check, BottTower, Stage, witten_genus_theta_route,
};
use resitor::driver::{iterated_residue_of_product, BudgetConfig, Factor};
use resitor::ilseries::ILSeries;
use resitor::qseries::QSeries;
use resitor::scalar::{Coeff, Rat, C64};
use resitor::theta::{todd_f_jet, witten_f_jet};
use resitor::toric::{
    cp2_bundle_form_prediction, cp2_form_prediction, fan_bundle_over_cp2, fan_for_tower,
    fan_hirzebruch, hirzebruch_form_prediction, toric_form_lattice_exact,
    toric_form_lattice_numeric, DegreeValue, LatticeMethod,
};
use resitor::Result as CoreResult;

use crate::json::{
    c64_abs, format_rat, qseries_c64_json, qseries_rat_json, rat_abs, rat_to_f64,
    series_c64_lines, series_rat_lines,
};
use crate::CliError;

pub struct Report {
    pub pass: bool,
    pub lines: Vec<String>,
    pub json: Value,
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn max_rat_deviation(a: &QSeries<Rat>, b: &QSeries<Rat>, order: u32) -> Rat {
    let mut dev = Rat::zero();
    for k in 0..=order {
        let d = rat_abs(&a.coeff(k).sub(&b.coeff(k)));
        if d > dev {
            dev = d;
        }
    }
    dev
}

fn max_c64_deviation(a: &QSeries<C64>, b: &QSeries<C64>, order: u32) -> f64 {
    (0..=order)
        .map(|k| c64_abs(&a.coeff(k).sub(&b.coeff(k))))
        .fold(0.0, f64::max)
}

/// The twisted double sum
/// `sum_{m,n >= 1} q^(m+n) / ((1+q^m)(1+q^n)(1+q^(m+n)))`
/// equals `sum_r sigma_1(r) q^(2r)`.  Terms with `m+n > order` cannot
/// touch coefficients through `order`, so the sum below is exact.
pub fn verify_double_sum(order: u32) -> Result<Report, CliError> {
    let minus_one = Rat::from_int(-1);
    let mut lhs: QSeries<Rat> = QSeries::truncated(order, vec![]);
    for m in 1..=i64::from(order) {
        for n in m..=(i64::from(order) - m) {
            let g1 = QSeries::geometric(m, &minus_one, order).map_err(CliError::from)?;
            let g2 = QSeries::geometric(n, &minus_one, order).map_err(CliError::from)?;
            let g3 = QSeries::geometric(m + n, &minus_one, order).map_err(CliError::from)?;
            let mut term = g1.mul(&g2).mul(&g3).mul_qpow(m + n).map_err(CliError::from)?;
            if n > m {
                // (m, n) and (n, m) contribute equally.
                term = term.scale(&Rat::from_int(2));
            }
            lhs = lhs.add(&term);
        }
    }
    let rhs = QSeries::sigma_series(1, 2, order);
    let dev = max_rat_deviation(&lhs, &rhs, order);
    let pass = dev == Rat::zero();

    let mut lines = vec![format!("twisted double sum through q^{order}:")];
    lines.extend(series_rat_lines(&lhs));
    lines.push("divisor-sum series:".to_string());
    lines.extend(series_rat_lines(&rhs));
    lines.push(format!("max coefficient deviation: {}", format_rat(&dev)));
    lines.push(verdict(pass).to_string());

    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "double-sum",
            "q_order": order,
            "lhs": qseries_rat_json(&lhs),
            "rhs": qseries_rat_json(&rhs),
            "max_deviation": format_rat(&dev),
            "pass": pass,
        }),
    })
}

/// Hirzebruch-surface toric forms against their closed-form theta
/// predictions for each `k`, plus the exact-vanishing instance where the
/// vertical degree values sum to an integer.
pub fn verify_hirzebruch_forms(
    order: u32,
    ks: &[i64],
    alphas: &[Rat; 4],
    tolerance: f64,
) -> Result<Report, CliError> {
    let alphas_f64 = [
        rat_to_f64(&alphas[0])?,
        rat_to_f64(&alphas[1])?,
        rat_to_f64(&alphas[2])?,
        rat_to_f64(&alphas[3])?,
    ];
    let deg: Vec<DegreeValue> =
        alphas.iter().map(|a| DegreeValue::Rational(a.clone())).collect();
    // Vanishing instance: replace alpha_4 by 1 - alpha_3.
    let mut deg_zero = deg.clone();
    deg_zero[3] = DegreeValue::Rational(Rat::one().sub(&alphas[2]));

    let mut lines = Vec::new();
    let mut cases = Vec::new();
    let mut pass = true;

    for &k in ks {
        let fan = fan_hirzebruch(k);
        let lattice = toric_form_lattice_numeric(&fan, &deg, order, LatticeMethod::Auto)
            .map_err(CliError::from)?;
        let predicted =
            hirzebruch_form_prediction(k, &alphas_f64, order).map_err(CliError::from)?;
        let dev = max_c64_deviation(&lattice, &predicted, order);
        let ok = dev <= tolerance;
        pass &= ok;

        lines.push(format!("k = {k}: lattice route:"));
        lines.extend(series_c64_lines(&lattice).into_iter().map(|l| format!("  {l}")));
        lines.push(format!("k = {k}: theta prediction:"));
        lines.extend(series_c64_lines(&predicted).into_iter().map(|l| format!("  {l}")));
        lines.push(format!(
            "k = {k}: max coefficient deviation {dev:.3e} (tolerance {tolerance:.1e}) {}",
            verdict(ok)
        ));

        // Vanishing instance: every coefficient must be exactly zero.
        let zero = toric_form_lattice_numeric(&fan, &deg_zero, order, LatticeMethod::Auto)
            .map_err(CliError::from)?;
        let zero_exact = (0..=order).all(|n| zero.coeff(n) == C64::new(0.0, 0.0));
        let predicted_zero =
            hirzebruch_form_prediction(k, &[alphas_f64[0], alphas_f64[1], alphas_f64[2], 1.0 - alphas_f64[2]], order)
                .map_err(CliError::from)?;
        let zero_dev = (0..=order).map(|n| c64_abs(&predicted_zero.coeff(n))).fold(0.0, f64::max);
        let zero_ok = zero_exact && zero_dev <= tolerance;
        pass &= zero_ok;
        lines.push(format!(
            "k = {k}, vertical degrees summing to an integer: lattice exactly zero: {zero_exact}, \
             |prediction| <= {tolerance:.1e}: {} {}",
            zero_dev <= tolerance,
            verdict(zero_ok)
        ));

        cases.push(json!({
            "k": k,
            "lattice": qseries_c64_json(&lattice),
            "prediction": qseries_c64_json(&predicted),
            "max_deviation": dev,
            "vanishing_instance_exactly_zero": zero_exact,
            "vanishing_prediction_max_abs": zero_dev,
            "pass": ok && zero_ok,
        }));
    }

    lines.push(verdict(pass).to_string());
    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "hirzebruch-forms",
            "q_order": order,
            "tolerance": tolerance,
            "cases": cases,
            "pass": pass,
        }),
    })
}

/// Rank-4 bundle-over-the-plane toric forms against their closed-form
/// theta predictions, exactly, for a list of twist pairs.  The untwisted
/// case must also equal the square of the projective-plane series.
pub fn verify_bundle_forms(order: u32, jks: &[(i64, i64)]) -> Result<Report, CliError> {
    let mut lines = Vec::new();
    let mut cases = Vec::new();
    let mut pass = true;

    for &(j, k) in jks {
        let fan = fan_bundle_over_cp2(j, k).map_err(CliError::from)?;
        let lattice = toric_form_lattice_exact(&fan, order, LatticeMethod::Auto)
            .map_err(CliError::from)?;
        let predicted = cp2_bundle_form_prediction(j, k, order).map_err(CliError::from)?;
        let dev = max_rat_deviation(&lattice, &predicted, order);
        let mut ok = dev == Rat::zero();

        lines.push(format!("(j, k) = ({j}, {k}): lattice route:"));
        lines.extend(series_rat_lines(&lattice).into_iter().map(|l| format!("  {l}")));
        lines.push(format!("(j, k) = ({j}, {k}): theta prediction:"));
        lines.extend(series_rat_lines(&predicted).into_iter().map(|l| format!("  {l}")));
        lines.push(format!(
            "(j, k) = ({j}, {k}): max coefficient deviation {} {}",
            format_rat(&dev),
            verdict(ok)
        ));

        if (j, k) == (0, 0) {
            let base = cp2_form_prediction(order).map_err(CliError::from)?;
            let square = base.mul(&base);
            let sq_dev = max_rat_deviation(&lattice, &square, order);
            let sq_ok = sq_dev == Rat::zero();
            ok &= sq_ok;
            lines.push(format!(
                "(0, 0) equals the square of the projective-plane series: {}",
                verdict(sq_ok)
            ));
        }
        pass &= ok;
        cases.push(json!({
            "j": j,
            "k": k,
            "lattice": qseries_rat_json(&lattice),
            "prediction": qseries_rat_json(&predicted),
            "max_deviation": format_rat(&dev),
            "pass": ok,
        }));
    }

    lines.push(verdict(pass).to_string());
    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "bundle-forms",
            "q_order": order,
            "cases": cases,
            "pass": pass,
        }),
    })
}

/// The projectivization of line bundles of degrees (1, 3, 4) plus a
/// trivial summand over the line, all degree values 1/2: the toric form
/// vanishes identically.
pub fn verify_toric_vanishing(order: u32) -> Result<Report, CliError> {
    let tower = BottTower::two_stage(1, 3, &[-1, -3, -4]).map_err(CliError::from)?;
    let fan = fan_for_tower(&tower).map_err(CliError::from)?;
    let form =
        toric_form_lattice_exact(&fan, order, LatticeMethod::Auto).map_err(CliError::from)?;
    let zero = QSeries::truncated(order, vec![]);
    let dev = max_rat_deviation(&form, &zero, order);
    let pass = dev == Rat::zero();

    let mut lines = vec!["toric form of the (1,3,4)-bundle over the line:".to_string()];
    lines.extend(series_rat_lines(&form));
    lines.push(format!("expected: identically zero through q^{order}"));
    lines.push(format!("max coefficient deviation: {}", format_rat(&dev)));
    lines.push(verdict(pass).to_string());

    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "toric-vanishing",
            "q_order": order,
            "form": qseries_rat_json(&form),
            "max_deviation": format_rat(&dev),
            "pass": pass,
        }),
    })
}

/// The two-class complete intersection of bidegrees (3,0) and (-3,2) in
/// the (1,2,3)-twisted tower: the string certificate holds and the
/// normalized Witten-type genus vanishes; the direct theta route agrees.
pub fn verify_witten_vanishing(order: u32, cfg: &BudgetConfig) -> Result<Report, CliError> {
    let tower = BottTower::twisted_milnor(&[1, 2, 3]).map_err(CliError::from)?;
    let classes = vec![vec![3, 0], vec![-3, 2]];

    let check = string_check(&tower, &classes);
    let mut lines = vec![
        format!("first Chern class even: {}", check.c1_even),
        format!(
            "first Pontryagin pushforward vanishes: {}",
            check.p1_pushforward_vanishes
        ),
    ];

    let family = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
        witten_f_jet(ord as usize, order)
    };
    let phi = genus_ci(&tower, &family, &classes, cfg).map_err(CliError::from)?;
    let zero = QSeries::truncated(order, vec![]);
    let dev = max_rat_deviation(&phi, &zero, order);
    let vanishes = dev == Rat::zero();
    lines.push("normalized Witten-type genus:".to_string());
    lines.extend(series_rat_lines(&phi));
    lines.push(format!("max coefficient deviation from zero: {}", format_rat(&dev)));

    let theta_order = order.min(6);
    let theta = witten_genus_theta_route(&tower, &classes, theta_order, cfg)
        .map_err(CliError::from)?;
    let family_small = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
        witten_f_jet(ord as usize, theta_order)
    };
    let phi_small = genus_ci(&tower, &family_small, &classes, cfg).map_err(CliError::from)?;
    let route_dev = max_rat_deviation(&theta, &phi_small, theta_order);
    let routes_agree = route_dev == Rat::zero();
    lines.push(format!(
        "direct theta route agrees through q^{theta_order}: {} (max deviation {})",
        routes_agree,
        format_rat(&route_dev)
    ));

    let pass = check.certified() && vanishes && routes_agree;
    lines.push(verdict(pass).to_string());

    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "witten-vanishing",
            "q_order": order,
            "string_certified": check.certified(),
            "genus": qseries_rat_json(&phi),
            "max_deviation": format_rat(&dev),
            "theta_route_agrees": routes_agree,
            "pass": pass,
        }),
    })
}

/// The iterated residue of `1/(u1 (u1 + u2))` depends on the variable
/// order: innermost `u1` gives 1, innermost `u2` gives 0.
pub fn verify_order_dependence(cfg: &BudgetConfig) -> Result<Report, CliError> {
    let one = Rat::one();
    let u1: ILSeries<Rat> = ILSeries::monomial(2, &[1, 0], one.clone());
    let u2: ILSeries<Rat> = ILSeries::monomial(2, &[0, 1], one.clone());
    let sum: ILSeries<Rat> =
        ILSeries::from_terms(2, [(vec![1, 0], one.clone()), (vec![0, 1], one)]);

    let first = iterated_residue_of_product(
        2,
        &[Factor::InvPoly(u1), Factor::InvPoly(sum.clone())],
        cfg,
    )
    .map_err(CliError::from)?;
    let second =
        iterated_residue_of_product(2, &[Factor::InvPoly(u2), Factor::InvPoly(sum)], cfg)
            .map_err(CliError::from)?;

    let pass = first == Rat::one() && second == Rat::zero();
    let lines = vec![
        format!("residue with the bare variable innermost: {}", format_rat(&first)),
        format!("residue with the bare variable outermost: {}", format_rat(&second)),
        "expected: 1 and 0".to_string(),
        verdict(pass).to_string(),
    ];
    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "order-dependence",
            "innermost": format_rat(&first),
            "outermost": format_rat(&second),
            "pass": pass,
        }),
    })
}

/// Small deterministic generator for reproducible random towers.
struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    fn in_range(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.next() % ((hi - lo + 1) as u64)) as i64
    }
}

fn random_tower(rng: &mut XorShift) -> BottTower {
    let nstages = rng.in_range(1, 4) as usize;
    let mut stages = Vec::new();
    for k in 0..nstages {
        let fiber_dim = rng.in_range(1, 3) as usize;
        let twists: Vec<Vec<i64>> =
            (0..fiber_dim).map(|_| (0..k).map(|_| rng.in_range(-3, 3)).collect()).collect();
        stages.push(Stage { fiber_dim, twists });
    }
    BottTower::new(stages).expect("randomly sampled shapes are valid")
}

/// The multiplicative genus with constant value 1 on projective spaces
/// evaluates to 1 on every tower.
pub fn verify_todd_one(count: u32, seed: u64, cfg: &BudgetConfig) -> Result<Report, CliError> {
    let mut rng = XorShift(seed.max(1));
    let family = |ord: u32| -> CoreResult<Vec<Rat>> { Ok(todd_f_jet(ord as usize)) };
    let mut lines = Vec::new();
    let mut pass = true;
    for i in 0..count {
        let tower = random_tower(&mut rng);
        let dims: Vec<usize> = tower.stages().iter().map(|s| s.fiber_dim).collect();
        let todd = genus_ci(&tower, &family, &[], cfg).map_err(CliError::from)?;
        let ok = todd == Rat::one();
        pass &= ok;
        lines.push(format!(
            "tower {} with fiber dimensions {:?}: value {} {}",
            i + 1,
            dims,
            format_rat(&todd),
            verdict(ok)
        ));
    }
    lines.push(verdict(pass).to_string());
    Ok(Report {
        pass,
        lines,
        json: json!({
            "check": "todd-one",
            "count": count,
            "seed": seed,
            "pass": pass,
        }),
    })
}
