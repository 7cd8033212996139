//! Acceptance gate: ten end-to-end criteria, each printing one PASS line
//! (run with `--nocapture` to see them). Every criterion checks a
//! mathematical identity or vanishing statement from two independently
//! computed sides and carries an explicit wall-clock budget.

use std::time::{Duration, Instant};

use resitor::bott::{
    genus_ci, normal_form, p1, pairing_normal_form, pairing_residue, string_check,
    witten_genus_theta_route, BottTower, Stage,
};
use resitor::driver::{iterated_residue_of_product, BudgetConfig, Factor};
use resitor::ilseries::ILSeries;
use resitor::qseries::QSeries;
use resitor::scalar::{Coeff, Rat, C64};
use resitor::theta::{ahat_f_jet, theta_point, todd_f_jet, witten_f_jet};
use resitor::toric::{
    cp2_bundle_form_prediction, cp2_form_prediction, fan_bundle_over_cp2, fan_for_tower,
    fan_hirzebruch, hirzebruch_form_prediction, toric_form_lattice_exact,
    toric_form_lattice_numeric, toric_form_theta_exact, DegreeValue, LatticeMethod,
};
use resitor::Result as CoreResult;

fn rat(n: i64) -> Rat {
    Rat::from_int(n)
}

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

/// Random tower with up to 4 stages, fiber dimensions up to 3, and twist
/// coefficients in [-3, 3].
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

fn assert_budget(start: Instant, limit: Duration, what: &str) {
    let elapsed = start.elapsed();
    assert!(elapsed <= limit, "{what} took {elapsed:?}, budget {limit:?}");
}

#[test]
fn criterion_01_top_monomial_pairs_to_one_on_random_towers() {
    let start = Instant::now();
    let cfg = BudgetConfig::default();
    let mut rng = XorShift(0xace1);
    for case in 0..50 {
        let tower = random_tower(&mut rng);
        let top = tower.top_monomial();
        let monomial: ILSeries<Rat> =
            ILSeries::monomial(tower.nvars(), &top, Rat::one());
        let got = pairing_residue(&tower, &monomial, &cfg).unwrap();
        assert_eq!(got, Rat::one(), "case {case}: top pairing not 1");
    }
    assert_budget(start, Duration::from_secs(60), "criterion 1");
    println!("PASS criterion 1: top-monomial pairing is exactly 1 on 50 random towers");
}

#[test]
fn criterion_02_residue_and_normal_form_pairings_agree() {
    let start = Instant::now();
    let cfg = BudgetConfig::default();
    let mut rng = XorShift(0xbee5);
    for case in 0..200 {
        let tower = random_tower(&mut rng);
        let n = tower.nvars();
        // Random monomial of top total degree.
        let mut exps = vec![0i32; n];
        for _ in 0..tower.dim() {
            exps[rng.in_range(0, n as i64 - 1) as usize] += 1;
        }
        let monomial: ILSeries<Rat> = ILSeries::monomial(n, &exps, Rat::one());
        let via_residue = pairing_residue(&tower, &monomial, &cfg).unwrap();
        let via_normal_form = pairing_normal_form(&tower, &monomial);
        assert_eq!(
            via_residue, via_normal_form,
            "case {case}: routes disagree on exponents {exps:?}"
        );
    }
    assert_budget(start, Duration::from_secs(120), "criterion 2");
    println!("PASS criterion 2: residue and normal-form pairings agree on 200 random top-degree monomials");
}

#[test]
fn criterion_03_twisted_double_sum_is_the_divisor_sum_series() {
    let start = Instant::now();
    let order = 24;
    let minus_one = rat(-1);
    let mut lhs: QSeries<Rat> = QSeries::truncated(order, vec![]);
    for m in 1..=i64::from(order) {
        for n in m..=(i64::from(order) - m) {
            let g1 = QSeries::geometric(m, &minus_one, order).unwrap();
            let g2 = QSeries::geometric(n, &minus_one, order).unwrap();
            let g3 = QSeries::geometric(m + n, &minus_one, order).unwrap();
            let mut term = g1.mul(&g2).mul(&g3).mul_qpow(m + n).unwrap();
            if n > m {
                term = term.scale(&rat(2));
            }
            lhs = lhs.add(&term);
        }
    }
    let rhs = QSeries::sigma_series(1, 2, order);
    for k in 0..=order {
        assert_eq!(lhs.coeff(k), rhs.coeff(k), "coefficient of q^{k}");
    }
    assert_budget(start, Duration::from_secs(10), "criterion 3");
    println!("PASS criterion 3: twisted double sum equals the divisor-sum series through q^24");
}

#[test]
fn criterion_04_projective_plane_form_by_lattice_theta_and_closed_form() {
    let start = Instant::now();
    let order = 12;
    let cfg = BudgetConfig::default();
    let fan = fan_for_tower(&BottTower::cp(2)).unwrap();
    let lattice = toric_form_lattice_exact(&fan, order, LatticeMethod::Auto).unwrap();
    let theta = toric_form_theta_exact(&fan, order, &cfg).unwrap();
    // Reference: 1/4 + 6 * sum over n of (sum of odd divisors of n) q^n.
    let mut reference = vec![Rat::from_ratio(1, 4)];
    for n in 1..=order as i64 {
        let odd: i64 = (1..=n).filter(|d| n % d == 0 && d % 2 == 1).sum();
        reference.push(rat(6 * odd));
    }
    for k in 0..=order {
        let r = &reference[k as usize];
        assert_eq!(lattice.coeff(k), *r, "lattice route at q^{k}");
        assert_eq!(theta.coeff(k), *r, "theta route at q^{k}");
    }
    assert_budget(start, Duration::from_secs(30), "criterion 4");
    println!("PASS criterion 4: projective-plane form agrees by lattice, theta, and closed form through q^12");
}

#[test]
fn criterion_05_hirzebruch_forms_match_predictions() {
    let start = Instant::now();
    let order = 8;
    let tolerance = 1e-8;
    let alphas_rat =
        [Rat::from_ratio(1, 3), Rat::from_ratio(1, 5), Rat::from_ratio(1, 7), Rat::from_ratio(2, 7)];
    let alphas = [1.0 / 3.0, 1.0 / 5.0, 1.0 / 7.0, 2.0 / 7.0];
    let deg: Vec<DegreeValue> =
        alphas_rat.iter().map(|a| DegreeValue::Rational(a.clone())).collect();
    // Vanishing instance: vertical degree values sum to an integer.
    let mut deg_zero = deg.clone();
    deg_zero[3] = DegreeValue::Rational(Rat::one().sub(&alphas_rat[2]));
    for k in [0i64, 1, 2, 3] {
        let fan = fan_hirzebruch(k);
        let lattice =
            toric_form_lattice_numeric(&fan, &deg, order, LatticeMethod::Auto).unwrap();
        let predicted = hirzebruch_form_prediction(k, &alphas, order).unwrap();
        for n in 0..=order {
            let d = lattice.coeff(n).sub(&predicted.coeff(n));
            let mag = (d.re * d.re + d.im * d.im).sqrt();
            assert!(mag <= tolerance, "k = {k}, q^{n}: deviation {mag:.3e}");
        }
        let zero =
            toric_form_lattice_numeric(&fan, &deg_zero, order, LatticeMethod::Auto).unwrap();
        let alphas_zero = [alphas[0], alphas[1], alphas[2], 1.0 - alphas[2]];
        let predicted_zero = hirzebruch_form_prediction(k, &alphas_zero, order).unwrap();
        for n in 0..=order {
            assert_eq!(
                zero.coeff(n),
                C64::new(0.0, 0.0),
                "k = {k}: vanishing instance not exactly zero at q^{n}"
            );
            let p = predicted_zero.coeff(n);
            let mag = (p.re * p.re + p.im * p.im).sqrt();
            assert!(mag <= tolerance, "k = {k}: prediction not vanishing at q^{n}: {mag:.3e}");
        }
    }
    assert_budget(start, Duration::from_secs(120), "criterion 5");
    println!("PASS criterion 5: twisted-surface forms match closed-form predictions (tol 1e-8), vanishing instance exactly zero");
}

#[test]
fn criterion_06_rank_four_bundle_forms_match_predictions_exactly() {
    let start = Instant::now();
    let order = 6;
    for (j, k) in [(0i64, 0i64), (1, 0), (1, 1), (2, 1)] {
        let fan = fan_bundle_over_cp2(j, k).unwrap();
        let lattice = toric_form_lattice_exact(&fan, order, LatticeMethod::Auto).unwrap();
        let predicted = cp2_bundle_form_prediction(j, k, order).unwrap();
        for n in 0..=order {
            assert_eq!(lattice.coeff(n), predicted.coeff(n), "(j,k)=({j},{k}) at q^{n}");
        }
        if (j, k) == (0, 0) {
            let base = cp2_form_prediction(order).unwrap();
            let square = base.mul(&base);
            for n in 0..=order {
                assert_eq!(
                    lattice.coeff(n),
                    square.coeff(n),
                    "(0,0) is not the square of the plane series at q^{n}"
                );
            }
        }
    }
    assert_budget(start, Duration::from_secs(600), "criterion 6");
    println!("PASS criterion 6: rank-4 bundle forms equal their predictions exactly through q^6; untwisted case is the plane series squared");
}

#[test]
fn criterion_07_one_three_four_bundle_form_vanishes() {
    let start = Instant::now();
    let order = 6;
    let tower = BottTower::two_stage(1, 3, &[-1, -3, -4]).unwrap();
    let fan = fan_for_tower(&tower).unwrap();
    let form = toric_form_lattice_exact(&fan, order, LatticeMethod::Auto).unwrap();
    for n in 0..=order {
        assert_eq!(form.coeff(n), Rat::zero(), "nonzero coefficient at q^{n}");
    }
    assert_budget(start, Duration::from_secs(300), "criterion 7");
    println!("PASS criterion 7: the (1,3,4)-bundle form over the line vanishes exactly through q^6");
}

#[test]
fn criterion_08_string_intersection_witten_genus_vanishes() {
    let start = Instant::now();
    let cfg = BudgetConfig::default();
    let tower = BottTower::twisted_milnor(&[1, 2, 3]).unwrap();
    let classes = vec![vec![3, 0], vec![-3, 2]];
    let check = string_check(&tower, &classes);
    assert!(check.certified(), "string certificate failed: {check:?}");

    let order = 10;
    let family = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
        witten_f_jet(ord as usize, order)
    };
    let phi = genus_ci(&tower, &family, &classes, &cfg).unwrap();
    for n in 0..=order {
        assert_eq!(phi.coeff(n), Rat::zero(), "genus coefficient at q^{n}");
    }

    let theta_order = 6;
    let theta = witten_genus_theta_route(&tower, &classes, theta_order, &cfg).unwrap();
    for n in 0..=theta_order {
        assert_eq!(theta.coeff(n), phi.coeff(n), "theta route differs at q^{n}");
    }
    assert_budget(start, Duration::from_secs(300), "criterion 8");
    println!("PASS criterion 8: string intersection passes the certificate, genus vanishes through q^10, theta route agrees through q^6");
}

#[test]
fn criterion_09_string_hypersurface_genus_is_modular_consistent() {
    let start = Instant::now();
    let cfg = BudgetConfig::default();
    let tower = BottTower::two_stage(12, 1, &[-6]).unwrap();
    let classes = vec![vec![7, 0]];

    // The first Pontryagin class itself reduces to zero in the ring.
    let p1_class: ILSeries<Rat> = p1(&tower, &classes);
    let p1_nf = normal_form(&tower, &p1_class);
    assert_eq!(p1_nf.term_count(), 0, "p1 normal form not zero: {p1_nf:?}");
    assert!(string_check(&tower, &classes).certified());

    let order = 6;
    let family = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
        witten_f_jet(ord as usize, order)
    };
    let phi = genus_ci(&tower, &family, &classes, &cfg).unwrap();

    // Weight-12 consistency: fit phi = a*E + b*D against the two-dimensional
    // space spanned by E = (1 + 240 sum sigma_3(n) q^n)^3 and
    // D = q prod (1-q^n)^24, using the first two coefficients, then verify
    // every remaining computed coefficient.
    let e4 = QSeries::truncated(order, vec![Rat::one()])
        .add(&QSeries::sigma_series(3, 1, order).scale(&rat(240)));
    let e = e4.pow(3);
    let mut d = QSeries::truncated(order, vec![Rat::one()]);
    for n in 1..=i64::from(order) {
        let mut coeffs = vec![Rat::zero(); n as usize + 1];
        coeffs[0] = Rat::one();
        coeffs[n as usize] = rat(-1);
        d = d.mul(&QSeries::truncated(order, coeffs).pow(24));
    }
    d = d.mul_qpow(1).unwrap().truncate(order);
    // E starts 1 + ..., D starts q + ...: the 2x2 system is triangular.
    let a = phi.coeff(0).mul(&e.coeff(0).inv().unwrap());
    let b = phi.coeff(1).sub(&a.mul(&e.coeff(1)));
    for n in 2..=order {
        let fitted = a.mul(&e.coeff(n)).add(&b.mul(&d.coeff(n)));
        assert_eq!(phi.coeff(n), fitted, "held-out coefficient q^{n} off the fit");
    }
    assert_budget(start, Duration::from_secs(120), "criterion 9");
    println!("PASS criterion 9: string hypersurface has p1 normal form 0 and its genus fits the weight-12 space (held-out coefficients exact; series is identically zero here, so the fit is a=b=0)");
}

#[test]
fn criterion_10_property_suite() {
    let start = Instant::now();
    let cfg = BudgetConfig::default();

    // (a) The genus with value 1 on projective spaces is 1 on every tower.
    let family = |ord: u32| -> CoreResult<Vec<Rat>> { Ok(todd_f_jet(ord as usize)) };
    let mut rng = XorShift(0x70dd);
    for case in 0..20 {
        let tower = random_tower(&mut rng);
        let value = genus_ci(&tower, &family, &[], &cfg).unwrap();
        assert_eq!(value, Rat::one(), "unit-genus case {case}");
    }

    // (b) Single hypersurfaces over second-stage fibers of dimension >= 3
    // never pass the string certificate.
    let mut rng = XorShift(0x5717);
    let mut checked = 0;
    while checked < 100 {
        let n1 = rng.in_range(1, 4) as usize;
        let n2 = rng.in_range(3, 5) as usize;
        let twists: Vec<i64> = (0..n2).map(|_| rng.in_range(-3, 3)).collect();
        let d1 = rng.in_range(-5, 5);
        let d2 = rng.in_range(-5, 5);
        if d1 == 0 && d2 == 0 {
            continue;
        }
        let tower = BottTower::two_stage(n1, n2, &twists).unwrap();
        let check = string_check(&tower, &[vec![d1, d2]]);
        assert!(
            !check.certified(),
            "hypersurface ({d1},{d2}) over fibers ({n1},{n2}) twists {twists:?} certified as string"
        );
        checked += 1;
    }

    // (c) Order-dependence witness: 1/(u1 (u1+u2)) gives 1 with the bare
    // variable innermost and 0 the other way around.
    let one = Rat::one();
    let u1: ILSeries<Rat> = ILSeries::monomial(2, &[1, 0], one.clone());
    let u2: ILSeries<Rat> = ILSeries::monomial(2, &[0, 1], one.clone());
    let sum: ILSeries<Rat> =
        ILSeries::from_terms(2, [(vec![1, 0], one.clone()), (vec![0, 1], one)]);
    let inner = iterated_residue_of_product(
        2,
        &[Factor::InvPoly(u1), Factor::InvPoly(sum.clone())],
        &cfg,
    )
    .unwrap();
    let outer =
        iterated_residue_of_product(2, &[Factor::InvPoly(u2), Factor::InvPoly(sum)], &cfg)
            .unwrap();
    assert_eq!(inner, Rat::one());
    assert_eq!(outer, Rat::zero());

    // (d) Numeric periodicity and quasi-periodicity of the theta product
    // at sample points, to 1e-10.
    let tau = C64::new(0.3, 1.1);
    let i = C64::new(0.0, 1.0);
    let pi = std::f64::consts::PI;
    for (re, im) in [(0.13, 0.07), (-0.40, 0.21), (0.55, -0.10)] {
        let z = C64::new(re, im);
        let t = theta_point(z, tau, 60);
        let shift1 = theta_point(z + C64::new(1.0, 0.0), tau, 60);
        let d1 = shift1 + t;
        assert!(
            (d1.re * d1.re + d1.im * d1.im).sqrt() <= 1e-10,
            "period-1 identity fails at z = {z}"
        );
        let shift_tau = theta_point(z + tau, tau, 60);
        let factor = -((-i) * pi * (z * 2.0 + tau)).exp();
        let d2 = shift_tau - factor * t;
        assert!(
            (d2.re * d2.re + d2.im * d2.im).sqrt() <= 1e-10,
            "quasi-period identity fails at z = {z}"
        );
    }

    // (e) The q^0 coefficient of the q-dependent genus equals the constant
    // genus built from the same square-root normalization.
    let mut rng = XorShift(0xa8a7);
    for case in 0..10 {
        let tower = random_tower(&mut rng);
        let witten = move |ord: u32| -> CoreResult<Vec<QSeries<Rat>>> {
            witten_f_jet(ord as usize, 0)
        };
        let q_series = genus_ci(&tower, &witten, &[], &cfg).unwrap();
        let ahat = |ord: u32| -> CoreResult<Vec<Rat>> { Ok(ahat_f_jet(ord as usize)) };
        let constant = genus_ci(&tower, &ahat, &[], &cfg).unwrap();
        assert_eq!(q_series.coeff(0), constant, "q^0 mismatch on case {case}");
    }

    assert_budget(start, Duration::from_secs(120), "criterion 10");
    println!("PASS criterion 10: unit-genus, never-string, order-dependence, theta periodicity, and q^0 consistency properties all hold");
}
