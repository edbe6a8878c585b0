use conegrowth::circle::{
    flow, gamma_exact, rotation_number, translation_e, CircleGroup, CircleLift, Primitive,
};
use conegrowth::order::{
    check_cone_axioms, check_growth_inequalities, gamma_k, kappa, relative_growth, CentralPair, GroupModel,
    GrowthSettings, Verdict,
};
use proptest::prelude::*;
use std::f64::consts::TAU;

fn arnold(a: f64, b: f64) -> CircleLift {
    CircleLift::arnold(a, b, 0.0).unwrap()
}

/// Plain iteration of `x + a + b sin(2πx)`, independent of the crate.
fn iterate(a: f64, b: f64, x: f64, n: usize) -> f64 {
    (0..n).fold(x, |x, _| x + a + b * (TAU * x).sin())
}

#[test]
fn translation_examples() {
    let m = CircleGroup::default();
    let s = GrowthSettings::default();
    let e = translation_e();
    let half = CircleLift::translation(0.5);
    assert_eq!(gamma_k(&m, &e, &half, 3, &s).unwrap(), 2);
    let t = CircleLift::translation(0.3);
    assert_eq!(gamma_k(&m, &t, &t, 5, &s).unwrap(), 5);
}

#[test]
fn arnold_gamma_k_matches_iterated_displacement() {
    let m = CircleGroup::default();
    let g = arnold(0.3, 0.05);
    let n = 200_000;
    let max_disp = (0..n)
        .map(|i| {
            let x = i as f64 / n as f64;
            iterate(0.3, 0.05, x, 10) - x
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let got = gamma_k(&m, &translation_e(), &g, 10, &GrowthSettings::default()).unwrap();
    assert_eq!(got, max_disp.ceil() as i64);
}

#[test]
fn rotation_of_translation_flow() {
    let m = CircleGroup::default();
    let est = relative_growth(&m, &translation_e(), &flow(0.7), 200, &GrowthSettings::default()).unwrap();
    assert!((est.trend - 0.7).abs() <= 1.0 / 200.0);
    assert_eq!(rotation_number(&flow(0.37), 10).unwrap().mid(), 0.37);
    assert_eq!(rotation_number(&translation_e(), 3).unwrap().mid(), 1.0);
}

#[test]
fn growth_against_rotation_number() {
    let m = CircleGroup::default();
    let f = arnold(0.5, 0.1);
    let est = relative_growth(&m, &f, &translation_e(), 100, &GrowthSettings::default()).unwrap();
    let oracle = 1e6 / iterate(0.5, 0.1, 0.0, 1_000_000);
    assert!((est.trend - oracle).abs() < 5e-2, "{} vs {oracle}", est.trend);
    assert!(est.upper_envelope >= oracle - 1e-6);
    assert!(est.max_subadditivity_excess() <= 0);
    assert!(est.respects_lower_bound());
}

#[test]
fn rotation_enclosures_nest() {
    let f = arnold(0.5, 0.1);
    let a = rotation_number(&f, 100_000).unwrap();
    let b = rotation_number(&f, 1_000_000).unwrap();
    assert!(a.intersects(&b));
    assert!(a.width() <= 2e-5 + 1e-15);
}

#[test]
fn exact_gamma_examples() {
    let r = gamma_exact(&CircleLift::translation(0.5), &CircleLift::translation(2.0), 10).unwrap();
    assert_eq!((r.lo, r.hi), (4.0, 4.0));
    let f = arnold(0.45, 0.12);
    assert!(gamma_exact(&f, &f, 10_000).unwrap().contains(1.0));
}

#[test]
fn kappa_of_translations_is_log_four() {
    let m = CircleGroup::default();
    let k = kappa(
        &m,
        &CircleLift::translation(0.5),
        &CircleLift::translation(2.0),
        64,
        &GrowthSettings::default(),
        1e-9,
    )
    .unwrap();
    assert!((k.value - 4f64.ln()).abs() < 1e-12);
    let same = kappa(&m, &arnold(0.3, 0.05), &arnold(0.3, 0.05), 20, &GrowthSettings::default(), 1e-9).unwrap();
    assert_eq!(same.value, 0.0);
}

#[test]
fn cone_axioms_on_catalogue_samples() {
    let m = CircleGroup::default();
    let samples = vec![
        translation_e(),
        CircleLift::translation(0.2),
        arnold(0.1, 0.05),
        CircleLift::translation(-0.1),
    ];
    let r = check_cone_axioms(&m, &samples);
    assert!(r.passed(), "{:?}", r.report);
    assert_eq!(r.membership[..3], [Verdict::Yes; 3]);
    assert_eq!(r.membership[3], Verdict::No);
    assert!(check_cone_axioms(&m, &[]).passed());
}

#[test]
fn opposite_phase_pair_has_witness_in_lower_half() {
    let m = CircleGroup::default();
    let f = arnold(0.4, 0.05);
    let g = arnold(0.4, -0.05);
    let v = m.dominates(&f, &g);
    assert_eq!(v.verdict, Verdict::No);
    let x = v.witness.unwrap()[0].rem_euclid(1.0);
    assert!((0.5..1.0).contains(&x), "{x}");
}

#[test]
fn growth_inequalities_for_arnold_triple() {
    let m = CircleGroup::default();
    let (f, g, h) = (arnold(0.3, 0.05), arnold(0.5, 0.1), arnold(0.7, 0.15));
    let e1 = translation_e();
    let e2 = CircleLift::translation(2.0);
    let r = check_growth_inequalities(
        &m,
        &f,
        &g,
        &h,
        CentralPair { e1: &e1, e2: &e2 },
        50,
        &GrowthSettings::default(),
        5e-2,
    )
    .unwrap();
    assert!(r.passed(), "{:?}", r.violations().collect::<Vec<_>>());
}

#[test]
fn translation_product_bound_formula() {
    let m = CircleGroup::default();
    let s = GrowthSettings::default();
    let f = CircleLift::translation(0.5);
    let g = CircleLift::translation(2.0);
    let fg = relative_growth(&m, &f, &g, 30, &s).unwrap();
    let gf = relative_growth(&m, &g, &f, 30, &s).unwrap();
    for k in 1..=30i64 {
        let p = fg.gamma(k as usize) * gf.gamma(k as usize);
        assert_eq!(p, 4 * k * ((k + 3) / 4));
        assert!(p >= k * k);
    }
}

#[test]
fn conjugation_preserves_gamma_sequence() {
    let m = CircleGroup::default();
    let s = GrowthSettings::default();
    let f = arnold(0.5, 0.1);
    let g = CircleLift::translation(1.0);
    let h = CircleLift::new(vec![Primitive::arnold(0.0, 0.08, 0.3)]).unwrap();
    let a = relative_growth(&m, &f, &g, 20, &s).unwrap();
    let b = relative_growth(&m, &m.conjugate(&h, &f), &m.conjugate(&h, &g), 20, &s).unwrap();
    assert_eq!(a.gammas, b.gammas);
}

#[test]
fn inverse_evaluation_residual() {
    let f = arnold(0.3, 0.05);
    let y = f.inverse().evaluate(0.35).unwrap();
    assert!((y + 0.3 + 0.05 * (TAU * y).sin() - 0.35).abs() < 1e-10);
}

#[test]
fn log_rotation_of_powers() {
    let f = arnold(0.37, 0.02);
    let r1 = rotation_number(&f, 100_000).unwrap();
    for n in [2i64, 3, 5] {
        let rn = rotation_number(&f.power(n), 100_000).unwrap();
        let shifted = r1.ln().unwrap().mid() + (n as f64).ln();
        let width = r1.width() / r1.lo + rn.width() / rn.lo;
        assert!((rn.ln().unwrap().mid() - shifted).abs() <= width);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn translation_gamma_is_ceiling(a in 0.05f64..3.0, b in -3.0f64..3.0, k in 1i64..40) {
        let m = CircleGroup::default();
        let got = gamma_k(&m, &CircleLift::translation(a), &CircleLift::translation(b), k, &GrowthSettings::default()).unwrap();
        // Least p with p a >= k b, up to the evaluation tolerance.
        let exact = (k as f64 * b / a).ceil() as i64;
        prop_assert!(got == exact || (got == exact - 1 && (got as f64 * a - k as f64 * b).abs() < 1e-9));
    }

    #[test]
    fn periodicity_and_monotonicity(a in -1.0f64..1.0, b in -0.15f64..0.15, phi in 0.0f64..6.3, x in -3.0f64..3.0) {
        let f = CircleLift::arnold(a, b, phi).unwrap().compose(&CircleLift::arnold(0.2, 0.1, 1.0).unwrap());
        let y = f.evaluate(x).unwrap();
        prop_assert!((f.evaluate(x + 1.0).unwrap() - y - 1.0).abs() < 1e-10);
        prop_assert!(f.evaluate(x + 1e-3).unwrap() > y);
    }

    #[test]
    fn dominance_is_transitive(a in 0.0f64..1.0, d1 in 0.0f64..0.5, d2 in 0.0f64..0.5, b in -0.1f64..0.1) {
        let m = CircleGroup::default();
        let h = CircleLift::arnold(a, b, 0.0).unwrap();
        let g = h.compose(&CircleLift::translation(d1));
        let f = g.compose(&CircleLift::translation(d2));
        prop_assert!(m.dominates(&f, &g).is_yes());
        prop_assert!(m.dominates(&g, &h).is_yes());
        prop_assert!(m.dominates(&f, &h).is_yes());
    }
}
