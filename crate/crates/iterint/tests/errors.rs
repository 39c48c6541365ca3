use iterint::errors::{
    closed_form_error, exact_ms_error, exact_ms_error_rational, legendre_distinct_error, min_truncation,
    ms_error_bound, Objective,
};
use iterint::{coeff_table, BasisKind, ClosedForm, Error, IntegralSpec, Interval};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[test]
fn legendre_double_closed_form_matches_exact() {
    for h in [1.0, 0.1, 2.5] {
        let iv = Interval::of_length(h).unwrap();
        let spec = IntegralSpec::ito(&[1, 2], iv).unwrap();
        let t = coeff_table(BasisKind::Legendre, 2, &[30, 30], iv).unwrap();
        for q in [1, 2, 7, 30] {
            let exact = exact_ms_error(&spec, q, &t).unwrap().value;
            let closed = closed_form_error(ClosedForm::Legendre11, q, iv).value;
            // telescoped series: h² / (4(2q+1))
            let derived = h * h / (4.0 * (2 * q + 1) as f64);
            assert!((exact - closed).abs() < 1e-13 * h * h, "h={h} q={q}");
            assert!((closed - derived).abs() < 1e-13 * h * h);
        }
    }
}

#[test]
fn trig_cube_error_is_the_tailless_formula() {
    let iv = Interval::of_length(1.0).unwrap();
    let spec = IntegralSpec::ito(&[1, 2], iv).unwrap();
    let t = coeff_table(BasisKind::Trigonometric, 2, &[24, 24], iv).unwrap();
    for q in [1, 3, 12] {
        let exact = exact_ms_error(&spec, 2 * q, &t).unwrap().value;
        let closed = closed_form_error(ClosedForm::Trig11NoTail, q, iv).value;
        assert!((exact - closed).abs() < 1e-12, "q={q}: {exact} vs {closed}");
    }
}

#[test]
fn frozen_exact_constants() {
    assert_eq!(legendre_distinct_error(2, 1).unwrap(), rat(1, 12));
    assert_eq!(legendre_distinct_error(5, 1).unwrap(), rat(32131, 4233600));
    assert_eq!(legendre_distinct_error(4, 2).unwrap(), rat(234761, 10245312));
    let k3: BigRational = "3754499729/192008134890".parse().unwrap();
    assert_eq!(legendre_distinct_error(3, 6).unwrap(), k3);
}

#[test]
fn rational_and_float_errors_agree() {
    let iv = Interval::of_length(0.4).unwrap();
    for idx in [&[1, 2, 3][..], &[1, 1, 2], &[2, 1, 2], &[1, 2, 1, 2]] {
        let spec = IntegralSpec::ito(idx, iv).unwrap();
        let k = idx.len();
        let t = coeff_table(BasisKind::Legendre, k, &vec![3; k], iv).unwrap();
        let r = exact_ms_error_rational(&spec, 3, &t).unwrap().unwrap();
        let f = exact_ms_error(&spec, 3, &t).unwrap().value;
        let rf = num_traits::ToPrimitive::to_f64(&r).unwrap() * 0.4f64.powi(k as i32);
        assert!((rf - f).abs() < 1e-15, "{idx:?}");
        assert!(f > 0.0);
    }
}

#[test]
fn bound_dominates_exact() {
    let iv = Interval::of_length(0.5).unwrap();
    for basis in [BasisKind::Legendre, BasisKind::Trigonometric] {
        for idx in [&[1, 2][..], &[1, 1], &[1, 1, 2], &[1, 2, 3], &[2, 1, 2]] {
            let spec = IntegralSpec::ito(idx, iv).unwrap();
            let k = idx.len();
            let t = coeff_table(basis, k, &vec![4; k], iv).unwrap();
            let exact = exact_ms_error(&spec, 4, &t).unwrap().value;
            let bound = ms_error_bound(&spec, 4, &t).unwrap().value;
            assert!(bound >= exact - 1e-15, "{basis:?} {idx:?}: {bound} < {exact}");
        }
    }
    let spec = IntegralSpec::ito(&[0, 1], iv).unwrap();
    let t = coeff_table(BasisKind::Legendre, 2, &[2, 2], iv).unwrap();
    assert!(matches!(exact_ms_error(&spec, 2, &t), Err(Error::PatternNotImplemented(_))));
    assert!(ms_error_bound(&spec, 2, &t).unwrap().value > 0.0);
    let wide = Interval::of_length(1.5).unwrap();
    let spec = IntegralSpec::ito(&[0, 1], wide).unwrap();
    let t = coeff_table(BasisKind::Legendre, 2, &[2, 2], wide).unwrap();
    assert!(matches!(ms_error_bound(&spec, 2, &t), Err(Error::IntervalCondition(_))));
}

#[test]
fn minimal_legendre_truncation() {
    // h²/(4(2q+1)) ≤ h³  ⇔  q ≥ (1/(4h) − 1)/2
    for n in 5..=12 {
        let h = 2f64.powi(-n);
        let got = min_truncation(Objective::Closed(ClosedForm::Legendre11), 3, Interval::of_length(h).unwrap()).unwrap();
        let want = ((1.0 / (4.0 * h) - 1.0) / 2.0).ceil().max(1.0) as usize;
        assert_eq!(got, want, "h = 2^-{n}");
    }
    let big = min_truncation(Objective::Closed(ClosedForm::Trig11), 3, Interval::of_length(10.0).unwrap()).unwrap();
    assert_eq!(big, 1);
}

#[test]
fn formula_lookup() {
    for f in ClosedForm::ALL {
        assert_eq!(f.id().parse::<ClosedForm>().unwrap(), f);
    }
    assert!(matches!("trig-12".parse::<ClosedForm>(), Err(Error::UnknownFormula(_))));
}

proptest! {
    #[test]
    fn all_equal_indices_have_zero_error(k in 1usize..=3, p in 0usize..5, h in 0.05f64..3.0, trig in any::<bool>()) {
        let basis = if trig { BasisKind::Trigonometric } else { BasisKind::Legendre };
        let iv = Interval::of_length(h).unwrap();
        let spec = IntegralSpec::ito(&vec![1; k], iv).unwrap();
        let t = coeff_table(basis, k, &vec![p; k], iv).unwrap();
        let e = exact_ms_error(&spec, p, &t).unwrap().value;
        prop_assert!(e.abs() < 1e-12 * h.powi(k as i32), "{}", e);
    }

    #[test]
    fn error_decreases_with_truncation(idx in prop::collection::vec(1usize..=2, 2..=3)) {
        let iv = Interval::of_length(1.0).unwrap();
        let spec = IntegralSpec::ito(&idx, iv).unwrap();
        let k = idx.len();
        let t = coeff_table(BasisKind::Legendre, k, &vec![6; k], iv).unwrap();
        let mut prev = f64::INFINITY;
        for p in 0..=6 {
            let e = exact_ms_error(&spec, p, &t).unwrap().value;
            prop_assert!(e <= prev + 1e-15);
            prev = e;
        }
    }
}
