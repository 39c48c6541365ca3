use iterint::basis::{antiderivative_all, phi, phi_all, phi_antiderivative};
use iterint::quadrature::gauss_legendre;
use iterint::{BasisKind, Error, Interval};
use proptest::prelude::*;

const BASES: [BasisKind; 2] = [BasisKind::Legendre, BasisKind::Trigonometric];

/// Gauss rule mapped onto `[a, b]`.
fn rule(a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(x, w)| (a + (b - a) * (x + 1.0) / 2.0, w * (b - a) / 2.0)).collect()
}

#[test]
fn gram_matrix_is_identity() {
    let iv = Interval::new(0.3, 1.7).unwrap();
    let n = 16;
    for basis in BASES {
        let mut gram = vec![0.0; n * n];
        let mut v = vec![0.0; n];
        for (s, w) in rule(iv.start, iv.end, 60) {
            phi_all(basis, s, iv, &mut v);
            for a in 0..n {
                for b in 0..n {
                    gram[a * n + b] += w * v[a] * v[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((gram[a * n + b] - want).abs() < 1e-12, "{basis:?} ({a},{b}): {}", gram[a * n + b]);
            }
        }
    }
}

#[test]
fn antiderivative_at_right_end() {
    let iv = Interval::new(-2.0, 0.5).unwrap();
    let mut out = vec![0.0; 12];
    for basis in BASES {
        antiderivative_all(basis, iv.end, iv, &mut out);
        assert!((out[0] - iv.len().sqrt()).abs() < 1e-14);
        for (j, v) in out.iter().enumerate().skip(1) {
            assert!(v.abs() < 1e-13, "{basis:?} j={j}: {v}");
        }
        antiderivative_all(basis, iv.start, iv, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-14));
    }
}

#[test]
fn bulk_and_single_evaluations_agree() {
    let iv = Interval::new(0.0, 0.25).unwrap();
    let mut v = vec![0.0; 9];
    let mut a = vec![0.0; 9];
    for basis in BASES {
        phi_all(basis, 0.1, iv, &mut v);
        antiderivative_all(basis, 0.1, iv, &mut a);
        for j in 0..9 {
            assert!((v[j] - phi(basis, j, 0.1, iv).unwrap()).abs() < 1e-12);
            assert!((a[j] - phi_antiderivative(basis, j, 0.1, iv).unwrap()).abs() < 1e-14);
        }
    }
}

#[test]
fn invalid_inputs() {
    assert!(matches!(Interval::new(1.0, 1.0), Err(Error::InvalidInterval { .. })));
    assert!(matches!(Interval::new(0.0, f64::NAN), Err(Error::InvalidInterval { .. })));
    assert!(matches!(Interval::of_length(-1.0), Err(Error::InvalidInterval { .. })));
    let iv = Interval::new(0.0, 1.0).unwrap();
    for basis in BASES {
        assert!(matches!(phi(basis, 0, 1.5, iv), Err(Error::OutOfInterval { .. })));
        assert!(matches!(phi_antiderivative(basis, 3, -0.1, iv), Err(Error::OutOfInterval { .. })));
    }
}

proptest! {
    #[test]
    fn antiderivative_matches_quadrature(
        start in -3.0f64..3.0,
        h in 0.05f64..4.0,
        frac in 0.0f64..1.0,
        j in 0usize..20,
        trig in any::<bool>(),
    ) {
        let basis = if trig { BasisKind::Trigonometric } else { BasisKind::Legendre };
        let iv = Interval::new(start, start + h).unwrap();
        let s = start + frac * h;
        let quad: f64 = rule(start, s, 40).iter().map(|&(u, w)| w * phi(basis, j, u, iv).unwrap()).sum();
        let exact = phi_antiderivative(basis, j, s, iv).unwrap();
        prop_assert!((quad - exact).abs() < 1e-11 * h.sqrt().max(1.0), "{} vs {}", quad, exact);
    }
}
