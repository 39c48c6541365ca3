use iterint::coeffs::db::{db_checksum, load_db, save_db};
use iterint::coeffs::{legendre_exact, INDEX_CAP};
use iterint::{coeff, coeff_table, BasisKind, CoeffCache, Error, Interval, MultiIndex};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

#[test]
fn low_order_values() {
    let h = 0.3;
    let iv = Interval::of_length(h).unwrap();
    let c = |j: Vec<usize>| coeff(BasisKind::Legendre, &MultiIndex::new(j).unwrap(), iv).unwrap().value;
    let s3 = 3f64.sqrt();
    assert!((c(vec![0]) - h.sqrt()).abs() < 1e-15);
    assert!((c(vec![0, 0]) - h / 2.0).abs() < 1e-15);
    assert!((c(vec![0, 1]) - h / (2.0 * s3)).abs() < 1e-15);
    assert!((c(vec![1, 0]) + h / (2.0 * s3)).abs() < 1e-15);
    assert!((c(vec![0, 0, 0]) - h.powf(1.5) / 6.0).abs() < 1e-15);
    assert_eq!(legendre_exact(&[0, 0, 0]), rat(4, 3));
    assert_eq!(legendre_exact(&[1, 1]), rat(0, 1));
    let t = coeff(BasisKind::Trigonometric, &MultiIndex::new(vec![0, 0]).unwrap(), iv).unwrap();
    assert!((t.value - h / 2.0).abs() < 1e-14);
    assert!(t.exact.is_none());
}

#[test]
fn parseval_limit_from_below() {
    let iv = Interval::of_length(1.0).unwrap();
    for basis in [BasisKind::Legendre, BasisKind::Trigonometric] {
        for k in 1..=3 {
            let ik = 1.0 / factorial(k);
            let mut prev = 0.0;
            for p in [0usize, 2, 4, 8] {
                let s = coeff_table(basis, k, &vec![p; k], iv).unwrap().squared_sum();
                assert!(s >= prev - 1e-15 && s <= ik + 1e-14, "{basis:?} k={k} p={p}: {s}");
                prev = s;
            }
            if k == 1 {
                assert!((prev - 1.0).abs() < 1e-14);
            }
        }
    }
    // double sum: 1/2 − Σ C² equals the J11 closed form
    let s = coeff_table(BasisKind::Legendre, 2, &[40, 40], iv).unwrap().squared_sum();
    let closed = 0.5 * (0.5 - (1..=40).map(|i| 1.0 / (4.0 * (i * i) as f64 - 1.0)).sum::<f64>());
    assert!((0.5 - s - closed).abs() < 1e-14);
}

#[test]
fn interval_scaling() {
    let unit = Interval::of_length(1.0).unwrap();
    let iv = Interval::new(2.0, 2.7).unwrap();
    for basis in [BasisKind::Legendre, BasisKind::Trigonometric] {
        let u = coeff_table(basis, 3, &[3, 2, 4], unit).unwrap();
        let t = coeff_table(basis, 3, &[3, 2, 4], iv).unwrap();
        let moved = u.rescaled(iv);
        let s = 0.7f64.powf(1.5);
        for ((a, b), c) in u.values().iter().zip(t.values()).zip(moved.values()) {
            assert!((a * s - b).abs() < 1e-14);
            assert_eq!(b, c);
        }
        let mut cache = CoeffCache::new();
        let cached = cache.get(basis, &[3, 2, 4], iv).unwrap();
        assert_eq!(cached.values(), t.values());
    }
}

#[test]
fn limits_are_enforced() {
    assert!(matches!(MultiIndex::new(vec![INDEX_CAP + 1]), Err(Error::IndexCap { .. })));
    assert!(matches!(MultiIndex::new(vec![]), Err(Error::MultiplicityOutOfRange { .. })));
    let iv = Interval::of_length(1.0).unwrap();
    assert!(matches!(coeff_table(BasisKind::Legendre, 5, &[7; 5], iv), Err(Error::DenseLimit { .. })));
    assert!(matches!(coeff_table(BasisKind::Legendre, 7, &[1; 7], iv), Err(Error::MultiplicityOutOfRange { .. })));
}

#[test]
fn database_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.db");
    let iv = Interval::of_length(1.0).unwrap();
    let a = coeff_table(BasisKind::Legendre, 3, &[3, 3, 3], iv).unwrap();
    let b = coeff_table(BasisKind::Trigonometric, 2, &[6, 4], iv).unwrap();
    let crc = save_db(&[a.clone(), b.clone()], &path).unwrap();
    assert_eq!(db_checksum(&path).unwrap(), crc);
    let loaded = load_db(&path).unwrap();
    assert_eq!(loaded.len(), 2);
    assert_eq!(loaded[0].exact_core(), a.exact_core());
    assert_eq!(loaded[0].values(), a.values());
    assert_eq!(loaded[1].p(), b.p());
    assert_eq!(loaded[1].values(), b.values());

    let mut bytes = std::fs::read(&path).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 1;
    std::fs::write(&path, &bytes).unwrap();
    assert!(matches!(load_db(&path), Err(Error::Checksum { .. })));
    assert!(matches!(load_db(&dir.path().join("missing.db")), Err(Error::Io(_))));
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

proptest! {
    // Σ_σ C_{j∘σ} = Π_l ∫φ_{j_l}, which is h^{k/2} at j = 0 and 0 otherwise.
    #[test]
    fn permutation_sum_is_a_product(j in prop::collection::vec(0usize..5, 2..=4), h in 0.1f64..3.0, trig in any::<bool>()) {
        let basis = if trig { BasisKind::Trigonometric } else { BasisKind::Legendre };
        let k = j.len();
        let iv = Interval::of_length(h).unwrap();
        let t = coeff_table(basis, k, &vec![4; k], iv).unwrap();
        let sum: f64 = permutations(k).iter().map(|s| t.get(&s.iter().map(|&l| j[l]).collect::<Vec<_>>())).sum();
        let want = if j.iter().all(|&x| x == 0) { h.powf(k as f64 / 2.0) } else { 0.0 };
        prop_assert!((sum - want).abs() < 1e-12 * h.powf(k as f64 / 2.0).max(1.0), "{} vs {}", sum, want);
    }

    #[test]
    fn single_entries_match_table(j in prop::collection::vec(0usize..4, 1..=3)) {
        let iv = Interval::of_length(0.6).unwrap();
        let k = j.len();
        for basis in [BasisKind::Legendre, BasisKind::Trigonometric] {
            let t = coeff_table(basis, k, &vec![3; k], iv).unwrap();
            let c = coeff(basis, &MultiIndex::new(j.clone()).unwrap(), iv).unwrap().value;
            prop_assert!((t.get(&j) - c).abs() < 1e-13);
        }
    }
}
