use iterint::sampler::draw;
use iterint::sde::{
    convergence_study, family_cost_comparison, ls_slope, milstein_step, scheme_step, taylor_ito_15_step,
    FamilyBuilder, FamilyKind, Gbm, IntegralFamily, LinearSystem, OrnsteinUhlenbeck, Reference, Scheme, StudyConfig,
    Truncation,
};
use iterint::{BasisKind, Error, GaussianDraws, Interval};
use proptest::prelude::*;

fn study(scheme: Scheme, truncation: Truncation, steps: &[usize], n_paths: usize, reference: Reference, fine_factor: usize) -> StudyConfig {
    StudyConfig { scheme, truncation, steps: steps.to_vec(), horizon: 1.0, n_paths, seed: 3, reference, fine_factor }
}

#[test]
fn deterministic_problem_reduces_to_taylor_polynomial() {
    let g = Gbm { mu: -0.7, sigma: 0.0, x0: 2.0 };
    let h = 0.1;
    let fam = IntegralFamily::zeros(1, h);
    let euler = scheme_step(&g, Scheme::Euler, &[2.0], &fam).unwrap()[0];
    let milstein = scheme_step(&g, Scheme::Milstein, &[2.0], &fam).unwrap()[0];
    let taylor = scheme_step(&g, Scheme::TaylorIto15, &[2.0], &fam).unwrap()[0];
    assert!((euler - 2.0 * (1.0 - 0.07)).abs() < 1e-14);
    assert_eq!(euler, milstein);
    assert!((taylor - 2.0 * (1.0 - 0.07 + 0.5 * 0.0049)).abs() < 1e-14);
}

#[test]
fn gbm_milstein_step_in_closed_form() {
    let g = Gbm { mu: 0.3, sigma: 0.6, x0: 1.0 };
    let iv = Interval::of_length(0.05).unwrap();
    let h = iv.len();
    for s in 0..20 {
        let d = draw(1, 3, false, 8, s);
        let j1 = h.sqrt() * d.zeta(1, 0);
        let want = 1.5 * (1.0 + 0.3 * h + 0.6 * j1 + 0.18 * (j1 * j1 - h));
        let got = milstein_step(&g, &[1.5], iv, &d, 3, BasisKind::Legendre).unwrap()[0];
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
    }
    let zero = milstein_step(&g, &[1.0], iv, &GaussianDraws::zeros(1, 1, false), 1, BasisKind::Legendre).unwrap()[0];
    assert!((zero - (1.0 + 0.3 * h - 0.18 * h)).abs() < 1e-14);
}

#[test]
fn step_helpers_agree_with_family_builder() {
    let p = LinearSystem::noncommutative();
    let iv = Interval::of_length(0.02).unwrap();
    let d = draw(2, 4, false, 1, 0);
    let fam = FamilyBuilder::new(FamilyKind::Legendre { q11: 4, q111: 2 }, 2, 0.02, true).unwrap().build(&d).unwrap();
    let a = taylor_ito_15_step(&p, &[1.0, 0.5], iv, &d, (4, 2), BasisKind::Legendre).unwrap();
    let b = scheme_step(&p, Scheme::TaylorIto15, &[1.0, 0.5], &fam).unwrap();
    assert_eq!(a, b);
}

#[test]
fn exact_reference_needs_a_solution() {
    let ou = OrnsteinUhlenbeck { theta: 1.0, sigma: 0.3, x0: 1.0 };
    let steps = [4, 8, 16];
    let cfg = study(Scheme::Euler, Truncation::MinimalLegendre, &steps, 10, Reference::Exact, 1);
    assert!(matches!(convergence_study(&ou, &cfg), Err(Error::InvalidArgument(_))));
    let cfg = study(Scheme::Euler, Truncation::MinimalLegendre, &[4, 6, 16], 10, Reference::Exact, 1);
    assert!(matches!(convergence_study(&Gbm { mu: 0.1, sigma: 0.1, x0: 1.0 }, &cfg), Err(Error::Divisibility { .. })));
}

#[test]
fn euler_strong_order_on_gbm() {
    let g = Gbm { mu: 0.5, sigma: 0.5, x0: 1.0 };
    let cfg = study(Scheme::Euler, Truncation::MinimalLegendre, &[8, 16, 32, 64, 128], 3000, Reference::Exact, 1);
    let t = convergence_study(&g, &cfg).unwrap();
    assert_eq!(t.points.len(), 5);
    assert!((t.order - 0.5).abs() < 0.15, "order {}", t.order);
}

#[test]
fn milstein_on_noncommutative_system() {
    let p = LinearSystem::noncommutative();
    let legendre = study(Scheme::Milstein, Truncation::MinimalLegendre, &[8, 16, 32, 64], 800, Reference::HalfStep, 1);
    let t = convergence_study(&p, &legendre).unwrap();
    assert!(t.order >= 0.9, "Legendre order {}", t.order);
    let trig = study(Scheme::Milstein, Truncation::MinimalTrig, &[8, 16, 32, 64], 800, Reference::HalfStep, 4);
    let t = convergence_study(&p, &trig).unwrap();
    assert!(t.order >= 0.9, "trig order {}", t.order);
    assert!(t.points.iter().all(|pt| matches!(pt.kind, FamilyKind::Trig { tails: true, .. })));
}

#[test]
fn additive_noise_euler_is_first_order() {
    let ou = OrnsteinUhlenbeck { theta: 1.5, sigma: 0.4, x0: 1.0 };
    let cfg = study(Scheme::Euler, Truncation::MinimalLegendre, &[8, 16, 32, 64], 1000, Reference::HalfStep, 1);
    let t = convergence_study(&ou, &cfg).unwrap();
    assert!(t.order > 0.8, "order {}", t.order);
}

#[test]
fn cost_comparison_reports_both_families() {
    let r = family_cost_comparison(2, 0.1, 200, 0).unwrap();
    assert!(matches!(r.legendre, FamilyKind::Legendre { .. }));
    assert!(matches!(r.trig, FamilyKind::Trig { tails: true, .. }));
    assert!(r.ratio() > 0.0 && r.ratio().is_finite());
}

#[test]
fn slope_of_a_line() {
    let x = [1.0, 2.0, 3.0, 5.0];
    let y: Vec<f64> = x.iter().map(|v| 1.5 * v - 2.0).collect();
    assert!((ls_slope(&x, &y) - 1.5).abs() < 1e-14);
}

proptest! {
    // symmetrized pairs are products of lower-order integrals at any truncation
    #[test]
    fn family_shuffle_relations(seed in any::<u64>(), q in 1usize..6, h in 0.01f64..0.5) {
        let d = draw(2, q, false, seed, 0);
        let fam = FamilyBuilder::new(FamilyKind::Legendre { q11: q, q111: 1 }, 2, h, false).unwrap().build(&d).unwrap();
        prop_assert!((fam.j11[1] + fam.j11[2] - fam.j1[0] * fam.j1[1]).abs() < 1e-12);
        prop_assert!((2.0 * fam.j11[0] - fam.j1[0] * fam.j1[0] + h).abs() < 1e-12);
        for i in 0..2 {
            prop_assert!((fam.j01[i] + fam.j10[i] - h * fam.j1[i]).abs() < 1e-12);
        }
    }
}
