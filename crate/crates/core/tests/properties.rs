use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tfch::bounds::{min_height_bound_analysis, min_height_bound_physical, BoundInputs};
use tfch::galerkin::{mass_matrix, GalerkinSystem};
use tfch::inequalities::{check_sobolev_inequalities, random_trig_polynomial};
use tfch::linalg::{symmetric_eigenvalues, Cholesky};
use tfch::model::rhs;
use tfch::{Grid64, Params64, RegularizedFamily, State64};

fn thousand() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(thousand())]

    #[test]
    fn mass_matrix_is_symmetric_positive_definite(
        length in 1.0f64..40.0,
        eps in 1e-6f64..1e-1,
        coeffs in prop::collection::vec(-1.0f64..1.0, 9),
    ) {
        let sys = GalerkinSystem::new(length, 9, eps).unwrap();
        // arbitrary heights, including negative stretches where only the regularization keeps g > 0
        let m = mass_matrix(&coeffs, &sys).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                prop_assert!((m[[i, j]] - m[[j, i]]).abs() <= 1e-12 * m[[i, i]].abs().max(1.0));
            }
        }
        prop_assert!(Cholesky::factor(&m).is_ok());
        let lowest = symmetric_eigenvalues(&m).into_iter().fold(f64::INFINITY, f64::min);
        prop_assert!(lowest > 0.0);
    }

    #[test]
    fn regularized_family_shape(eps in 1e-4f64..1.0, t in -20.0f64..20.0) {
        let fam = RegularizedFamily::new(eps).unwrap();
        let s = t * eps;
        let d = fam.g_derivs(s);
        prop_assert!(d.g >= eps / 2.0 && d.g >= s);
        prop_assert!(d.d1 >= 0.0 && d.d1 <= 1.0 + 1e-12);
        let big_g = fam.G(s).unwrap();
        prop_assert!(big_g > 0.0);
        prop_assert!(fam.G_prime(s) < 0.0);
        prop_assert!(fam.weight(s) > 0.0);
        prop_assert!((fam.f(s) - d.g.powi(3)).abs() <= 1e-12 * d.g.powi(3));
        // the two-sided tangent never lies above the convex G
        let step = 1e-3 * eps;
        let lo = fam.G(s - step).unwrap();
        let hi = fam.G(s + step).unwrap();
        prop_assert!(lo + hi - 2.0 * big_g >= -1e-12 * big_g);
    }

    #[test]
    fn sobolev_slacks_are_nonnegative(seed in any::<u64>(), length in 0.5f64..50.0, degree in 1usize..12) {
        let g = Grid64::new(length, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f, _) = random_trig_polynomial(&g, degree, &mut rng).unwrap();
        let s = check_sobolev_inequalities(&f).unwrap();
        prop_assert!(s.reliable);
        prop_assert!(s.min_slack() >= -1e-10, "slack {}", s.min_slack());
    }

    #[test]
    fn analysis_bound_positive_and_decreasing_in_energy(
        k1 in 0.05f64..3.0,
        k4 in 0.01f64..5.0,
        length in 0.5f64..60.0,
        factor in 1.01f64..3.0,
    ) {
        let b = BoundInputs { k1, k4, length, f0: 0.0, f1: 0.0, capillary: 1.0, a_abs: 1.0 };
        let m = min_height_bound_analysis(&b).unwrap();
        let more = min_height_bound_analysis(&BoundInputs { k4: k4 * factor, ..b }).unwrap();
        prop_assert!(m > 0.0);
        prop_assert!(more < m);
    }

    #[test]
    fn physical_bound_positive(f0 in 0.0f64..2.0, f1 in 0.5f64..2.0, c in 0.1f64..3.0, a in 0.1f64..10.0) {
        let b = BoundInputs::physical(f0, f1, c, a, 1.0);
        prop_assert!(min_height_bound_physical(&b).unwrap() > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn evolution_conserves_volume_and_solute(
        hc in prop::collection::vec(-0.2f64..0.2, 4),
        cc in prop::collection::vec(-0.8f64..0.8, 4),
        r in 0.0f64..5.0,
    ) {
        let g = Grid64::new(20.0, 64).unwrap();
        let k = std::f64::consts::TAU / 20.0;
        let wave = |a: &[f64], x: f64| a[0] * (k * x).cos() + a[1] * (k * x).sin() + a[2] * (2.0 * k * x).cos() + a[3] * (3.0 * k * x).sin();
        let h = g.field_from_fn(|x| 1.0 + wave(&hc, x)).unwrap();
        let c = g.field_from_fn(|x| wave(&cc, x)).unwrap();
        let s = State64::new(h, c).unwrap();
        let p = Params64::new(1.0 / 3.0, 1.0, r, -1.0).unwrap();
        let d = rhs(&s, &p).unwrap();
        let scale = d.dh_dt.values().iter().chain(d.dch_dt.values()).fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(d.dh_dt.integrate().abs() <= 1e-12 * scale * g.length());
        prop_assert!(d.dch_dt.integrate().abs() <= 1e-12 * scale * g.length());
    }
}
