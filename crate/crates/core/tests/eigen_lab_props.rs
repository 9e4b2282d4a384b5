//! Eigenfunction, lift, Dong and Bernstein-report invariants.

use blab_core::eigen::{
    check_eigenfunction, lift, make_torus_eigenfunction, random_points, DongState, Eigenfunction, SphereEigenfunction, TorusEigenfunction, TorusMode,
};
use blab_core::field::{GeodesicBall, Manifold};
use blab_core::frequency::{frequency_numeric, CoefficientField};
use blab_core::lab::{eigen_bernstein, log_grid, sweep, Bounds, Centers, Family, SweepConfig};
use blab_core::supnorm::ResolutionPolicy;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn torus_levels() -> impl Strategy<Value = i64> {
    prop::sample::select(vec![1i64, 2, 5, 9, 13, 25, 50, 65, 100])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn eigen_residuals_are_small(lam in torus_levels(), k in 1usize..=12, seed: u64, on_sphere: bool) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ef = if on_sphere {
            Eigenfunction::Sphere(SphereEigenfunction::random(2, k, &mut rng).unwrap())
        } else {
            Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 3, &mut rng).unwrap())
        };
        let pts = random_points(&ef.base_manifold(), 50, &mut rng);
        let ck = check_eigenfunction(&ef, &pts, 1e-4).unwrap();
        prop_assert!(ck.max_residual < 1e-6, "residual {}", ck.max_residual);
        prop_assert!(ck.max_gradient_error < 1e-6, "gradient error {}", ck.max_gradient_error);
    }

    #[test]
    fn rho0_is_close_to_r(h in 0.0f64..4.0, frac in 0.0f64..1.0) {
        let ef = make_torus_eigenfunction::<f64>(2, vec![TorusMode { m: vec![1, 0], cos: 1.0, sin: 0.0 }]).unwrap();
        let st = DongState::new(&ef).unwrap().with_curvature_bound(h).unwrap();
        // H r² ≤ 0.1
        let r = if h > 0.0 { (0.1 * frac / h).sqrt() } else { frac };
        prop_assert!((st.rho0(r) - r).abs() <= h * r.powi(3) + 1e-15);
    }

    #[test]
    fn bounds_are_ordered(lam in std::f64::consts::E..1e4, r in 1e-3f64..1.0, d in 1usize..=4, delta in 0.1f64..3.0) {
        let b = Bounds::new(lam, r, d, delta).unwrap();
        prop_assert!(b.b_conj <= b.b_2d * (1.0 + 1e-15));
        prop_assert!(b.b_conj <= b.b_main * (1.0 + 1e-15));
    }
}

#[test]
fn global_bernstein_on_the_torus() {
    let pol = ResolutionPolicy::default();
    let whole = GeodesicBall::whole(Manifold::torus(2)).unwrap();
    for m in [vec![1i64, 0], vec![3, 4], vec![7, 1]] {
        let ef = make_torus_eigenfunction(2, vec![TorusMode { m, cos: 0.6, sin: -1.3 }]).unwrap();
        let c = eigen_bernstein(&ef, &whole, &pol, 1.0).unwrap().constants.c_global;
        assert!((c - 1.0).abs() < 1e-6, "single mode constant {c}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for lam in [5i64, 25, 50, 65, 100] {
        for _ in 0..3 {
            let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 4, &mut rng).unwrap());
            worst = worst.max(eigen_bernstein(&ef, &whole, &pol, 1.0).unwrap().constants.c_global);
        }
    }
    assert!(worst <= 2.0, "fitted global constant {worst}");
}

#[test]
fn lifted_single_mode_frequency_scales_like_sqrt_lambda() {
    for m in [vec![1i64, 0], vec![2, 1], vec![3, 4], vec![8, 6], vec![12, 16]] {
        let ef = make_torus_eigenfunction::<f64>(2, vec![TorusMode { m, cos: 0.0, sin: 1.0 }]).unwrap();
        let s = ef.eigenvalue().sqrt();
        let lf = lift(&ef).unwrap();
        let n = frequency_numeric(&lf, &CoefficientField::identity(3), &[0.0, 0.0, 0.0], 0.5, None).unwrap();
        assert!(n >= 0.3 * s && n <= 3.0 * s, "λ={} N={n}", s * s);
    }
}

#[test]
fn reports_grow_with_radius() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pol = ResolutionPolicy::default();
    for lam in [25i64, 100] {
        let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 3, &mut rng).unwrap());
        let x = random_points(&Manifold::torus(2), 1, &mut rng).pop().unwrap();
        let (mut g, mut v) = (0.0, 0.0);
        for r in log_grid(0.02, 0.5, 8) {
            let rep = eigen_bernstein(&ef, &GeodesicBall::new(Manifold::torus(2), x.clone(), r).unwrap(), &pol, 1.0).unwrap();
            assert!(rep.grad_sup >= g * (1.0 - 1e-6) && rep.val_sup >= v * (1.0 - 1e-6), "λ={lam} r={r}");
            g = rep.grad_sup;
            v = rep.val_sup;
        }
    }
}

#[test]
fn implied_df_constants_are_modest() {
    for (manifold, family, levels) in [
        ("torus:2", Family::TorusRandom { modes: 3 }, vec![5u64, 25, 100]),
        ("sphere:2", Family::SphereRandom, vec![3, 8, 15]),
    ] {
        let cfg = SweepConfig {
            manifold: manifold.into(),
            family,
            levels,
            radii: log_grid(0.02, 0.5, 5),
            centers: Centers::Random { count: 3 },
            seed: 4,
            ..SweepConfig::default()
        };
        let out = sweep(&cfg).unwrap();
        assert!(out.failures().is_empty(), "{:?}", out.failures());
        let c = out.max_constants().unwrap();
        assert!(c.c_df <= 10.0, "{manifold}: c_df {}", c.c_df);
    }
}
