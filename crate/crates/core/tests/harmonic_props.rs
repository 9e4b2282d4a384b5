//! Invariants of harmonic expansions, the frequency function and sup estimation.

use blab_core::field::{GeodesicBall, GradientNorm, Manifold};
use blab_core::frequency::{doubling_index, frequency_numeric, CoefficientField};
use blab_core::quadrature::{ball_rule, sphere_rule};
use blab_core::sphharm::{dim_harmonics, zonal_kernel, HarmonicExpansion, SphericalBasisConvention};
use blab_core::supnorm::{sup_norm, ResolutionPolicy};
use blab_core::Expansion;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expansion(d: usize, k_max: usize, sparse: bool, seed: u64) -> Expansion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HarmonicExpansion::random(d, k_max, sparse.then_some(2), &mut rng).unwrap()
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn parseval_on_spheres(d in 2usize..=4, k in 0usize..=12, seed: u64, rho in 0.3f64..2.0) {
        let h = expansion(d, k, d == 4, seed);
        let q = sphere_rule::<f64>(d, 2 * k + 1).unwrap();
        let num = q.average(|x| {
            let y: Vec<f64> = x.iter().map(|v| v * rho).collect();
            h.value(&y).powi(2)
        });
        let exact = h.sphere_mean_square(rho);
        prop_assert!((num - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn frequency_is_pinched_and_monotone(d in 2usize..=4, k in 1usize..=30, seed: u64) {
        let h = expansion(d, k, true, seed);
        let (lo, hi) = (h.min_degree().unwrap() as f64, h.max_degree().unwrap() as f64);
        let mut prev = 0.0;
        for i in 0..25 {
            let r = 0.01 * 1.3f64.powi(i);
            let n = h.exact_frequency(r).unwrap();
            prop_assert!(n >= lo - 1e-12 && n <= hi + 1e-12);
            prop_assert!(n >= prev - 1e-12);
            prev = n;
        }
    }

    #[test]
    fn doubling_identity(d in 2usize..=4, k in 0usize..=20, seed: u64, r in 0.05f64..1.5) {
        let h = expansion(d, k, true, seed);
        let ratio = h.ball_mean_square(2.0 * r) / h.ball_mean_square(r);
        let bound = 2f64.powf(2.0 * h.exact_frequency(2.0 * r).unwrap());
        prop_assert!(ratio <= bound * (1.0 + 1e-9));
    }

    #[test]
    fn single_degree_doubles_exactly(d in 2usize..=5, k in 0usize..=30, r in 0.05f64..1.5) {
        let h = HarmonicExpansion::<f64>::single(d, k, 0, 1.0).unwrap();
        let ratio = h.ball_mean_square(2.0 * r) / h.ball_mean_square(r);
        let bound = 2f64.powf(2.0 * h.exact_frequency(2.0 * r).unwrap());
        prop_assert!((ratio / bound - 1.0).abs() < 1e-10);
    }

    #[test]
    fn frequency_is_scale_covariant_and_homogeneous(d in 2usize..=3, k in 1usize..=8, seed: u64, s in 0.2f64..5.0, c in -10.0f64..10.0) {
        prop_assume!(c.abs() > 1e-3);
        let h = expansion(d, k, false, seed);
        let id = CoefficientField::identity(d);
        let o = vec![0.0; d];
        let n = frequency_numeric(&h, &id, &o, 0.7, None).unwrap();
        let stretched = h.rescaled(s).unwrap();
        let ns = frequency_numeric(&stretched, &id, &o, 0.7 * s, None).unwrap();
        let nc = frequency_numeric(&h.scaled(c), &id, &o, 0.7, None).unwrap();
        prop_assert!((n - ns).abs() < 1e-9 * n.max(1.0));
        prop_assert!((n - nc).abs() < 1e-9 * n.max(1.0));
    }

    #[test]
    fn doubling_index_below_outer_frequency(d in 2usize..=3, k in 1usize..=10, seed: u64, r in 0.1f64..0.8) {
        let h = expansion(d, k, true, seed);
        let o = vec![0.0; d];
        let di = doubling_index(&h, &o, r).unwrap();
        let n_out = h.exact_frequency(2.0 * r).unwrap();
        prop_assert!(di <= n_out + 1e-7);
    }
}

proptest! {
    #![proptest_config(config(10))]

    #[test]
    fn ball_quadrature_matches_closed_form(d in 2usize..=3, k in 0usize..=30, seed: u64, r in 0.2f64..1.5) {
        let h = expansion(d, k, true, seed);
        let q = ball_rule::<f64>(d, 2 * k + 2, 2 * k + 2, r).unwrap();
        let num = q.average(|x| h.value(x).powi(2));
        let exact = h.ball_mean_square(r);
        prop_assert!((num - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn sup_is_at_least_rms_and_grows_with_resolution(d in 2usize..=3, k in 1usize..=8, seed: u64, r in 0.3f64..1.2) {
        let h = expansion(d, k, true, seed);
        let ball = GeodesicBall::new(Manifold::Euclidean { dim: d }, vec![0.0; d], r).unwrap();
        let coarse = ResolutionPolicy { grid_factor: 0.5, refine_tol: 1e-2, ..ResolutionPolicy::default() };
        let fine = ResolutionPolicy { grid_factor: 0.0625, refine_tol: 1e-8, rel_tol: 1e-14, ..ResolutionPolicy::default() };
        let s_coarse = sup_norm(&h, &ball, &coarse).unwrap().sup;
        let s_fine = sup_norm(&h, &ball, &fine).unwrap().sup;
        prop_assert!(s_fine >= s_coarse * (1.0 - 1e-12));
        prop_assert!(s_fine >= h.ball_mean_square(r).sqrt());
        let g = sup_norm(&GradientNorm(&h), &ball, &fine).unwrap().sup;
        prop_assert!(g > 0.0);
    }
}

#[test]
fn numeric_frequency_matches_closed_form_at_high_degree() {
    for (d, seed) in [(2usize, 1u64), (3, 2), (4, 3)] {
        let h = expansion(d, 30, true, seed);
        let id = CoefficientField::identity(d);
        for r in [0.5, 1.0] {
            let n = frequency_numeric(&h, &id, &vec![0.0; d], r, None).unwrap();
            assert!((n - h.exact_frequency(r).unwrap()).abs() < 1e-8, "d={d} r={r}");
        }
    }
}

#[test]
fn zonal_kernel_reproduces() {
    for d in [2usize, 3, 4] {
        let conv = SphericalBasisConvention::new(d).unwrap();
        let q = sphere_rule::<f64>(d, 24).unwrap();
        let mut xi = vec![0.3, -0.5, 0.2, 0.7];
        xi.truncate(d);
        let nrm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        xi.iter_mut().for_each(|v| *v /= nrm);
        for k in [0usize, 1, 4, 9] {
            for m in [0, dim_harmonics(d, k).unwrap() - 1] {
                let y = conv.basis_function::<f64>(k, m).unwrap();
                let avg = q.average(|eta| {
                    let c: f64 = eta.iter().zip(&xi).map(|(a, b)| a * b).sum();
                    y.value(eta) * zonal_kernel(d, k, c).unwrap()
                });
                assert!((avg - y.value(&xi)).abs() < 1e-8, "d={d} k={k} m={m}");
            }
        }
    }
}

#[test]
fn basis_functions_obey_pointwise_bound() {
    // |Y_{k,m}| ≤ sqrt(dim H_k), and dim H_k / k^{d-2} is bounded, so one constant covers k ≤ 30
    for d in [3usize, 4] {
        let conv = SphericalBasisConvention::new(d).unwrap();
        let q = sphere_rule::<f64>(d, 64).unwrap();
        let mut c_fit: f64 = 0.0;
        for k in (1..=30).step_by(if d == 3 { 1 } else { 3 }) {
            let dim = dim_harmonics(d, k).unwrap();
            for m in [0, dim / 2, dim - 1] {
                let y = conv.basis_function::<f64>(k, m).unwrap();
                let mx = (0..q.len()).map(|i| y.value(q.node(i)).abs()).fold(0.0, f64::max);
                assert!(mx <= (dim as f64).sqrt() * (1.0 + 1e-9));
                c_fit = c_fit.max(mx / (k as f64).powf((d as f64 - 2.0) / 2.0));
            }
        }
        let c_theory = if d == 3 { 3f64.sqrt() } else { 2.0 };
        assert!(c_fit <= c_theory * (1.0 + 1e-9), "d={d}: fitted C {c_fit}");
    }
}
