//! Invariant suite run by `blab verify`. Each check is small and seeded, so the suite is
//! deterministic; `quick` shrinks sample counts.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::eigen::{check_eigenfunction, dong_log_q_laplacian_check, lift, lift_harmonicity_residual, random_points, Eigenfunction, SphereEigenfunction, TorusEigenfunction};
use crate::error::Result;
use crate::field::{BandLimit, GeodesicBall, Manifold};
use crate::frequency::{doubling_index, frequency_numeric, frequency_profile, CoefficientField};
use crate::io::{torus_grid, SampledField, TorusInterpolant};
use crate::lab::{classical_baselines, log_grid, polynomial_bernstein_lp, Lp};
use crate::quadrature::sphere_rule;
use crate::sphharm::{dim_harmonics, zonal_kernel, HarmonicExpansion, SphericalBasisConvention};
use crate::supnorm::{sup_norm, ResolutionPolicy};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    /// Worst observed value against its limit, or the error.
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// worst ≤ limit, recorded with both numbers.
fn bounded(module: &'static str, name: &'static str, worst: Result<f64>, limit: f64) -> Check {
    match worst {
        Ok(w) => Check { module, name, passed: w <= limit, detail: format!("{w:.3e} (limit {limit:.1e})") },
        Err(e) => Check { module, name, passed: false, detail: e.to_string() },
    }
}

fn max_of(it: impl IntoIterator<Item = Result<f64>>) -> Result<f64> {
    it.into_iter().try_fold(0.0f64, |a, v| Ok(a.max(v?)))
}

pub fn run_suite(quick: bool) -> VerifyReport {
    let reps = if quick { 4 } else { 20 };
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let policy = ResolutionPolicy::default();
    let mut checks = Vec::new();

    checks.push(bounded(
        "sphharm",
        "basis orthonormality",
        max_of((2..=4).map(|d| SphericalBasisConvention::new(d)?.gram_deviation(if quick { 6 } else { 10 }, 30))),
        1e-12,
    ));
    checks.push(bounded(
        "sphharm",
        "zonal kernel on the diagonal equals dim H_k",
        max_of((2..=5).flat_map(|d| (0..8).map(move |k| (d, k))).map(|(d, k)| {
            let dim = dim_harmonics(d, k)? as f64;
            Ok((zonal_kernel::<f64>(d, k, 1.0)? - dim).abs() / dim)
        })),
        1e-12,
    ));
    let corpus: Vec<HarmonicExpansion<f64>> = (0..reps)
        .map(|i| HarmonicExpansion::random(2 + i % 3, 1 + (i * 7) % 12, None, &mut rng).expect("valid random expansion"))
        .collect();
    checks.push(bounded(
        "sphharm",
        "expansions are harmonic",
        Ok(corpus.iter().map(|p| p.laplacian_ratio(&vec![0.3; p.d()]).abs()).fold(0.0, f64::max)),
        1e-9,
    ));
    checks.push(bounded(
        "quadrature",
        "sphere rule integrates x_0^2 to 1/d",
        max_of((2..=5).map(|d| Ok((sphere_rule::<f64>(d, 8)?.average(|x| x[0] * x[0]) - 1.0 / d as f64).abs()))),
        1e-13,
    ));
    checks.push(bounded(
        "frequency",
        "quadrature frequency matches the closed form",
        max_of(corpus.iter().flat_map(|p| [0.5, 1.0].map(|r| (p, r))).map(|(p, r)| {
            let id = CoefficientField::identity(p.d());
            Ok((frequency_numeric(p, &id, &vec![0.0; p.d()], r, None)? - p.exact_frequency(r)?).abs())
        })),
        1e-8,
    ));
    checks.push(bounded(
        "frequency",
        "degree-k fields have frequency and doubling index k",
        max_of([(2usize, 1usize), (3, 5), (4, 12)].map(|(d, k)| {
            let p = HarmonicExpansion::<f64>::single(d, k, 0, 1.0)?;
            let c = vec![0.0; d];
            let n = frequency_numeric(&p, &CoefficientField::identity(d), &c, 0.7, None)?;
            let di = doubling_index(&p, &c, 0.7)?;
            Ok((n - k as f64).abs().max((di - k as f64).abs()))
        })),
        1e-8,
    ));
    checks.push(bounded(
        "frequency",
        "frequency is nondecreasing in r",
        max_of(corpus.iter().take(reps.min(6)).map(|p| {
            let prof = frequency_profile(p, &CoefficientField::identity(p.d()), &vec![0.0; p.d()], &log_grid(0.05, 2.0, 20))?;
            Ok(prof.max_downward_violation)
        })),
        1e-7,
    ));
    checks.push(bounded(
        "supnorm",
        "sup of sin(3x) on the circle is 1",
        (|| {
            let ef = crate::eigen::make_torus_eigenfunction::<f64>(1, vec![crate::eigen::TorusMode { m: vec![3], cos: 0.0, sin: 1.0 }])?;
            Ok((sup_norm(&ef, &GeodesicBall::whole(Manifold::torus(1))?, &policy)?.sup - 1.0).abs())
        })(),
        1e-9,
    ));

    let mut efs: Vec<Eigenfunction<f64>> = Vec::new();
    for lam in [5i64, 25] {
        if let Ok(t) = TorusEigenfunction::random(2, lam, 3, &mut rng) {
            efs.push(Eigenfunction::Torus(t));
        }
    }
    for k in [2usize, 6] {
        if let Ok(s) = SphereEigenfunction::random(2, k, &mut rng) {
            efs.push(Eigenfunction::Sphere(s));
        }
    }
    let n_pts = if quick { 10 } else { 50 };
    let samples: Vec<Vec<Vec<f64>>> = efs.iter().map(|ef| random_points(&ef.base_manifold(), n_pts, &mut rng)).collect();
    let fd: Vec<Result<crate::eigen::EigenCheck>> =
        efs.iter().zip(&samples).map(|(ef, pts)| check_eigenfunction(ef, pts, 1e-4)).collect();
    checks.push(bounded("eigenfields", "eigen residual", max_of(fd.iter().map(|c| c.as_ref().map(|c| c.max_residual).map_err(clone_err))), 1e-6));
    checks.push(bounded(
        "eigenfields",
        "analytic vs finite-difference gradient",
        max_of(fd.iter().map(|c| c.as_ref().map(|c| c.max_gradient_error).map_err(clone_err))),
        1e-6,
    ));
    checks.push(bounded(
        "eigenfields",
        "lift is harmonic",
        max_of(efs.iter().zip(&samples).map(|(ef, pts)| {
            let lf = lift(ef)?;
            let lifted: Vec<Vec<f64>> = pts.iter().map(|p| p.iter().copied().chain([0.1]).collect()).collect();
            lift_harmonicity_residual(&lf, &lifted, 1e-4)
        })),
        1e-6,
    ));
    checks.push(bounded(
        "eigenfields",
        "log q Laplacian stays above its bound",
        max_of(efs.iter().zip(&samples).map(|(ef, pts)| {
            let rep = dong_log_q_laplacian_check(ef, pts, 1e-3)?;
            Ok((-rep.min_margin / rep.lambda).max(0.0))
        })),
        1e-3,
    ));

    checks.push(bounded(
        "bernstein_lab",
        "trig and Markov baselines",
        max_of([1usize, 3, 7].map(|n| {
            let (t, m) = classical_baselines(n)?;
            let nf = n as f64;
            Ok((t - nf).abs().max((m - nf * nf).abs() / nf))
        })),
        1e-6,
    ));
    checks.push(bounded(
        "bernstein_lab",
        "L-infinity polynomial constant is at most 5",
        max_of(corpus.iter().take(3).map(|p| Ok(polynomial_bernstein_lp(p, 1.0, Lp::Inf, &policy)?.constant))),
        5.0,
    ));

    checks.push(bounded(
        "io_cli",
        "sampled torus field round-trips through CSV",
        (|| {
            let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, 5, 2, &mut rng)?);
            let s = SampledField::sample(&ef, torus_grid(2, 16), false, "verify")?;
            let back = SampledField::from_csv(&s.to_csv())?;
            let it = TorusInterpolant::new(&back)?;
            let x = [0.4, 2.9];
            Ok((crate::field::Field::value(&it, &x) - crate::field::Field::value(&ef, &x)).abs())
        })(),
        1e-10,
    ));
    checks.push(bounded(
        "io_cli",
        "declared band limits parse",
        crate::io::parse_band("wavenumber:2.5").map(|b| if b == BandLimit::Wavenumber(2.5) { 0.0 } else { 1.0 }),
        0.0,
    ));
    VerifyReport { checks }
}

fn clone_err(e: &crate::error::Error) -> crate::error::Error {
    crate::error::Error::InvalidArgument(e.to_string())
}

#[cfg(test)]
mod tests {
    #[test]
    fn quick_suite_passes() {
        let rep = super::run_suite(true);
        for c in &rep.checks {
            assert!(c.passed, "{} / {}: {}", c.module, c.name, c.detail);
        }
    }
}
