//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

use std::time::Instant;

use blab_core::eigen::{
    check_eigenfunction, dong_doubling, dong_log_q_laplacian_check, lift, lift_harmonicity_residual, random_points, DongState, Eigenfunction,
    SphereEigenfunction, TorusEigenfunction,
};
use blab_core::field::Manifold;
use blab_core::frequency::{ball_mean_square_numeric, default_orders, doubling_index, frequency_numeric, frequency_profile, CoefficientField};
use blab_core::lab::{
    approximate_by_truncation, classical_baselines, log_grid, ols, polynomial_bernstein_lp, random_homogeneous, sweep, Centers, Family, Lp,
    RadiusScale, SweepConfig,
};
use blab_core::sphharm::{dim_harmonics, HarmonicExpansion, Term};
use blab_core::supnorm::ResolutionPolicy;
use blab_core::Expansion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn corpus(n: usize, seed: u64) -> Vec<Expansion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let d = 2 + i % 3;
            let k = rng.random_range(1..=30);
            // sparse draws keep d = 4, k = 30 affordable while still mixing many degrees
            HarmonicExpansion::random(d, k, Some(3), &mut rng).unwrap()
        })
        .collect()
}

fn random_in_ball(rng: &mut ChaCha8Rng, d: usize, r: f64) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-r..r)).collect();
        if y.iter().map(|v| v * v).sum::<f64>() < r * r {
            return y;
        }
    }
}

fn c1_exact_vs_quadrature() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for h in corpus(100, 1) {
        let id = CoefficientField::identity(h.d());
        for r in [0.5, 1.0] {
            let n = frequency_numeric(&h, &id, &vec![0.0; h.d()], r, None).unwrap();
            worst = worst.max((n - h.exact_frequency(r).unwrap()).abs());
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(worst < 1e-8 && secs < 30.0, format!("max |N_quad - N_exact| = {worst:.2e} (< 1e-8), {secs:.1} s (< 30 s)"))
}

fn c2_degree_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in [2usize, 3, 4] {
        for k in 0..=30 {
            let dim = dim_harmonics(d, k).unwrap();
            for m in [0, dim - 1] {
                let h = HarmonicExpansion::<f64>::single(d, k, m, 1.0).unwrap();
                let c = vec![0.0; d];
                let n = frequency_numeric(&h, &CoefficientField::identity(d), &c, 0.8, None).unwrap();
                let di = doubling_index(&h, &c, 0.8).unwrap();
                worst = worst.max((n - k as f64).abs()).max((di - k as f64).abs());
            }
        }
    }
    outcome(worst < 1e-8, format!("max |N - k|, |doubling - k| = {worst:.2e} (< 1e-8), d in 2..4, k <= 30"))
}

fn c3_monotonicity() -> Outcome {
    let mut worst: f64 = 0.0;
    let grid = log_grid(0.05, 2.0, 20);
    for h in corpus(12, 3) {
        let prof = frequency_profile(&h, &CoefficientField::identity(h.d()), &vec![0.0; h.d()], &grid).unwrap();
        worst = worst.max(prof.max_downward_violation);
    }
    outcome(worst <= 1e-7, format!("largest downward step {worst:.2e} (<= 1e-7) over 12 profiles of 20 radii"))
}

fn c4_doubling_bound() -> Outcome {
    let mut excess: f64 = 0.0;
    let mut quad_gap: f64 = 0.0;
    for (i, h) in corpus(100, 4).iter().enumerate() {
        for r in [0.25, 0.5] {
            let ratio = h.ball_mean_square(2.0 * r) / h.ball_mean_square(r);
            let bound = 2f64.powf(2.0 * h.exact_frequency(2.0 * r).unwrap());
            excess = excess.max(ratio / bound - 1.0);
            if i % 10 == 0 {
                // the closed-form means agree with ball quadrature
                let o = default_orders(Some(blab_core::field::BandLimit::Degree(h.max_degree().unwrap())), 2.0 * r).unwrap();
                let c = vec![0.0; h.d()];
                let q = ball_mean_square_numeric(h, &c, 2.0 * r, o).unwrap() / ball_mean_square_numeric(h, &c, r, o).unwrap();
                quad_gap = quad_gap.max((q / ratio - 1.0).abs());
            }
        }
    }
    let mut single_gap: f64 = 0.0;
    for d in [2usize, 3, 4] {
        for k in 0..=30 {
            let h = HarmonicExpansion::<f64>::single(d, k, 0, 1.0).unwrap();
            for r in [0.25, 0.5] {
                let ratio = h.ball_mean_square(2.0 * r) / h.ball_mean_square(r);
                single_gap = single_gap.max((ratio / 2f64.powf(2.0 * h.exact_frequency(2.0 * r).unwrap()) - 1.0).abs());
            }
        }
    }
    outcome(
        excess <= 1e-9 && single_gap < 1e-10 && quad_gap < 1e-8,
        format!("max ratio/bound - 1 = {excess:.2e} (<= 1e-9), single-degree gap {single_gap:.2e} (< 1e-10), quadrature gap {quad_gap:.1e}"),
    )
}

fn c5_baselines() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=50usize {
        let (t, m) = classical_baselines(n).unwrap();
        let nf = n as f64;
        worst = worst.max((t - nf).abs()).max((m - nf * nf).abs());
    }
    outcome(worst < 1e-6, format!("max |trig - N|, |Markov - N^2| = {worst:.2e} (< 1e-6), N <= 50"))
}

fn c6_lp_bernstein() -> Outcome {
    let pol = ResolutionPolicy::default();
    let ns = [5usize, 10, 20, 30];
    let ps = [Lp::L1, Lp::L2, Lp::Inf];
    let mut xs = vec![vec![]; 3];
    let mut ys = vec![vec![]; 3];
    let mut max_c: f64 = 0.0;
    for &n in &ns {
        for s in 0..50u64 {
            let p = random_homogeneous(3, n, 1000 * n as u64 + s).unwrap();
            for (i, lp) in ps.iter().enumerate() {
                let c = polynomial_bernstein_lp(&p, 1.0, *lp, &pol).unwrap().constant;
                max_c = max_c.max(c);
                xs[i].push((n as f64).ln());
                ys[i].push(c.ln());
            }
        }
    }
    let slopes: Vec<f64> = (0..3).map(|i| ols("lp", &xs[i], &ys[i]).unwrap().slope).collect();
    let ok = slopes.iter().all(|s| s.abs() < 0.1) && max_c < 5.0;
    outcome(ok, format!("slopes of log C vs log N [L1, L2, Linf] = [{:.3}, {:.3}, {:.3}] (|.| < 0.1), max C {max_c:.3} (< 5)", slopes[0], slopes[1], slopes[2]))
}

fn c7_truncation() -> Outcome {
    let pol = ResolutionPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let r = 0.3;
    let (mut xs, mut ys) = (vec![], vec![]);
    let mut harm: f64 = 0.0;
    let mut fit: f64 = 0.0;
    let mut sum_harm: f64 = 0.0;
    for n in (10..=40).step_by(5) {
        // a lattice frequency whose lift has frequency about N on the ball
        let m = (n as f64 / (2.0 * r)).floor() as i64;
        let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, m * m, 4, &mut rng).unwrap());
        let lf = lift(&ef).unwrap();
        let x = random_points(&Manifold::torus(2), 1, &mut rng).pop().unwrap();
        let rep = approximate_by_truncation(&lf, &[x[0], x[1], 0.0], r, n, None, &pol).unwrap();
        xs.push(n as f64);
        ys.push(rep.relative_tail.ln());
        fit = fit.max(rep.fit_residual);
        // Blocks are checked one degree at a time: at |y| ~ r the degree blocks of a lifted
        // plane wave peak near e^{|m| r} times the field, so the summed Hessian carries
        // that cancellation while each block's harmonicity does not.
        let pts: Vec<Vec<f64>> = (0..4).map(|_| random_in_ball(&mut rng, 3, r)).collect();
        for k in 0..=rep.head.max_degree().unwrap() {
            let terms: Vec<Term<f64>> = rep.head.terms().iter().filter(|t| t.k == k).copied().collect();
            let block = HarmonicExpansion::new(3, rep.head.r_ref(), terms).unwrap();
            for y in &pts {
                harm = harm.max(block.laplacian_ratio(y).abs());
            }
        }
        sum_harm = pts.iter().fold(sum_harm, |a, y| a.max(rep.head.laplacian_ratio(y).abs()));
    }
    let q = ols("tail", &xs, &ys).unwrap().slope.exp();
    outcome(q < 0.95 && harm < 1e-8, format!("fitted tail base q = {q:.3e} (< 0.95), head harmonicity per degree {harm:.1e} (< 1e-8; summed {sum_harm:.1e}), fit residual {fit:.1e}"))
}

fn eigen_corpus(rng: &mut ChaCha8Rng) -> Vec<Eigenfunction<f64>> {
    let mut out = vec![];
    for lam in [1i64, 5, 25, 50, 100, 169] {
        out.push(Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 4, rng).unwrap()));
    }
    for lam in [3i64, 14] {
        out.push(Eigenfunction::Torus(TorusEigenfunction::random(3, lam, 4, rng).unwrap()));
    }
    for k in [1usize, 4, 9, 15] {
        out.push(Eigenfunction::Sphere(SphereEigenfunction::random(2, k, rng).unwrap()));
    }
    out.push(Eigenfunction::Sphere(SphereEigenfunction::zonal(2, 12).unwrap()));
    out.push(Eigenfunction::Sphere(SphereEigenfunction::random(3, 6, rng).unwrap()));
    out
}

fn c8_eigen_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut res, mut grad): (f64, f64) = (0.0, 0.0);
    let efs = eigen_corpus(&mut rng);
    for ef in &efs {
        let pts = random_points(&ef.base_manifold(), 50, &mut rng);
        let ck = check_eigenfunction(ef, &pts, 1e-4).unwrap();
        res = res.max(ck.max_residual);
        grad = grad.max(ck.max_gradient_error);
    }
    outcome(
        res < 1e-6 && grad < 1e-6,
        format!("{} eigenfunctions: max residual {res:.1e}, max gradient error {grad:.1e} (both < 1e-6)", efs.len()),
    )
}

fn c9_lift() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut harm: f64 = 0.0;
    let (mut xs, mut ys) = (vec![], vec![]);
    let id = CoefficientField::identity(3);
    for lam in [1i64, 4, 9, 25, 49, 100] {
        let mut sum = 0.0;
        let samples = 8;
        for _ in 0..samples {
            let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 4, &mut rng).unwrap());
            let lf = lift(&ef).unwrap();
            let pts: Vec<Vec<f64>> = random_points(&Manifold::torus(2), 10, &mut rng)
                .into_iter()
                .map(|p| vec![p[0], p[1], rng.random_range(-0.5..0.5)])
                .collect();
            harm = harm.max(lift_harmonicity_residual(&lf, &pts, 1e-4).unwrap());
            let c = random_points(&Manifold::torus(2), 1, &mut rng).pop().unwrap();
            sum += frequency_numeric(&lf, &id, &[c[0], c[1], 0.0], 0.5, None).unwrap();
        }
        xs.push((lam as f64).ln());
        ys.push((sum / samples as f64).ln());
    }
    let e = ols("lift", &xs, &ys).unwrap().slope;
    outcome(harm < 1e-6 && (e - 0.5).abs() <= 0.1, format!("lift residual {harm:.1e} (< 1e-6), exponent of mean N_u vs lambda = {e:.3} (0.5 +- 0.1)"))
}

fn c10_dong_log_q() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = f64::INFINITY;
    let mut retained = 0;
    let mut efs = vec![];
    for lam in [1i64, 5, 25, 50, 65, 100] {
        efs.push(Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 3, &mut rng).unwrap()));
    }
    for k in [1usize, 3, 6, 9] {
        efs.push(Eigenfunction::Sphere(SphereEigenfunction::random(2, k, &mut rng).unwrap()));
    }
    for ef in &efs {
        let pts = random_points(&ef.base_manifold(), 200, &mut rng);
        let rep = dong_log_q_laplacian_check(ef, &pts, 1e-3).unwrap();
        retained += rep.retained;
        worst = worst.min(rep.min_margin / rep.lambda);
    }
    outcome(worst >= -1e-3, format!("min (Delta log q + lambda)/lambda = {worst:.2e} (>= -1e-3) over {retained} retained points"))
}

fn c11_dong_growth() -> Outcome {
    let pol = ResolutionPolicy::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut c_fit: f64 = 0.0;
    for lam in [25i64, 100, 400] {
        let s = (lam as f64).sqrt();
        // [2/√λ, 0.3] is empty at λ = 25, where the range starts at 0.3 instead
        let lo = (2.0 / s).min(0.3);
        let radii = if lo < 0.3 { log_grid(lo, 0.3, 6) } else { vec![0.3] };
        for _ in 0..4 {
            let ef = Eigenfunction::Torus(TorusEigenfunction::random(2, lam, 4, &mut rng).unwrap());
            let st = DongState::new(&ef).unwrap();
            let x = random_points(&Manifold::torus(2), 1, &mut rng).pop().unwrap();
            for v in dong_doubling(&st, &x, &radii, &pol).unwrap() {
                c_fit = c_fit.max(v / s);
            }
        }
    }
    outcome(c_fit <= 10.0, format!("fitted C in F(2r) - F(r) <= C sqrt(lambda): {c_fit:.3} (<= 10)"))
}

fn c12_regimes() -> Outcome {
    let torus = SweepConfig {
        manifold: "torus:2".into(),
        family: Family::TorusRandom { modes: 2 },
        levels: vec![25, 100],
        radii: log_grid(0.01, 0.1, 5),
        centers: Centers::Nodal { count: 2 },
        seed: 12,
        ..SweepConfig::default()
    };
    let sphere = SweepConfig {
        manifold: "sphere:2".into(),
        family: Family::SphereZonal,
        levels: vec![5, 10, 20, 40],
        radii: vec![0.25, 0.5, 1.0, 2.0],
        radius_scale: RadiusScale::Wavelength,
        centers: Centers::Nodal { count: 2 },
        seed: 12,
        ..SweepConfig::default()
    };
    let mut ok = true;
    let mut parts = vec![];
    for (name, cfg) in [("T2", torus), ("S2", sphere)] {
        let out = sweep(&cfg).unwrap();
        let slope = out.regressions.iter().find(|r| r.regime == "sub_wavelength").map_or(f64::NAN, |r| r.slope);
        let c = out.max_constants().unwrap();
        let fails = out.failures().len();
        ok &= (slope - 1.0).abs() <= 0.15 && c.c_main <= 10.0 && c.c_2d <= 10.0 && fails == 0;
        parts.push(format!("{name}: slope {slope:.3}, C_main {:.3}, C_2d {:.3}", c.c_main, c.c_2d));
    }
    outcome(ok, format!("{} (slope 1 +- 0.15, C <= 10)", parts.join("; ")))
}

fn c13_determinism() -> Outcome {
    let cfg = SweepConfig { levels: vec![25, 50, 100], radii: log_grid(0.01, 0.3, 5), seed: 13, ..SweepConfig::default() };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sweep(&cfg).unwrap().to_csv().unwrap())
    };
    let (a, b) = (run(1), run(8));
    outcome(a == b, format!("sweep CSV under 1 and 8 threads: {} bytes each, identical = {}", a.len(), a == b))
}

fn main() {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 13] = [
        ("exact-vs-quadrature frequency", c1_exact_vs_quadrature),
        ("degree identity", c2_degree_identity),
        ("frequency monotonicity", c3_monotonicity),
        ("doubling bound", c4_doubling_bound),
        ("classical baselines", c5_baselines),
        ("L^p polynomial Bernstein", c6_lp_bernstein),
        ("truncation tail decay", c7_truncation),
        ("eigen residual and gradient", c8_eigen_checks),
        ("lift harmonicity and frequency scaling", c9_lift),
        ("log q Laplacian lower bound", c10_dong_log_q),
        ("Dong growth", c11_dong_growth),
        ("Bernstein regimes", c12_regimes),
        ("sweep determinism", c13_determinism),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let start = Instant::now();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|o| o != i + 1) {
            continue;
        }
        let t = Instant::now();
        let o = f();
        println!(
            "{} criterion {:>2} {name}: {} [{:.1} s]",
            if o.passed { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            t.elapsed().as_secs_f64()
        );
        failed += usize::from(!o.passed);
    }
    println!("acceptance: {failed} failed, total {:.1} s", start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
